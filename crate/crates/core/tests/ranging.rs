use coherent_swarm::channel::LinkBudget;
use coherent_swarm::dsp::fft;
use coherent_swarm::ranging::{
    crlb, max_coherent_frequency, run_ensemble, second_moment, PeakMethod,
};
use coherent_swarm::waveform::{generate_ttsfw, TtsfwParams};

/// Centroid and second central moment `(2π)² Σ (f - μ)² |X(f)|² / Σ |X(f)|²`
/// of the sampled waveform's power spectrum. The spectrum of a sampled
/// signal is periodic; frequencies are taken on the period centred on the
/// tone-set midpoint.
fn spectral_moments(params: &TtsfwParams<f64>) -> (f64, f64) {
    let sig = generate_ttsfw(params).unwrap();
    let n = sig.len().next_power_of_two() * 16;
    let mut x = sig.samples().to_vec();
    x.resize(n, Default::default());
    fft(&mut x);
    let fs = params.sample_rate;
    let centre = params.center_frequency();
    let freq = |k: usize| {
        let f = k as f64 * fs / n as f64;
        f - ((f - centre + fs / 2.0) / fs).floor() * fs
    };
    let p: Vec<f64> = x.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = p.iter().sum();
    let mean: f64 = p.iter().enumerate().map(|(k, w)| freq(k) * w).sum::<f64>() / total;
    let var: f64 = p
        .iter()
        .enumerate()
        .map(|(k, w)| (freq(k) - mean).powi(2) * w)
        .sum::<f64>()
        / total;
    (mean, (2.0 * std::f64::consts::PI).powi(2) * var)
}

#[test]
fn closed_form_moment_matches_spectrum() {
    let params = TtsfwParams::<f64>::nominal();
    let closed = second_moment(&params);
    assert!((closed - 1.5791e14).abs() / 1.5791e14 < 1e-4);
    let (mean, numeric) = spectral_moments(&params);
    assert!(
        (numeric - closed).abs() / closed < 0.01,
        "{numeric} vs {closed}"
    );
    assert!((mean - params.center_frequency()).abs() < 1e-6 * params.bw);
}

#[test]
fn spectrum_is_centred_on_tone_midpoint() {
    for (f1, bw, n) in [
        (0.5e6, 4e6, 1),
        (1e6, 2e6, 1),
        (0.2e6, 3e6, 2),
        (0.5e6, 4e6, 3),
    ] {
        let params = TtsfwParams::new(f1, bw, n, 0.2e-3, 0.5, 25e6).unwrap();
        let (mean, _) = spectral_moments(&params);
        println!(
            "N={n} offset {:.3e} BW",
            (mean - params.center_frequency()) / bw
        );
        assert!(
            (mean - params.center_frequency()).abs() < 1e-6 * bw,
            "N={n}: {mean}"
        );
    }
}

#[test]
fn bound_chain() {
    let budget = LinkBudget::<f64>::nominal();
    assert!((budget.processing_gain() - 6250.0).abs() < 1e-9);
    assert!((budget.processing_gain_db() - 37.96).abs() < 0.01);
    let b = crlb(&TtsfwParams::nominal(), &budget).unwrap();
    assert!((b.sigma_tau_sq() - 5.066e-22).abs() / 5.066e-22 < 0.005);
    assert!((b.sigma_x - 3.4e-3).abs() < 1e-4);
    let f = max_coherent_frequency(6e-3_f64).unwrap();
    assert!((f - 1.5e9).abs() < 0.01e9);
}

#[test]
fn ensemble_is_near_the_bound() {
    let params = TtsfwParams::<f64>::nominal();
    let budget = LinkBudget::nominal();
    let stats = run_ensemble(&params, &budget, 1.5, 1000, 2024, PeakMethod::default()).unwrap();
    println!(
        "sigma {:.4} mm, crlb {:.4} mm, ratio {:.4}, bias {:.4} mm, failures {}",
        stats.std_dev * 1e3,
        stats.crlb.sigma_x * 1e3,
        stats.efficiency_ratio(),
        stats.bias * 1e3,
        stats.failures
    );
    assert_eq!(stats.failures, 0);
    assert!(stats.bias.abs() < 0.34e-3);
    // an efficient estimator sits at the bound; allow sampling scatter of a
    // 1000-trial standard deviation below it
    let ratio = stats.efficiency_ratio();
    assert!((0.93..3.0).contains(&ratio), "{ratio}");
}

#[test]
fn ensemble_is_reproducible() {
    let params = TtsfwParams::<f64>::nominal();
    let budget = LinkBudget::nominal();
    let a = run_ensemble(&params, &budget, 2.0, 16, 5, PeakMethod::default()).unwrap();
    let b = run_ensemble(&params, &budget, 2.0, 16, 5, PeakMethod::default()).unwrap();
    assert_eq!(a.estimates, b.estimates);
}
