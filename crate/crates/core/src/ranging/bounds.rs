//! Cramér-Rao accuracy budget for TTSFW ranging.

use crate::channel::LinkBudget;
use crate::dsp::{fft, signed_bin};
use crate::error::invalid;
use crate::waveform::{generate_ttsfw, TtsfwParams};
use crate::{Real, Result};

/// Delay and range bound for one waveform/budget pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbReport<T> {
    /// Second spectral moment `ζ_f²`, (rad/s)².
    pub zeta_f_sq: T,
    pub sigma_tau: T,
    pub sigma_x: T,
    /// `E/N0` after processing gain.
    pub e_n0_linear: T,
}

impl<T: Real> CrlbReport<T> {
    pub fn sigma_tau_sq(&self) -> T {
        self.sigma_tau * self.sigma_tau
    }
}

/// Closed-form second moment of the TTSFW spectrum:
///
/// `ζ_f² = π² (BW / (2 - 1/N))² + (2π BW)² / (N (4N² + 4N + 1)) · Σ_{n<N} n²`.
pub fn second_moment<T: Real>(params: &TtsfwParams<T>) -> T {
    let n = T::from_usize(params.n_pulses).unwrap();
    let pi = T::PI();
    let first = pi * pi * (params.bw / (T::two() - T::one() / n)).powi(2);
    let sum_sq = (0..params.n_pulses).fold(T::zero(), |acc, k| acc + T::from_usize(k * k).unwrap());
    let denom = n * (T::lit(4.0) * n * n + T::lit(4.0) * n + T::one());
    first + (T::two() * pi * params.bw).powi(2) / denom * sum_sq
}

/// Spectral centroid (Hz) and second central moment `(2π)² E[(f - μ)²]`
/// of the generated waveform, from a zero-padded FFT. Frequencies are taken
/// on the sampling period centred on the tone-set midpoint.
pub fn spectral_moments<T: Real>(params: &TtsfwParams<T>) -> Result<(f64, f64)> {
    let sig = generate_ttsfw(params)?;
    let n = sig.len().next_power_of_two() * 8;
    let mut x: Vec<_> = sig
        .samples()
        .iter()
        .map(|z| num_complex::Complex::new(z.re.as_f64(), z.im.as_f64()))
        .collect();
    x.resize(n, num_complex::Complex::new(0.0, 0.0));
    fft(&mut x);
    let fs = params.sample_rate.as_f64();
    let centre = params.center_frequency().as_f64();
    let freq = |k: usize| {
        let f = signed_bin(k, n) as f64 * fs / n as f64;
        f - ((f - centre + fs / 2.0) / fs).floor() * fs
    };
    let (mut w, mut m1) = (0.0, 0.0);
    for (k, z) in x.iter().enumerate() {
        let p = z.norm_sqr();
        w += p;
        m1 += p * freq(k);
    }
    let mean = m1 / w;
    let var = x
        .iter()
        .enumerate()
        .map(|(k, z)| z.norm_sqr() * (freq(k) - mean).powi(2))
        .sum::<f64>()
        / w;
    Ok((mean, (std::f64::consts::TAU).powi(2) * var))
}

/// Delay and two-way range bounds with the mean frequency taken as zero
/// (the TTSFW spectrum is symmetric about its centre):
///
/// `σ_τ² = 1 / (2 (E/N0) ζ_f²)`, `σ_x² = c² / (8 (E/N0) ζ_f²)`,
/// with `E/N0` the post-processing SNR of `budget`.
pub fn crlb<T: Real>(params: &TtsfwParams<T>, budget: &LinkBudget<T>) -> Result<CrlbReport<T>> {
    params.validate()?;
    budget.validate()?;
    let e_n0 = budget.post_snr_linear();
    if !(e_n0 > T::zero()) || !e_n0.is_finite() {
        return Err(invalid("snr_db", "post-processing SNR must be positive"));
    }
    let zeta = second_moment(params);
    let sigma_tau = (T::one() / (T::two() * e_n0 * zeta)).sqrt();
    let c = T::speed_of_light();
    let sigma_x = (c * c / (T::lit(8.0) * e_n0 * zeta)).sqrt();
    Ok(CrlbReport {
        zeta_f_sq: zeta,
        sigma_tau,
        sigma_x,
        e_n0_linear: e_n0,
    })
}

/// Highest carrier that keeps `P(Gc >= 0.9) >= 90 %` for range deviation
/// `sigma_x`: `f_c = 0.03 c / σ_x`.
pub fn max_coherent_frequency<T: Real>(sigma_x: T) -> Result<T> {
    if !(sigma_x > T::zero()) {
        return Err(invalid("sigma_x", "must be positive"));
    }
    Ok(T::lit(0.03) * T::speed_of_light() / sigma_x)
}
