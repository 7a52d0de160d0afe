//! One-way cooperative link: geometric delay, unit gain, complex AWGN.
//!
//! The primary's repeater is ideal. Frequency translation, gain and
//! transmit/receive isolation all collapse into the single one-way SNR.

use num_complex::Complex;

use crate::dsp::{fft, ifft, signed_bin};
use crate::error::invalid;
use crate::real::{db_to_linear, linear_to_db};
use crate::rng::stream_rng;
use crate::waveform::SampledSignal;
use crate::{Real, Result};

/// Primary/secondary geometry and the displacement history of the secondary.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry<T> {
    /// Sync-path separation `d_IN`, m.
    pub d_in: T,
    /// Beamforming baseline `d_T`, m.
    pub d_t: T,
    /// Steering angle, degrees.
    pub theta_deg: T,
    /// When set, every displacement must move both paths equally.
    pub co_moving: bool,
    history: Vec<(T, T)>,
}

impl<T: Real> NodeGeometry<T> {
    pub fn new(d_in: T, d_t: T, theta_deg: T, co_moving: bool) -> Result<Self> {
        if !(d_in >= T::zero()) || !(d_t >= T::zero()) {
            return Err(invalid("d_in", "separations must be non-negative"));
        }
        Ok(Self {
            d_in,
            d_t,
            theta_deg,
            co_moving,
            history: Vec::new(),
        })
    }

    /// Moves the secondary by `(Δd_IN, Δd_T)`.
    pub fn displace(&mut self, dd_in: T, dd_t: T) -> Result<()> {
        if self.co_moving && dd_in != dd_t {
            return Err(invalid("dd_t", "co-moving geometry requires Δd_IN = Δd_T"));
        }
        let (d_in, d_t) = (self.d_in + dd_in, self.d_t + dd_t);
        if d_in < T::zero() || d_t < T::zero() {
            return Err(invalid(
                "dd_in",
                "displacement would make a separation negative",
            ));
        }
        self.d_in = d_in;
        self.d_t = d_t;
        self.history.push((dd_in, dd_t));
        Ok(())
    }

    pub fn history(&self) -> &[(T, T)] {
        &self.history
    }

    /// Accumulated `(Δd_IN, Δd_T)` since construction.
    pub fn total_displacement(&self) -> (T, T) {
        self.history
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), (x, y)| (a + *x, b + *y))
    }
}

/// Ranging SNR bookkeeping.
///
/// `snr_db` is the pre-processing SNR referenced to the noise bandwidth
/// `noise_bw`; matched filtering adds the time-bandwidth product
/// `N * T * BW_n` as processing gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget<T> {
    pub snr_db: T,
    pub noise_bw: T,
    pub pulse_time: T,
    pub pulse_count: usize,
}

impl<T: Real> LinkBudget<T> {
    /// 30 dB over a 12.5 MHz noise bandwidth, one 0.5 ms pulse.
    pub fn nominal() -> Self {
        Self {
            snr_db: T::lit(30.0),
            noise_bw: T::lit(12.5e6),
            pulse_time: T::lit(0.5e-3),
            pulse_count: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(invalid("snr_db", "must be finite"));
        }
        if !(self.noise_bw > T::zero()) || !(self.pulse_time > T::zero()) || self.pulse_count == 0 {
            return Err(invalid(
                "noise_bw",
                "noise bandwidth, pulse time and count must be positive",
            ));
        }
        Ok(())
    }

    pub fn processing_gain(&self) -> T {
        T::from_usize(self.pulse_count).unwrap() * self.pulse_time * self.noise_bw
    }

    pub fn processing_gain_db(&self) -> T {
        linear_to_db(self.processing_gain())
    }

    pub fn snr_linear(&self) -> T {
        db_to_linear(self.snr_db)
    }

    /// Post-processing SNR; this is the `E/N0` that enters the delay bound.
    pub fn post_snr_linear(&self) -> T {
        self.snr_linear() * self.processing_gain()
    }

    pub fn post_snr_db(&self) -> T {
        linear_to_db(self.post_snr_linear())
    }

    /// Per-sample SNR of a complex channel sampled at `sample_rate` that
    /// yields [`post_snr_linear`](Self::post_snr_linear) at the matched
    /// filter output. Complex sampling at `fs` spreads the noise over `fs`
    /// rather than `BW_n`, so this is `snr_db + 10 log10(BW_n / fs)`.
    pub fn channel_snr_db(&self, sample_rate: T) -> T {
        self.snr_db + linear_to_db(self.noise_bw / sample_rate)
    }
}

/// Round-trip propagation time of the repeater path, `2 d_IN / c`.
/// Repeater turnaround is zero; any fixed latency is absorbed by calibration.
pub fn round_trip_delay<T: Real>(d_in: T) -> T {
    T::two() * d_in / T::speed_of_light()
}

/// Delays `sig` by `delay_samples` (any sign). The integer part is an exact
/// circular rotation; the fractional remainder is a linear phase applied in
/// the frequency domain. The result is the band-limited periodic shift.
pub fn delay_signal<T: Real>(sig: &SampledSignal<T>, delay_samples: T) -> SampledSignal<T> {
    let n = sig.len();
    let whole = delay_samples.floor();
    let frac = (delay_samples - whole).as_f64();
    let shift = whole.as_f64().rem_euclid(n as f64) as usize;

    let mut out = sig.samples().to_vec();
    out.rotate_right(shift);
    if frac != 0.0 {
        fft(&mut out);
        for (k, x) in out.iter_mut().enumerate() {
            let phase = -std::f64::consts::TAU * signed_bin(k, n) as f64 * frac / n as f64;
            let (s, c) = phase.sin_cos();
            *x = *x * Complex::new(T::lit(c), T::lit(s));
        }
        ifft(&mut out);
    }
    sig.with_samples(out)
}

/// Adds circularly-symmetric complex Gaussian noise so that the active-pulse
/// power of `sig` over the noise power equals `10^(snr_db/10)`. Infinite
/// `snr_db` adds nothing. Measure the power on the undelayed pulse: a
/// fractional delay spreads ringing over the idle samples.
pub fn add_awgn<T: Real>(sig: &SampledSignal<T>, snr_db: T, seed: u64) -> SampledSignal<T> {
    if snr_db.is_infinite() && snr_db > T::zero() {
        return sig.clone();
    }
    add_noise(sig, sig.active_power() / db_to_linear(snr_db), seed)
}

/// Adds complex Gaussian noise of total variance `noise_power` per sample.
pub fn add_noise<T: Real>(sig: &SampledSignal<T>, noise_power: T, seed: u64) -> SampledSignal<T> {
    if noise_power == T::zero() {
        return sig.clone();
    }
    let sd = (noise_power / T::two()).sqrt();
    let mut rng = stream_rng(seed, 0);
    let samples = sig
        .samples()
        .iter()
        .map(|x| {
            let re = T::standard_normal(&mut rng);
            let im = T::standard_normal(&mut rng);
            *x + Complex::new(re, im) * sd
        })
        .collect();
    sig.with_samples(samples)
}

/// Delays `sig` by `distance / c`, keeps unit gain and adds AWGN at
/// `snr_db` (pass `T::infinity()` to disable noise). Deterministic in
/// `seed`.
pub fn propagate<T: Real>(
    sig: &SampledSignal<T>,
    distance: T,
    snr_db: T,
    seed: u64,
) -> Result<SampledSignal<T>> {
    if !(distance >= T::zero()) || !distance.is_finite() {
        return Err(invalid("distance", "must be non-negative and finite"));
    }
    let delay = distance / T::speed_of_light() * sig.sample_rate();
    let delayed = if distance == T::zero() {
        sig.clone()
    } else {
        delay_signal(sig, delay)
    };
    if snr_db.is_infinite() && snr_db > T::zero() {
        return Ok(delayed);
    }
    Ok(add_noise(
        &delayed,
        sig.active_power() / db_to_linear(snr_db),
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::SPEED_OF_LIGHT;
    use crate::waveform::{generate_ttsfw, TtsfwParams};
    use proptest::prelude::*;

    fn short_pulse() -> SampledSignal<f64> {
        generate_ttsfw(&TtsfwParams::new(0.5e6, 4e6, 1, 20e-6, 0.5, 25e6).unwrap()).unwrap()
    }

    #[test]
    fn zero_distance_noiseless_is_identity() {
        let s = short_pulse();
        let out = propagate(&s, 0.0, f64::INFINITY, 1).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn four_sample_distance_shifts_exactly() {
        let s = short_pulse();
        let d = SPEED_OF_LIGHT * 4.0 / 25e6;
        let out = propagate(&s, d, f64::INFINITY, 1).unwrap();
        let expect: Vec<_> = {
            let mut v = s.samples().to_vec();
            v.rotate_right(4);
            v
        };
        let err = out
            .samples()
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        // d/c*fs is 4 up to one ulp, so the fractional part may be ~1e-15
        assert!(err < 1e-9, "max err {err}");
    }

    #[test]
    fn negative_distance_rejected() {
        assert!(propagate(&short_pulse(), -1.0, 30.0, 1).is_err());
    }

    #[test]
    fn round_trip_delay_values() {
        assert_eq!(round_trip_delay(0.0), 0.0);
        assert!((round_trip_delay(1.5_f64) - 1.000_692_285_594_456_5e-8).abs() < 1e-20);
        assert_eq!(round_trip_delay(SPEED_OF_LIGHT / 2.0), 1.0);
    }

    #[test]
    fn nominal_budget_numbers() {
        let b = LinkBudget::<f64>::nominal();
        assert!((b.processing_gain() - 6250.0).abs() < 1e-9);
        assert!((b.processing_gain_db() - 37.96).abs() < 0.01);
        assert!((b.post_snr_db() - 67.96).abs() < 0.01);
        assert!((b.channel_snr_db(25e6) - (30.0 - 3.0103)).abs() < 1e-3);
    }

    #[test]
    fn seeds_control_noise() {
        let s = short_pulse();
        let a = propagate(&s, 3.0, 20.0, 5).unwrap();
        let b = propagate(&s, 3.0, 20.0, 5).unwrap();
        let c = propagate(&s, 3.0, 20.0, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_level_ignores_delay_ringing() {
        let s =
            generate_ttsfw(&TtsfwParams::new(0.5e6, 4e6, 1, 400e-6, 0.5, 25e6).unwrap()).unwrap();
        let clean = propagate(&s, 0.7 * SPEED_OF_LIGHT / 25e6, f64::INFINITY, 0).unwrap();
        let noisy = propagate(&s, 0.7 * SPEED_OF_LIGHT / 25e6, 10.0, 3).unwrap();
        let n = s.len() as f64;
        let measured = noisy
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n;
        // pulse power is 2, so 10 dB gives 0.2; 10 000 samples
        assert!((measured - 0.2).abs() < 0.01, "{measured}");
    }

    #[test]
    fn co_moving_geometry_enforced() {
        let mut g = NodeGeometry::<f64>::new(1.5, 1.0, 90.0, true).unwrap();
        g.displace(0.02, 0.02).unwrap();
        assert!(g.displace(0.02, 0.01).is_err());
        g.displace(0.02, 0.02).unwrap();
        let (a, b) = g.total_displacement();
        assert!((a - 0.04).abs() < 1e-15 && (b - 0.04).abs() < 1e-15);
        assert!((g.d_in - 1.54).abs() < 1e-12);
        assert!(NodeGeometry::new(-1.0, 1.0, 0.0, false).is_err());
    }

    proptest! {
        #[test]
        fn fractional_delay_inverts(delay in -20.0f64..20.0) {
            let s = short_pulse();
            let back = delay_signal(&delay_signal(&s, delay), -delay);
            let num: f64 = back.samples().iter().zip(s.samples()).map(|(a, b)| (a - b).norm_sqr()).sum();
            let rel = (num / s.energy()).sqrt();
            prop_assert!(rel < 1e-10, "relative rms {}", rel);
        }
    }
}
