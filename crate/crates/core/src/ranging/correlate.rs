//! Matched filtering of a received sequence against a reference waveform.

use num_complex::Complex;

use crate::dsp::{cis, ifft, padded_spectrum, signed_bin};
use crate::waveform::SampledSignal;
use crate::{Error, Real, Result};

/// Above this output length the correlation is computed with FFTs.
pub const DIRECT_LIMIT: usize = 4096;

/// Linear cross-correlation `c[l] = Σ_n rx[n + l] · conj(ref[n])` for lags
/// `-(len(ref) - 1) ..= len(rx) - 1`, plus the circular cross-spectrum used
/// to evaluate the correlation at fractional lags.
#[derive(Debug, Clone)]
pub struct Correlation<T> {
    sample_rate: T,
    first_lag: isize,
    values: Vec<Complex<T>>,
    /// `RX[k] · conj(REF[k]) / P` over a common length `P`.
    cross_spectrum: Vec<Complex<f64>>,
}

impl<T: Real> Correlation<T> {
    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn first_lag(&self) -> isize {
        self.first_lag
    }

    pub fn last_lag(&self) -> isize {
        self.first_lag + self.values.len() as isize - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn value(&self, lag: isize) -> Option<Complex<T>> {
        let i = lag - self.first_lag;
        if i < 0 {
            None
        } else {
            self.values.get(i as usize).copied()
        }
    }

    pub fn magnitude(&self, lag: isize) -> Option<T> {
        self.value(lag).map(|v| v.norm())
    }

    /// `(lag, |c[lag]|)` pairs in lag order.
    pub fn magnitudes(&self) -> Vec<(isize, T)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.first_lag + i as isize, v.norm()))
            .collect()
    }

    /// Band-limited correlation at fractional lag `lag` (samples).
    ///
    /// This is the periodic interpolant of the circular cross-correlation at
    /// the common transform length; it coincides with the linear correlation
    /// at integer lags whenever the sequences carry enough trailing zeros,
    /// and is exact for signals delayed with a frequency-domain linear phase.
    pub fn interpolate(&self, lag: f64) -> Complex<f64> {
        let p = self.cross_spectrum.len();
        let step = std::f64::consts::TAU * lag / p as f64;
        let w = cis::<f64>(step);
        let mut acc = Complex::new(0.0, 0.0);
        let mut rot = Complex::new(1.0, 0.0);
        let mut last = isize::MIN;
        for (k, x) in self.cross_spectrum.iter().enumerate() {
            let m = signed_bin(k, p);
            if k % 64 == 0 || m != last + 1 {
                rot = cis(step * m as f64);
            } else {
                rot *= w;
            }
            last = m;
            acc += x * rot;
        }
        acc
    }

    pub fn interpolate_magnitude(&self, lag: f64) -> f64 {
        self.interpolate(lag).norm()
    }
}

/// Reusable matched filter for a fixed reference waveform.
#[derive(Debug, Clone)]
pub struct MatchedFilter<T> {
    reference: SampledSignal<T>,
}

impl<T: Real> MatchedFilter<T> {
    pub fn new(reference: SampledSignal<T>) -> Self {
        Self { reference }
    }

    pub fn reference(&self) -> &SampledSignal<T> {
        &self.reference
    }

    pub fn apply(&self, rx: &SampledSignal<T>) -> Result<Correlation<T>> {
        let (fa, fb) = (
            rx.sample_rate().as_f64(),
            self.reference.sample_rate().as_f64(),
        );
        if (fa - fb).abs() > 1e-12 * fa.abs().max(fb.abs()) {
            return Err(Error::SampleRateMismatch {
                left: fa,
                right: fb,
            });
        }
        let x = rx.samples();
        let r = self.reference.samples();
        let out_len = x.len() + r.len() - 1;
        let values = if out_len <= DIRECT_LIMIT {
            direct_correlation(x, r)
        } else {
            fft_correlation(x, r)
        };

        let p = x.len().max(r.len());
        let to64 = |v: &[Complex<T>]| -> Vec<Complex<f64>> {
            v.iter()
                .map(|c| Complex::new(c.re.as_f64(), c.im.as_f64()))
                .collect()
        };
        let xs = padded_spectrum(&to64(x), p);
        let rs = padded_spectrum(&to64(r), p);
        let scale = 1.0 / p as f64;
        let cross_spectrum = xs
            .iter()
            .zip(&rs)
            .map(|(a, b)| a * b.conj() * scale)
            .collect();

        Ok(Correlation {
            sample_rate: rx.sample_rate(),
            first_lag: -(r.len() as isize - 1),
            values,
            cross_spectrum,
        })
    }
}

/// Cross-correlates `rx` against `reference` (see [`Correlation`]).
pub fn matched_filter<T: Real>(
    rx: &SampledSignal<T>,
    reference: &SampledSignal<T>,
) -> Result<Correlation<T>> {
    MatchedFilter::new(reference.clone()).apply(rx)
}

pub(crate) fn direct_correlation<T: Real>(x: &[Complex<T>], r: &[Complex<T>]) -> Vec<Complex<T>> {
    let first = -(r.len() as isize - 1);
    (0..x.len() + r.len() - 1)
        .map(|i| {
            let lag = first + i as isize;
            // n ranges where both x[n + lag] and r[n] exist
            let n0 = (-lag).max(0) as usize;
            let n1 = (x.len() as isize - lag).min(r.len() as isize).max(0) as usize;
            (n0..n1).fold(Complex::new(T::zero(), T::zero()), |acc, n| {
                acc + x[(n as isize + lag) as usize] * r[n].conj()
            })
        })
        .collect()
}

fn fft_correlation<T: Real>(x: &[Complex<T>], r: &[Complex<T>]) -> Vec<Complex<T>> {
    let out_len = x.len() + r.len() - 1;
    let m = out_len.next_power_of_two();
    let xs = padded_spectrum(x, m);
    let rs = padded_spectrum(r, m);
    let mut c: Vec<Complex<T>> = xs.iter().zip(&rs).map(|(a, b)| a * b.conj()).collect();
    ifft(&mut c);
    // negative lags wrap to the top of the buffer
    let neg = r.len() - 1;
    let mut out = Vec::with_capacity(out_len);
    out.extend_from_slice(&c[m - neg..]);
    out.extend_from_slice(&c[..x.len()]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::delay_signal;
    use crate::waveform::{generate_ttsfw, TtsfwParams};
    use proptest::prelude::*;

    fn pulse(pri: f64) -> SampledSignal<f64> {
        generate_ttsfw(&TtsfwParams::new(0.5e6, 4e6, 1, pri, 0.5, 25e6).unwrap()).unwrap()
    }

    fn argmax(c: &Correlation<f64>) -> isize {
        c.magnitudes()
            .into_iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn output_length_and_zero_lag_peak() {
        let s = pulse(40e-6);
        let c = matched_filter(&s, &s).unwrap();
        assert_eq!(c.len(), 2 * s.len() - 1);
        assert_eq!(c.first_lag(), -(s.len() as isize - 1));
        assert_eq!(argmax(&c), 0);
        assert!((c.magnitude(0).unwrap() - s.energy()).abs() < 1e-9);
    }

    #[test]
    fn four_sample_delay_peaks_at_four() {
        let s = pulse(40e-6);
        let rx = delay_signal(&s, 4.0);
        assert_eq!(argmax(&matched_filter(&rx, &s).unwrap()), 4);
    }

    #[test]
    fn sample_rate_mismatch_rejected() {
        let s = pulse(40e-6);
        let other = SampledSignal::new(s.samples().to_vec(), 20e6).unwrap();
        assert!(matches!(
            matched_filter(&other, &s),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let s = pulse(200e-6); // 5000 samples: FFT path
        let rx = delay_signal(&s, 7.3);
        let c = matched_filter(&rx, &s).unwrap();
        let direct = direct_correlation(rx.samples(), s.samples());
        let scale = direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = c
            .values()
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err / scale < 1e-9, "relative error {}", err / scale);
    }

    #[test]
    fn interpolant_matches_integer_lags() {
        let s = pulse(40e-6);
        let rx = delay_signal(&s, 2.4);
        let c = matched_filter(&rx, &s).unwrap();
        // no circular wrap for non-negative lags here
        for lag in 0..20 {
            let a = c.value(lag).unwrap();
            let b = c.interpolate(lag as f64);
            assert!(
                (a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9,
                "lag {lag}"
            );
        }
    }

    proptest! {
        #[test]
        fn unequal_lengths_match_direct(n in 3usize..60, m in 1usize..40, seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = crate::rng::stream_rng(seed, 0);
            let mut gen = |k: usize| -> Vec<Complex<f64>> {
                (0..k).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
            };
            let x = gen(n);
            let r = gen(m);
            let a = direct_correlation(&x, &r);
            let b = fft_correlation(&x, &r);
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).norm() < 1e-9);
            }
        }
    }
}
