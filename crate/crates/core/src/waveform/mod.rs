//! Sampled complex-baseband signals and the two waveform generators: the
//! two-tone stepped-frequency ranging waveform and the continuous two-tone
//! frequency-synchronization signal.

mod export;

pub use export::{read_binary, read_csv, write_binary, write_csv, BINARY_MAGIC, BINARY_VERSION};

use num_complex::Complex;

use crate::dsp::cis;
use crate::error::invalid;
use crate::{Error, Real, Result};

/// Tolerance used when turning `time * sample_rate` products into sample
/// indices, so 1 ms at 25 MHz lands on 25 000 and not 24 999.
const INDEX_EPS: f64 = 1e-9;

/// Uniformly sampled complex baseband sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T> {
    samples: Vec<Complex<T>>,
    sample_rate: T,
    t0: T,
}

impl<T: Real> SampledSignal<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: T) -> Result<Self> {
        Self::with_start(samples, sample_rate, T::zero())
    }

    pub fn with_start(samples: Vec<Complex<T>>, sample_rate: T, t0: T) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        if !(sample_rate > T::zero()) || !sample_rate.is_finite() {
            return Err(invalid("sample_rate", "must be positive and finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; construction rejects empty sequences.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> T {
        T::from_usize(self.len()).unwrap() / self.sample_rate
    }

    pub fn time_of(&self, index: usize) -> T {
        self.t0 + T::from_usize(index).unwrap() / self.sample_rate
    }

    /// Sum of `|x|^2`.
    pub fn energy(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |acc, x| acc + x.norm_sqr())
    }

    /// Mean power over samples that are not exactly zero (the active pulse).
    pub fn active_power(&self) -> T {
        let (sum, n) = self
            .samples
            .iter()
            .map(|x| x.norm_sqr())
            .filter(|p| *p > T::zero())
            .fold((T::zero(), 0usize), |(s, n), p| (s + p, n + 1));
        if n == 0 {
            T::zero()
        } else {
            sum / T::from_usize(n).unwrap()
        }
    }

    /// Copy with the same timing and new samples; lengths must match.
    pub(crate) fn with_samples(&self, samples: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }
}

/// Parameters of the two-tone stepped-frequency waveform (TTSFW).
///
/// Pulse `n` of `N` carries the tones `f1 + n*step` and `f2 + n*step` where
/// `step = bw / (2N - 1)`, `spacing = N * step` and `f2 = f1 + spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtsfwParams<T> {
    pub f1: T,
    pub bw: T,
    pub n_pulses: usize,
    /// Pulse repetition interval `T_r`, s.
    pub pri: T,
    /// Active fraction of each interval, in `(0, 1]`.
    pub duty: T,
    pub sample_rate: T,
}

impl<T: Real> TtsfwParams<T> {
    pub fn new(f1: T, bw: T, n_pulses: usize, pri: T, duty: T, sample_rate: T) -> Result<Self> {
        let p = Self {
            f1,
            bw,
            n_pulses,
            pri,
            duty,
            sample_rate,
        };
        p.validate()?;
        Ok(p)
    }

    /// 500 kHz lower tone, 4 MHz bandwidth, one pulse, 1 ms PRI at 50 % duty,
    /// 25 MHz sampling.
    pub fn nominal() -> Self {
        Self {
            f1: T::lit(500e3),
            bw: T::lit(4e6),
            n_pulses: 1,
            pri: T::lit(1e-3),
            duty: T::lit(0.5),
            sample_rate: T::lit(25e6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be positive and finite"))
            }
        };
        positive("sample_rate", self.sample_rate)?;
        positive("bw", self.bw)?;
        positive("pri", self.pri)?;
        if self.n_pulses == 0 {
            return Err(invalid("n_pulses", "must be at least 1"));
        }
        if !(self.duty > T::zero() && self.duty <= T::one()) {
            return Err(invalid("duty", "must lie in (0, 1]"));
        }
        if !(self.f1 >= T::zero()) || !self.f1.is_finite() {
            return Err(invalid("f1", "must be non-negative"));
        }
        let nyquist = self.sample_rate / T::two();
        let top = self.highest_tone();
        if top >= nyquist {
            return Err(Error::Nyquist {
                frequency_hz: top.as_f64(),
                nyquist_hz: nyquist.as_f64(),
            });
        }
        if self.active_samples_per_pulse() == 0 {
            return Err(invalid("duty", "active window shorter than one sample"));
        }
        Ok(())
    }

    fn n(&self) -> T {
        T::from_usize(self.n_pulses).unwrap()
    }

    /// Frequency step `δf = BW / (2N - 1)`.
    pub fn step(&self) -> T {
        self.bw / (T::two() * self.n() - T::one())
    }

    /// Tone separation `Δf = N δf`.
    pub fn tone_spacing(&self) -> T {
        self.n() * self.step()
    }

    pub fn f2(&self) -> T {
        self.f1 + self.tone_spacing()
    }

    pub fn highest_tone(&self) -> T {
        self.f2() + (self.n() - T::one()) * self.step()
    }

    /// Active pulse time `T = duty * T_r`.
    pub fn pulse_time(&self) -> T {
        self.duty * self.pri
    }

    /// Total samples, `N * T_r * fs` rounded down.
    pub fn sample_count(&self) -> usize {
        let x = (self.n() * self.pri * self.sample_rate).as_f64();
        (x + INDEX_EPS).floor() as usize
    }

    /// Half-open index range `[start, end)` of pulse `n`.
    pub fn pulse_window(&self, n: usize) -> (usize, usize) {
        let fs = self.sample_rate.as_f64();
        let start = n as f64 * self.pri.as_f64() * fs;
        let end = start + self.pulse_time().as_f64() * fs;
        let total = self.sample_count();
        let s = ((start - INDEX_EPS).ceil().max(0.0) as usize).min(total);
        let e = ((end - INDEX_EPS).ceil().max(0.0) as usize).min(total);
        (s, e)
    }

    fn active_samples_per_pulse(&self) -> usize {
        let (s, e) = self.pulse_window(0);
        e - s
    }

    /// Samples per period of the two-tone beat, `fs / Δf`.
    pub fn beat_period_samples(&self) -> T {
        self.sample_rate / self.tone_spacing()
    }

    /// Centre of the tone set; the waveform spectrum is symmetric about it.
    pub fn center_frequency(&self) -> T {
        (self.f1 + self.highest_tone()) / T::two()
    }
}

/// Synthesizes the TTSFW as a complex baseband sequence starting at `t = 0`.
///
/// The sample count is `N * T_r * fs` rounded down. Sample `k` belongs to
/// pulse `n` when `n T_r <= k/fs < n T_r + T`; everything else is zero. Each
/// pulse carries `(e^{j2π f1 t} + e^{j2π f2 t}) e^{j2π n δf t} / N`.
pub fn generate_ttsfw<T: Real>(params: &TtsfwParams<T>) -> Result<SampledSignal<T>> {
    params.validate()?;
    let total = params.sample_count();
    let fs = params.sample_rate.as_f64();
    let f1 = params.f1.as_f64();
    let f2 = params.f2().as_f64();
    let step = params.step().as_f64();
    let scale = 1.0 / params.n_pulses as f64;
    let tau = std::f64::consts::TAU;

    let mut samples = vec![Complex::new(T::zero(), T::zero()); total];
    for n in 0..params.n_pulses {
        let (start, end) = params.pulse_window(n);
        let shift = n as f64 * step;
        for (k, s) in samples.iter_mut().enumerate().take(end).skip(start) {
            let t = k as f64 / fs;
            let v = cis::<f64>(tau * (f1 + shift) * t) + cis::<f64>(tau * (f2 + shift) * t);
            *s = Complex::new(T::lit(v.re * scale), T::lit(v.im * scale));
        }
    }
    SampledSignal::new(samples, params.sample_rate)
}

/// Physical tones of the two-tone synchronization signal.
///
/// RF tones in the GHz range are simulated at an equivalent baseband: when
/// `baseband_fr1` is set, the simulated tones are `baseband_fr1` and
/// `baseband_fr1 + f_ref`, which preserves the tone separation, while phase
/// arithmetic keeps using the physical `fr1`/`fr2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncToneParams<T> {
    pub fr1: T,
    pub fr2: T,
    pub baseband_fr1: Option<T>,
}

impl<T: Real> SyncToneParams<T> {
    pub fn new(fr1: T, fr2: T) -> Result<Self> {
        let p = Self {
            fr1,
            fr2,
            baseband_fr1: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// 4.30 GHz / 4.31 GHz tones mapped to 20 MHz / 30 MHz for simulation.
    pub fn nominal() -> Self {
        Self {
            fr1: T::lit(4.30e9),
            fr2: T::lit(4.31e9),
            baseband_fr1: Some(T::lit(20e6)),
        }
    }

    pub fn with_baseband(mut self, fr1: T) -> Self {
        self.baseband_fr1 = Some(fr1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fr2 > self.fr1) || !(self.fr1 >= T::zero()) {
            return Err(invalid("fr2", "must exceed fr1, both non-negative"));
        }
        if let Some(b) = self.baseband_fr1 {
            if !(b >= T::zero()) {
                return Err(invalid("baseband_fr1", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Reference frequency `f_ref = fr2 - fr1`.
    pub fn f_ref(&self) -> T {
        self.fr2 - self.fr1
    }

    /// Tones actually placed in the sampled signal.
    pub fn simulated_tones(&self) -> (T, T) {
        match self.baseband_fr1 {
            Some(b) => (b, b + self.f_ref()),
            None => (self.fr1, self.fr2),
        }
    }
}

/// Two-tone sum `e^{j(2π fr1 t + φ1)} + e^{j(2π fr2 t + φ2)}` at the simulated
/// tone frequencies, `floor(duration * fs)` samples from `t = 0`.
pub fn generate_sync_tones<T: Real>(
    params: &SyncToneParams<T>,
    duration: T,
    sample_rate: T,
    phase_offsets: (T, T),
) -> Result<SampledSignal<T>> {
    params.validate()?;
    if !(sample_rate > T::zero()) {
        return Err(invalid("sample_rate", "must be positive"));
    }
    let (a, b) = params.simulated_tones();
    let nyquist = sample_rate / T::two();
    if b >= nyquist {
        return Err(Error::Nyquist {
            frequency_hz: b.as_f64(),
            nyquist_hz: nyquist.as_f64(),
        });
    }
    let fs = sample_rate.as_f64();
    let n = ((duration.as_f64() * fs) + INDEX_EPS).floor() as usize;
    let (fa, fb) = (a.as_f64(), b.as_f64());
    let (pa, pb) = (phase_offsets.0.as_f64(), phase_offsets.1.as_f64());
    let tau = std::f64::consts::TAU;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            let v = cis::<f64>(tau * fa * t + pa) + cis::<f64>(tau * fb * t + pb);
            Complex::new(T::lit(v.re), T::lit(v.im))
        })
        .collect();
    SampledSignal::new(samples, sample_rate)
}
