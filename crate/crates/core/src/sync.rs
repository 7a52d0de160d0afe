//! Wireless frequency/phase transfer through a self-mixing circuit.
//!
//! The secondary receives the two-tone sync signal, splits it to the RF and
//! LO ports of a mixer and low-pass filters the product. What survives is a
//! tone at the separation `f_ref = fr2 - fr1` whose phase is `φ2 - φ1`, so
//! node motion shows up as `Δφ_ref = -2π f_ref Δd_IN / c`, and after the
//! PLL multiplies the reference up to the carrier, `Δφ_c1 = (f_c/f_ref) Δφ_ref`.

use num_complex::Complex;
use rand::Rng;

use crate::dsp::{fft, fit_real_tone, ifft, signed_bin};
use crate::error::invalid;
use crate::real::wrap_phase;
use crate::waveform::{generate_sync_tones, SampledSignal, SyncToneParams};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerChainConfig<T> {
    pub f_ref: T,
    pub lpf_cutoff: T,
    /// Extra phase `(c1, c2)` on the LO path for tone 1 and tone 2.
    pub cable_mismatch: (T, T),
}

impl<T: Real> MixerChainConfig<T> {
    /// 10 MHz reference, 10.7 MHz low-pass, matched cables.
    pub fn nominal() -> Self {
        Self {
            f_ref: T::lit(10e6),
            lpf_cutoff: T::lit(10.7e6),
            cable_mismatch: (T::zero(), T::zero()),
        }
    }

    /// Checks the filter against the reference and, given the simulated
    /// lower tone, against the lowest mixer spur at `2 fr1`.
    pub fn validate(&self, simulated_fr1: Option<T>) -> Result<()> {
        if !(self.f_ref > T::zero()) {
            return Err(invalid("f_ref", "must be positive"));
        }
        if !(self.lpf_cutoff > self.f_ref) {
            return Err(invalid("lpf_cutoff", "must exceed the reference frequency"));
        }
        if let Some(fr1) = simulated_fr1 {
            if !(self.lpf_cutoff < T::two() * fr1) {
                return Err(invalid("lpf_cutoff", "must reject the 2·fr1 mixer product"));
            }
        }
        Ok(())
    }
}

/// Phases along the sync chain. All displacement-driven terms are
/// unwrapped; wrap only for display.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState<T> {
    /// Tone phases at the RF port.
    pub phi1: T,
    pub phi2: T,
    /// Tone phases at the LO port (`φ1 + c1`, `φ2 + c2`).
    pub phi3: T,
    pub phi4: T,
    /// IF output phase, wrapped.
    pub phi5: T,
    pub dphi_ref: T,
    pub dphi_c1: T,
    pub dphi_c2: T,
    pub dphi_c: T,
}

/// Multiplies the real (sine) parts of `rf` and `lo` and applies an ideal
/// low-pass at `cfg.lpf_cutoff`. The IF port is AC coupled, so the DC
/// product is removed too. The result is real-valued (zero imaginary part).
pub fn self_mix<T: Real>(
    rf: &SampledSignal<T>,
    lo: &SampledSignal<T>,
    cfg: &MixerChainConfig<T>,
) -> Result<SampledSignal<T>> {
    cfg.validate(None)?;
    let (fa, fb) = (rf.sample_rate().as_f64(), lo.sample_rate().as_f64());
    if (fa - fb).abs() > 1e-12 * fa {
        return Err(Error::SampleRateMismatch {
            left: fa,
            right: fb,
        });
    }
    if rf.len() != lo.len() {
        return Err(invalid("lo", "RF and LO inputs must have equal length"));
    }
    let n = rf.len();
    let mut buf: Vec<Complex<T>> = rf
        .samples()
        .iter()
        .zip(lo.samples())
        .map(|(a, b)| Complex::new(a.im * b.im, T::zero()))
        .collect();
    fft(&mut buf);
    let cutoff = cfg.lpf_cutoff.as_f64();
    for (k, x) in buf.iter_mut().enumerate() {
        let f = signed_bin(k, n) as f64 * fa / n as f64;
        if k == 0 || f.abs() > cutoff {
            *x = Complex::new(T::zero(), T::zero());
        }
    }
    ifft(&mut buf);
    for x in buf.iter_mut() {
        x.im = T::zero();
    }
    SampledSignal::with_start(buf, rf.sample_rate(), rf.t0())
}

/// `(amplitude, phase)` of the `freq` component of a real IF signal.
pub fn measure_tone<T: Real>(signal: &SampledSignal<T>, freq: T) -> (T, T) {
    let (a, p) = fit_real_tone(
        signal.samples(),
        freq.as_f64(),
        signal.sample_rate().as_f64(),
        signal.t0().as_f64(),
    );
    (T::lit(a), T::lit(p))
}

/// `Δφ_ref = -2π f_ref Δd_IN / c`, radians. Negative when the nodes separate.
pub fn ref_phase_shift<T: Real>(delta_d_in: T, f_ref: T) -> T {
    -T::tau() * f_ref * delta_d_in / T::speed_of_light()
}

/// Per-tone shifts `(Δφ1, Δφ2)` for a sync-path displacement; their
/// difference is [`ref_phase_shift`] at `fr2 - fr1`.
pub fn tone_phase_shifts<T: Real>(delta_d_in: T, fr1: T, fr2: T) -> (T, T) {
    (
        ref_phase_shift(delta_d_in, fr1),
        ref_phase_shift(delta_d_in, fr2),
    )
}

/// Carrier phase from the disciplined oscillator, `Δφ_c1 = (f_c/f_ref) Δφ_ref`.
pub fn carrier_phase_shift_sync<T: Real>(dphi_ref: T, f_c: T, f_ref: T) -> Result<T> {
    if !(f_ref > T::zero()) {
        return Err(invalid("f_ref", "must be positive"));
    }
    Ok(f_c / f_ref * dphi_ref)
}

/// Signal-level model of the sync path from the primary to the secondary's
/// mixer.
#[derive(Debug, Clone)]
pub struct SyncLink<T> {
    pub tones: SyncToneParams<T>,
    pub mixer: MixerChainConfig<T>,
    pub sample_rate: T,
    pub duration: T,
    /// Sync-path separation at zero displacement, m.
    pub base_separation: T,
}

impl<T: Real> SyncLink<T> {
    /// Nominal tones at a 20/30 MHz simulation band, 100 MHz sampling and a
    /// 10 µs observation (100 reference cycles).
    pub fn nominal(base_separation: T) -> Self {
        Self {
            tones: SyncToneParams::nominal(),
            mixer: MixerChainConfig::nominal(),
            sample_rate: T::lit(100e6),
            duration: T::lit(10e-6),
            base_separation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tones.validate()?;
        let f_ref = self.tones.f_ref();
        if (f_ref - self.mixer.f_ref).abs() > T::lit(1e-6) * f_ref {
            return Err(invalid(
                "f_ref",
                "mixer reference must equal the tone separation",
            ));
        }
        self.mixer.validate(Some(self.tones.simulated_tones().0))
    }

    /// Per-tone phases at the receiver for displacement `delta_d_in`.
    fn rf_phases(&self, delta_d_in: T) -> (T, T) {
        let d = self.base_separation + delta_d_in;
        tone_phase_shifts(d, self.tones.fr1, self.tones.fr2)
    }

    /// RF and LO port signals after the splitter.
    pub fn receive(&self, delta_d_in: T) -> Result<(SampledSignal<T>, SampledSignal<T>)> {
        let (p1, p2) = self.rf_phases(delta_d_in);
        let (c1, c2) = self.mixer.cable_mismatch;
        let rf = generate_sync_tones(&self.tones, self.duration, self.sample_rate, (p1, p2))?;
        let lo = generate_sync_tones(
            &self.tones,
            self.duration,
            self.sample_rate,
            (p1 + c1, p2 + c2),
        )?;
        Ok((rf, lo))
    }

    pub fn if_output(&self, delta_d_in: T) -> Result<SampledSignal<T>> {
        let (rf, lo) = self.receive(delta_d_in)?;
        self_mix(&rf, &lo, &self.mixer)
    }

    /// `(amplitude, wrapped phase)` of the recovered reference tone.
    pub fn measure(&self, delta_d_in: T) -> Result<(T, T)> {
        let out = self.if_output(delta_d_in)?;
        Ok(measure_tone(&out, self.mixer.f_ref))
    }

    pub fn phase_state(&self, delta_d_in: T) -> Result<PhaseState<T>> {
        let (p1, p2) = self.rf_phases(delta_d_in);
        let (c1, c2) = self.mixer.cable_mismatch;
        let (_, phi5) = self.measure(delta_d_in)?;
        Ok(PhaseState {
            phi1: p1,
            phi2: p2,
            phi3: p1 + c1,
            phi4: p2 + c2,
            phi5,
            ..PhaseState::default()
        })
    }
}

/// Follows the secondary's carrier phase as the node moves, by measuring
/// the recovered reference tone and unwrapping successive readings.
#[derive(Debug, Clone)]
pub struct SyncTracker<T> {
    link: SyncLink<T>,
    f_c: T,
    last_phase: T,
    state: PhaseState<T>,
}

impl<T: Real> SyncTracker<T> {
    pub fn new(link: SyncLink<T>, f_c: T) -> Result<Self> {
        link.validate()?;
        let state = link.phase_state(T::zero())?;
        Ok(Self {
            last_phase: state.phi5,
            link,
            f_c,
            state,
        })
    }

    pub fn link(&self) -> &SyncLink<T> {
        &self.link
    }

    /// Moves the sync path to total displacement `delta_d_in` from the
    /// starting geometry. Each call may move the reference phase by less
    /// than half a cycle (`c / (2 f_ref)` of motion, 15 m at 10 MHz).
    pub fn update(&mut self, delta_d_in: T) -> Result<PhaseState<T>> {
        let mut next = self.link.phase_state(delta_d_in)?;
        let step = wrap_phase(next.phi5 - self.last_phase);
        self.last_phase = next.phi5;
        next.dphi_ref = self.state.dphi_ref + step;
        next.dphi_c1 = carrier_phase_shift_sync(next.dphi_ref, self.f_c, self.link.mixer.f_ref)?;
        next.dphi_c2 = self.state.dphi_c2;
        next.dphi_c = next.dphi_c1 + next.dphi_c2;
        self.state = next;
        Ok(next)
    }

    /// Records the steering phase `Δφ_c2` and refreshes the total.
    pub fn set_steering(&mut self, dphi_c2: T) -> PhaseState<T> {
        self.state.dphi_c2 = dphi_c2;
        self.state.dphi_c = self.state.dphi_c1 + dphi_c2;
        self.state
    }

    pub fn state(&self) -> &PhaseState<T> {
        &self.state
    }
}

/// Binary lock model of the secondary's PLL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllModel<T> {
    /// Minimum reference tone power (`amplitude² / 2`) for lock.
    pub lock_threshold: T,
    /// Fractional frequency offset of the free-running oscillator.
    pub free_running_offset: T,
    /// Standard deviation of the residual phase error `δφ` while locked;
    /// zero disables it.
    pub phase_jitter_std: T,
}

impl<T: Real> Default for PllModel<T> {
    fn default() -> Self {
        Self {
            lock_threshold: T::lit(1e-3),
            free_running_offset: T::lit(2e-6),
            phase_jitter_std: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockState<T> {
    pub locked: bool,
    pub fractional_frequency_offset: T,
}

impl<T: Real> PllModel<T> {
    pub fn discipline(&self, reference_amplitude: T) -> LockState<T> {
        let power = reference_amplitude * reference_amplitude / T::two();
        let locked = power >= self.lock_threshold;
        LockState {
            locked,
            fractional_frequency_offset: if locked {
                T::zero()
            } else {
                self.free_running_offset
            },
        }
    }

    /// One draw of `δφ`.
    pub fn phase_error<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        if self.phase_jitter_std == T::zero() {
            T::zero()
        } else {
            self.phase_jitter_std * T::standard_normal(rng)
        }
    }
}
