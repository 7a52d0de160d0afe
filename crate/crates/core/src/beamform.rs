//! Steering corrections, far-field phasor summation and the coherent gain
//! metric.
//!
//! Emissions are continuous-wave, so everything is evaluated as steady-state
//! phasors with the common `exp(j2πf_c t)` factored out.

use num_complex::Complex;

use crate::error::invalid;
use crate::{Error, Real, Result};

/// `Δφ_c2 = -2π (f_c/c) Δd_T sin θ`, radians.
pub fn steering_phase<T: Real>(delta_d_t: T, theta_deg: T, f_c: T) -> T {
    -T::tau() * f_c / T::speed_of_light() * delta_d_t * theta_deg.to_radians().sin()
}

/// `Δφ_c = Δφ_c1 + Δφ_c2`.
pub fn total_phase<T: Real>(dphi_c1: T, dphi_c2: T) -> T {
    dphi_c1 + dphi_c2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEmission<T> {
    pub amplitude: T,
    pub channel_gain: Complex<T>,
    pub f_c: T,
    /// Phase picked up from node motion (`Δφ_c`), rad.
    pub propagation_phase: T,
    /// Applied correction, normally `-Δφ_c` as estimated by the node.
    pub phase_correction: T,
    /// Remaining error terms such as PLL jitter `δφ`.
    pub residual_error: T,
    pub initial_phase: T,
}

impl<T: Real> NodeEmission<T> {
    /// Unit emission with the given residual and nothing else.
    pub fn unit(f_c: T, residual_error: T) -> Self {
        Self {
            amplitude: T::one(),
            channel_gain: Complex::new(T::one(), T::zero()),
            f_c,
            propagation_phase: T::zero(),
            phase_correction: T::zero(),
            residual_error,
            initial_phase: T::zero(),
        }
    }

    pub fn phase(&self) -> T {
        self.propagation_phase + self.phase_correction + self.residual_error + self.initial_phase
    }

    pub fn phasor(&self) -> Complex<T> {
        self.channel_gain * Complex::from_polar(self.amplitude, self.phase())
    }

    /// Magnitude of the emission at the target, `|h| A`.
    pub fn magnitude(&self) -> T {
        self.channel_gain.norm() * self.amplitude.abs()
    }

    fn check(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.channel_gain.norm().is_finite() {
            return Err(invalid("amplitude", "emission amplitude must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcResult<T> {
    pub gc: T,
    pub coherent_power: T,
    pub ideal_power: T,
}

impl<T: Real> GcResult<T> {
    pub fn gc_db(&self) -> T {
        crate::real::linear_to_db(self.gc)
    }
}

fn check_frequencies<T: Real>(emissions: &[NodeEmission<T>]) -> Result<()> {
    let Some(first) = emissions.first() else {
        return Err(Error::ZeroAmplitude);
    };
    for e in emissions {
        e.check()?;
        if (e.f_c - first.f_c).abs() > T::lit(1e-12) * first.f_c.abs() {
            return Err(Error::FrequencyMismatch {
                first: first.f_c.as_f64(),
                other: e.f_c.as_f64(),
            });
        }
    }
    Ok(())
}

/// Phasor sum at the target. All emissions must share a carrier.
pub fn coherent_sum<T: Real>(emissions: &[NodeEmission<T>]) -> Result<Complex<T>> {
    check_frequencies(emissions)?;
    Ok(emissions
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, e| {
            acc + e.phasor()
        }))
}

/// `|Σ s_n|² / (Σ |h_n| A_n)²`. The ideal sum adds every emission in phase,
/// so `gc` stays in `[0, 1]` whatever the channel phases are.
pub fn coherent_gain<T: Real>(emissions: &[NodeEmission<T>]) -> Result<GcResult<T>> {
    let sum = coherent_sum(emissions)?;
    let ideal = emissions
        .iter()
        .fold(T::zero(), |acc, e| acc + e.magnitude());
    if !(ideal > T::zero()) {
        return Err(Error::ZeroAmplitude);
    }
    let coherent_power = sum.norm_sqr();
    let ideal_power = ideal * ideal;
    let gc = (coherent_power / ideal_power).min(T::one());
    Ok(GcResult {
        gc,
        coherent_power,
        ideal_power,
    })
}

/// Coherent gain of two unit emissions separated by `psi`.
pub fn two_element_gain<T: Real>(psi: T) -> T {
    let pair = [
        NodeEmission::unit(T::one(), T::zero()),
        NodeEmission::unit(T::one(), psi),
    ];
    match coherent_gain(&pair) {
        Ok(r) => r.gc,
        Err(_) => unreachable!("unit emissions are valid"),
    }
}
