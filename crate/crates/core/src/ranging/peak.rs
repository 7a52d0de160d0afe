//! Sub-sample refinement of the matched-filter peak.
//!
//! The two-tone correlation magnitude is `|cos(π Δf τ)|` under a long
//! triangle, so it has near-equal lobes every `fs/Δf` samples. A coarse step
//! picks the main lobe (inside a caller-supplied lag window, via the beat
//! envelope, or as the plain maximum); the chosen method then refines it.

use super::correlate::Correlation;
use super::spline::NaturalCubicSpline;
use crate::{Error, Real, Result};

/// Half-width, in lags, of the spline window around the coarse peak.
const SPLINE_HALF_WIDTH: isize = 3;
/// Knot spacing (samples) of the band-limited spline passes.
const FINE_KNOT_SPACING: f64 = 0.125;
const MAX_FINE_PASSES: usize = 16;
const FINE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakMethod {
    /// Natural cubic spline over 7 lags, resampled at `points` abscissae and
    /// polished to the spline's stationary point. A first pass runs on the
    /// integer lags; further passes re-centre the 7 knots on the estimate at
    /// 1/8-sample spacing using band-limited correlation values until the
    /// estimate stops moving.
    Spline { points: usize },
    /// Three-point parabola through the integer lags.
    Parabolic,
    /// Band-limited correlation on a `1/factor` grid within one sample of
    /// the coarse peak, then golden-section search on the interpolant.
    FftZoom { factor: usize },
}

impl Default for PeakMethod {
    fn default() -> Self {
        PeakMethod::Spline { points: 1000 }
    }
}

impl PeakMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PeakMethod::Spline { .. } => "spline",
            PeakMethod::Parabolic => "parabolic",
            PeakMethod::FftZoom { .. } => "fft_zoom",
        }
    }
}

/// Refined delay of a matched-filter peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeEstimate<T> {
    /// Node separation, `c · delay / 2` (round-trip repeater path).
    pub distance: T,
    pub delay: T,
    pub delay_samples: T,
    pub peak_value: T,
    pub method: PeakMethod,
}

/// Peak picker configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayEstimator {
    pub method: PeakMethod,
    /// Inclusive lag range that must contain the main lobe.
    pub window: Option<(isize, isize)>,
    /// Beat period in samples (`fs/Δf`); enables envelope-based lobe
    /// selection when no window is given.
    pub beat_period: Option<f64>,
}

impl DelayEstimator {
    pub fn new(method: PeakMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn with_window(mut self, lo: isize, hi: isize) -> Self {
        self.window = Some((lo.min(hi), lo.max(hi)));
        self
    }

    /// Window of half-width just under half a beat period around
    /// `expected_lag`, which isolates one lobe.
    pub fn with_prior(self, expected_lag: f64, beat_period: f64) -> Self {
        let half = (beat_period / 2.0 - 0.5).max(0.5);
        self.with_window(
            (expected_lag - half).ceil() as isize,
            (expected_lag + half).floor() as isize,
        )
    }

    pub fn with_beat_period(mut self, beat_period: f64) -> Self {
        self.beat_period = Some(beat_period);
        self
    }

    pub fn estimate<T: Real>(&self, corr: &Correlation<T>) -> Result<RangeEstimate<T>> {
        let coarse = self.coarse_peak(corr)?;
        let (lag, peak) = match self.method {
            PeakMethod::Spline { points } => refine_spline(corr, coarse, points)?,
            PeakMethod::Parabolic => refine_parabolic(corr, coarse)?,
            PeakMethod::FftZoom { factor } => refine_zoom(corr, coarse, factor)?,
        };
        let fs = corr.sample_rate();
        let delay = T::lit(lag) / fs;
        Ok(RangeEstimate {
            distance: T::speed_of_light() * delay / T::two(),
            delay,
            delay_samples: T::lit(lag),
            peak_value: T::lit(peak),
            method: self.method,
        })
    }

    /// Integer lag of the main lobe.
    pub fn coarse_peak<T: Real>(&self, corr: &Correlation<T>) -> Result<isize> {
        let mags = corr.magnitudes();
        let in_range = |lo: isize, hi: isize| {
            mags.iter()
                .filter(move |(l, _)| *l >= lo && *l <= hi)
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(l, _)| *l)
        };
        let lag = match (self.window, self.beat_period) {
            (Some((lo, hi)), _) => in_range(lo, hi),
            (None, Some(beat)) => {
                let centre = envelope_peak(&mags, beat).ok_or(Error::DegeneratePeak)?;
                let half = (beat / 2.0).floor() as isize;
                in_range(centre - half, centre + half)
            }
            (None, None) => in_range(corr.first_lag(), corr.last_lag()),
        }
        .ok_or(Error::DegeneratePeak)?;
        if corr.magnitude(lag).is_none_or(|m| m <= T::zero()) {
            return Err(Error::DegeneratePeak);
        }
        Ok(lag)
    }
}

/// Refines the correlation peak with `method`, taking the global maximum as
/// the coarse peak.
pub fn estimate_delay<T: Real>(
    corr: &Correlation<T>,
    method: PeakMethod,
) -> Result<RangeEstimate<T>> {
    DelayEstimator::new(method).estimate(corr)
}

/// Lag of the beat-free correlation envelope maximum.
///
/// The squared magnitude of a two-tone correlation is a sinusoid at the beat
/// frequency riding on the squared triangle envelope. The three-tap filter
/// `x[l-1] + x[l+1] - 2 cos(ω) x[l]` nulls that sinusoid exactly, leaving
/// the envelope.
pub(crate) fn envelope_peak<T: Real>(mags: &[(isize, T)], beat_period: f64) -> Option<isize> {
    if mags.len() < 3 || !(beat_period > 2.0) {
        return None;
    }
    let w = std::f64::consts::TAU / beat_period;
    let norm = 2.0 - 2.0 * w.cos();
    let sq: Vec<f64> = mags.iter().map(|(_, m)| m.as_f64().powi(2)).collect();
    (1..sq.len() - 1)
        .map(|i| (i, (sq[i - 1] + sq[i + 1] - 2.0 * w.cos() * sq[i]) / norm))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| mags[i].0)
}

fn window_values<T: Real>(corr: &Correlation<T>, centre: isize, half: isize) -> Result<Vec<f64>> {
    if centre - half < corr.first_lag() || centre + half > corr.last_lag() {
        return Err(Error::PeakNearEdge { lag: centre });
    }
    Ok((centre - half..=centre + half)
        .map(|l| corr.magnitude(l).unwrap().as_f64())
        .collect())
}

fn refine_spline<T: Real>(
    corr: &Correlation<T>,
    coarse: isize,
    points: usize,
) -> Result<(f64, f64)> {
    let ys = window_values(corr, coarse, SPLINE_HALF_WIDTH)?;
    if ys.iter().all(|y| *y == ys[0]) {
        return Err(Error::DegeneratePeak);
    }
    let xs: Vec<f64> = (-SPLINE_HALF_WIDTH..=SPLINE_HALF_WIDTH)
        .map(|k| k as f64)
        .collect();
    let spline = NaturalCubicSpline::new(xs, ys)?;
    let (offset, _) = spline.maximize(points);
    if offset.abs() >= SPLINE_HALF_WIDTH as f64 {
        return Err(Error::DegeneratePeak);
    }
    let mut lag = coarse as f64 + offset;
    let mut peak = corr.interpolate_magnitude(lag);

    let span = SPLINE_HALF_WIDTH as f64 * FINE_KNOT_SPACING;
    for _ in 0..MAX_FINE_PASSES {
        let xs: Vec<f64> = (-SPLINE_HALF_WIDTH..=SPLINE_HALF_WIDTH)
            .map(|k| k as f64 * FINE_KNOT_SPACING)
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| corr.interpolate_magnitude(lag + x))
            .collect();
        let spline = NaturalCubicSpline::new(xs, ys)?;
        let (offset, value) = spline.maximize(points);
        if offset.abs() >= span {
            // the maximum left the knot span; follow it
            lag += offset;
            continue;
        }
        lag += offset;
        peak = value;
        if offset.abs() < FINE_TOLERANCE {
            break;
        }
    }
    Ok((lag, peak))
}

fn refine_parabolic<T: Real>(corr: &Correlation<T>, coarse: isize) -> Result<(f64, f64)> {
    let y = window_values(corr, coarse, 1)?;
    let denom = y[0] - 2.0 * y[1] + y[2];
    if !(denom < 0.0) {
        return Err(Error::DegeneratePeak);
    }
    let delta = 0.5 * (y[0] - y[2]) / denom;
    let peak = y[1] - 0.25 * (y[0] - y[2]) * delta;
    Ok((coarse as f64 + delta, peak))
}

fn refine_zoom<T: Real>(corr: &Correlation<T>, coarse: isize, factor: usize) -> Result<(f64, f64)> {
    window_values(corr, coarse, 1)?;
    let factor = factor.max(2);
    let step = 1.0 / factor as f64;
    let f = |x: f64| corr.interpolate_magnitude(x);
    let (mut best_x, mut best_y) = (coarse as f64, f(coarse as f64));
    for k in 0..=2 * factor {
        let x = coarse as f64 - 1.0 + k as f64 * step;
        let y = f(x);
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    // golden-section search on [best - step, best + step]
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best_x - step, best_x + step);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let y = f(x);
    Ok(if y >= best_y {
        (x, y)
    } else {
        (best_x, best_y)
    })
}
