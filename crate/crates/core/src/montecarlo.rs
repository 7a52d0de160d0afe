//! Coherent-gain requirement analysis: `P(Gc >= X)` over steering angle and
//! ranging standard deviation.
//!
//! Every grid cell sees the same set of draws (common random numbers), so
//! the surface is exactly monotone in σ and exactly symmetric in `sin θ`;
//! only the Monte Carlo error of the draw set itself remains.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::beamform::{coherent_gain, NodeEmission};
use crate::error::invalid;
use crate::rng::stream_rng;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorModel {
    /// One ranging error drives both the sync and the steering correction.
    #[default]
    Shared,
    /// The two corrections carry independent errors of equal spread.
    Independent,
}

impl ErrorModel {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::Shared => "shared",
            ErrorModel::Independent => "independent",
        }
    }
}

impl std::str::FromStr for ErrorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(ErrorModel::Shared),
            "independent" => Ok(ErrorModel::Independent),
            _ => Err(invalid("error_model", format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig<T> {
    pub iterations: usize,
    pub thresholds: Vec<T>,
    pub theta_grid: Vec<T>,
    /// Ranging standard deviations as fractions of λ_c.
    pub sigma_grid: Vec<T>,
    pub f_c: T,
    pub probability_target: T,
    pub master_seed: u64,
    pub error_model: ErrorModel,
}

/// `start, start + step, ...` up to `stop` inclusive.
pub fn linear_grid<T: Real>(start: T, stop: T, step: T) -> Vec<T> {
    let n = ((stop - start) / step + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    (0..=n).map(|i| start + step * T::lit(i as f64)).collect()
}

impl<T: Real> McConfig<T> {
    pub fn nominal(master_seed: u64) -> Self {
        Self {
            iterations: 50_000,
            thresholds: [0.6, 0.7, 0.8, 0.9].iter().map(|&x| T::lit(x)).collect(),
            theta_grid: linear_grid(T::zero(), T::lit(359.0), T::one()),
            sigma_grid: linear_grid(T::zero(), T::lit(0.1), T::lit(0.005)),
            f_c: T::lit(1.5e9),
            probability_target: T::lit(0.9),
            master_seed,
            error_model: ErrorModel::Shared,
        }
    }

    /// Same grid, 5,000 iterations.
    pub fn desk(master_seed: u64) -> Self {
        Self {
            iterations: 5_000,
            ..Self::nominal(master_seed)
        }
    }

    pub fn wavelength(&self) -> T {
        T::speed_of_light() / self.f_c
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be at least 1"));
        }
        if self.thresholds.is_empty() {
            return Err(invalid("thresholds", "need at least one threshold"));
        }
        if self
            .thresholds
            .iter()
            .any(|x| !(*x > T::zero() && *x <= T::one()))
        {
            return Err(invalid("thresholds", "must lie in (0, 1]"));
        }
        if self.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("thresholds", "must be strictly ascending"));
        }
        if self.theta_grid.is_empty() || self.theta_grid.iter().any(|t| !t.is_finite()) {
            return Err(invalid(
                "theta_grid",
                "must be a non-empty list of finite angles",
            ));
        }
        if self.sigma_grid.is_empty()
            || self
                .sigma_grid
                .iter()
                .any(|s| !(*s >= T::zero()) || !s.is_finite())
        {
            return Err(invalid(
                "sigma_grid",
                "values must be finite and non-negative",
            ));
        }
        if self.sigma_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("sigma_grid", "must be strictly ascending"));
        }
        if !(self.f_c > T::zero()) {
            return Err(invalid("f_c", "must be positive"));
        }
        if !(self.probability_target > T::zero() && self.probability_target <= T::one()) {
            return Err(invalid("probability_target", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcSurface<T> {
    pub config: McConfig<T>,
    /// Indexed `[theta][sigma][threshold]`, flattened.
    probabilities: Vec<T>,
}

impl<T: Real> GcSurface<T> {
    fn index(&self, theta: usize, sigma: usize, threshold: usize) -> usize {
        let c = &self.config;
        (theta * c.sigma_grid.len() + sigma) * c.thresholds.len() + threshold
    }

    pub fn probability(&self, theta: usize, sigma: usize, threshold: usize) -> T {
        self.probabilities[self.index(theta, sigma, threshold)]
    }

    pub fn stderr(&self, theta: usize, sigma: usize, threshold: usize) -> T {
        stderr(
            self.probability(theta, sigma, threshold),
            self.config.iterations,
        )
    }

    pub fn threshold_index(&self, x: T) -> Result<usize> {
        self.config
            .thresholds
            .iter()
            .position(|t| (*t - x).abs() < T::lit(1e-9))
            .ok_or(Error::UnknownThreshold(x.as_f64()))
    }

    pub fn theta_index(&self, theta_deg: T) -> Option<usize> {
        self.config
            .theta_grid
            .iter()
            .position(|t| (*t - theta_deg).abs() < T::lit(1e-9))
    }

    /// CSV with columns `theta_deg, sigma_over_lambda, threshold,
    /// probability, stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "theta_deg",
            "sigma_over_lambda",
            "threshold",
            "probability",
            "stderr",
        ])?;
        let c = &self.config;
        for (ti, theta) in c.theta_grid.iter().enumerate() {
            for (si, sigma) in c.sigma_grid.iter().enumerate() {
                for (xi, x) in c.thresholds.iter().enumerate() {
                    w.write_record([
                        theta.to_string(),
                        sigma.to_string(),
                        x.to_string(),
                        self.probability(ti, si, xi).to_string(),
                        self.stderr(ti, si, xi).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn stderr<T: Real>(p: T, iterations: usize) -> T {
    (p * (T::one() - p) / T::lit(iterations as f64))
        .max(T::zero())
        .sqrt()
}

/// Phase error per metre of ranging error for one correction term, `2π f_c / c`.
fn phase_per_metre<T: Real>(f_c: T) -> T {
    T::tau() * f_c / T::speed_of_light()
}

struct Draws<T> {
    /// True displacement, m. Does not enter the residual but is kept so the
    /// per-trial model matches the physical description.
    displacement: Vec<T>,
    z1: Vec<T>,
    z2: Vec<T>,
}

fn draw<T: Real>(cfg: &McConfig<T>) -> Draws<T> {
    let mut rng = stream_rng(cfg.master_seed, 0);
    let lambda = cfg.wavelength();
    let n = cfg.iterations;
    let mut d = Draws {
        displacement: Vec::with_capacity(n),
        z1: Vec::with_capacity(n),
        z2: Vec::with_capacity(n),
    };
    for _ in 0..n {
        d.displacement.push(lambda * T::unit_uniform(&mut rng));
        d.z1.push(T::standard_normal(&mut rng));
        d.z2.push(T::standard_normal(&mut rng));
    }
    d
}

/// Residual phase for one trial given the ranging errors of the sync and
/// steering estimates.
fn residual<T: Real>(k: T, eps_sync: T, eps_steer: T, sin_theta: T) -> T {
    k * (eps_sync + eps_steer * sin_theta)
}

/// Runs the grid. Results depend on `master_seed` only.
pub fn run_surface<T: Real>(cfg: &McConfig<T>) -> Result<GcSurface<T>> {
    cfg.validate()?;
    let draws = draw(cfg);
    debug_assert!(draws.displacement.iter().all(|d| *d >= T::zero()));
    let k = phase_per_metre(cfg.f_c);
    let lambda = cfg.wavelength();
    let nx = cfg.thresholds.len();
    let n = T::lit(cfg.iterations as f64);

    let rows: Vec<Vec<T>> = cfg
        .theta_grid
        .par_iter()
        .map(|theta| {
            let sin_theta = theta.to_radians().sin();
            let mut out = Vec::with_capacity(cfg.sigma_grid.len() * nx);
            let mut counts = vec![0usize; nx];
            for sigma in &cfg.sigma_grid {
                let sigma_m = *sigma * lambda;
                counts.iter_mut().for_each(|c| *c = 0);
                for i in 0..cfg.iterations {
                    let e1 = sigma_m * draws.z1[i];
                    let e2 = match cfg.error_model {
                        ErrorModel::Shared => e1,
                        ErrorModel::Independent => sigma_m * draws.z2[i],
                    };
                    let psi = residual(k, e1, e2, sin_theta);
                    let pair = [
                        NodeEmission::unit(cfg.f_c, T::zero()),
                        NodeEmission::unit(cfg.f_c, psi),
                    ];
                    let gc = match coherent_gain(&pair) {
                        Ok(r) => r.gc,
                        Err(_) => T::zero(),
                    };
                    for (c, x) in counts.iter_mut().zip(&cfg.thresholds) {
                        if gc >= *x {
                            *c += 1;
                        }
                    }
                }
                out.extend(counts.iter().map(|c| T::lit(*c as f64) / n));
            }
            out
        })
        .collect();

    Ok(GcSurface {
        config: cfg.clone(),
        probabilities: rows.into_iter().flatten().collect(),
    })
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Largest residual `|ψ|` with `cos²(ψ/2) >= x`.
pub fn max_residual<T: Real>(x: T) -> T {
    T::two() * x.sqrt().acos()
}

/// Standard deviation of the residual phase for ranging spread `sigma_m`.
pub fn residual_std<T: Real>(sigma_m: T, theta_deg: T, f_c: T, model: ErrorModel) -> T {
    let k = phase_per_metre(f_c);
    let s = theta_deg.to_radians().sin();
    match model {
        ErrorModel::Shared => k * sigma_m * (T::one() + s).abs(),
        ErrorModel::Independent => k * sigma_m * (T::one() + s * s).sqrt(),
    }
}

/// Closed-form `P(Gc >= x)` for a zero-mean Gaussian residual, summing the
/// `2π` images of the acceptance interval.
pub fn analytic_probability<T: Real>(
    x: T,
    sigma_m: T,
    theta_deg: T,
    f_c: T,
    model: ErrorModel,
) -> T {
    let psi_max = max_residual(x).as_f64();
    let s = residual_std(sigma_m, theta_deg, f_c, model).as_f64();
    if s <= 0.0 {
        return T::one();
    }
    let tau = std::f64::consts::TAU;
    let images = (8.0 * s / tau).ceil() as i64 + 1;
    let mut p = 0.0;
    for m in -images..=images {
        let c = tau * m as f64;
        p += normal_cdf((c + psi_max) / s) - normal_cdf((c - psi_max) / s);
    }
    T::lit(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaLimit<T> {
    /// σ/λ_c at which `P` falls to the target.
    Limit(T),
    /// No σ on the grid brings `P` below the target.
    Unbounded,
}

impl<T: Real> SigmaLimit<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            SigmaLimit::Limit(v) => Some(*v),
            SigmaLimit::Unbounded => None,
        }
    }

    /// Orders unbounded limits above every finite one.
    pub fn as_f64_or_inf(&self) -> f64 {
        self.value().map_or(f64::INFINITY, |v| v.as_f64())
    }
}

/// Per-θ largest σ/λ_c keeping `P(Gc >= x) >= p`, linearly interpolated
/// between grid points.
pub fn requirement_contour<T: Real>(
    surface: &GcSurface<T>,
    x: T,
    p: T,
) -> Result<Vec<(T, SigmaLimit<T>)>> {
    let xi = surface.threshold_index(x)?;
    let c = &surface.config;
    Ok(c.theta_grid
        .iter()
        .enumerate()
        .map(|(ti, theta)| {
            let mut limit = SigmaLimit::Unbounded;
            for si in 0..c.sigma_grid.len() {
                let pi = surface.probability(ti, si, xi);
                if pi < p {
                    limit = if si == 0 {
                        SigmaLimit::Limit(c.sigma_grid[0])
                    } else {
                        let (s0, s1) = (c.sigma_grid[si - 1], c.sigma_grid[si]);
                        let p0 = surface.probability(ti, si - 1, xi);
                        SigmaLimit::Limit(s0 + (s1 - s0) * (p0 - p) / (p0 - pi))
                    };
                    break;
                }
            }
            (*theta, limit)
        })
        .collect())
}

/// Draws a handful of grid cells at random, for spot checks.
pub fn sample_cells<T: Real>(
    surface: &GcSurface<T>,
    count: usize,
    seed: u64,
) -> Vec<(usize, usize, usize)> {
    let c = &surface.config;
    let mut rng = stream_rng(seed, 7);
    (0..count)
        .map(|_| {
            (
                rng.random_range(0..c.theta_grid.len()),
                rng.random_range(0..c.sigma_grid.len()),
                rng.random_range(0..c.thresholds.len()),
            )
        })
        .collect()
}
