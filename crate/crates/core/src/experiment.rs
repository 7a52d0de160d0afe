//! Simulated two-node beamforming run: the secondary steps along one
//! wavelength while ranging, phase transfer and correction run at every
//! position.
//!
//! Amplitudes are normalized so that the ideal (perfectly coherent) sum is 1:
//! each node contributes 0.5 at the target.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use rand::Rng;

use crate::beamform::{coherent_gain, steering_phase, NodeEmission};
use crate::channel::{LinkBudget, NodeGeometry};
use crate::error::invalid;
use crate::ranging::{PeakMethod, Ranger};
use crate::rng::{derive_seed, stream_rng};
use crate::sync::{carrier_phase_shift_sync, ref_phase_shift, PllModel, SyncLink, SyncTracker};
use crate::waveform::TtsfwParams;
use crate::{Error, Real, Result};

const NODE_AMPLITUDE: f64 = 0.5;
/// Fraction of the trace maximum below which a sample counts as a null.
pub const NULL_FRACTION: f64 = 0.1;
/// Fine sweep points per coarse step, used for null detection.
pub const FINE_OVERSAMPLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    On,
    Off,
    #[default]
    Both,
}

impl Correction {
    pub fn name(&self) -> &'static str {
        match self {
            Correction::On => "on",
            Correction::Off => "off",
            Correction::Both => "both",
        }
    }

    fn corrected(&self) -> bool {
        !matches!(self, Correction::Off)
    }

    fn uncorrected(&self) -> bool {
        !matches!(self, Correction::On)
    }
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" => Ok(Correction::On),
            "off" => Ok(Correction::Off),
            "both" => Ok(Correction::Both),
            _ => Err(invalid(
                "correction",
                format!("expected on, off or both, got {s:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub f_c: T,
    pub traverse: T,
    pub step: T,
    /// Carrier cycles averaged per recorded amplitude. Only matters when the
    /// PLL has phase jitter.
    pub cycles_per_position: usize,
    /// Ranging SNR over the waveform's noise bandwidth; `+inf` disables noise.
    pub snr_db: T,
    pub theta_deg: T,
    pub correction: Correction,
    pub seed: u64,
    /// Sync-path separation at the first position, m.
    pub initial_separation: T,
    /// Ranging pulses averaged at the first position to set the reference.
    pub calibration_pulses: usize,
    pub waveform: TtsfwParams<T>,
    pub pll: PllModel<T>,
}

impl<T: Real> ExperimentConfig<T> {
    pub fn nominal(seed: u64) -> Self {
        let f_c = T::lit(1.5e9);
        Self {
            f_c,
            traverse: T::speed_of_light() / f_c,
            step: T::lit(0.02),
            cycles_per_position: 1500,
            snr_db: T::lit(30.0),
            theta_deg: T::lit(90.0),
            correction: Correction::Both,
            seed,
            initial_separation: T::lit(1.5),
            calibration_pulses: 32,
            waveform: TtsfwParams::nominal(),
            pll: PllModel::default(),
        }
    }

    pub fn wavelength(&self) -> T {
        T::speed_of_light() / self.f_c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_c > T::zero()) {
            return Err(invalid("f_c", "must be positive"));
        }
        if !(self.step > T::zero()) {
            return Err(invalid("step", "must be positive"));
        }
        if !(self.traverse >= self.step) {
            return Err(invalid("traverse", "must be at least one step"));
        }
        if !(self.initial_separation > T::zero()) {
            return Err(invalid("initial_separation", "must be positive"));
        }
        if self.cycles_per_position == 0 || self.calibration_pulses == 0 {
            return Err(invalid(
                "cycles_per_position",
                "averaging counts must be at least 1",
            ));
        }
        if self.snr_db.is_nan() || self.snr_db == T::neg_infinity() {
            return Err(invalid("snr_db", "must be a number above -inf"));
        }
        if !self.theta_deg.is_finite() {
            return Err(invalid("theta_deg", "must be finite"));
        }
        self.waveform.validate()
    }

    /// Recorded displacements `0, step, ...` up to the traverse.
    pub fn positions(&self) -> Vec<T> {
        let n = (self.traverse / self.step + T::lit(1e-9))
            .floor()
            .to_usize()
            .unwrap_or(0);
        (0..=n).map(|i| self.step * T::lit(i as f64)).collect()
    }

    fn budget(&self) -> LinkBudget<T> {
        LinkBudget {
            snr_db: self.snr_db,
            noise_bw: self.waveform.sample_rate / T::two(),
            pulse_time: self.waveform.pulse_time(),
            pulse_count: self.waveform.n_pulses,
        }
    }

    fn ranger(&self) -> Result<Ranger<T>> {
        if self.snr_db.is_infinite() {
            Ranger::with_channel_snr(self.waveform, T::infinity(), PeakMethod::default())
        } else {
            Ranger::new(self.waveform, &self.budget(), PeakMethod::default())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub position: T,
    pub amp_primary: T,
    pub amp_secondary: T,
    pub amp_sum_uncorrected: T,
    pub amp_sum_corrected: T,
    pub gc_corrected: T,
    pub range_estimate: T,
}

pub const TRACE_HEADER: [&str; 7] = [
    "position",
    "amp_primary",
    "amp_secondary",
    "amp_sum_uncorrected",
    "amp_sum_corrected",
    "gc_corrected",
    "range_estimate",
];

impl<T: Real> TraceRow<T> {
    fn fields(&self) -> [T; 7] {
        [
            self.position,
            self.amp_primary,
            self.amp_secondary,
            self.amp_sum_uncorrected,
            self.amp_sum_corrected,
            self.gc_corrected,
            self.range_estimate,
        ]
    }

    fn from_fields(f: [T; 7]) -> Self {
        Self {
            position: f[0],
            amp_primary: f[1],
            amp_secondary: f[2],
            amp_sum_uncorrected: f[3],
            amp_sum_corrected: f[4],
            gc_corrected: f[5],
            range_estimate: f[6],
        }
    }

    /// True when ranging failed at this position.
    pub fn is_flagged(&self) -> bool {
        self.range_estimate.is_nan()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport<T> {
    pub config: ExperimentConfig<T>,
    pub rows: Vec<TraceRow<T>>,
    /// Dense uncorrected sweep `(position, amplitude)` at `step / 20`.
    pub fine_sweep: Vec<(T, T)>,
    /// Centres of the sub-10% dips in the fine sweep.
    pub null_positions: Vec<T>,
    /// Positions where the total carrier phase is an odd multiple of π.
    pub predicted_null_positions: Vec<T>,
    /// `|Δφ_c|` at the end of the traverse, degrees.
    pub total_swept_phase_deg: T,
    /// Averaged separation from the calibration pulses, m.
    pub calibration_range: T,
}

impl<T: Real> ExperimentReport<T> {
    pub fn null_count(&self) -> usize {
        self.null_positions.len()
    }

    /// Smallest corrected gain over rows that have one.
    pub fn min_gc(&self) -> Option<T> {
        self.rows
            .iter()
            .map(|r| r.gc_corrected)
            .filter(|g| !g.is_nan())
            .fold(None, |m: Option<T>, g| Some(m.map_or(g, |m| m.min(g))))
    }
}

/// Secondary emission at the target. The channel phase `beta` is cancelled
/// by the calibrated initial phase.
fn secondary<T: Real>(
    f_c: T,
    beta: T,
    propagation: T,
    correction: T,
    residual: T,
) -> NodeEmission<T> {
    NodeEmission {
        amplitude: T::lit(NODE_AMPLITUDE),
        channel_gain: Complex::from_polar(T::one(), beta),
        f_c,
        propagation_phase: propagation,
        phase_correction: correction,
        residual_error: residual,
        initial_phase: -beta,
    }
}

fn primary<T: Real>(f_c: T) -> NodeEmission<T> {
    NodeEmission {
        amplitude: T::lit(NODE_AMPLITUDE),
        ..NodeEmission::unit(f_c, T::zero())
    }
}

/// Estimated `Δφ_c` for an estimated co-moving displacement.
fn estimated_carrier_phase<T: Real>(cfg: &ExperimentConfig<T>, f_ref: T, disp: T) -> Result<T> {
    let c1 = carrier_phase_shift_sync(ref_phase_shift(disp, f_ref), cfg.f_c, f_ref)?;
    Ok(c1 + steering_phase(disp, cfg.theta_deg, cfg.f_c))
}

/// Time-averaged phasor of the secondary over `cycles` carrier cycles with
/// PLL jitter. Returns `(averaged amplitude, mean residual phasor angle)`.
fn averaged_residual<T: Real, R: Rng>(pll: &PllModel<T>, cycles: usize, rng: &mut R) -> (T, T) {
    if pll.phase_jitter_std == T::zero() {
        return (T::one(), T::zero());
    }
    let mut acc = Complex::new(T::zero(), T::zero());
    for _ in 0..cycles {
        acc = acc + Complex::from_polar(T::one(), pll.phase_error(rng));
    }
    let avg = acc / T::lit(cycles as f64);
    (avg.norm(), avg.arg())
}

fn magnitude_of<T: Real>(emissions: &[NodeEmission<T>]) -> Result<T> {
    Ok(crate::beamform::coherent_sum(emissions)?.norm())
}

/// Runs the traverse. Deterministic given `cfg.seed`.
pub fn run_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<ExperimentReport<T>> {
    cfg.validate()?;
    let ranger = cfg.ranger()?;
    let link = SyncLink::nominal(cfg.initial_separation);
    let f_ref = link.mixer.f_ref;
    let mut tracker = SyncTracker::new(link.clone(), cfg.f_c)?;
    let mut geometry = NodeGeometry::new(cfg.initial_separation, T::zero(), cfg.theta_deg, true)?;

    let mut rng = stream_rng(cfg.seed, 1);
    let beta = T::tau() * T::unit_uniform(&mut rng);

    // Reference range at the start position.
    let d0 = cfg.initial_separation;
    let mut acc = T::zero();
    let mut good = 0usize;
    for k in 0..cfg.calibration_pulses {
        if let Ok(e) = ranger.measure(d0, Some(d0), derive_seed(cfg.seed, 1_000_000 + k as u64)) {
            acc = acc + e.distance;
            good += 1;
        }
    }
    if good == 0 {
        return Err(invalid(
            "calibration_pulses",
            "every calibration ranging pulse failed",
        ));
    }
    let calibration_range = acc / T::lit(good as f64);

    let pll_lock = {
        let (amp, _) = link.measure(T::zero())?;
        cfg.pll.discipline(amp)
    };
    if !pll_lock.locked {
        return Err(invalid(
            "pll",
            "secondary PLL does not lock to the sync reference",
        ));
    }

    let mut rows = Vec::new();
    let mut prior = calibration_range;
    let mut last = T::zero();
    for (k, &x) in cfg.positions().iter().enumerate() {
        geometry.displace(x - last, x - last)?;
        last = x;
        let (dd_in, dd_t) = geometry.total_displacement();
        let state = tracker.update(dd_in)?;
        let actual = state.dphi_c1 + steering_phase(dd_t, cfg.theta_deg, cfg.f_c);

        let (jitter_amp, jitter_phase) =
            averaged_residual(&cfg.pll, cfg.cycles_per_position, &mut rng);
        let amp_secondary = T::lit(NODE_AMPLITUDE) * jitter_amp;
        let scale = |mut e: NodeEmission<T>| {
            e.amplitude = amp_secondary;
            e
        };

        let uncorrected = if cfg.correction.uncorrected() {
            let s = scale(secondary(cfg.f_c, beta, actual, T::zero(), jitter_phase));
            magnitude_of(&[primary(cfg.f_c), s])?
        } else {
            T::nan()
        };

        let measured = ranger.measure(d0 + dd_in, Some(prior), derive_seed(cfg.seed, k as u64));
        let (range_estimate, corrected, gc) = match (&measured, cfg.correction.corrected()) {
            (Ok(est), want) => {
                prior = est.distance;
                if want {
                    let disp = est.distance - calibration_range;
                    let correction = -estimated_carrier_phase(cfg, f_ref, disp)?;
                    let s = scale(secondary(cfg.f_c, beta, actual, correction, jitter_phase));
                    let pair = [primary(cfg.f_c), s];
                    let r = coherent_gain(&pair)?;
                    (est.distance, magnitude_of(&pair)?, r.gc)
                } else {
                    (est.distance, T::nan(), T::nan())
                }
            }
            (Err(_), _) => (T::nan(), T::nan(), T::nan()),
        };

        rows.push(TraceRow {
            position: x,
            amp_primary: T::lit(NODE_AMPLITUDE),
            amp_secondary,
            amp_sum_uncorrected: uncorrected,
            amp_sum_corrected: corrected,
            gc_corrected: gc,
            range_estimate,
        });
    }

    let (fine_sweep, total_swept_phase_deg) = fine_sweep(cfg, &link, beta)?;
    let null_positions = find_nulls(&fine_sweep);
    let predicted_null_positions = predict_nulls(cfg);

    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        fine_sweep,
        null_positions,
        predicted_null_positions,
        total_swept_phase_deg,
        calibration_range,
    })
}

/// Uncorrected amplitude on a dense grid through the sync chain, and the
/// total carrier phase swept by the end of the traverse.
fn fine_sweep<T: Real>(
    cfg: &ExperimentConfig<T>,
    link: &SyncLink<T>,
    beta: T,
) -> Result<(Vec<(T, T)>, T)> {
    let mut tracker = SyncTracker::new(link.clone(), cfg.f_c)?;
    let fine = cfg.step / T::lit(FINE_OVERSAMPLE as f64);
    let n = (cfg.traverse / fine + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let mut xs: Vec<T> = (0..=n).map(|i| fine * T::lit(i as f64)).collect();
    if cfg.traverse - xs[n] > T::lit(1e-12) {
        xs.push(cfg.traverse);
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut total = T::zero();
    for x in xs {
        let c1 = tracker.update(x)?.dphi_c1;
        total = c1 + steering_phase(x, cfg.theta_deg, cfg.f_c);
        let s = secondary(cfg.f_c, beta, total, T::zero(), T::zero());
        out.push((x, magnitude_of(&[primary(cfg.f_c), s])?));
    }
    Ok((out, total.abs().to_degrees()))
}

/// Centres of runs below [`NULL_FRACTION`] of the maximum.
pub fn find_nulls<T: Real>(trace: &[(T, T)]) -> Vec<T> {
    let max = trace.iter().fold(T::zero(), |m, p| m.max(p.1));
    let limit = T::lit(NULL_FRACTION) * max;
    let mut nulls = Vec::new();
    let mut run: Option<(T, T)> = None;
    for &(x, a) in trace {
        if a < limit {
            run = match run {
                Some((bx, ba)) if ba <= a => Some((bx, ba)),
                _ => Some((x, a)),
            };
        } else if let Some((bx, _)) = run.take() {
            nulls.push(bx);
        }
    }
    if let Some((bx, _)) = run {
        nulls.push(bx);
    }
    nulls
}

/// Positions where `Δφ_c ≡ π (mod 2π)` for the co-moving geometry.
pub fn predict_nulls<T: Real>(cfg: &ExperimentConfig<T>) -> Vec<T> {
    let rate = (T::tau() * cfg.f_c / T::speed_of_light()
        * (T::one() + cfg.theta_deg.to_radians().sin()))
    .abs();
    if rate == T::zero() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut m = 0usize;
    loop {
        let x = (T::two() * T::lit(m as f64) + T::one()) * T::PI() / rate;
        if x > cfg.traverse {
            break;
        }
        out.push(x);
        m += 1;
    }
    out
}

pub fn write_trace<T: Real, W: Write>(rows: &[TraceRow<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record(r.fields().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_trace<T: Real>(rows: &[TraceRow<T>], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace(rows, std::io::BufWriter::new(file))
}

pub fn parse_trace<T: Real, R: Read>(input: R) -> Result<Vec<TraceRow<T>>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(Error::Format(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 7 {
            return Err(Error::Format(format!(
                "expected 7 fields, got {}",
                rec.len()
            )));
        }
        let mut f = [T::zero(); 7];
        for (slot, field) in f.iter_mut().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number {field:?}")))?;
            *slot = T::lit(v);
        }
        rows.push(TraceRow::from_fields(f));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_positions() {
        let c = ExperimentConfig::<f64>::nominal(0);
        assert!((c.wavelength() - 0.19986).abs() < 1e-5);
        let p = c.positions();
        assert_eq!(p.len(), 10);
        assert!((p[9] - 0.18).abs() < 1e-12);
        let c = ExperimentConfig { traverse: 0.2, ..c };
        assert_eq!(c.positions().len(), 11);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = ExperimentConfig::<f64>::nominal(0);
        assert!(ExperimentConfig {
            step: 0.0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            traverse: 0.01,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(ExperimentConfig {
            calibration_pulses: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(base.validate().is_ok());
    }

    #[test]
    fn correction_names_parse() {
        for c in [Correction::On, Correction::Off, Correction::Both] {
            assert_eq!(c.name().parse::<Correction>().unwrap(), c);
        }
        assert!("maybe".parse::<Correction>().is_err());
    }

    #[test]
    fn predicted_nulls_at_quarter_wavelengths() {
        let c = ExperimentConfig::<f64>::nominal(0);
        let p = predict_nulls(&c);
        let l = c.wavelength();
        assert_eq!(p.len(), 2);
        assert!((p[0] - l / 4.0).abs() < 1e-12);
        assert!((p[1] - 3.0 * l / 4.0).abs() < 1e-12);
        let back = ExperimentConfig {
            theta_deg: 270.0,
            ..c
        };
        assert!(predict_nulls(&back).is_empty());
    }

    #[test]
    fn null_finder_picks_run_minima() {
        let trace = [
            (0.0, 1.0),
            (1.0, 0.05),
            (2.0, 0.01),
            (3.0, 0.5),
            (4.0, 0.02),
            (5.0, 1.0),
        ];
        assert_eq!(find_nulls(&trace), vec![2.0, 4.0]);
        assert!(find_nulls(&[(0.0, 1.0), (1.0, 0.5)]).is_empty());
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_trace::<f64, _>(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            TRACE_HEADER.join(",") + "\n"
        );
    }

    #[test]
    fn trace_round_trip() {
        let rows = vec![
            TraceRow {
                position: 0.02,
                amp_primary: 0.5,
                amp_secondary: 0.5,
                amp_sum_uncorrected: 0.123_456_789_012_345,
                amp_sum_corrected: 0.999_999_999_999,
                gc_corrected: 0.987_654_321_098_7,
                range_estimate: 1.520_000_000_123,
            },
            TraceRow {
                position: 0.04,
                amp_primary: 0.5,
                amp_secondary: 0.5,
                amp_sum_uncorrected: 1.0 / 3.0,
                amp_sum_corrected: f64::NAN,
                gc_corrected: f64::NAN,
                range_estimate: f64::NAN,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&rows, &mut buf).unwrap();
        let back: Vec<TraceRow<f64>> = parse_trace(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in a.fields().iter().zip(b.fields()) {
                assert!(x.is_nan() && y.is_nan() || (x - y).abs() <= 1e-12 * x.abs());
            }
        }
        assert!(back[1].is_flagged());
        assert!(parse_trace::<f64, _>("a,b\n1,2\n".as_bytes()).is_err());
    }
}
