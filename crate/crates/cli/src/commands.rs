//! Subcommand implementations. Everything printed to `out` is a function of
//! the inputs and the seed.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use coherent_swarm::channel::LinkBudget;
use coherent_swarm::experiment::{export_trace, run_experiment, ExperimentConfig};
use coherent_swarm::montecarlo::{
    linear_grid, requirement_contour, run_surface, McConfig, SigmaLimit,
};
use coherent_swarm::ranging::{crlb, max_coherent_frequency, run_ensemble, PeakMethod};
use coherent_swarm::sync::{ref_phase_shift, SyncLink, SyncTracker};
use coherent_swarm::waveform::{
    generate_ttsfw, write_binary, write_csv, SyncToneParams, TtsfwParams,
};

use crate::config::{self, parse_config, ConfigError, RunConfig};
use crate::repro::{render_table, run_all, ReproOptions};
use crate::svg::{line_chart, Series};
use crate::{Cli, Command, MethodArg, WaveFormat, EXIT_CHECK_FAILED, EXIT_OK, SEED_ENV};

#[derive(Debug)]
pub enum CliError {
    Config {
        path: Option<PathBuf>,
        error: ConfigError,
    },
    Usage(String),
    Io(std::io::Error),
    Sim(coherent_swarm::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config {
                path: Some(p),
                error,
            } => write!(f, "{}: {error}", p.display()),
            CliError::Config { path: None, error } => write!(f, "{error}"),
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<coherent_swarm::Error> for CliError {
    fn from(e: coherent_swarm::Error) -> Self {
        CliError::Sim(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_config(&text).map_err(|error| CliError::Config {
                path: Some(path.clone()),
                error,
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    cfg.verbosity = cfg.verbosity.max(cli.verbose);
    Ok(cfg)
}

fn recheck(cfg: &RunConfig) -> CliResult<()> {
    config::validate(cfg).map_err(|(key, msg)| CliError::Usage(format!("{key}: {msg}")))
}

/// Flag, then config, then environment, then a fresh draw (reported on
/// stderr).
fn resolve_seed(cfg: &RunConfig, err: &mut dyn Write) -> CliResult<u64> {
    let seed = match (cfg.seed, std::env::var(SEED_ENV)) {
        (Some(s), _) => s,
        (None, Ok(v)) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
        (None, Err(_)) => {
            let s: u64 = rand::random();
            writeln!(err, "seed: {s}")?;
            return Ok(s);
        }
    };
    if cfg.verbosity > 0 {
        writeln!(err, "seed: {seed}")?;
    }
    Ok(seed)
}

fn output_path(cfg: &RunConfig, p: &Path) -> CliResult<PathBuf> {
    let path = if p.is_absolute() {
        p.to_path_buf()
    } else {
        cfg.out_dir.join(p)
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(path)
}

fn waveform_params(cfg: &RunConfig) -> CliResult<TtsfwParams<f64>> {
    Ok(TtsfwParams::new(
        cfg.f1_hz,
        cfg.bw_hz,
        cfg.n_pulses,
        cfg.pri_s,
        cfg.duty,
        cfg.fs_hz,
    )?)
}

fn budget(cfg: &RunConfig, params: &TtsfwParams<f64>) -> LinkBudget<f64> {
    LinkBudget {
        snr_db: cfg.snr_db,
        noise_bw: params.sample_rate / 2.0,
        pulse_time: params.pulse_time(),
        pulse_count: params.n_pulses,
    }
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = load_config(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match &cli.command {
        Command::Crlb(a) => {
            if let Some(v) = a.snr_db {
                cfg.snr_db = v;
            }
            if let Some(v) = a.bw_hz {
                cfg.bw_hz = v;
            }
            if let Some(v) = a.n_pulses {
                cfg.n_pulses = v;
            }
            recheck(&cfg)?;
            crlb_cmd(&cfg, out)
        }
        Command::RangeSim(a) => {
            if let Some(v) = a.distance_m {
                cfg.distance_m = v;
            }
            if let Some(v) = a.trials {
                cfg.trials = v;
            }
            if let Some(v) = a.snr_db {
                cfg.snr_db = v;
            }
            if let Some(m) = a.method {
                cfg.peak_method = match m {
                    MethodArg::Spline => PeakMethod::default(),
                    MethodArg::Parabolic => PeakMethod::Parabolic,
                    MethodArg::FftZoom => PeakMethod::FftZoom { factor: 16 },
                };
            }
            recheck(&cfg)?;
            let seed = resolve_seed(&cfg, err)?;
            range_sim(&cfg, seed, a.out.as_deref(), out)
        }
        Command::SyncDemo(a) => {
            if let Some(v) = a.delta_d_m {
                cfg.delta_d_m = v;
            }
            if let Some(v) = a.fr1_hz {
                cfg.fr1_hz = v;
            }
            if let Some(v) = a.fr2_hz {
                cfg.fr2_hz = v;
            }
            recheck(&cfg)?;
            sync_demo(&cfg, a.steps.max(1), a.out.as_deref(), out)
        }
        Command::McGrid(a) => {
            if let Some(v) = a.iterations {
                cfg.mc_iterations = v;
            } else if a.desk {
                cfg.mc_iterations = 5000;
            }
            if let Some(v) = a.fc {
                cfg.fc_hz = v;
            }
            if let Some(v) = &a.thresholds {
                cfg.mc_thresholds = v.clone();
            }
            if let Some(v) = &a.error_model {
                cfg.mc_error_model = v.parse()?;
            }
            recheck(&cfg)?;
            let seed = resolve_seed(&cfg, err)?;
            mc_grid(&cfg, seed, a.out.as_deref(), a.svg.as_deref(), out)
        }
        Command::Experiment(a) => {
            if let Some(v) = a.fc {
                cfg.fc_hz = v;
            }
            if let Some(v) = a.theta {
                cfg.theta_deg = v;
            }
            if let Some(v) = a.snr_db {
                cfg.snr_db = v;
            }
            if let Some(v) = &a.correction {
                cfg.correction = v.parse()?;
            }
            if let Some(v) = a.step_m {
                cfg.step_m = v;
            }
            if let Some(v) = a.traverse_m {
                cfg.traverse_m = Some(v);
            }
            recheck(&cfg)?;
            let seed = resolve_seed(&cfg, err)?;
            experiment(&cfg, seed, a.out.as_deref(), a.svg.as_deref(), out)
        }
        Command::Waveform(a) => {
            recheck(&cfg)?;
            waveform(&cfg, a.format, a.out.as_deref(), out)
        }
        Command::Repro(a) => {
            recheck(&cfg)?;
            if !(a.tolerance_scale >= 0.0) {
                return Err(CliError::Usage(
                    "--tolerance-scale must be non-negative".into(),
                ));
            }
            let seed = resolve_seed(&cfg, err)?;
            let opts = ReproOptions {
                seed,
                tolerance_scale: a.tolerance_scale,
                ranging_trials: a.trials.max(2),
                mc_iterations: a.iterations.max(1),
            };
            let checks = run_all(&opts)?;
            out.write_all(render_table(&checks).as_bytes())?;
            Ok(if checks.iter().all(|c| c.pass) {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Config => {
            out.write_all(config::to_toml(&cfg).as_bytes())?;
            Ok(EXIT_OK)
        }
    }
}

fn crlb_cmd(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<i32> {
    let params = waveform_params(cfg)?;
    let b = budget(cfg, &params);
    let r = crlb(&params, &b)?;
    writeln!(out, "zeta_f_sq_hz2        {:.6e}", r.zeta_f_sq)?;
    writeln!(
        out,
        "processing_gain      {:.3} ({:.2} dB)",
        b.processing_gain(),
        b.processing_gain_db()
    )?;
    writeln!(out, "post_snr_db          {:.2}", b.post_snr_db())?;
    writeln!(out, "sigma_tau_s          {:.6e}", r.sigma_tau)?;
    writeln!(out, "sigma_tau_sq_s2      {:.6e}", r.sigma_tau_sq())?;
    writeln!(out, "sigma_x_m            {:.6e}", r.sigma_x)?;
    writeln!(
        out,
        "max_coherent_fc_hz   {:.6e}",
        max_coherent_frequency(r.sigma_x)?
    )?;
    Ok(EXIT_OK)
}

fn range_sim(
    cfg: &RunConfig,
    seed: u64,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let params = waveform_params(cfg)?;
    let b = budget(cfg, &params);
    let stats = run_ensemble(
        &params,
        &b,
        cfg.distance_m,
        cfg.trials,
        seed,
        cfg.peak_method,
    )?;
    writeln!(out, "trials          {}", cfg.trials)?;
    writeln!(out, "failures        {}", stats.failures)?;
    writeln!(out, "mean_m          {:.9}", stats.mean)?;
    writeln!(out, "bias_m          {:.6e}", stats.bias)?;
    writeln!(out, "std_m           {:.6e}", stats.std_dev)?;
    writeln!(out, "crlb_sigma_x_m  {:.6e}", stats.crlb.sigma_x)?;
    writeln!(out, "ratio           {:.4}", stats.efficiency_ratio())?;
    if let Some(p) = path {
        let mut w = csv::Writer::from_path(output_path(cfg, p)?).map_err(csv_err)?;
        w.write_record(["trial", "estimate_m", "error_m"])
            .map_err(csv_err)?;
        for (i, e) in stats.estimates.iter().enumerate() {
            w.write_record([
                i.to_string(),
                e.to_string(),
                (e - cfg.distance_m).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Sim(coherent_swarm::Error::from(e))
}

fn sync_demo(
    cfg: &RunConfig,
    steps: usize,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let mut link = SyncLink::nominal(cfg.initial_separation_m);
    link.tones = SyncToneParams::new(cfg.fr1_hz, cfg.fr2_hz)?.with_baseband(20e6);
    link.mixer.f_ref = cfg.f_ref_hz();
    link.mixer.lpf_cutoff = cfg.lpf_cutoff_hz;
    let mut tracker = SyncTracker::new(link, cfg.fc_hz)?;
    let mut rows = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let dd = cfg.delta_d_m * k as f64 / steps as f64;
        let s = tracker.update(dd)?;
        rows.push([
            dd,
            s.dphi_ref.to_degrees(),
            ref_phase_shift(dd, cfg.f_ref_hz()).to_degrees(),
            s.dphi_c1.to_degrees(),
        ]);
    }
    let header = ["delta_d_m", "dphi_ref_deg", "expected_deg", "dphi_c1_deg"];
    writeln!(
        out,
        "{:>12} {:>14} {:>14} {:>14}",
        header[0], header[1], header[2], header[3]
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:>12.4} {:>14.4} {:>14.4} {:>14.4}",
            r[0], r[1], r[2], r[3]
        )?;
    }
    if let Some(p) = path {
        let mut w = csv::Writer::from_path(output_path(cfg, p)?).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in &rows {
            w.write_record(r.iter().map(|v| v.to_string()))
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn mc_grid(
    cfg: &RunConfig,
    seed: u64,
    path: Option<&Path>,
    svg: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let mc = McConfig {
        iterations: cfg.mc_iterations,
        thresholds: cfg.mc_thresholds.clone(),
        theta_grid: linear_grid(
            0.0,
            360.0 - cfg.mc_theta_step_deg * 0.5,
            cfg.mc_theta_step_deg,
        ),
        sigma_grid: linear_grid(0.0, cfg.mc_sigma_max, cfg.mc_sigma_step),
        f_c: cfg.fc_hz,
        probability_target: cfg.mc_probability,
        master_seed: seed,
        error_model: cfg.mc_error_model,
    };
    let surface = run_surface(&mc)?;
    writeln!(
        out,
        "iterations {}  model {}  P target {}",
        mc.iterations,
        mc.error_model.name(),
        mc.probability_target
    )?;
    writeln!(
        out,
        "{:>9} {:>18} {:>18} {:>12}",
        "threshold", "sigma/lambda@90", "min sigma/lambda", "at theta"
    )?;
    let mut series = Vec::new();
    for &x in &mc.thresholds {
        let contour = requirement_contour(&surface, x, mc.probability_target)?;
        let at90 = contour
            .iter()
            .find(|c| (c.0 - 90.0).abs() < 1e-9)
            .map_or("n/a".to_owned(), |c| fmt_limit(c.1));
        let (theta_min, min) = contour.iter().fold((f64::NAN, f64::INFINITY), |acc, c| {
            let v = c.1.as_f64_or_inf();
            if v < acc.1 {
                (c.0, v)
            } else {
                acc
            }
        });
        writeln!(
            out,
            "{x:>9} {at90:>18} {:>18} {theta_min:>12}",
            fmt_limit(SigmaLimit::Limit(min))
        )?;
        series.push((
            format!("X = {x}"),
            contour
                .iter()
                .map(|c| c.1.value().map(|v| (c.0, v)))
                .collect::<Vec<_>>(),
        ));
    }
    if let Some(p) = path {
        surface.export_csv(&output_path(cfg, p)?)?;
    }
    if let Some(p) = svg {
        let s: Vec<Series<'_>> = series
            .iter()
            .map(|(l, pts)| Series {
                label: l,
                points: pts.clone(),
            })
            .collect();
        let chart = line_chart(
            &format!(
                "max sigma/lambda for P(Gc >= X) >= {}",
                mc.probability_target
            ),
            "steering angle (deg)",
            "sigma / lambda",
            &s,
        );
        std::fs::write(output_path(cfg, p)?, chart)?;
    }
    Ok(EXIT_OK)
}

fn fmt_limit(l: SigmaLimit<f64>) -> String {
    match l {
        SigmaLimit::Limit(v) if v.is_finite() => format!("{v:.5}"),
        _ => "unbounded".to_owned(),
    }
}

fn experiment(
    cfg: &RunConfig,
    seed: u64,
    path: Option<&Path>,
    svg: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let waveform = waveform_params(cfg)?;
    let ec = ExperimentConfig {
        f_c: cfg.fc_hz,
        traverse: cfg.traverse(),
        step: cfg.step_m,
        cycles_per_position: cfg.cycles_per_position,
        snr_db: cfg.snr_db,
        theta_deg: cfg.theta_deg,
        correction: cfg.correction,
        seed,
        initial_separation: cfg.initial_separation_m,
        calibration_pulses: cfg.calibration_pulses,
        waveform,
        ..ExperimentConfig::nominal(seed)
    };
    let report = run_experiment(&ec)?;
    writeln!(
        out,
        "{:>10} {:>10} {:>10} {:>12} {:>12} {:>10} {:>12}",
        "position", "primary", "secondary", "uncorrected", "corrected", "gc", "range_m"
    )?;
    for r in &report.rows {
        writeln!(
            out,
            "{:>10.4} {:>10.4} {:>10.4} {:>12.4} {:>12.4} {:>10.4} {:>12.6}",
            r.position,
            r.amp_primary,
            r.amp_secondary,
            r.amp_sum_uncorrected,
            r.amp_sum_corrected,
            r.gc_corrected,
            r.range_estimate
        )?;
    }
    writeln!(
        out,
        "nulls {} at {:?}",
        report.null_count(),
        report
            .null_positions
            .iter()
            .map(|x| (x * 1e4).round() / 1e4)
            .collect::<Vec<_>>()
    )?;
    writeln!(
        out,
        "predicted nulls {:?}",
        report
            .predicted_null_positions
            .iter()
            .map(|x| (x * 1e4).round() / 1e4)
            .collect::<Vec<_>>()
    )?;
    writeln!(
        out,
        "total swept phase {:.2} deg",
        report.total_swept_phase_deg
    )?;
    if let Some(g) = report.min_gc() {
        writeln!(out, "min corrected gc {g:.4}")?;
    }
    if let Some(p) = path {
        export_trace(&report.rows, &output_path(cfg, p)?)?;
    }
    if let Some(p) = svg {
        let col = |f: fn(&coherent_swarm::experiment::TraceRow<f64>) -> f64| {
            report
                .rows
                .iter()
                .map(|r| Some((r.position, f(r))))
                .collect::<Vec<_>>()
        };
        let series = [
            Series {
                label: "uncorrected (fine)",
                points: report.fine_sweep.iter().map(|p| Some(*p)).collect(),
            },
            Series {
                label: "uncorrected",
                points: col(|r| r.amp_sum_uncorrected),
            },
            Series {
                label: "corrected",
                points: col(|r| r.amp_sum_corrected),
            },
            Series {
                label: "primary",
                points: col(|r| r.amp_primary),
            },
            Series {
                label: "secondary",
                points: col(|r| r.amp_secondary),
            },
        ];
        let chart = line_chart(
            "received amplitude during traverse",
            "position (m)",
            "amplitude",
            &series,
        );
        std::fs::write(output_path(cfg, p)?, chart)?;
    }
    Ok(EXIT_OK)
}

fn waveform(
    cfg: &RunConfig,
    format: WaveFormat,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let params = waveform_params(cfg)?;
    let sig = generate_ttsfw(&params)?;
    writeln!(
        out,
        "samples {}  fs {} Hz  tones {} / {} Hz",
        sig.len(),
        params.sample_rate,
        params.f1,
        params.f2()
    )?;
    if let Some(p) = path {
        let file = std::fs::File::create(output_path(cfg, p)?)?;
        let w = std::io::BufWriter::new(file);
        match format {
            WaveFormat::Csv => write_csv(&sig, w)?,
            WaveFormat::Bin => write_binary(&sig, w)?,
        }
    }
    Ok(EXIT_OK)
}
