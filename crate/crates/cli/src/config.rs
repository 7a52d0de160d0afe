//! Flat `key = value` run configuration. Physical quantities carry their
//! unit in the key name (`fc_hz`, `step_m`, `snr_db`).

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use coherent_swarm::experiment::Correction;
use coherent_swarm::montecarlo::ErrorModel;
use coherent_swarm::ranging::PeakMethod;
use toml::de::{DeTable, DeValue};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub verbosity: u8,

    pub f1_hz: f64,
    pub bw_hz: f64,
    pub n_pulses: usize,
    pub pri_s: f64,
    pub duty: f64,
    pub fs_hz: f64,
    pub snr_db: f64,

    pub distance_m: f64,
    pub trials: usize,
    pub peak_method: PeakMethod,

    pub fr1_hz: f64,
    pub fr2_hz: f64,
    pub lpf_cutoff_hz: f64,
    pub delta_d_m: f64,

    pub fc_hz: f64,
    pub theta_deg: f64,
    pub step_m: f64,
    /// One carrier wavelength when unset.
    pub traverse_m: Option<f64>,
    pub cycles_per_position: usize,
    pub correction: Correction,
    pub initial_separation_m: f64,
    pub calibration_pulses: usize,

    pub mc_iterations: usize,
    pub mc_thresholds: Vec<f64>,
    pub mc_theta_step_deg: f64,
    pub mc_sigma_max: f64,
    pub mc_sigma_step: f64,
    pub mc_probability: f64,
    pub mc_error_model: ErrorModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out_dir: PathBuf::from("."),
            verbosity: 0,
            f1_hz: 0.5e6,
            bw_hz: 4e6,
            n_pulses: 1,
            pri_s: 1e-3,
            duty: 0.5,
            fs_hz: 25e6,
            snr_db: 30.0,
            distance_m: 1.5,
            trials: 1000,
            peak_method: PeakMethod::default(),
            fr1_hz: 4.30e9,
            fr2_hz: 4.31e9,
            lpf_cutoff_hz: 10.7e6,
            delta_d_m: 1.0,
            fc_hz: 1.5e9,
            theta_deg: 90.0,
            step_m: 0.02,
            traverse_m: None,
            cycles_per_position: 1500,
            correction: Correction::Both,
            initial_separation_m: 1.5,
            calibration_pulses: 32,
            mc_iterations: 50_000,
            mc_thresholds: vec![0.6, 0.7, 0.8, 0.9],
            mc_theta_step_deg: 1.0,
            mc_sigma_max: 0.1,
            mc_sigma_step: 0.005,
            mc_probability: 0.9,
            mc_error_model: ErrorModel::Shared,
        }
    }
}

impl RunConfig {
    pub fn f_ref_hz(&self) -> f64 {
        self.fr2_hz - self.fr1_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        coherent_swarm::SPEED_OF_LIGHT / self.fc_hz
    }

    pub fn traverse(&self) -> f64 {
        self.traverse_m.unwrap_or_else(|| self.wavelength_m())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UnknownKey,
    UnitMismatch,
    Type,
    Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub kind: ErrorKind,
    pub line: usize,
    pub column: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy)]
enum Kind {
    Float,
    Count,
    Seed,
    Text,
    FloatList,
}

/// Accepted keys. The unit, if any, is the last `_` component.
const KEYS: &[(&str, Kind)] = &[
    ("seed", Kind::Seed),
    ("out_dir", Kind::Text),
    ("verbosity", Kind::Count),
    ("f1_hz", Kind::Float),
    ("bw_hz", Kind::Float),
    ("n_pulses", Kind::Count),
    ("pri_s", Kind::Float),
    ("duty", Kind::Float),
    ("fs_hz", Kind::Float),
    ("snr_db", Kind::Float),
    ("distance_m", Kind::Float),
    ("trials", Kind::Count),
    ("peak_method", Kind::Text),
    ("fr1_hz", Kind::Float),
    ("fr2_hz", Kind::Float),
    ("lpf_cutoff_hz", Kind::Float),
    ("delta_d_m", Kind::Float),
    ("fc_hz", Kind::Float),
    ("theta_deg", Kind::Float),
    ("step_m", Kind::Float),
    ("traverse_m", Kind::Float),
    ("cycles_per_position", Kind::Count),
    ("correction", Kind::Text),
    ("initial_separation_m", Kind::Float),
    ("calibration_pulses", Kind::Count),
    ("mc_iterations", Kind::Count),
    ("mc_thresholds", Kind::FloatList),
    ("mc_theta_step_deg", Kind::Float),
    ("mc_sigma_max", Kind::Float),
    ("mc_sigma_step", Kind::Float),
    ("mc_probability", Kind::Float),
    ("mc_error_model", Kind::Text),
];

const UNIT_SUFFIXES: &[&str] = &[
    "hz", "khz", "mhz", "ghz", "s", "ms", "us", "ns", "m", "cm", "mm", "km", "db", "dbm", "deg",
    "rad",
];

fn unit_of(key: &str) -> Option<&str> {
    key.rsplit_once('_')
        .map(|(_, u)| u)
        .filter(|u| UNIT_SUFFIXES.contains(u))
}

fn stem_of(key: &str) -> &str {
    match unit_of(key) {
        Some(u) => &key[..key.len() - u.len() - 1],
        None => key,
    }
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn error(
        &self,
        kind: ErrorKind,
        span: Range<usize>,
        key: Option<&str>,
        message: impl Into<String>,
    ) -> ConfigError {
        let (line, column) = self.position(span.start);
        ConfigError {
            kind,
            line,
            column,
            key: key.map(str::to_owned),
            message: message.into(),
        }
    }
}

fn as_float(v: &DeValue<'_>) -> Option<f64> {
    match v {
        DeValue::Float(f) => f.as_str().replace('_', "").parse().ok(),
        DeValue::Integer(i) => i64::from_str_radix(&i.as_str().replace('_', ""), i.radix())
            .ok()
            .map(|x| x as f64),
        _ => None,
    }
}

fn as_integer(v: &DeValue<'_>) -> Option<i128> {
    match v {
        DeValue::Integer(i) => i128::from_str_radix(&i.as_str().replace('_', ""), i.radix()).ok(),
        _ => None,
    }
}

fn parse_method(s: &str) -> Option<PeakMethod> {
    match s {
        "spline" => Some(PeakMethod::default()),
        "parabolic" => Some(PeakMethod::Parabolic),
        "fft_zoom" => Some(PeakMethod::FftZoom { factor: 16 }),
        _ => None,
    }
}

/// Parses and validates a config. Missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let loc = Locator { text };
    let table: Spanned<DeTable<'_>> = DeTable::parse(text).map_err(|e| {
        let span = e.span().unwrap_or(0..0);
        loc.error(ErrorKind::Syntax, span, None, e.message().to_owned())
    })?;
    let mut cfg = RunConfig::default();
    for (key, value) in table.get_ref().iter() {
        let name = key.get_ref().as_ref();
        let Some(&(_, kind)) = KEYS.iter().find(|(k, _)| *k == name) else {
            let stem = stem_of(name);
            if let Some((known, _)) = KEYS.iter().find(|(k, _)| {
                unit_of(name).is_some() && stem_of(k) == stem && unit_of(k).is_some()
            }) {
                return Err(loc.error(
                    ErrorKind::UnitMismatch,
                    key.span(),
                    Some(name),
                    format!("unit mismatch, expected `{known}`"),
                ));
            }
            return Err(loc.error(ErrorKind::UnknownKey, key.span(), Some(name), "unknown key"));
        };
        assign(&mut cfg, name, kind, value, &loc)?;
    }
    validate(&cfg).map_err(|(name, msg)| {
        let span = table
            .get_ref()
            .iter()
            .find(|(k, _)| k.get_ref().as_ref() == name)
            .map_or(0..0, |(_, v)| v.span());
        loc.error(ErrorKind::Range, span, Some(name), msg)
    })?;
    Ok(cfg)
}

fn assign(
    cfg: &mut RunConfig,
    name: &str,
    kind: Kind,
    value: &Spanned<DeValue<'_>>,
    loc: &Locator<'_>,
) -> Result<(), ConfigError> {
    let span = value.span();
    let v = value.get_ref();
    let type_err = |what: &str| {
        loc.error(
            ErrorKind::Type,
            span.clone(),
            Some(name),
            format!("expected {what}"),
        )
    };
    let range_err =
        |msg: &str| loc.error(ErrorKind::Range, span.clone(), Some(name), msg.to_owned());
    match kind {
        Kind::Float => {
            let x = as_float(v).ok_or_else(|| type_err("a number"))?;
            if !x.is_finite() {
                return Err(range_err("must be finite"));
            }
            set_float(cfg, name, x);
        }
        Kind::Count | Kind::Seed => {
            let x = as_integer(v).ok_or_else(|| type_err("an integer"))?;
            if x < 0 || x > u64::MAX as i128 {
                return Err(range_err("must be a non-negative integer"));
            }
            match name {
                "seed" => cfg.seed = Some(x as u64),
                "verbosity" => cfg.verbosity = x.min(255) as u8,
                "n_pulses" => cfg.n_pulses = x as usize,
                "trials" => cfg.trials = x as usize,
                "cycles_per_position" => cfg.cycles_per_position = x as usize,
                "calibration_pulses" => cfg.calibration_pulses = x as usize,
                "mc_iterations" => cfg.mc_iterations = x as usize,
                _ => unreachable!("count key {name}"),
            }
        }
        Kind::Text => {
            let DeValue::String(s) = v else {
                return Err(type_err("a string"));
            };
            match name {
                "out_dir" => cfg.out_dir = PathBuf::from(s.as_ref()),
                "peak_method" => {
                    cfg.peak_method = parse_method(s)
                        .ok_or_else(|| range_err("expected spline, parabolic or fft_zoom"))?
                }
                "correction" => {
                    cfg.correction = s
                        .parse()
                        .map_err(|_| range_err("expected on, off or both"))?
                }
                "mc_error_model" => {
                    cfg.mc_error_model = s
                        .parse()
                        .map_err(|_| range_err("expected shared or independent"))?
                }
                _ => unreachable!("text key {name}"),
            }
        }
        Kind::FloatList => {
            let DeValue::Array(items) = v else {
                return Err(type_err("an array of numbers"));
            };
            let mut out = Vec::with_capacity(items.len());
            for item in items.iter() {
                out.push(as_float(item.get_ref()).ok_or_else(|| {
                    loc.error(
                        ErrorKind::Type,
                        item.span(),
                        Some(name),
                        "expected a number",
                    )
                })?);
            }
            cfg.mc_thresholds = out;
        }
    }
    Ok(())
}

fn set_float(cfg: &mut RunConfig, name: &str, x: f64) {
    let slot = match name {
        "f1_hz" => &mut cfg.f1_hz,
        "bw_hz" => &mut cfg.bw_hz,
        "pri_s" => &mut cfg.pri_s,
        "duty" => &mut cfg.duty,
        "fs_hz" => &mut cfg.fs_hz,
        "snr_db" => &mut cfg.snr_db,
        "distance_m" => &mut cfg.distance_m,
        "fr1_hz" => &mut cfg.fr1_hz,
        "fr2_hz" => &mut cfg.fr2_hz,
        "lpf_cutoff_hz" => &mut cfg.lpf_cutoff_hz,
        "delta_d_m" => &mut cfg.delta_d_m,
        "fc_hz" => &mut cfg.fc_hz,
        "theta_deg" => &mut cfg.theta_deg,
        "step_m" => &mut cfg.step_m,
        "traverse_m" => {
            cfg.traverse_m = Some(x);
            return;
        }
        "initial_separation_m" => &mut cfg.initial_separation_m,
        "mc_theta_step_deg" => &mut cfg.mc_theta_step_deg,
        "mc_sigma_max" => &mut cfg.mc_sigma_max,
        "mc_sigma_step" => &mut cfg.mc_sigma_step,
        "mc_probability" => &mut cfg.mc_probability,
        _ => unreachable!("float key {name}"),
    };
    *slot = x;
}

/// Range checks, returning the offending key.
pub fn validate(cfg: &RunConfig) -> Result<(), (&'static str, String)> {
    let positive: [(&'static str, f64); 12] = [
        ("bw_hz", cfg.bw_hz),
        ("pri_s", cfg.pri_s),
        ("fs_hz", cfg.fs_hz),
        ("distance_m", cfg.distance_m),
        ("fr1_hz", cfg.fr1_hz),
        ("lpf_cutoff_hz", cfg.lpf_cutoff_hz),
        ("fc_hz", cfg.fc_hz),
        ("step_m", cfg.step_m),
        ("initial_separation_m", cfg.initial_separation_m),
        ("mc_theta_step_deg", cfg.mc_theta_step_deg),
        ("mc_sigma_step", cfg.mc_sigma_step),
        ("mc_probability", cfg.mc_probability),
    ];
    for (name, v) in positive {
        if !(v > 0.0) {
            return Err((name, format!("must be positive, got {v}")));
        }
    }
    if !(cfg.f1_hz >= 0.0) {
        return Err(("f1_hz", "must be non-negative".into()));
    }
    if !(cfg.duty > 0.0 && cfg.duty <= 1.0) {
        return Err(("duty", format!("must lie in (0, 1], got {}", cfg.duty)));
    }
    if !(cfg.fr2_hz > cfg.fr1_hz) {
        return Err(("fr2_hz", "must exceed fr1_hz".into()));
    }
    if !(cfg.lpf_cutoff_hz > cfg.f_ref_hz()) {
        return Err(("lpf_cutoff_hz", "must exceed fr2_hz - fr1_hz".into()));
    }
    if !(cfg.delta_d_m >= 0.0) {
        return Err(("delta_d_m", "must be non-negative".into()));
    }
    if let Some(t) = cfg.traverse_m {
        if !(t >= cfg.step_m) {
            return Err(("traverse_m", "must be at least step_m".into()));
        }
    }
    if !(cfg.mc_sigma_max >= 0.0) {
        return Err(("mc_sigma_max", "must be non-negative".into()));
    }
    if cfg.mc_probability > 1.0 {
        return Err(("mc_probability", "must not exceed 1".into()));
    }
    let counts = [
        ("n_pulses", cfg.n_pulses),
        ("trials", cfg.trials),
        ("cycles_per_position", cfg.cycles_per_position),
        ("calibration_pulses", cfg.calibration_pulses),
        ("mc_iterations", cfg.mc_iterations),
    ];
    for (name, v) in counts {
        if v == 0 {
            return Err((name, "must be at least 1".into()));
        }
    }
    if cfg.mc_thresholds.is_empty() || cfg.mc_thresholds.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(("mc_thresholds", "values must lie in (0, 1]".into()));
    }
    if cfg.mc_thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(("mc_thresholds", "must be strictly ascending".into()));
    }
    Ok(())
}

fn method_name(m: PeakMethod) -> &'static str {
    m.name()
}

/// Writes every key, so parsing the result reproduces `cfg`.
pub fn to_toml(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    let f = |x: f64| format!("{x:?}");
    let s = |x: &str| toml::Value::String(x.to_owned()).to_string();
    if let Some(seed) = cfg.seed {
        line("seed", seed.to_string());
    }
    line("out_dir", s(&cfg.out_dir.to_string_lossy()));
    line("verbosity", cfg.verbosity.to_string());
    line("f1_hz", f(cfg.f1_hz));
    line("bw_hz", f(cfg.bw_hz));
    line("n_pulses", cfg.n_pulses.to_string());
    line("pri_s", f(cfg.pri_s));
    line("duty", f(cfg.duty));
    line("fs_hz", f(cfg.fs_hz));
    line("snr_db", f(cfg.snr_db));
    line("distance_m", f(cfg.distance_m));
    line("trials", cfg.trials.to_string());
    line("peak_method", s(method_name(cfg.peak_method)));
    line("fr1_hz", f(cfg.fr1_hz));
    line("fr2_hz", f(cfg.fr2_hz));
    line("lpf_cutoff_hz", f(cfg.lpf_cutoff_hz));
    line("delta_d_m", f(cfg.delta_d_m));
    line("fc_hz", f(cfg.fc_hz));
    line("theta_deg", f(cfg.theta_deg));
    line("step_m", f(cfg.step_m));
    if let Some(t) = cfg.traverse_m {
        line("traverse_m", f(t));
    }
    line("cycles_per_position", cfg.cycles_per_position.to_string());
    line("correction", s(cfg.correction.name()));
    line("initial_separation_m", f(cfg.initial_separation_m));
    line("calibration_pulses", cfg.calibration_pulses.to_string());
    line("mc_iterations", cfg.mc_iterations.to_string());
    let list: Vec<String> = cfg.mc_thresholds.iter().map(|x| f(*x)).collect();
    line("mc_thresholds", format!("[{}]", list.join(", ")));
    line("mc_theta_step_deg", f(cfg.mc_theta_step_deg));
    line("mc_sigma_max", f(cfg.mc_sigma_max));
    line("mc_sigma_step", f(cfg.mc_sigma_step));
    line("mc_probability", f(cfg.mc_probability));
    line("mc_error_model", s(cfg.mc_error_model.name()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.fc_hz, 1.5e9);
        assert_eq!(cfg.snr_db, 30.0);
        assert_eq!(cfg.f_ref_hz(), 10e6);
    }

    #[test]
    fn values_are_read() {
        let cfg = parse_config("fc_hz = 2.4e9\nseed = 42\nmc_thresholds = [0.5, 0.9]\ncorrection = \"off\"\nn_pulses = 2\n").unwrap();
        assert_eq!(cfg.fc_hz, 2.4e9);
        assert_eq!(cfg.seed, Some(42));
        assert_eq!(cfg.mc_thresholds, vec![0.5, 0.9]);
        assert_eq!(cfg.correction, Correction::Off);
        assert_eq!(cfg.n_pulses, 2);
        assert_eq!(parse_config("fc_hz = 1_500_000_000").unwrap().fc_hz, 1.5e9);
    }

    #[test]
    fn negative_frequency_is_range_error() {
        let e = parse_config("snr_db = 20\nfc_hz = -1\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Range);
        assert_eq!(e.key.as_deref(), Some("fc_hz"));
        assert_eq!((e.line, e.column), (2, 9));
        assert!(e.to_string().contains("fc_hz"));
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse_config("fc_hz = 1e9\n  colour = 3\n").unwrap_err();
        assert_eq!(e.kind, ErrorKind::UnknownKey);
        assert_eq!((e.line, e.column), (2, 3));
    }

    #[test]
    fn wrong_unit_suffix_rejected() {
        let e = parse_config("fc_ghz = 1.5").unwrap_err();
        assert_eq!(e.kind, ErrorKind::UnitMismatch);
        assert!(e.message.contains("fc_hz"));
        let e = parse_config("step_cm = 2").unwrap_err();
        assert_eq!(e.kind, ErrorKind::UnitMismatch);
    }

    #[test]
    fn type_and_syntax_errors() {
        assert_eq!(
            parse_config("trials = 1.5").unwrap_err().kind,
            ErrorKind::Type
        );
        assert_eq!(
            parse_config("fc_hz = \"fast\"").unwrap_err().kind,
            ErrorKind::Type
        );
        let e = parse_config("fc_hz = = 3").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Syntax);
        assert_eq!(e.line, 1);
        assert_eq!(
            parse_config("correction = \"sometimes\"").unwrap_err().kind,
            ErrorKind::Range
        );
        assert_eq!(
            parse_config("mc_thresholds = [0.9, 0.6]").unwrap_err().kind,
            ErrorKind::Range
        );
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        assert_eq!(parse_config(&to_toml(&cfg)).unwrap(), cfg);
        cfg.seed = Some(7);
        cfg.traverse_m = Some(0.2);
        cfg.fc_hz = 2.45e9;
        cfg.theta_deg = 37.5;
        cfg.mc_thresholds = vec![0.75];
        cfg.correction = Correction::On;
        cfg.mc_error_model = ErrorModel::Independent;
        cfg.peak_method = PeakMethod::Parabolic;
        cfg.out_dir = PathBuf::from("runs/a \"b\"");
        assert_eq!(parse_config(&to_toml(&cfg)).unwrap(), cfg);
    }
}
