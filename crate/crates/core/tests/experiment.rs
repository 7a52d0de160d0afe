use coherent_swarm::experiment::{
    export_trace, parse_trace, run_experiment, Correction, ExperimentConfig,
};
use rayon::prelude::*;

#[test]
fn default_run_has_two_nulls_and_high_corrected_gain() {
    let report = run_experiment(&ExperimentConfig::<f64>::nominal(1)).unwrap();
    println!(
        "nulls {:?} predicted {:?} swept {} min gc {:?}",
        report.null_positions,
        report.predicted_null_positions,
        report.total_swept_phase_deg,
        report.min_gc()
    );
    assert_eq!(report.rows.len(), 10);
    assert_eq!(report.null_count(), 2);
    assert!((report.total_swept_phase_deg - 720.0).abs() < 0.5);
    let step = report.config.step;
    for (seen, want) in report
        .null_positions
        .iter()
        .zip(&report.predicted_null_positions)
    {
        assert!((seen - want).abs() <= step);
    }
    assert!(report.min_gc().unwrap() >= 0.9);
    for r in &report.rows {
        assert!(!r.is_flagged());
        let bound = r.amp_primary + r.amp_secondary + 1e-12;
        assert!(r.amp_sum_corrected <= bound && r.amp_sum_uncorrected <= bound);
    }
}

#[test]
fn noiseless_run_is_perfectly_coherent() {
    let cfg = ExperimentConfig {
        snr_db: f64::INFINITY,
        ..ExperimentConfig::nominal(3)
    };
    let report = run_experiment(&cfg).unwrap();
    for r in &report.rows {
        assert!((r.gc_corrected - 1.0).abs() < 1e-6, "{r:?}");
        assert!((r.amp_sum_corrected - 1.0).abs() < 1e-6);
    }
}

#[test]
fn correction_modes_blank_inactive_columns() {
    let on = run_experiment(&ExperimentConfig {
        correction: Correction::On,
        ..ExperimentConfig::<f64>::nominal(5)
    })
    .unwrap();
    assert!(on
        .rows
        .iter()
        .all(|r| r.amp_sum_uncorrected.is_nan() && !r.gc_corrected.is_nan()));
    let off = run_experiment(&ExperimentConfig {
        correction: Correction::Off,
        ..ExperimentConfig::<f64>::nominal(5)
    })
    .unwrap();
    assert!(off
        .rows
        .iter()
        .all(|r| r.gc_corrected.is_nan() && !r.amp_sum_uncorrected.is_nan()));
    assert!(off.rows.iter().all(|r| !r.range_estimate.is_nan()));
}

#[test]
fn back_fire_motion_does_not_null() {
    let cfg = ExperimentConfig {
        theta_deg: 270.0,
        ..ExperimentConfig::<f64>::nominal(2)
    };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.null_count(), 0);
    assert!(report.total_swept_phase_deg < 0.5);
}

#[test]
fn runs_are_deterministic() {
    let a = run_experiment(&ExperimentConfig::<f64>::nominal(9)).unwrap();
    let b = run_experiment(&ExperimentConfig::<f64>::nominal(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    export_trace(&a.rows, &pa).unwrap();
    export_trace(&b.rows, &pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
}

#[test]
fn twenty_centimetre_traverse_exports_eleven_rows() {
    let cfg = ExperimentConfig {
        traverse: 0.2,
        ..ExperimentConfig::<f64>::nominal(4)
    };
    let report = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    export_trace(&report.rows, &path).unwrap();
    let back: Vec<_> = parse_trace::<f64, _>(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), 11);
    assert_eq!(back, report.rows);
}

#[test]
fn corrected_gain_holds_across_seeds() {
    let passes: Vec<bool> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let r = run_experiment(&ExperimentConfig::<f64>::nominal(1000 + seed)).unwrap();
            r.min_gc().unwrap() >= 0.9
        })
        .collect();
    let rate = passes.iter().filter(|p| **p).count() as f64 / passes.len() as f64;
    println!("seeds with min gc >= 0.9: {rate}");
    assert!(rate >= 0.95);
}
