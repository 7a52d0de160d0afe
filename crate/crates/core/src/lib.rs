//! Two-node open-loop distributed beamforming simulator.
//!
//! The pieces follow the signal path: a two-tone stepped-frequency ranging
//! waveform ([`waveform`]), the repeater link ([`channel`]), matched-filter
//! delay estimation and its accuracy bound ([`ranging`]), wireless frequency
//! and phase transfer through a self-mixing circuit ([`sync`]), phasor
//! summation at the target ([`beamform`]), the coherent-gain requirement
//! surface ([`montecarlo`]) and a stepped-motion beamforming run
//! ([`experiment`]).
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar for common uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod channel;
pub mod dsp;
mod error;
pub mod experiment;
pub mod montecarlo;
pub mod ranging;
mod real;
pub mod rng;
pub mod sync;
pub mod waveform;

pub use error::{Error, Result};
pub use real::{db_to_linear, linear_to_db, wrap_phase, Real, SPEED_OF_LIGHT};

pub use beamform::{
    coherent_gain, coherent_sum, steering_phase, total_phase, GcResult, NodeEmission,
};
pub use channel::{add_awgn, delay_signal, propagate, round_trip_delay, LinkBudget, NodeGeometry};
pub use experiment::{
    export_trace, parse_trace, run_experiment, Correction, ExperimentConfig, ExperimentReport,
    TraceRow,
};
pub use montecarlo::{
    analytic_probability, requirement_contour, run_surface, ErrorModel, GcSurface, McConfig,
    SigmaLimit,
};
pub use ranging::{
    crlb, matched_filter, max_coherent_frequency, second_moment, CrlbReport, DelayEstimator,
    PeakMethod, RangeEstimate, Ranger,
};
pub use sync::{
    carrier_phase_shift_sync, ref_phase_shift, self_mix, tone_phase_shifts, MixerChainConfig,
    PhaseState, SyncLink, SyncTracker,
};
pub use waveform::{
    generate_sync_tones, generate_ttsfw, SampledSignal, SyncToneParams, TtsfwParams,
};

pub type Signal64 = SampledSignal<f64>;
pub type Signal32 = SampledSignal<f32>;
pub type Ttsfw64 = TtsfwParams<f64>;
pub type Ttsfw32 = TtsfwParams<f32>;
pub type Budget64 = LinkBudget<f64>;
pub type Ranger64 = Ranger<f64>;
pub type Emission64 = NodeEmission<f64>;
pub type McConfig64 = McConfig<f64>;
pub type Surface64 = GcSurface<f64>;
pub type Experiment64 = ExperimentConfig<f64>;
pub type Report64 = ExperimentReport<f64>;
pub type Row64 = TraceRow<f64>;
