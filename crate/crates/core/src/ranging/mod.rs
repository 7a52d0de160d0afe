//! Inter-node ranging with the two-tone stepped-frequency waveform:
//! accuracy bounds, matched filtering and sub-sample peak refinement.

mod bounds;
mod correlate;
mod peak;
mod session;
pub mod spline;

pub use bounds::{crlb, max_coherent_frequency, second_moment, spectral_moments, CrlbReport};
pub use correlate::{matched_filter, Correlation, MatchedFilter, DIRECT_LIMIT};
pub use peak::{estimate_delay, DelayEstimator, PeakMethod, RangeEstimate};
pub use session::{run_ensemble, EnsembleStats, Ranger};
