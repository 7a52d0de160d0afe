//! End-to-end ranging: waveform → repeater link → matched filter → estimate.

use rayon::prelude::*;

use super::bounds::{crlb, CrlbReport};
use super::correlate::MatchedFilter;
use super::peak::{DelayEstimator, PeakMethod, RangeEstimate};
use crate::channel::{propagate, round_trip_delay, LinkBudget};
use crate::rng::derive_seed;
use crate::waveform::{generate_ttsfw, TtsfwParams};
use crate::{Real, Result};

/// Ranging over the repeater link with a fixed waveform and budget.
#[derive(Debug, Clone)]
pub struct Ranger<T> {
    params: TtsfwParams<T>,
    filter: MatchedFilter<T>,
    channel_snr_db: T,
    method: PeakMethod,
}

impl<T: Real> Ranger<T> {
    /// The channel runs at the per-sample SNR that realizes the budget's
    /// post-processing SNR (see [`LinkBudget::channel_snr_db`]).
    pub fn new(params: TtsfwParams<T>, budget: &LinkBudget<T>, method: PeakMethod) -> Result<Self> {
        budget.validate()?;
        Self::with_channel_snr(params, budget.channel_snr_db(params.sample_rate), method)
    }

    /// Ranger with an explicit per-sample channel SNR; `+inf` disables noise.
    pub fn with_channel_snr(
        params: TtsfwParams<T>,
        channel_snr_db: T,
        method: PeakMethod,
    ) -> Result<Self> {
        let reference = generate_ttsfw(&params)?;
        Ok(Self {
            params,
            filter: MatchedFilter::new(reference),
            channel_snr_db,
            method,
        })
    }

    pub fn params(&self) -> &TtsfwParams<T> {
        &self.params
    }

    /// Lag (samples) of the round-trip echo for separation `d_in`.
    pub fn expected_lag(&self, d_in: T) -> f64 {
        (round_trip_delay(d_in) * self.params.sample_rate).as_f64()
    }

    /// One ranging pulse at true separation `d_in`. `prior` is the expected
    /// separation used to pick the main lobe; `None` falls back to the beat
    /// envelope.
    pub fn measure(&self, d_in: T, prior: Option<T>, seed: u64) -> Result<RangeEstimate<T>> {
        let rx = propagate(
            self.filter.reference(),
            T::two() * d_in,
            self.channel_snr_db,
            seed,
        )?;
        let corr = self.filter.apply(&rx)?;
        let beat = self.params.beat_period_samples().as_f64();
        let estimator = match prior {
            Some(p) => DelayEstimator::new(self.method).with_prior(self.expected_lag(p), beat),
            None => DelayEstimator::new(self.method).with_beat_period(beat),
        };
        estimator.estimate(&corr)
    }
}

/// Summary of a repeated-ranging ensemble at a fixed separation.
#[derive(Debug, Clone)]
pub struct EnsembleStats<T> {
    pub true_distance: T,
    pub estimates: Vec<T>,
    pub failures: usize,
    pub mean: T,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: T,
    pub bias: T,
    pub crlb: CrlbReport<T>,
}

impl<T: Real> EnsembleStats<T> {
    /// Empirical deviation over the bound's `σ_x`.
    pub fn efficiency_ratio(&self) -> T {
        self.std_dev / self.crlb.sigma_x
    }
}

/// `trials` independent ranging pulses at separation `distance`, trial `i`
/// seeded from `derive_seed(seed, i)`. The true separation is the prior.
pub fn run_ensemble<T: Real>(
    params: &TtsfwParams<T>,
    budget: &LinkBudget<T>,
    distance: T,
    trials: usize,
    seed: u64,
    method: PeakMethod,
) -> Result<EnsembleStats<T>> {
    let ranger = Ranger::new(*params, budget, method)?;
    let bound = crlb(params, budget)?;
    let results: Vec<Option<T>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            ranger
                .measure(distance, Some(distance), derive_seed(seed, i as u64))
                .ok()
                .map(|e| e.distance)
        })
        .collect();
    let estimates: Vec<T> = results.iter().flatten().copied().collect();
    let failures = trials - estimates.len();
    let n = T::from_usize(estimates.len().max(1)).unwrap();
    let mean = estimates.iter().fold(T::zero(), |a, x| a + *x) / n;
    let var = if estimates.len() > 1 {
        estimates
            .iter()
            .fold(T::zero(), |a, x| a + (*x - mean).powi(2))
            / T::from_usize(estimates.len() - 1).unwrap()
    } else {
        T::zero()
    };
    Ok(EnsembleStats {
        true_distance: distance,
        estimates,
        failures,
        mean,
        std_dev: var.sqrt(),
        bias: mean - distance,
        crlb: bound,
    })
}
