//! Predictive bootstrap for NGR.
//!
//! The training cases are resampled with replacement `K` times, NGR is
//! refitted on each resample, and the `K` plug-in Normals are averaged into
//! an equally weighted Normal mixture. Replicate `k` draws from a random
//! stream derived from `(base_seed, k)` alone, so replicates can be fitted
//! in parallel and a replicate never depends on `K`.

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{NormalMixture, PredictiveDist};
use crate::error::{Error, Result};
use crate::ngr::{fit_ngr, NgrParams};
use crate::rng::{derive_seed, stream};
use crate::simplex::SimplexSettings;
use crate::training::TrainingSet;

/// Resamples allowed per replicate before giving up; with `K` replicates
/// the total is capped at `100 K`.
pub const MAX_DRAWS_PER_REPLICATE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub replicates: Vec<NgrParams>,
    /// Resamples discarded because of a degenerate design or a failed fit.
    pub failed_draws: usize,
    pub base_seed: u64,
}

/// Indices of one resample of size `n` drawn with replacement.
pub fn resample_indices<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Fits replicate `k`: returns its parameters and the number of discarded
/// draws.
pub fn fit_replicate(
    train: &TrainingSet,
    k: usize,
    base_seed: u64,
    opts: &SimplexSettings,
) -> Result<(NgrParams, usize)> {
    let mut rng = stream(derive_seed(base_seed, k as u64));
    for attempt in 0..MAX_DRAWS_PER_REPLICATE {
        let sample = train.select(&resample_indices(&mut rng, train.len()));
        if !sample.has_distinct_means() {
            continue;
        }
        match fit_ngr(&sample, opts) {
            Ok(fit) if fit.converged => return Ok((fit.params, attempt)),
            _ => continue,
        }
    }
    Err(Error::BootstrapFailure {
        replicate: k,
        attempts: MAX_DRAWS_PER_REPLICATE,
    })
}

pub fn bootstrap_fit(
    train: &TrainingSet,
    k: usize,
    base_seed: u64,
    opts: &SimplexSettings,
) -> Result<BootstrapEnsemble> {
    if k == 0 {
        return Err(Error::Input("bootstrap needs at least one replicate".into()));
    }
    if train.len() < crate::ngr::MIN_TRAINING {
        return Err(Error::InsufficientData {
            needed: crate::ngr::MIN_TRAINING,
            got: train.len(),
        });
    }
    if !train.has_distinct_means() {
        return Err(Error::DegenerateDesign);
    }
    let fitted: Vec<Result<(NgrParams, usize)>> = (0..k)
        .into_par_iter()
        .map(|j| fit_replicate(train, j, base_seed, opts))
        .collect();
    let mut replicates = Vec::with_capacity(k);
    let mut failed_draws = 0;
    for r in fitted {
        let (params, failed) = r?;
        replicates.push(params);
        failed_draws += failed;
    }
    Ok(BootstrapEnsemble {
        replicates,
        failed_draws,
        base_seed,
    })
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    /// Equal-weight mixture of the replicate plug-in Normals.
    pub fn predict(&self, m_star: f64, v_star: f64) -> Result<NormalMixture> {
        if self.replicates.is_empty() {
            return Err(Error::Input("empty bootstrap ensemble".into()));
        }
        let mut comps = Vec::with_capacity(self.replicates.len());
        for (k, p) in self.replicates.iter().enumerate() {
            let var = p.variance(v_star);
            if !(var > 0.0 && var.is_finite()) {
                return Err(Error::DegenerateVariance {
                    variance: var,
                    replicate: Some(k),
                });
            }
            comps.push((p.mean(m_star), var));
        }
        NormalMixture::equal_weights(&comps)
    }
}

pub fn bootstrap_predict(ens: &BootstrapEnsemble, m_star: f64, v_star: f64) -> Result<PredictiveDist> {
    ens.predict(m_star, v_star).map(Into::into)
}
