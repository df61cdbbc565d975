//! Monte Carlo simulation of the discrimination experiment.
//!
//! Trials are split into fixed-size partitions. Partition `p` draws from a
//! `ChaCha8Rng` seeded with the user seed on stream `p`, so the counts are
//! identical whether partitions run sequentially or on a thread pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::solver::Measurement;
use crate::states::DiscriminationInstance;

/// Outcome probabilities with magnitude below this are set to zero; anything
/// more negative is an infeasible measurement.
pub const PROBABILITY_CLIP: f64 = 1e-9;
/// Trials per independently seeded partition.
pub const PARTITION_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("InfeasibleMeasurement: Tr(rho{state} Pi{outcome}) = {probability:e}")]
    InfeasibleMeasurement {
        state: usize,
        outcome: usize,
        probability: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub trials: u64,
    /// `counts[outcome][state - 1]`, outcomes 0 (inconclusive), 1, 2.
    pub counts: [[u64; 2]; 3],
    pub empirical_failure: f64,
    pub empirical_error: f64,
    /// Binomial standard error of the empirical failure rate.
    pub stderr_failure: f64,
    /// `eta1 Tr(rho1 Pi0) + eta2 Tr(rho2 Pi0)`
    pub analytic_failure: f64,
    /// `|empirical - analytic| <= 5 stderr`
    pub within_five_sigma: bool,
}

/// `probabilities[state][outcome] = Tr(rho_state Pi_outcome)` after clipping.
pub fn outcome_probabilities(
    inst: &DiscriminationInstance,
    m: &Measurement,
) -> Result<[[f64; 3]; 2], SampleError> {
    let ops = [&m.pi0, &m.pi1, &m.pi2];
    let rhos = [inst.rho1.matrix(), inst.rho2.matrix()];
    let mut out = [[0.0; 3]; 2];
    for (k, rho) in rhos.iter().enumerate() {
        for (j, op) in ops.iter().enumerate() {
            let p = rho.trace_product(op).re;
            if p < -PROBABILITY_CLIP {
                return Err(SampleError::InfeasibleMeasurement {
                    state: k + 1,
                    outcome: j,
                    probability: p,
                });
            }
            out[k][j] = if p.abs() <= PROBABILITY_CLIP { 0.0 } else { p };
        }
        let total: f64 = out[k].iter().sum();
        for p in out[k].iter_mut() {
            *p /= total;
        }
    }
    Ok(out)
}

fn run_partition(probs: &[[f64; 3]; 2], eta1: f64, seed: u64, partition: u64, trials: u64) -> [[u64; 2]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(partition);
    let mut counts = [[0u64; 2]; 3];
    for _ in 0..trials {
        let state = usize::from(rng.gen::<f64>() >= eta1);
        let u: f64 = rng.gen();
        let p = &probs[state];
        let outcome = if u < p[0] {
            0
        } else if u < p[0] + p[1] {
            1
        } else if p[2] > 0.0 {
            2
        } else if p[1] > 0.0 {
            1
        } else {
            0
        };
        counts[outcome][state] += 1;
    }
    counts
}

pub fn sample(
    inst: &DiscriminationInstance,
    m: &Measurement,
    trials: u64,
    seed: u64,
) -> Result<SampleReport, SampleError> {
    sample_with(inst, m, trials, seed, false)
}

/// As [`sample`], optionally spreading partitions over the rayon pool.
pub fn sample_with(
    inst: &DiscriminationInstance,
    m: &Measurement,
    trials: u64,
    seed: u64,
    parallel: bool,
) -> Result<SampleReport, SampleError> {
    let probs = outcome_probabilities(inst, m)?;
    let partitions = trials.div_ceil(PARTITION_SIZE);
    let size = |p: u64| PARTITION_SIZE.min(trials - p * PARTITION_SIZE);
    let job = |p: u64| run_partition(&probs, inst.eta1, seed, p, size(p));
    let parts: Vec<[[u64; 2]; 3]> = if parallel {
        (0..partitions).into_par_iter().map(job).collect()
    } else {
        (0..partitions).map(job).collect()
    };
    let mut counts = [[0u64; 2]; 3];
    for part in &parts {
        for (o, row) in part.iter().enumerate() {
            for (s, &c) in row.iter().enumerate() {
                counts[o][s] += c;
            }
        }
    }
    let n = trials.max(1) as f64;
    let failures = counts[0][0] + counts[0][1];
    let errors = counts[1][1] + counts[2][0];
    let empirical_failure = failures as f64 / n;
    let empirical_error = errors as f64 / n;
    let analytic_failure = inst.eta1 * probs[0][0] + inst.eta2 * probs[1][0];
    let stderr_failure = (analytic_failure * (1.0 - analytic_failure) / n).sqrt();
    let within_five_sigma = (empirical_failure - analytic_failure).abs() <= 5.0 * stderr_failure.max(1.0 / n);
    Ok(SampleReport {
        trials,
        counts,
        empirical_failure,
        empirical_error,
        stderr_failure,
        analytic_failure,
        within_five_sigma,
    })
}
