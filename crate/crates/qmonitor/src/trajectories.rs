//! Quantum-jump trajectory engine: Poisson-timed instantaneous measurement
//! events, exact unitary drift between events, deterministic seeded
//! ensembles, and the weak-limit / Zeno diagnostics.
//!
//! Between events the state evolves under H alone (pure monitoring); events
//! apply one sampled effect operator. Trajectories are density-operator
//! valued so mixed initial states and effect multiplicities are handled
//! uniformly. Retrodictive trajectory sampling is deliberately not offered:
//! the reversed effect order does not describe realizable measurements.

use crate::evolution::{MonitoringModel, TimeGrid};
use crate::linalg::trace_distance;
use crate::operators::{DensityOperator, PROBABILITY_FLOOR};
use crate::rng::{rng_from_seed, stream_seed};
use crate::{C64, CMat, QmError};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// One measurement event on a trajectory.
#[derive(Debug, Clone)]
pub struct JumpEvent {
    pub time: f64,
    pub outcome: String,
    pub multiplicity: usize,
    /// Trace distance between the pre- and post-event states.
    pub jump_size: f64,
}

/// One stochastic realization of a monitored system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// State snapshot at every grid point.
    pub states: Vec<DensityOperator>,
    pub events: Vec<JumpEvent>,
    pub seed: u64,
}

/// Ensemble mean and per-entry standard error at every grid point.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub grid: TimeGrid,
    pub mean: Vec<CMat>,
    pub stderr: Vec<DMatrix<f64>>,
    pub n: usize,
    pub master_seed: u64,
}

impl EnsembleResult {
    /// Root-sum-square of the entry standard errors at grid point `k`.
    pub fn aggregate_stderr(&self, k: usize) -> f64 {
        self.stderr[k].iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Draws one outcome using the model's cached A^dag A operators. The model
/// invariant already guarantees completeness.
fn sample_event(
    state: &CMat,
    model: &MonitoringModel,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, CMat, f64), QmError> {
    let grams = model.effect_grams();
    let probs: Vec<f64> = grams
        .iter()
        .map(|g| crate::linalg::trace(&(g * state)).re.max(0.0))
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(QmError::BiasedEffectSet((total - 1.0).abs()));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut idx = probs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            idx = i;
            break;
        }
    }
    while probs[idx] < PROBABILITY_FLOOR {
        idx = (idx + probs.len() - 1) % probs.len();
    }
    let a = model.effects().effects()[idx].mat();
    let post = a * state * a.adjoint() / C64::new(probs[idx], 0.0);
    Ok((idx, post, probs[idx]))
}

fn exponential_wait(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let u: f64 = rng.random::<f64>();
    -(1.0 - u).ln() / rate
}

/// Simulates one quantum-jump trajectory. Event times are a Poisson process
/// of the model's rate; identical inputs and seed reproduce the trajectory
/// bit for bit.
pub fn simulate_trajectory(
    rho0: &DensityOperator,
    model: &MonitoringModel,
    grid: &TimeGrid,
    seed: u64,
) -> Result<Trajectory, QmError> {
    if rho0.dim() != model.dim() {
        return Err(QmError::DimensionMismatch(model.dim(), rho0.dim()));
    }
    let mut rng = rng_from_seed(seed);
    let mut state = rho0.mat().clone();
    let mut now = grid.t0;
    let mut next_event = now + exponential_wait(model.rate(), &mut rng);
    let mut states = Vec::with_capacity(grid.n_steps() + 1);
    states.push(rho0.clone());
    let mut events = Vec::new();

    for k in 1..=grid.n_steps() {
        let target = grid.t0 + k as f64 * grid.dt;
        // grid-point ties break toward the event
        while next_event <= target {
            let u = model.unitary(next_event - now);
            state = &u * state * u.adjoint();
            now = next_event;
            let pre = state.clone();
            let (idx, post, _) = sample_event(&state, model, &mut rng)?;
            let effect = &model.effects().effects()[idx];
            events.push(JumpEvent {
                time: now,
                outcome: effect.outcome().to_string(),
                multiplicity: effect.multiplicity(),
                jump_size: trace_distance(&pre, &post),
            });
            state = post;
            next_event = now + exponential_wait(model.rate(), &mut rng);
        }
        let u = model.unitary(target - now);
        state = &u * state * u.adjoint();
        now = target;
        states.push(DensityOperator::new(state.clone())?);
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        events,
        seed,
    })
}

/// Averages `n` trajectories with per-trajectory seeds derived from
/// `(master_seed, i)`. Trajectories run in parallel; the reduction is done
/// in index order, so the result is identical for any thread count.
pub fn ensemble_average(
    rho0: &DensityOperator,
    model: &MonitoringModel,
    grid: &TimeGrid,
    n: usize,
    master_seed: u64,
) -> Result<EnsembleResult, QmError> {
    if n == 0 {
        return Err(QmError::InvalidParameter(
            "ensemble size must be at least 1".into(),
        ));
    }
    let trajectories: Vec<Trajectory> = (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_trajectory(rho0, model, grid, stream_seed(master_seed, i)))
        .collect::<Result<_, _>>()?;

    let d = model.dim();
    let points = grid.n_steps() + 1;
    let mut mean = vec![CMat::zeros(d, d); points];
    let mut sumsq = vec![DMatrix::<f64>::zeros(d, d); points];
    for traj in &trajectories {
        for (k, s) in traj.states.iter().enumerate() {
            mean[k] += s.mat();
            for (dst, z) in sumsq[k].iter_mut().zip(s.mat().iter()) {
                *dst += z.norm_sqr();
            }
        }
    }
    let nf = n as f64;
    let mut stderr = Vec::with_capacity(points);
    for k in 0..points {
        mean[k] /= C64::new(nf, 0.0);
        let mut se = DMatrix::<f64>::zeros(d, d);
        if n > 1 {
            for ((dst, &sq), m) in se.iter_mut().zip(sumsq[k].iter()).zip(mean[k].iter()) {
                let var = ((sq - nf * m.norm_sqr()) / (nf - 1.0)).max(0.0);
                *dst = (var / nf).sqrt();
            }
        }
        stderr.push(se);
    }
    Ok(EnsembleResult {
        grid: *grid,
        mean,
        stderr,
        n,
        master_seed,
    })
}

/// Maximum and mean per-event trace distance of a trajectory. Empty event
/// lists yield (0, 0).
pub fn jump_size_stats(traj: &Trajectory) -> (f64, f64) {
    if traj.events.is_empty() {
        return (0.0, 0.0);
    }
    let max = traj
        .events
        .iter()
        .map(|e| e.jump_size)
        .fold(0.0, f64::max);
    let mean =
        traj.events.iter().map(|e| e.jump_size).sum::<f64>() / traj.events.len() as f64;
    (max, mean)
}

/// Monte Carlo estimate (value, standard error) of the excited-state
/// survival probability Tr(rho(T) |e><e|) under weak sigma_z monitoring,
/// starting from |e><e|.
pub fn zeno_survival(
    omega: f64,
    eps: f64,
    rate: f64,
    duration: f64,
    n: usize,
    master_seed: u64,
) -> Result<(f64, f64), QmError> {
    let model = crate::models::two_level_monitor(omega, eps, rate)?;
    let rho0 = DensityOperator::basis_state(2, 0)?;
    let grid = TimeGrid::new(0.0, duration, duration)?;
    let result = ensemble_average(&rho0, &model, &grid, n, master_seed)?;
    let survival = result.mean.last().unwrap()[(0, 0)].re;
    let stderr = result.stderr.last().unwrap()[(0, 0)];
    Ok((survival, stderr))
}

/// Outcome counts at event index `m` (0-based) over an ensemble, used to
/// check that later events carry no backward influence.
///
/// Each trajectory is run until `n_events` measurement events have occurred,
/// regardless of wall-clock duration. When `discard_later_outcome` is set,
/// trajectories where that outcome occurs at any event after index `m` are
/// dropped before counting, which post-selects on future results and is
/// exactly the kind of bias the unbiasedness condition forbids.
pub fn event_outcome_marginal(
    rho0: &DensityOperator,
    model: &MonitoringModel,
    m: usize,
    n_events: usize,
    n_traj: usize,
    master_seed: u64,
    discard_later_outcome: Option<&str>,
) -> Result<EventMarginal, QmError> {
    if n_events <= m {
        return Err(QmError::InvalidParameter(format!(
            "need more than {m} events, asked for {n_events}"
        )));
    }
    if model.rate() <= 0.0 {
        return Err(QmError::NegativeRate(model.rate()));
    }
    let records: Vec<Option<String>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<String>, QmError> {
            let mut rng = rng_from_seed(stream_seed(master_seed, i));
            let mut state = rho0.mat().clone();
            let mut outcome_at_m = String::new();
            for event_idx in 0..n_events {
                let wait = exponential_wait(model.rate(), &mut rng);
                let u = model.unitary(wait);
                state = &u * state * u.adjoint();
                let (idx, post, _) = sample_event(&state, model, &mut rng)?;
                state = post;
                let outcome = model.effects().effects()[idx].outcome();
                if event_idx == m {
                    outcome_at_m = outcome.to_string();
                } else if event_idx > m {
                    if let Some(excluded) = discard_later_outcome {
                        if outcome == excluded {
                            return Ok(None);
                        }
                    }
                }
            }
            Ok(Some(outcome_at_m))
        })
        .collect::<Result<_, _>>()?;

    let mut counts = BTreeMap::new();
    let mut kept = 0usize;
    for r in records.into_iter().flatten() {
        *counts.entry(r).or_insert(0usize) += 1;
        kept += 1;
    }
    Ok(EventMarginal {
        counts,
        n_kept: kept,
        n_total: n_traj,
    })
}

/// Outcome histogram at a fixed event index.
#[derive(Debug, Clone)]
pub struct EventMarginal {
    pub counts: BTreeMap<String, usize>,
    pub n_kept: usize,
    pub n_total: usize,
}

impl EventMarginal {
    pub fn frequency(&self, outcome: &str) -> f64 {
        *self.counts.get(outcome).unwrap_or(&0) as f64 / self.n_kept.max(1) as f64
    }

    /// Binomial standard error of `frequency(outcome)`.
    pub fn binomial_stderr(&self, outcome: &str) -> f64 {
        let f = self.frequency(outcome);
        (f * (1.0 - f) / self.n_kept.max(1) as f64).sqrt()
    }
}
