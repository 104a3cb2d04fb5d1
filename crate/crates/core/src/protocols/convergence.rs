use serde::{Deserialize, Serialize};

use super::trajectory::{Trajectory, TrajectoryKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Classification {
    Consensus { limit: f64 },
    Equilibrium { limit: Vec<f64> },
    ModulusConsensus { limit: f64 },
    DivergentBelow,
    NonConvergentBounded,
    Undecided,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::Consensus { .. } => "consensus",
            Classification::Equilibrium { .. } => "equilibrium",
            Classification::ModulusConsensus { .. } => "modulus_consensus",
            Classification::DivergentBelow => "divergent_below",
            Classification::NonConvergentBounded => "non_convergent_bounded",
            Classification::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    pub tol: f64,
    pub tail_window: usize,
    pub bound_threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: 1e-8,
            tail_window: 50,
            bound_threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub classification: Classification,
    /// Per-agent `max - min` over the last `tail_window + 1` states.
    pub residuals: Vec<f64>,
    /// `max_i x_i(K) - min_i x_i(K)`.
    pub spread: f64,
    pub tol: f64,
    pub tail_window: usize,
}

fn window_range(states: &[Vec<f64>], i: usize) -> f64 {
    let (lo, hi) = states
        .iter()
        .map(|s| s[i])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn spread(s: &[f64]) -> f64 {
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn mean(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len() as f64
}

/// Classifies the tail behaviour of a trajectory.
///
/// Altafini trajectories are tested for agreement of the absolute values
/// first. A trajectory that has not settled is `non_convergent_bounded` when
/// its last tail window oscillates at least 90% as much as the window before,
/// and `undecided` otherwise.
pub fn classify_convergence(traj: &Trajectory, opts: &ClassifyOptions) -> Result<ConvergenceReport> {
    let w = opts.tail_window;
    let k_final = traj.steps();
    if w == 0 || k_final < 2 * w {
        return Err(Error::HorizonTooShort {
            len: k_final,
            needed: 2 * w.max(1),
        });
    }
    let states = traj.states();
    let n = traj.n();
    let last = traj.last();
    let tail = &states[k_final - w..];
    let residuals: Vec<f64> = (0..n).map(|i| window_range(tail, i)).collect();
    let report = |classification| ConvergenceReport {
        classification,
        residuals: residuals.clone(),
        spread: spread(last),
        tol: opts.tol,
        tail_window: w,
    };

    if last.iter().any(|v| !v.is_finite() || *v < -opts.bound_threshold) {
        return Ok(report(Classification::DivergentBelow));
    }

    if traj.kind() == TrajectoryKind::Altafini {
        let abs_tail: Vec<Vec<f64>> = tail.iter().map(|s| s.iter().map(|v| v.abs()).collect()).collect();
        let abs_last = abs_tail.last().unwrap();
        let settled = (0..n).all(|i| window_range(&abs_tail, i) <= opts.tol);
        if settled && spread(abs_last) <= opts.tol {
            return Ok(report(Classification::ModulusConsensus { limit: mean(abs_last) }));
        }
    }

    if residuals.iter().all(|&r| r <= opts.tol) {
        if spread(last) <= opts.tol {
            return Ok(report(Classification::Consensus { limit: mean(last) }));
        }
        return Ok(report(Classification::Equilibrium { limit: last.to_vec() }));
    }

    let prev = &states[k_final - 2 * w..=k_final - w];
    let osc_prev = (0..n).map(|i| window_range(prev, i)).fold(0.0, f64::max);
    let osc_last = residuals.iter().copied().fold(0.0, f64::max);
    if osc_last >= 0.9 * osc_prev {
        Ok(report(Classification::NonConvergentBounded))
    } else {
        Ok(report(Classification::Undecided))
    }
}
