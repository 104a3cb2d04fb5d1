use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::trajectory::{Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::graph::{reaches_set, ThresholdGraph};
use crate::matrix::{spectral_radius, StochasticMatrix, SubstochasticMatrix, SPECTRAL_MAX_ITER, SPECTRAL_TOL};

/// Margin below one that a non-reaching matrix must not cross.
const UNSTABLE_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Every node is a deficiency row or reaches one.
    pub stable: bool,
    pub rho: f64,
    pub deficiency_rows: Vec<usize>,
    #[serde(skip)]
    pub completion: StochasticMatrix,
}

/// Schur stability of a substochastic matrix from graph structure, checked
/// against the spectral radius in both directions.
pub fn substochastic_stability(a: &SubstochasticMatrix) -> Result<StabilityReport> {
    let g = ThresholdGraph::from_dense(a.as_matrix(), 0.0);
    let deficient = a.deficiency_rows();
    let stable = !deficient.is_empty() && (0..a.n()).all(|j| reaches_set(&g, j, deficient));
    let rho = spectral_radius(a, SPECTRAL_MAX_ITER, SPECTRAL_TOL)?;
    if stable && rho >= 1.0 {
        return Err(Error::InvariantViolated(format!(
            "every node reaches a deficiency row but rho = {rho}"
        )));
    }
    if !stable && rho < 1.0 - UNSTABLE_MARGIN {
        return Err(Error::InvariantViolated(format!(
            "some node cannot reach a deficiency row yet rho = {rho}"
        )));
    }
    Ok(StabilityReport {
        stable,
        rho,
        deficiency_rows: deficient.to_vec(),
        completion: a.stochastic_completion(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FjRun {
    pub trajectory: Trajectory,
    pub stability: StabilityReport,
    /// `(I - Lambda W)^{-1} (I - Lambda) u` when `Lambda W` is Schur stable.
    pub limit: Option<Vec<f64>>,
    /// `max_i |x_i(K) - limit_i|`.
    pub limit_gap: Option<f64>,
    pub warnings: Vec<String>,
}

/// Iterates `x(k+1) = Lambda W x(k) + (I - Lambda) u` from `x(0) = u`.
pub fn run_friedkin_johnsen(w: &StochasticMatrix, lambda: &[f64], u: &[f64], steps: usize) -> Result<FjRun> {
    let n = w.n();
    for len in [lambda.len(), u.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let mut warnings = Vec::new();
    for (i, &l) in lambda.iter().enumerate() {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidConfig(format!("susceptibility lambda[{i}] = {l} outside [0, 1]")));
        }
        if (l == 0.0) != (w.get(i, i) == 1.0) {
            let msg = format!("agent {i}: lambda = {l} but w_ii = {}", w.get(i, i));
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let lw = DMatrix::from_fn(n, n, |i, j| lambda[i] * w.get(i, j));
    let a = SubstochasticMatrix::from_dense(lw.clone())?;
    let stability = substochastic_stability(&a)?;
    let anchor: Vec<f64> = (0..n).map(|i| (1.0 - lambda[i]) * u[i]).collect();

    let mut states = Vec::with_capacity(steps + 1);
    states.push(u.to_vec());
    for k in 0..steps {
        let mut next = a.apply(&states[k]);
        for (x, b) in next.iter_mut().zip(&anchor) {
            *x += b;
        }
        states.push(next);
    }
    let trajectory = Trajectory::new(states, "friedkin_johnsen", TrajectoryKind::FriedkinJohnsen)?;

    let limit = if stability.stable {
        let lhs = DMatrix::identity(n, n) - lw;
        let rhs = DVector::from_vec(anchor);
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvariantViolated("I - Lambda W is singular".into()))?;
        Some(sol.iter().copied().collect::<Vec<f64>>())
    } else {
        None
    };
    let limit_gap = limit.as_ref().map(|l| {
        trajectory
            .last()
            .iter()
            .zip(l)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    });
    Ok(FjRun {
        trajectory,
        stability,
        limit,
        limit_gap,
        warnings,
    })
}
