//! Trajectory generators: the averaging protocol `x(k+1) = W(k) x(k)`,
//! bounded solutions of the recurrent inequality, the signed (Altafini)
//! model and the Friedkin-Johnsen model.

mod convergence;
mod friedkin_johnsen;
mod trajectory;

pub use convergence::{classify_convergence, Classification, ClassifyOptions, ConvergenceReport};
pub use friedkin_johnsen::{run_friedkin_johnsen, substochastic_stability, FjRun, StabilityReport};
pub use trajectory::{sorted_view, SortedTrajectoryView, Trajectory, TrajectoryKind};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{MatrixSequence, SignedSequence};

/// Nonnegative slack `s(k)` in `x(k+1) = W(k) x(k) - s(k)`.
///
/// Both nonzero kinds are summable, so the generated solutions stay bounded
/// from below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlackPolicy {
    #[default]
    None,
    /// `s_i(k) = scale * rate^k`.
    Geometric { rate: f64, scale: f64 },
    /// `s_i(k) = scale * u_ik * rate^k` with `u_ik` uniform on `[0, 1)`,
    /// read in row-major order from one ChaCha8 stream.
    SeededRandomSummable { seed: u64, scale: f64, rate: f64 },
}

/// Default decay rate for seeded random slack.
pub const DEFAULT_SLACK_RATE: f64 = 0.9;

impl SlackPolicy {
    pub fn validate(&self) -> Result<()> {
        let (rate, scale) = match self {
            SlackPolicy::None => return Ok(()),
            SlackPolicy::Geometric { rate, scale } => (*rate, *scale),
            SlackPolicy::SeededRandomSummable { rate, scale, .. } => (*rate, *scale),
        };
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("slack rate {rate} outside [0, 1)")));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("slack scale {scale} must be >= 0")));
        }
        Ok(())
    }

    pub fn slack(&self, k: usize, n: usize) -> Vec<f64> {
        match *self {
            SlackPolicy::None => vec![0.0; n],
            SlackPolicy::Geometric { rate, scale } => vec![scale * rate.powi(k as i32); n],
            SlackPolicy::SeededRandomSummable { seed, scale, rate } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // each f64 draw consumes two 32-bit words
                rng.set_word_pos(2 * (k * n) as u128);
                let decay = scale * rate.powi(k as i32);
                (0..n).map(|_| decay * rng.gen::<f64>()).collect()
            }
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `x(k+1) = W(k) x(k)` for `k < K`.
pub fn run_equality(seq: &MatrixSequence, x0: &[f64], steps: usize) -> Result<Trajectory> {
    run_inequality_inner(seq, x0, &SlackPolicy::None, steps, TrajectoryKind::Equality)
}

/// `x(k+1) = W(k) x(k) - s(k)`: a solution of the recurrent inequality.
pub fn run_inequality(seq: &MatrixSequence, x0: &[f64], slack: &SlackPolicy, steps: usize) -> Result<Trajectory> {
    slack.validate()?;
    run_inequality_inner(seq, x0, slack, steps, TrajectoryKind::Inequality)
}

fn run_inequality_inner(
    seq: &MatrixSequence,
    x0: &[f64],
    slack: &SlackPolicy,
    steps: usize,
    kind: TrajectoryKind,
) -> Result<Trajectory> {
    let n = seq.n();
    check_dim(n, x0.len())?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut draws = match *slack {
        SlackPolicy::SeededRandomSummable { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    for k in 0..steps {
        let mut next = seq.at(k).apply(&states[k]);
        match (slack, draws.as_mut()) {
            (SlackPolicy::None, _) => {}
            (&SlackPolicy::SeededRandomSummable { scale, rate, .. }, Some(rng)) => {
                let decay = scale * rate.powi(k as i32);
                for x in next.iter_mut() {
                    *x -= decay * rng.gen::<f64>();
                }
            }
            _ => {
                for (x, s) in next.iter_mut().zip(slack.slack(k, n)) {
                    *x -= s;
                }
            }
        }
        states.push(next);
    }
    Trajectory::new(states, seq.id(), kind)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltafiniRun {
    /// Signed opinions `xi(k)`.
    pub opinions: Trajectory,
    /// `x(k) = |xi(k)|`, a solution of the inequality with `W(k) = |A(k)|`.
    pub modulus: Trajectory,
}

/// `xi(k+1) = A(k) xi(k)`; also returns `|xi(k)|` after checking that it
/// satisfies `x(k+1) <= |A(k)| x(k)`.
pub fn run_altafini(seq: &SignedSequence, xi0: &[f64], steps: usize) -> Result<AltafiniRun> {
    check_dim(seq.n(), xi0.len())?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(xi0.to_vec());
    for k in 0..steps {
        let next = seq.at(k).apply(&states[k]);
        states.push(next);
    }
    let opinions = Trajectory::new(states, seq.id(), TrajectoryKind::Altafini)?;
    let modulus = opinions.modulus();
    let scale = xi0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    modulus.validate_inequality(&seq.modulus_sequence(), 1e-12 * scale)?;
    Ok(AltafiniRun { opinions, modulus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{SignedInfluenceMatrix, StochasticMatrix};

    fn avg2() -> MatrixSequence {
        MatrixSequence::constant(StochasticMatrix::uniform(2))
    }

    #[test]
    fn equality_examples() {
        let id = MatrixSequence::constant(StochasticMatrix::identity(3));
        let t = run_equality(&id, &[1.0, -2.0, 3.0], 5).unwrap();
        assert!(t.states().iter().all(|s| s == &[1.0, -2.0, 3.0]));

        let t = run_equality(&avg2(), &[0.0, 1.0], 4).unwrap();
        assert_eq!(t.state(1), &[0.5, 0.5]);
        assert_eq!(t.last(), &[0.5, 0.5]);

        let swap = MatrixSequence::constant(StochasticMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let t = run_equality(&swap, &[0.0, 1.0], 4).unwrap();
        assert_eq!(t.state(1), &[1.0, 0.0]);
        assert_eq!(t.state(2), &[0.0, 1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert_eq!(
            run_equality(&avg2(), &[0.0], 3),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn zero_slack_is_bitwise_equality() {
        let e = run_equality(&avg2(), &[0.1, 0.7], 20).unwrap();
        let i = run_inequality(&avg2(), &[0.1, 0.7], &SlackPolicy::None, 20).unwrap();
        assert_eq!(e.states(), i.states());
    }

    #[test]
    fn geometric_slack_consensus() {
        let slack = SlackPolicy::Geometric { rate: 0.5, scale: 0.1 };
        let t = run_inequality(&avg2(), &[0.0, 1.0], &slack, 200).unwrap();
        t.validate_inequality(&avg2(), 1e-12).unwrap();
        // x(k) = c(k) 1 for k >= 1 with c(1) = 0.4, c(k+1) = c(k) - 0.1 * 0.5^k
        let c = 0.5 - (0..200).map(|k| 0.1 * 0.5f64.powi(k)).sum::<f64>();
        assert!((t.last()[0] - c).abs() < 1e-12);
        assert!(c <= 0.5);
        let r = classify_convergence(&t, &ClassifyOptions::default()).unwrap();
        assert!(matches!(r.classification, Classification::Consensus { limit } if (limit - 0.3).abs() < 1e-12));
    }

    #[test]
    fn slack_validation() {
        assert!(SlackPolicy::Geometric { rate: 1.0, scale: 1.0 }.validate().is_err());
        assert!(SlackPolicy::Geometric { rate: 0.5, scale: -1.0 }.validate().is_err());
        let s = SlackPolicy::SeededRandomSummable {
            seed: 1,
            scale: 1.0,
            rate: 0.9,
        };
        assert_eq!(s.slack(3, 4), s.slack(3, 4));
        assert!(s.slack(3, 4).iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn seeded_slack_matches_pointwise_draws() {
        let s = SlackPolicy::SeededRandomSummable {
            seed: 7,
            scale: 0.3,
            rate: 0.8,
        };
        let seq = MatrixSequence::constant(StochasticMatrix::identity(3));
        let traj = run_inequality(&seq, &[1.0, 2.0, 3.0], &s, 6).unwrap();
        for k in 0..6 {
            let want: Vec<f64> = traj.state(k).iter().zip(s.slack(k, 3)).map(|(x, d)| x - d).collect();
            assert_eq!(traj.state(k + 1), &want[..]);
        }
    }

    #[test]
    fn altafini_examples() {
        let a = SignedInfluenceMatrix::new(vec![vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        let seq = SignedSequence::constant(a);
        let run = run_altafini(&seq, &[1.0, -1.0], 10).unwrap();
        assert!(run.opinions.states().iter().all(|s| s == &[1.0, -1.0]));
        let run = run_altafini(&seq, &[1.0, 1.0], 10).unwrap();
        assert_eq!(run.opinions.state(1), &[0.0, 0.0]);
        assert_eq!(run.modulus.last(), &[0.0, 0.0]);
    }

    #[test]
    fn altafini_positive_reduces_to_equality() {
        let w = StochasticMatrix::new(vec![vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap();
        let a = SignedInfluenceMatrix::new(w.rows()).unwrap();
        let run = run_altafini(&SignedSequence::constant(a), &[0.2, 0.9], 50).unwrap();
        let eq = run_equality(&MatrixSequence::constant(w), &[0.2, 0.9], 50).unwrap();
        assert_eq!(run.opinions.states(), eq.states());
    }
}
