use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::sequence::MatrixSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Equality,
    Inequality,
    Altafini,
    FriedkinJohnsen,
    Constrained,
}

/// States `x(0), ..., x(K)` of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    seq_id: String,
    kind: TrajectoryKind,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>, seq_id: impl Into<String>, kind: TrajectoryKind) -> Result<Self> {
        let n = states.first().ok_or(Error::Empty)?.len();
        if let Some(s) = states.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.len(),
            });
        }
        Ok(Trajectory {
            states,
            seq_id: seq_id.into(),
            kind,
        })
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    /// Number of steps `K`; the trajectory holds `K + 1` states.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn seq_id(&self) -> &str {
        &self.seq_id
    }

    /// Entrywise absolute values, relabelled as an inequality trajectory.
    pub fn modulus(&self) -> Trajectory {
        Trajectory {
            states: self
                .states
                .iter()
                .map(|s| s.iter().map(|v| v.abs()).collect())
                .collect(),
            seq_id: self.seq_id.clone(),
            kind: TrajectoryKind::Inequality,
        }
    }

    /// Smallest value of `sum_j w_ij(k) (x_j(k) - x_i(k+1))` over all steps
    /// and agents, i.e. the margin in `x(k+1) <= W(k) x(k)`.
    ///
    /// The centred form equals `(W x)_i - x_i(k+1)` for stochastic rows and
    /// is exact in sign when all the differences are representable, which is
    /// what the counterexample checks need.
    pub fn inequality_margin(&self, seq: &MatrixSequence) -> Result<(f64, usize, usize)> {
        if seq.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: seq.n(),
                found: self.n(),
            });
        }
        let mut worst = (f64::INFINITY, 0, 0);
        for k in 0..self.steps() {
            let w = seq.at(k);
            let (x, next) = (&self.states[k], &self.states[k + 1]);
            for (i, xi_next) in next.iter().enumerate() {
                let mut acc = 0.0;
                for (j, xj) in x.iter().enumerate() {
                    acc += w.get(i, j) * (xj - xi_next);
                }
                if acc < worst.0 || acc.is_nan() {
                    worst = (acc, k, i);
                }
            }
        }
        Ok(worst)
    }

    /// Checks `x(k+1) <= W(k) x(k)` at every step with the given tolerance.
    pub fn validate_inequality(&self, seq: &MatrixSequence, tol: f64) -> Result<()> {
        let (margin, k, i) = self.inequality_margin(seq)?;
        if margin < -tol || margin.is_nan() {
            return Err(Error::InvariantViolated(format!(
                "x({})[{i}] exceeds (W x)[{i}] by {:e}",
                k + 1,
                -margin
            )));
        }
        Ok(())
    }

    /// CSV with header `k,x_1,...,x_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for i in 1..=self.n() {
            out.push_str(&format!(",x_{i}"));
        }
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in s {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-step ascending sort of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedTrajectoryView {
    /// `y[k]` is `x(k)` sorted ascending.
    pub y: Vec<Vec<f64>>,
    /// `sigma[k][r]` is the original index of the `r`-th smallest entry.
    pub sigma: Vec<Vec<usize>>,
}

impl SortedTrajectoryView {
    /// `J_i(k)`: indices of the `i` smallest entries of `x(k)`.
    pub fn j_set(&self, k: usize, i: usize) -> &[usize] {
        &self.sigma[k][..i]
    }

    /// Complement of `J_i(k)`.
    pub fn j_complement(&self, k: usize, i: usize) -> &[usize] {
        &self.sigma[k][i..]
    }

    pub fn max(&self, k: usize) -> f64 {
        *self.y[k].last().unwrap()
    }

    pub fn to_csv(&self) -> String {
        let n = self.y.first().map_or(0, Vec::len);
        let mut out = String::from("k");
        for i in 1..=n {
            out.push_str(&format!(",y_{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",j_{i}"));
        }
        out.push('\n');
        for (k, (y, s)) in self.y.iter().zip(&self.sigma).enumerate() {
            out.push_str(&k.to_string());
            for v in y {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            for j in s {
                out.push_str(&format!(",{j}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Stable ascending sort of every state; ties keep the smaller index first.
pub fn sorted_view(traj: &Trajectory) -> SortedTrajectoryView {
    let mut y = Vec::with_capacity(traj.states.len());
    let mut sigma = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        y.push(idx.iter().map(|&j| s[j]).collect());
        sigma.push(idx);
    }
    SortedTrajectoryView { y, sigma }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_view_examples() {
        let t = Trajectory::new(vec![vec![3.0, 1.0, 2.0]], "t", TrajectoryKind::Equality).unwrap();
        let v = sorted_view(&t);
        assert_eq!(v.y[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(v.sigma[0], vec![1, 2, 0]);
        assert_eq!(v.j_set(0, 2), &[1, 2]);
        assert_eq!(v.j_complement(0, 2), &[0]);

        let t = Trajectory::new(vec![vec![1.0, 1.0]], "t", TrajectoryKind::Equality).unwrap();
        assert_eq!(sorted_view(&t).sigma[0], vec![0, 1]);

        let t = Trajectory::new(vec![vec![0.7; 4]], "t", TrajectoryKind::Equality).unwrap();
        let v = sorted_view(&t);
        assert_eq!(v.y[0], vec![0.7; 4]);
        for i in 1..=4 {
            assert_eq!(v.j_set(0, i), (0..i).collect::<Vec<_>>().as_slice());
        }
    }

    #[test]
    fn ragged_states_rejected() {
        assert!(Trajectory::new(vec![vec![1.0], vec![1.0, 2.0]], "t", TrajectoryKind::Equality).is_err());
        assert_eq!(
            Trajectory::new(vec![], "t", TrajectoryKind::Equality),
            Err(Error::Empty)
        );
    }

    #[test]
    fn csv_layout() {
        let t = Trajectory::new(vec![vec![0.0, 1.0], vec![0.5, 0.5]], "t", TrajectoryKind::Equality).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,x_1,x_2");
        assert_eq!(lines[2], "1,5.0000000000000000e-1,5.0000000000000000e-1");
        let parsed: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0);
    }
}
