//! Closed convex sets with closed-form projections, and the three projected
//! consensus protocols.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt17;
use crate::protocols::{Trajectory, TrajectoryKind};
use crate::sequence::MatrixSequence;

/// Tolerance of the membership test `|P(y) - y| <= MEMBER_TOL`.
pub const MEMBER_TOL: f64 = 1e-10;
/// Slack allowed in the projection inequality.
pub const PROJECTION_TOL: f64 = 1e-10;
/// Relative singular-value floor below which an affine set is degenerate.
pub const RANK_TOL: f64 = 1e-10;

/// JSON form of a set, e.g. `{"kind":"halfspace","a":[1,1],"b":1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : a.x <= b}`
    Halfspace { a: Vec<f64>, b: f64 },
    /// `{x : a.x = b}`
    Hyperplane { a: Vec<f64>, b: f64 },
    /// `{x : A x = b}`, `A` given by rows.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Clone)]
enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { a: Vec<f64>, b: f64, norm2: f64 },
    Hyperplane { a: Vec<f64>, b: f64, norm2: f64 },
    Affine { a: DMatrix<f64>, b: DVector<f64>, gram: Cholesky<f64, Dyn> },
}

#[derive(Debug, Clone)]
pub struct ConvexSet {
    spec: SetSpec,
    shape: Shape,
    dim: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn invalid(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

fn normal(a: &[f64]) -> Result<f64> {
    if a.is_empty() || a.iter().any(|v| !v.is_finite()) {
        return Err(invalid("normal vector must be nonempty and finite".into()));
    }
    let norm2 = dot(a, a);
    if norm2 == 0.0 {
        return Err(Error::DegenerateSet("normal vector is zero".into()));
    }
    Ok(norm2)
}

impl ConvexSet {
    pub fn from_spec(spec: SetSpec) -> Result<Self> {
        let (shape, dim) = match &spec {
            SetSpec::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lo.len(),
                        found: hi.len(),
                    });
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(invalid("box needs lo <= hi".into()));
                }
                (
                    Shape::Box {
                        lo: lo.clone(),
                        hi: hi.clone(),
                    },
                    lo.len(),
                )
            }
            SetSpec::Ball { center, radius } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(invalid(format!("ball radius {radius} must be >= 0")));
                }
                (
                    Shape::Ball {
                        center: center.clone(),
                        radius: *radius,
                    },
                    center.len(),
                )
            }
            SetSpec::Halfspace { a, b } => (
                Shape::Halfspace {
                    a: a.clone(),
                    b: *b,
                    norm2: normal(a)?,
                },
                a.len(),
            ),
            SetSpec::Hyperplane { a, b } => (
                Shape::Hyperplane {
                    a: a.clone(),
                    b: *b,
                    norm2: normal(a)?,
                },
                a.len(),
            ),
            SetSpec::Affine { a, b } => {
                let rows = a.len();
                if rows == 0 {
                    return Err(Error::DegenerateSet("affine set needs at least one equation".into()));
                }
                if b.len() != rows {
                    return Err(Error::DimensionMismatch {
                        expected: rows,
                        found: b.len(),
                    });
                }
                let d = a[0].len();
                if let Some(r) = a.iter().find(|r| r.len() != d) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: r.len(),
                    });
                }
                let am = DMatrix::from_fn(rows, d, |i, j| a[i][j]);
                let sv = am.singular_values();
                let top = sv.max();
                if rows > d || !(top > 0.0) || sv.min() <= RANK_TOL * top {
                    return Err(Error::DegenerateSet("rows of A are linearly dependent".into()));
                }
                let gram = Cholesky::new(&am * am.transpose())
                    .ok_or_else(|| Error::DegenerateSet("A A^T is not positive definite".into()))?;
                (
                    Shape::Affine {
                        a: am,
                        b: DVector::from_vec(b.clone()),
                        gram,
                    },
                    d,
                )
            }
        };
        Ok(ConvexSet { spec, shape, dim })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::from_spec(SetSpec::Box { lo, hi })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::from_spec(SetSpec::Ball { center, radius })
    }

    pub fn halfspace(a: Vec<f64>, b: f64) -> Result<Self> {
        Self::from_spec(SetSpec::Halfspace { a, b })
    }

    pub fn hyperplane(a: Vec<f64>, b: f64) -> Result<Self> {
        Self::from_spec(SetSpec::Hyperplane { a, b })
    }

    pub fn affine(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        Self::from_spec(SetSpec::Affine { a, b })
    }

    pub fn spec(&self) -> &SetSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(match &self.shape {
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect(),
            Shape::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    x.to_vec()
                } else {
                    x.iter().zip(center).map(|(v, c)| c + radius * (v - c) / r).collect()
                }
            }
            Shape::Halfspace { a, b, norm2 } => {
                let excess = (dot(a, x) - b).max(0.0);
                x.iter().zip(a).map(|(v, ai)| v - excess / norm2 * ai).collect()
            }
            Shape::Hyperplane { a, b, norm2 } => {
                let excess = dot(a, x) - b;
                x.iter().zip(a).map(|(v, ai)| v - excess / norm2 * ai).collect()
            }
            Shape::Affine { a, b, gram } => {
                let xv = DVector::from_column_slice(x);
                let lambda = gram.solve(&(a * &xv - b));
                (xv - a.transpose() * lambda).iter().copied().collect()
            }
        })
    }

    /// `d(x) = |x - P(x)|`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        Ok(dist(x, &self.project(x)?))
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        Ok(self.distance(y)? <= MEMBER_TOL)
    }
}

/// `|x - y|^2 - |x - P(x)|^2 - |y - P(x)|^2` for `y` in the set.
pub fn projection_inequality_slack(s: &ConvexSet, x: &[f64], y: &[f64]) -> Result<f64> {
    let gap = s.distance(y)?;
    if gap > MEMBER_TOL {
        return Err(Error::YNotInSet { distance: gap });
    }
    let p = s.project(x)?;
    let sq = |a: &[f64], b: &[f64]| dist(a, b).powi(2);
    Ok(sq(x, y) - sq(x, &p) - sq(y, &p))
}

/// `|x - y|^2 >= |x - P(x)|^2 + |y - P(x)|^2` within [`PROJECTION_TOL`].
pub fn verify_projection_inequality(s: &ConvexSet, x: &[f64], y: &[f64]) -> Result<bool> {
    Ok(projection_inequality_slack(s, x, y)? >= -PROJECTION_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `xi_i(k+1) = P_i[sum_j w_ij xi_j]`
    Nedic,
    /// `xi_i(k+1) = P_i[sum_j w_ij P_j(xi_j)]`
    Morse,
    /// `xi_i(k+1) = w_ii P_i(xi_i) + sum_{j != i} w_ij xi_j`
    Tempo,
}

/// One step of a projected protocol, for agents `i = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedState {
    pub xi: Vec<Vec<f64>>,
    /// `eta_i(k) = sum_j w_ij(k) xi_j(k)`.
    pub eta: Vec<Vec<f64>>,
    /// `e_i(k) = xi_i(k+1) - eta_i(k)`.
    pub e: Vec<Vec<f64>>,
    /// `d_i(xi_i(k))`.
    pub dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedRun {
    pub variant: Variant,
    /// States for `k = 0..K`.
    pub states: Vec<ConstrainedState>,
    /// `xi(K)` and its distances.
    pub final_xi: Vec<Vec<f64>>,
    pub final_dist: Vec<f64>,
}

fn mix(w: &crate::StochasticMatrix, i: usize, pts: &[Vec<f64>]) -> Vec<f64> {
    let d = pts[0].len();
    let mut out = vec![0.0; d];
    for (j, p) in pts.iter().enumerate() {
        let wij = w.get(i, j);
        if wij != 0.0 {
            for (o, v) in out.iter_mut().zip(p) {
                *o += wij * v;
            }
        }
    }
    out
}

fn distances(sets: &[ConvexSet], xi: &[Vec<f64>]) -> Result<Vec<f64>> {
    sets.iter().zip(xi).map(|(s, x)| s.distance(x)).collect()
}

pub fn run_constrained(
    variant: Variant,
    seq: &MatrixSequence,
    sets: &[ConvexSet],
    xi0: &[Vec<f64>],
    steps: usize,
) -> Result<ConstrainedRun> {
    let n = seq.n();
    for len in [sets.len(), xi0.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let d = sets[0].dim();
    for len in sets.iter().map(|s| s.dim()).chain(xi0.iter().map(|x| x.len())) {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, found: len });
        }
    }

    let mut xi = xi0.to_vec();
    let mut states = Vec::with_capacity(steps);
    for k in 0..steps {
        let w = seq.at(k);
        let dist = distances(sets, &xi)?;
        let eta: Vec<Vec<f64>> = (0..n).map(|i| mix(&w, i, &xi)).collect();
        let next: Vec<Vec<f64>> = match variant {
            Variant::Nedic => eta.iter().zip(sets).map(|(e, s)| s.project(e)).collect::<Result<_>>()?,
            Variant::Morse => {
                let projected: Vec<Vec<f64>> = xi.iter().zip(sets).map(|(x, s)| s.project(x)).collect::<Result<_>>()?;
                (0..n)
                    .map(|i| sets[i].project(&mix(&w, i, &projected)))
                    .collect::<Result<_>>()?
            }
            Variant::Tempo => (0..n)
                .map(|i| {
                    let mut pts = xi.clone();
                    pts[i] = sets[i].project(&xi[i])?;
                    Ok(mix(&w, i, &pts))
                })
                .collect::<Result<_>>()?,
        };
        let e = next
            .iter()
            .zip(&eta)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        states.push(ConstrainedState { xi, eta, e, dist });
        xi = next;
    }
    let final_dist = distances(sets, &xi)?;
    Ok(ConstrainedRun {
        variant,
        states,
        final_xi: xi,
        final_dist,
    })
}

impl ConstrainedRun {
    pub fn steps(&self) -> usize {
        self.states.len()
    }

    pub fn xi(&self, k: usize) -> &[Vec<f64>] {
        if k == self.states.len() {
            &self.final_xi
        } else {
            &self.states[k].xi
        }
    }

    /// `x_i(k) = |xi_i(k) - xi_0|`, a solution of the scalar inequality
    /// whenever `xi_0` lies in every set.
    pub fn distance_trajectory(&self, anchor: &[f64]) -> Result<Trajectory> {
        let states = (0..=self.steps())
            .map(|k| self.xi(k).iter().map(|x| dist(x, anchor)).collect())
            .collect();
        Trajectory::new(states, "constrained", TrajectoryKind::Inequality)
    }

    /// Header `k`, then `xi_<i>_<c>` per agent and coordinate, then `e_<i>`
    /// (norm of the projection error) and `dist_<i>`. The last row has no
    /// projection error.
    pub fn to_csv(&self) -> String {
        let n = self.final_xi.len();
        let d = self.final_xi.first().map_or(0, |x| x.len());
        let mut out = String::from("k");
        for i in 1..=n {
            for c in 1..=d {
                out.push_str(&format!(",xi_{i}_{c}"));
            }
        }
        for i in 1..=n {
            out.push_str(&format!(",e_{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",dist_{i}"));
        }
        out.push('\n');
        let zero = vec![0.0; d];
        for k in 0..=self.steps() {
            out.push_str(&k.to_string());
            for x in self.xi(k) {
                for v in x {
                    out.push(',');
                    out.push_str(&fmt17(*v));
                }
            }
            for i in 0..n {
                out.push(',');
                if let Some(s) = self.states.get(k) {
                    out.push_str(&fmt17(dist(&s.e[i], &zero)));
                }
            }
            let dists = self.states.get(k).map_or(&self.final_dist, |s| &s.dist);
            for v in dists {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedReport {
    /// Agent tails agree within `tol` and have settled.
    pub consensus: bool,
    /// Mean of `xi_i(K)` over agents.
    pub limit: Vec<f64>,
    /// `max_i |xi_i(K) - limit|`.
    pub spread: f64,
    /// Largest coordinate oscillation over the tail window.
    pub tail_oscillation: f64,
    /// `d_i(limit)` for every set.
    pub limit_distances: Vec<f64>,
    pub tail_max_error: f64,
    pub tail_max_dist: f64,
    pub tol: f64,
    /// All of the above within `tol`.
    pub holds: bool,
}

pub fn constrained_consensus_report(
    run: &ConstrainedRun,
    sets: &[ConvexSet],
    tol: f64,
    tail_window: usize,
) -> Result<ConstrainedReport> {
    let k_final = run.steps();
    if tail_window == 0 || k_final < 2 * tail_window {
        return Err(Error::HorizonTooShort {
            len: k_final,
            needed: 2 * tail_window.max(1),
        });
    }
    let n = run.final_xi.len();
    let d = sets[0].dim();
    let limit: Vec<f64> = (0..d)
        .map(|c| run.final_xi.iter().map(|x| x[c]).sum::<f64>() / n as f64)
        .collect();
    let spread = run.final_xi.iter().map(|x| dist(x, &limit)).fold(0.0, f64::max);
    let tail = k_final - tail_window..=k_final;
    let mut tail_oscillation: f64 = 0.0;
    for i in 0..n {
        for c in 0..d {
            let (lo, hi) = tail
                .clone()
                .map(|k| run.xi(k)[i][c])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            tail_oscillation = tail_oscillation.max(hi - lo);
        }
    }
    let limit_distances = sets.iter().map(|s| s.distance(&limit)).collect::<Result<Vec<_>>>()?;
    let zero = vec![0.0; d];
    let tail_states = &run.states[k_final - tail_window..];
    let tail_max_error = tail_states
        .iter()
        .flat_map(|s| s.e.iter().map(|e| dist(e, &zero)))
        .fold(0.0, f64::max);
    let tail_max_dist = tail_states
        .iter()
        .flat_map(|s| s.dist.iter().copied())
        .chain(run.final_dist.iter().copied())
        .fold(0.0, f64::max);
    let consensus = spread <= tol && tail_oscillation <= tol;
    let holds = consensus
        && limit_distances.iter().all(|&v| v <= tol)
        && tail_max_error <= tol
        && tail_max_dist <= tol;
    Ok(ConstrainedReport {
        consensus,
        limit,
        spread,
        tail_oscillation,
        limit_distances,
        tail_max_error,
        tail_max_dist,
        tol,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::run_equality;
    use crate::StochasticMatrix;

    fn axes() -> Vec<ConvexSet> {
        vec![
            ConvexSet::hyperplane(vec![1.0, 0.0], 0.0).unwrap(),
            ConvexSet::hyperplane(vec![0.0, 1.0], 0.0).unwrap(),
        ]
    }

    #[test]
    fn projection_examples() {
        let b = ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.project(&[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        let h = ConvexSet::hyperplane(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(h.project(&[3.0, 4.0]).unwrap(), vec![0.0, 4.0]);
        let hs = ConvexSet::halfspace(vec![1.0, 1.0], 1.0).unwrap();
        assert_eq!(hs.project(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert!((hs.distance(&[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.project(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        let aff = ConvexSet::affine(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![1.0, 2.0]).unwrap();
        let p = aff.project(&[5.0, 5.0, 5.0]).unwrap();
        for (a, b) in p.iter().zip([1.0, 2.0, 5.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_sets() {
        assert!(matches!(
            ConvexSet::affine(vec![vec![1.0, 1.0], vec![2.0, 2.0]], vec![0.0, 0.0]),
            Err(Error::DegenerateSet(_))
        ));
        assert!(matches!(ConvexSet::halfspace(vec![0.0, 0.0], 1.0), Err(Error::DegenerateSet(_))));
        assert!(ConvexSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::ball(vec![0.0], -1.0).is_err());
        let h = ConvexSet::hyperplane(vec![1.0, 0.0], 0.0).unwrap();
        assert!(matches!(h.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projection_inequality_examples() {
        let hs = ConvexSet::halfspace(vec![1.0, 0.0], 0.0).unwrap();
        assert_eq!(projection_inequality_slack(&hs, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(verify_projection_inequality(&hs, &[-1.0, 2.0], &[-1.0, 2.0]).unwrap());
        assert!(matches!(
            verify_projection_inequality(&hs, &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::YNotInSet { .. })
        ));
    }

    #[test]
    fn set_spec_json() {
        let spec: SetSpec = serde_json::from_str(r#"{"kind":"halfspace","a":[1,1],"b":1}"#).unwrap();
        assert_eq!(
            spec,
            SetSpec::Halfspace {
                a: vec![1.0, 1.0],
                b: 1.0
            }
        );
        assert!(serde_json::from_str::<SetSpec>(r#"{"kind":"cone","a":[1]}"#).is_err());
    }

    #[test]
    fn hyperplane_pair_reaches_origin() {
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(2));
        let xi0 = vec![vec![3.0, -1.0], vec![2.0, 5.0]];
        for variant in [Variant::Nedic, Variant::Morse, Variant::Tempo] {
            let run = run_constrained(variant, &seq, &axes(), &xi0, 500).unwrap();
            let r = constrained_consensus_report(&run, &axes(), 1e-6, 50).unwrap();
            assert!(r.holds, "{variant:?}: {r:?}");
            assert!(r.limit.iter().all(|v| v.abs() < 1e-6));
        }
    }

    #[test]
    fn records_eta_and_error() {
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(2));
        let run = run_constrained(Variant::Nedic, &seq, &axes(), &[vec![2.0, 0.0], vec![0.0, 2.0]], 3).unwrap();
        assert_eq!(run.states[0].eta, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(run.xi(1), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(run.states[0].e, vec![vec![-1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(run.states[0].dist, vec![2.0, 2.0]);
        assert_eq!(run.states[1].dist, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_projections_reduce_to_averaging() {
        let w = StochasticMatrix::new(vec![vec![0.6, 0.4, 0.0], vec![0.1, 0.8, 0.1], vec![0.0, 0.5, 0.5]]).unwrap();
        let seq = MatrixSequence::constant(w);
        let big = 1e300;
        let sets: Vec<ConvexSet> = (0..3)
            .map(|_| ConvexSet::boxed(vec![-big; 2], vec![big; 2]).unwrap())
            .collect();
        let xi0 = vec![vec![1.0, -1.0], vec![0.5, 2.0], vec![-3.0, 0.25]];
        for variant in [Variant::Nedic, Variant::Morse, Variant::Tempo] {
            let run = run_constrained(variant, &seq, &sets, &xi0, 30).unwrap();
            for c in 0..2 {
                let x0: Vec<f64> = xi0.iter().map(|x| x[c]).collect();
                let eq = run_equality(&seq, &x0, 30).unwrap();
                for k in 0..=30 {
                    let got: Vec<f64> = run.xi(k).iter().map(|x| x[c]).collect();
                    assert_eq!(got, eq.state(k), "{variant:?} k={k}");
                }
            }
        }
    }

    #[test]
    fn disjoint_sets_leave_residuals() {
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(2));
        let sets = vec![
            ConvexSet::halfspace(vec![1.0, 0.0], -1.0).unwrap(),
            ConvexSet::halfspace(vec![-1.0, 0.0], -1.0).unwrap(),
        ];
        let run = run_constrained(Variant::Nedic, &seq, &sets, &[vec![0.0, 0.0], vec![0.0, 0.0]], 200).unwrap();
        let r = constrained_consensus_report(&run, &sets, 1e-6, 50).unwrap();
        assert!(!r.holds);
        assert!(r.tail_max_error >= 0.5);
    }

    #[test]
    fn single_agent_box() {
        let seq = MatrixSequence::constant(StochasticMatrix::identity(1));
        let sets = vec![ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()];
        let run = run_constrained(Variant::Nedic, &seq, &sets, &[vec![3.0, -2.0]], 100).unwrap();
        assert_eq!(run.xi(1), &[vec![1.0, 0.0]]);
        let r = constrained_consensus_report(&run, &sets, 1e-12, 20).unwrap();
        assert!(r.holds);
        assert!(matches!(
            constrained_consensus_report(&run, &sets, 1e-12, 60),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let seq = MatrixSequence::constant(StochasticMatrix::uniform(2));
        let run = run_constrained(Variant::Tempo, &seq, &axes(), &[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        let csv = run.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,xi_1_1,xi_1_2,xi_2_1,xi_2_2,e_1,e_2,dist_1,dist_2");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].contains(",,"));
    }
}
