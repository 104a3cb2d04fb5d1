//! Executable predicates for the dichotomy criteria.
//!
//! Conditions quantified over all `k` are checked on a finite horizon
//! `k = 0..=horizon_k`; every [`Verdict`] states the truncation it used.
//! Existential searches over `m` stop at `search_cap_m`, and a miss is
//! reported as "not found within cap", never as a disproof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, in_s_eps_dense, is_primitive, strong_components, ThresholdGraph};
use crate::matrix::StochasticMatrix;
use crate::protocols::{sorted_view, Trajectory, TrajectoryKind};
use crate::sequence::{evolutionary_matrix, MatrixSequence};

/// Slack on entry comparisons against `delta^B`.
pub const ENTRY_TOL: f64 = 1e-12;
/// Absolute entrywise tolerance for commutation and equality of matrices.
pub const COMMUTE_TOL: f64 = 1e-10;
/// Slack allowed in the contraction inequalities.
pub const CONTRACTION_TOL: f64 = 1e-12;

const MAX_WITNESSES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerConfig {
    /// Threshold `eps > 0` for membership in `S_eps`.
    pub eps: f64,
    /// Weight floor `delta > 0`.
    pub delta: f64,
    /// Joint-connectivity window `B >= 1`.
    pub window_b: usize,
    /// Steps `k = 0..=horizon_k` are checked.
    pub horizon_k: usize,
    /// Largest `m` tried when searching for `Phi(m, k)` in `S_eps`.
    pub search_cap_m: usize,
    /// Partial-sum floor standing in for a divergent series.
    pub mass_floor: f64,
}

impl CheckerConfig {
    /// Defaults for `n` agents; the search cap is `50 n`.
    pub fn for_n(n: usize) -> Self {
        CheckerConfig {
            eps: 1e-3,
            delta: 0.1,
            window_b: 1,
            horizon_k: 20,
            search_cap_m: (50 * n).max(21),
            mass_floor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.eps > 0.0) {
            return bad("eps must be > 0");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be > 0");
        }
        if self.window_b < 1 {
            return bad("window_b must be >= 1");
        }
        if self.horizon_k < 1 {
            return bad("horizon_k must be >= 1");
        }
        if self.search_cap_m <= self.horizon_k {
            return bad("search_cap_m must exceed horizon_k");
        }
        if !(self.mass_floor > 0.0) {
            return bad("mass_floor must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// `Phi(m, k)` satisfies the condition.
    Step { k: usize, m: usize },
    /// Nothing found for `k` with `m <= cap`.
    NotFound { k: usize, cap: usize },
    /// Offending entry `w_ij(k)`.
    Entry { k: usize, i: usize, j: usize, value: f64 },
    /// Window or product starting at `k` is not strongly connected.
    Disconnected { k: usize, components: Vec<Vec<usize>> },
    /// `W(k)` neither equals nor commutes with the reference matrix.
    NonCommuting { k: usize, deviation: f64 },
    Count { label: String, value: usize },
    Value { label: String, value: f64 },
    Flag { label: String, value: bool },
    /// A sub-check at step `k` raised an error.
    Failure { k: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub holds: bool,
    pub horizon: usize,
    pub witnesses: Vec<Witness>,
    pub truncation_note: String,
}

impl Verdict {
    fn new(check: &str, holds: bool, horizon: usize, witnesses: Vec<Witness>, note: impl Into<String>) -> Self {
        Verdict {
            check: check.to_string(),
            holds,
            horizon,
            witnesses,
            truncation_note: note.into(),
        }
    }

    /// `(k, m)` pairs recorded as [`Witness::Step`].
    pub fn step_pairs(&self) -> Vec<(usize, usize)> {
        self.witnesses
            .iter()
            .filter_map(|w| match w {
                Witness::Step { k, m } => Some((*k, *m)),
                _ => None,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

fn horizon_note(horizon: usize) -> String {
    format!("checked for k = 0..={horizon} only; the condition is stated for all k")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StaticDichotomy {
    /// All strong components are isolated and aperiodic.
    pub dichotomic: bool,
    /// Strongly connected and aperiodic, i.e. primitive.
    pub consensus_dichotomic: bool,
}

/// Structural classification for a constant `W`.
pub fn check_theorem1_static(w: &StochasticMatrix) -> StaticDichotomy {
    let g = build_graph(w, 0.0);
    let scc = strong_components(&g);
    let isolated = scc.condensation_arcs.is_empty();
    let aperiodic = scc.periods.iter().all(|&p| p == 1);
    let consensus_dichotomic = scc.components.len() == 1 && aperiodic;
    debug_assert_eq!(consensus_dichotomic, is_primitive(w).primitive);
    StaticDichotomy {
        dichotomic: isolated && aperiodic,
        consensus_dichotomic,
    }
}

/// Bounded non-convergent solution for a constant `W` with an arc `i -> j`
/// such that `i` is not reachable from `j`.
///
/// With `J` the set reachable from `j`, the solution is `(-1)^k` at `i`, `M`
/// on `J` and `-1` elsewhere, where `M = ceil(2 / w_ij)` so that
/// `(M + 1) w_ij > 2`. The result is checked against `x(k+1) <= W x(k)` with
/// zero tolerance.
pub fn construct_thm1_counterexample(w: &StochasticMatrix, i: usize, j: usize, steps: usize) -> Result<Trajectory> {
    let n = w.n();
    for v in [i, j] {
        if v >= n {
            return Err(Error::NodeOutOfRange { node: v, n });
        }
    }
    let wij = w.get(i, j);
    if wij <= 0.0 {
        return Err(Error::PreconditionViolated(format!("w[{i}][{j}] = 0")));
    }
    let g = build_graph(w, 0.0);
    let in_j = g.reachable_from(j);
    if in_j[i] {
        return Err(Error::PreconditionViolated(format!("node {i} is reachable from node {j}")));
    }
    let big_m = (2.0 / wij).ceil();
    let states = (0..=steps)
        .map(|k| {
            (0..n)
                .map(|r| {
                    if r == i {
                        if k % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    } else if in_j[r] {
                        big_m
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect();
    let traj = Trajectory::new(states, "constant", TrajectoryKind::Inequality)?;
    traj.validate_inequality(&MatrixSequence::constant(w.clone()), 0.0)?;
    Ok(traj)
}

/// Bounded non-convergent solution for a constant `W` whose graph has a
/// closed strong component of period `p >= 2`: the indicator of one cyclic
/// class of that component, rotated by `W` every step, and zero elsewhere.
pub fn construct_periodic_counterexample(w: &StochasticMatrix, steps: usize) -> Result<Trajectory> {
    let n = w.n();
    let g = build_graph(w, 0.0);
    let scc = strong_components(&g);
    let closed = |c: usize| scc.condensation_arcs.iter().all(|&(a, _)| a != c);
    let c = (0..scc.components.len())
        .find(|&c| scc.periods[c] >= 2 && closed(c))
        .ok_or_else(|| Error::PreconditionViolated("no closed periodic strong component".into()))?;
    let comp = &scc.components[c];
    let p = scc.periods[c];
    let class = cyclic_classes(&g, comp, p);
    // arcs go from class t to class t + 1, so x(k) is the indicator of class -k mod p
    let states = (0..=steps)
        .map(|k| {
            let target = (p - k % p) % p;
            (0..n)
                .map(|v| match class[v] {
                    Some(t) if t == target => 1.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let traj = Trajectory::new(states, "constant", TrajectoryKind::Inequality)?;
    traj.validate_inequality(&MatrixSequence::constant(w.clone()), 0.0)?;
    Ok(traj)
}

fn cyclic_classes(g: &ThresholdGraph, comp: &[usize], p: usize) -> Vec<Option<usize>> {
    let mut inside = vec![false; g.n()];
    for &v in comp {
        inside[v] = true;
    }
    let mut class = vec![None; g.n()];
    class[comp[0]] = Some(0);
    let mut queue = std::collections::VecDeque::from([comp[0]]);
    while let Some(u) = queue.pop_front() {
        let cu = class[u].unwrap();
        for &v in g.successors(u) {
            if inside[v] && class[v].is_none() {
                class[v] = Some((cu + 1) % p);
                queue.push_back(v);
            }
        }
    }
    class
}

/// Any bounded non-convergent solution for a non-dichotomic constant `W`;
/// `None` when `W` is dichotomic.
pub fn find_counterexample(w: &StochasticMatrix, steps: usize) -> Result<Option<Trajectory>> {
    let g = build_graph(w, 0.0);
    let scc = strong_components(&g);
    if let Some((i, j)) = g.arcs().find(|&(i, j)| scc.comp_of[i] != scc.comp_of[j]) {
        return construct_thm1_counterexample(w, i, j, steps).map(Some);
    }
    if scc.periods.iter().any(|&p| p >= 2) {
        return construct_periodic_counterexample(w, steps).map(Some);
    }
    Ok(None)
}

fn first_s_eps_step(seq: &MatrixSequence, k: usize, cap: usize, eps: f64) -> Option<usize> {
    let mut phi = StochasticMatrix::identity(seq.n());
    for m in k + 1..=cap {
        phi = seq.at(m - 1).mul(&phi);
        if in_s_eps_dense(phi.as_matrix(), eps) {
            return Some(m);
        }
    }
    None
}

/// For every `k <= horizon_k`, searches the smallest `m` in
/// `(k, search_cap_m]` with `Phi(m, k)` in `S_eps`.
pub fn check_theorem2_condition(seq: &MatrixSequence, cfg: &CheckerConfig) -> Result<Verdict> {
    cfg.validate()?;
    let cap = cfg.search_cap_m;
    let witnesses: Vec<Witness> = (0..=cfg.horizon_k)
        .into_par_iter()
        .map(|k| match first_s_eps_step(seq, k, cap, cfg.eps) {
            Some(m) => Witness::Step { k, m },
            None => Witness::NotFound { k, cap },
        })
        .collect();
    let holds = witnesses.iter().all(|w| matches!(w, Witness::Step { .. }));
    Ok(Verdict::new(
        "theorem2_condition",
        holds,
        cfg.horizon_k,
        witnesses,
        format!(
            "{}; m searched up to {cap}, a miss is not a disproof",
            horizon_note(cfg.horizon_k)
        ),
    ))
}

fn assumption1_violations(seq: &MatrixSequence, delta: f64, last_k: usize) -> (Vec<Witness>, f64) {
    let mut out = Vec::new();
    let mut min_positive = f64::INFINITY;
    let n = seq.n();
    for k in 0..=last_k {
        let w = seq.at(k);
        for i in 0..n {
            for j in 0..n {
                let v = w.get(i, j);
                if v > 0.0 {
                    min_positive = min_positive.min(v);
                }
                let ok = if i == j { v >= delta - ENTRY_TOL } else { v == 0.0 || v >= delta - ENTRY_TOL };
                if !ok && out.len() < MAX_WITNESSES {
                    out.push(Witness::Entry { k, i, j, value: v });
                }
            }
        }
    }
    (out, min_positive)
}

/// Diagonal entries at least `delta`, off-diagonal entries in
/// `{0} U [delta, 1]`, for every `k <= horizon_k`.
pub fn check_assumption1(seq: &MatrixSequence, delta: f64, horizon_k: usize) -> Result<Verdict> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("delta must be > 0".into()));
    }
    let (mut witnesses, min_positive) = assumption1_violations(seq, delta, horizon_k);
    let holds = witnesses.is_empty();
    if holds {
        witnesses.push(Witness::Value {
            label: "min_positive_entry".into(),
            value: min_positive,
        });
    }
    Ok(Verdict::new("assumption1", holds, horizon_k, witnesses, horizon_note(horizon_k)))
}

fn window_graph(seq: &MatrixSequence, k: usize, b: usize) -> ThresholdGraph {
    let n = seq.n();
    let mut sum = nalgebra::DMatrix::zeros(n, n);
    for s in k..k + b {
        sum += seq.at(s).as_matrix();
    }
    ThresholdGraph::from_dense(&sum, 0.0)
}

/// The graph of `W(k) + ... + W(k+B-1)` is strongly connected for every
/// `k <= horizon_k`.
pub fn check_assumption2(seq: &MatrixSequence, b: usize, horizon_k: usize) -> Result<Verdict> {
    if b < 1 {
        return Err(Error::InvalidConfig("window B must be >= 1".into()));
    }
    let mut witnesses = Vec::new();
    for k in 0..=horizon_k {
        let scc = strong_components(&window_graph(seq, k, b));
        if scc.components.len() > 1 && witnesses.len() < MAX_WITNESSES {
            witnesses.push(Witness::Disconnected {
                k,
                components: scc.components,
            });
        }
    }
    let holds = witnesses.is_empty();
    if holds {
        witnesses.push(Witness::Count {
            label: "windows_checked".into(),
            value: horizon_k + 1,
        });
    }
    Ok(Verdict::new("assumption2", holds, horizon_k, witnesses, horizon_note(horizon_k)))
}

/// Finite proxy for infinite joint connectivity: the graph of arcs whose
/// partial sums over `k <= horizon_k` reach `mass_floor` is strongly
/// connected.
pub fn check_assumption3(seq: &MatrixSequence, horizon_k: usize, mass_floor: f64) -> Result<Verdict> {
    if !(mass_floor > 0.0) {
        return Err(Error::InvalidConfig("mass_floor must be > 0".into()));
    }
    let n = seq.n();
    let mut sum = nalgebra::DMatrix::zeros(n, n);
    for k in 0..=horizon_k {
        sum += seq.at(k).as_matrix();
    }
    let g = ThresholdGraph::from_dense(&sum, mass_floor);
    let scc = strong_components(&g);
    let holds = scc.components.len() == 1;
    let witnesses = if holds {
        vec![Witness::Count {
            label: "heavy_arcs".into(),
            value: g.arc_count(),
        }]
    } else {
        vec![Witness::Disconnected {
            k: horizon_k,
            components: scc.components,
        }]
    };
    Ok(Verdict::new(
        "assumption3",
        holds,
        horizon_k,
        witnesses,
        format!(
            "proxy: arcs with sum_{{k<={horizon_k}}} w_ij(k) >= {mass_floor}; divergence of the full series cannot be decided from a finite prefix"
        ),
    ))
}

/// `Phi(k+B, k)` lies in `S_{delta^B}` for every `k <= horizon_k`, given that
/// the weight floor and the `B`-window connectivity hold on the horizon.
pub fn check_corollary1_bound(seq: &MatrixSequence, delta: f64, b: usize, horizon_k: usize) -> Result<Verdict> {
    let a1 = check_assumption1(seq, delta, horizon_k + b - 1)?;
    if !a1.holds {
        return Err(Error::PreconditionViolated("weight floor fails on the horizon".into()));
    }
    let a2 = check_assumption2(seq, b, horizon_k)?;
    if !a2.holds {
        return Err(Error::PreconditionViolated("joint connectivity fails on the horizon".into()));
    }
    let eps = delta.powi(b as i32);
    let witnesses: Vec<Witness> = (0..=horizon_k)
        .into_par_iter()
        .map(|k| {
            let phi = evolutionary_matrix(seq, k, k + b).expect("k <= k + b");
            if in_s_eps_dense(phi.as_matrix(), eps - ENTRY_TOL) {
                Witness::Step { k, m: k + b }
            } else {
                let g = ThresholdGraph::from_dense(phi.as_matrix(), eps - ENTRY_TOL);
                Witness::Disconnected {
                    k,
                    components: strong_components(&g).components,
                }
            }
        })
        .collect();
    let holds = witnesses.iter().all(|w| matches!(w, Witness::Step { .. }));
    Ok(Verdict::new(
        "corollary1",
        holds,
        horizon_k,
        witnesses,
        horizon_note(horizon_k),
    ))
}

/// Every `W(k)` equals `W0` or commutes with it, `W0` occurs at least
/// `min_occurrences` times, and the resulting `S_eps` condition is confirmed
/// with `eps` just below the smallest entry of the first positive power of `W0`.
pub fn check_corollary2(
    seq: &MatrixSequence,
    w0: &StochasticMatrix,
    cfg: &CheckerConfig,
    min_occurrences: usize,
) -> Result<Verdict> {
    let prim = is_primitive(w0);
    let Some(d) = prim.witness else {
        return Err(Error::NotPrimitive);
    };
    if w0.n() != seq.n() {
        return Err(Error::DimensionMismatch {
            expected: seq.n(),
            found: w0.n(),
        });
    }
    let mut witnesses = Vec::new();
    let mut occurrences = 0;
    let mut commuting = true;
    for k in 0..=cfg.horizon_k {
        let w = seq.at(k);
        if w.max_abs_diff(w0) <= COMMUTE_TOL {
            occurrences += 1;
            continue;
        }
        let deviation = w.mul(w0).max_abs_diff(&w0.mul(&w));
        if deviation > COMMUTE_TOL {
            commuting = false;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(Witness::NonCommuting { k, deviation });
            }
        }
    }
    witnesses.push(Witness::Count {
        label: "w0_occurrences".into(),
        value: occurrences,
    });
    let eps = w0.pow(d).min_entry() * (1.0 - 1e-9);
    witnesses.push(Witness::Value {
        label: "eps".into(),
        value: eps,
    });
    let thm2 = check_theorem2_condition(seq, &CheckerConfig { eps, ..*cfg })?;
    witnesses.extend(thm2.witnesses.iter().cloned());
    let holds = commuting && occurrences >= min_occurrences && thm2.holds;
    Ok(Verdict::new(
        "corollary2",
        holds,
        cfg.horizon_k,
        witnesses,
        format!(
            "{}; W0 must occur at least {min_occurrences} times; the infinite-occurrence condition is not decidable from a prefix",
            horizon_note(cfg.horizon_k)
        ),
    ))
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    y.sort_by(f64::total_cmp);
    y
}

/// `(1 - eps) y_n(k) + eps y_i(k) - y_{i+1}(m)`, with `i` counted from one.
pub fn lemma_contraction_slack(traj: &Trajectory, k: usize, m: usize, eps: f64, i: usize) -> f64 {
    let yk = sorted(traj.state(k));
    let ym = sorted(traj.state(m));
    let n = yk.len();
    (1.0 - eps) * yk[n - 1] + eps * yk[i - 1] - ym[i]
}

fn check_index_range(traj: &Trajectory, k: usize, m: usize, i: usize) -> Result<()> {
    let n = traj.n();
    if !(1..n).contains(&i) {
        return Err(Error::PreconditionViolated(format!("need 1 <= i < n, got i = {i}")));
    }
    if m <= k {
        return Err(Error::InvalidRange { k, m });
    }
    if m > traj.steps() {
        return Err(Error::PreconditionViolated(format!(
            "trajectory has {} steps, m = {m}",
            traj.steps()
        )));
    }
    Ok(())
}

/// `y_{i+1}(m) <= (1 - eps) y_n(k) + eps y_i(k)` along a solution of the
/// inequality, provided `Phi(m, k)` lies in `S_eps`.
pub fn check_lemma_contraction(
    traj: &Trajectory,
    seq: &MatrixSequence,
    k: usize,
    m: usize,
    eps: f64,
    i: usize,
) -> Result<bool> {
    check_index_range(traj, k, m, i)?;
    let phi = evolutionary_matrix(seq, k, m)?;
    if !in_s_eps_dense(phi.as_matrix(), eps) {
        return Err(Error::PreconditionViolated(format!("Phi({m}, {k}) is not in S_eps")));
    }
    Ok(lemma_contraction_slack(traj, k, m, eps, i) >= -CONTRACTION_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BidirectionalWitness {
    pub m: usize,
    pub slack: f64,
}

/// Smallest `m > k` such that some arc joins `J_i(k)` and its complement at
/// step `m - 1`, together with the contraction bound at `(k, m)` for weight
/// floor `delta`.
pub fn find_bidirectional_m(
    seq: &MatrixSequence,
    traj: &Trajectory,
    k: usize,
    i: usize,
    cap: usize,
    delta: f64,
) -> Result<BidirectionalWitness> {
    let n = seq.n();
    if traj.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: traj.n(),
        });
    }
    if !(1..n).contains(&i) {
        return Err(Error::PreconditionViolated(format!("need 1 <= i < n, got i = {i}")));
    }
    for s in 0..cap {
        let w = seq.at(s);
        for a in 0..n {
            for b in 0..n {
                if (w.get(a, b) > 0.0) != (w.get(b, a) > 0.0) {
                    let (i, j) = if w.get(a, b) > 0.0 { (a, b) } else { (b, a) };
                    return Err(Error::NotBidirectional { k: s, i, j });
                }
            }
        }
    }
    let view = sorted_view(traj);
    let mut in_j = vec![false; n];
    for &v in view.j_set(k, i) {
        in_j[v] = true;
    }
    let m = (k..cap)
        .find(|&s| {
            let w = seq.at(s);
            (0..n).any(|a| in_j[a] && (0..n).any(|b| !in_j[b] && w.get(a, b) > 0.0))
        })
        .map(|s| s + 1)
        .ok_or(Error::NotFoundWithinCap { k, cap })?;
    check_index_range(traj, k, m, i)?;
    let slack = lemma_contraction_slack(traj, k, m, delta, i);
    if slack < -CONTRACTION_TOL {
        return Err(Error::ContractionViolated { k, m, i, slack });
    }
    Ok(BidirectionalWitness { m, slack })
}

/// `y_n(p) - phi_lj(q, p) (y_n(p) - x_j(p)) - x_l(q)`; nonnegative along any
/// solution of the inequality.
pub fn tech_bound_slack(
    traj: &Trajectory,
    seq: &MatrixSequence,
    p: usize,
    q: usize,
    l: usize,
    j: usize,
) -> Result<f64> {
    if q <= p {
        return Err(Error::InvalidRange { k: p, m: q });
    }
    let phi = evolutionary_matrix(seq, p, q)?;
    let xp = traj.state(p);
    let top = xp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(top - phi.get(l, j) * (top - xp[j]) - traj.state(q)[l])
}

/// Smallest `max_i x_i(0) - x_i(k)` over the trajectory.
pub fn upper_bound_margin(traj: &Trajectory) -> f64 {
    let top = traj.state(0).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    traj.states()
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| top - v)
        .fold(f64::INFINITY, f64::min)
}

/// Contraction bound at every `(k, m)` pair found by the `S_eps` search,
/// for all `1 <= i < n`. The search is capped at the trajectory length.
pub fn check_contraction_along(traj: &Trajectory, seq: &MatrixSequence, cfg: &CheckerConfig) -> Result<Verdict> {
    let cap = cfg.search_cap_m.min(traj.steps());
    let thm2 = check_theorem2_condition(seq, &CheckerConfig { search_cap_m: cap, ..*cfg })?;
    let n = traj.n();
    let mut pairs = 0;
    let mut min_slack = f64::INFINITY;
    for (k, m) in thm2.step_pairs() {
        for i in 1..n {
            min_slack = min_slack.min(lemma_contraction_slack(traj, k, m, cfg.eps, i));
            pairs += 1;
        }
    }
    let holds = pairs > 0 && min_slack >= -CONTRACTION_TOL;
    let mut witnesses = vec![
        Witness::Count {
            label: "pairs_checked".into(),
            value: pairs,
        },
        Witness::Value {
            label: "min_slack".into(),
            value: min_slack,
        },
    ];
    witnesses.extend(thm2.witnesses.into_iter().filter(|w| matches!(w, Witness::NotFound { .. })));
    Ok(Verdict::new(
        "lemma_contraction",
        holds,
        cfg.horizon_k,
        witnesses,
        format!("{}; steps without an S_eps witness are skipped", horizon_note(cfg.horizon_k)),
    ))
}

/// [`find_bidirectional_m`] for every `k <= horizon_k` and `1 <= i < n`.
pub fn check_bidirectional_along(traj: &Trajectory, seq: &MatrixSequence, cfg: &CheckerConfig) -> Result<Verdict> {
    let cap = cfg.search_cap_m.min(traj.steps());
    let n = traj.n();
    let mut witnesses = Vec::new();
    let mut min_slack = f64::INFINITY;
    for k in 0..=cfg.horizon_k {
        for i in 1..n {
            match find_bidirectional_m(seq, traj, k, i, cap, cfg.delta) {
                Ok(w) => min_slack = min_slack.min(w.slack),
                Err(e) => {
                    if witnesses.len() < MAX_WITNESSES {
                        witnesses.push(Witness::Failure {
                            k,
                            reason: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    let holds = witnesses.is_empty();
    witnesses.push(Witness::Value {
        label: "min_slack".into(),
        value: min_slack,
    });
    Ok(Verdict::new(
        "bidirectional_contraction",
        holds,
        cfg.horizon_k,
        witnesses,
        format!("{}; m searched up to {cap}", horizon_note(cfg.horizon_k)),
    ))
}

/// [`tech_bound_slack`] at `samples` random tuples `p < q <= K`, `l`, `j`.
pub fn check_tech_bound_sampled(traj: &Trajectory, seq: &MatrixSequence, samples: usize, seed: u64) -> Result<Verdict> {
    let steps = traj.steps();
    if steps < 1 {
        return Err(Error::HorizonTooShort { len: steps, needed: 1 });
    }
    let n = traj.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut witnesses = Vec::new();
    for _ in 0..samples {
        let p = rng.gen_range(0..steps);
        let q = rng.gen_range(p + 1..=steps);
        let (l, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let slack = tech_bound_slack(traj, seq, p, q, l, j)?;
        if slack < -1e-10 && witnesses.len() < MAX_WITNESSES {
            witnesses.push(Witness::Value {
                label: format!("slack(p={p},q={q},l={l},j={j})"),
                value: slack,
            });
        }
        min_slack = min_slack.min(slack);
    }
    let holds = witnesses.is_empty();
    witnesses.push(Witness::Value {
        label: "min_slack".into(),
        value: min_slack,
    });
    Ok(Verdict::new(
        "tech_bound",
        holds,
        steps,
        witnesses,
        format!("{samples} sampled tuples, seed {seed}"),
    ))
}

/// `x(k) <= max_i x_i(0)` for every stored state, up to round-off relative
/// to that maximum.
pub fn check_upper_bound(traj: &Trajectory) -> Verdict {
    let top = traj.state(0).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = upper_bound_margin(traj);
    let holds = margin >= -ENTRY_TOL * top.abs().max(1.0);
    Verdict::new(
        "upper_bound",
        holds,
        traj.steps(),
        vec![Witness::Value {
            label: "min_margin".into(),
            value: margin,
        }],
        format!("all {} stored states checked", traj.steps() + 1),
    )
}

/// [`check_theorem1_static`] as a verdict; `holds` is the dichotomy flag.
pub fn theorem1_verdict(w: &StochasticMatrix) -> Verdict {
    let r = check_theorem1_static(w);
    Verdict::new(
        "theorem1_static",
        r.dichotomic,
        0,
        vec![
            Witness::Flag {
                label: "dichotomic".into(),
                value: r.dichotomic,
            },
            Witness::Flag {
                label: "consensus_dichotomic".into(),
                value: r.consensus_dichotomic,
            },
        ],
        "structural check of a constant matrix, no truncation",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{run_equality, run_inequality, SlackPolicy};
    use crate::sequence::TailRule;

    fn m(rows: Vec<Vec<f64>>) -> StochasticMatrix {
        StochasticMatrix::new(rows).unwrap()
    }

    fn avg2() -> StochasticMatrix {
        StochasticMatrix::uniform(2)
    }

    fn swap2() -> StochasticMatrix {
        m(vec![vec![0.0, 1.0], vec![1.0, 0.0]])
    }

    fn cfg(horizon_k: usize, cap: usize, eps: f64) -> CheckerConfig {
        CheckerConfig {
            eps,
            horizon_k,
            search_cap_m: cap,
            ..CheckerConfig::for_n(2)
        }
    }

    #[test]
    fn theorem1_examples() {
        assert_eq!(
            check_theorem1_static(&avg2()),
            StaticDichotomy {
                dichotomic: true,
                consensus_dichotomic: true
            }
        );
        assert_eq!(
            check_theorem1_static(&swap2()),
            StaticDichotomy {
                dichotomic: false,
                consensus_dichotomic: false
            }
        );
        let blocks = m(vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.3, 0.7],
            vec![0.0, 0.0, 0.6, 0.4],
        ]);
        assert_eq!(
            check_theorem1_static(&blocks),
            StaticDichotomy {
                dichotomic: true,
                consensus_dichotomic: false
            }
        );
    }

    #[test]
    fn counterexample_example() {
        let w = m(vec![vec![0.5, 0.5], vec![0.0, 1.0]]);
        let t = construct_thm1_counterexample(&w, 0, 1, 100).unwrap();
        assert_eq!(t.state(0), &[1.0, 4.0]);
        assert_eq!(t.state(1), &[-1.0, 4.0]);
        // pointwise oracle: (-1)^{k+1} <= 0.5 (-1)^k + 2 and 4 <= 4
        for k in 0..100 {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!(-s <= 0.5 * s + 2.0);
            assert_eq!(t.state(k + 1)[0], -s);
        }
        let (margin, _, _) = t.inequality_margin(&MatrixSequence::constant(w)).unwrap();
        assert!(margin >= 0.0);
    }

    #[test]
    fn counterexample_preconditions() {
        assert!(matches!(
            construct_thm1_counterexample(&avg2(), 0, 1, 10),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            construct_thm1_counterexample(&StochasticMatrix::identity(2), 0, 1, 10),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn periodic_counterexample() {
        let t = construct_periodic_counterexample(&swap2(), 10).unwrap();
        assert_eq!(t.state(0), &[1.0, 0.0]);
        assert_eq!(t.state(1), &[0.0, 1.0]);
        assert!(find_counterexample(&avg2(), 10).unwrap().is_none());
        assert!(find_counterexample(&swap2(), 10).unwrap().is_some());
    }

    #[test]
    fn theorem2_constant_primitive() {
        let w = m(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]);
        let d = is_primitive(&w).witness.unwrap();
        let eps = w.pow(d).min_entry();
        let v = check_theorem2_condition(&MatrixSequence::constant(w), &cfg(10, 40, eps)).unwrap();
        assert!(v.holds);
        // with eps the minimum of W^d every power >= d is in S_eps too
        for (k, m) in v.step_pairs() {
            assert!(m - k <= d);
        }
    }

    #[test]
    fn theorem2_fails_for_swap_and_identity() {
        let v = check_theorem2_condition(&MatrixSequence::constant(swap2()), &cfg(5, 50, 0.5)).unwrap();
        assert!(!v.holds);
        assert!(v.witnesses.iter().all(|w| matches!(w, Witness::NotFound { cap: 50, .. })));
        let v = check_theorem2_condition(
            &MatrixSequence::constant(StochasticMatrix::identity(2)),
            &cfg(5, 50, 0.01),
        )
        .unwrap();
        assert!(!v.holds);
    }

    #[test]
    fn assumption1_examples() {
        let id = MatrixSequence::constant(StochasticMatrix::identity(2));
        assert!(check_assumption1(&id, 1.0, 10).unwrap().holds);
        assert!(check_assumption1(&MatrixSequence::constant(avg2()), 0.5, 10).unwrap().holds);
        let light = m(vec![vec![0.99, 0.01], vec![0.5, 0.5]]);
        let seq = MatrixSequence::scripted(vec![avg2(), avg2(), light], TailRule::RepeatLast).unwrap();
        let v = check_assumption1(&seq, 0.1, 5).unwrap();
        assert!(!v.holds);
        assert_eq!(
            v.witnesses[0],
            Witness::Entry {
                k: 2,
                i: 0,
                j: 1,
                value: 0.01
            }
        );
    }

    #[test]
    fn assumption2_examples() {
        assert!(check_assumption2(&MatrixSequence::constant(avg2()), 1, 10).unwrap().holds);
        let alt = MatrixSequence::periodic(vec![StochasticMatrix::identity(2), avg2()]).unwrap();
        assert!(check_assumption2(&alt, 2, 10).unwrap().holds);
        assert!(!check_assumption2(&alt, 1, 10).unwrap().holds);
        let id = MatrixSequence::constant(StochasticMatrix::identity(3));
        assert!(!check_assumption2(&id, 5, 10).unwrap().holds);
    }

    #[test]
    fn assumption3_examples() {
        let w = m(vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]]);
        let v = check_assumption3(&MatrixSequence::constant(w), 3, 0.5).unwrap();
        assert!(v.holds);
        assert!(v.truncation_note.contains("proxy"));
        let id = MatrixSequence::constant(StochasticMatrix::identity(2));
        assert!(!check_assumption3(&id, 100, 1.0).unwrap().holds);

        // w_01(k) = 2^-k: partial sums stay below 2, the reverse arc is heavy
        let horizon = 40;
        let ms: Vec<StochasticMatrix> = (0..=horizon)
            .map(|k| {
                let a = 0.5f64.powi(k);
                m(vec![vec![1.0 - a, a], vec![0.5, 0.5]])
            })
            .collect();
        let oracle: f64 = (0..=horizon).map(|k| 0.5f64.powi(k)).sum();
        assert!(oracle < 2.0);
        let seq = MatrixSequence::scripted(ms, TailRule::RepeatLast).unwrap();
        let v = check_assumption3(&seq, horizon as usize, 2.0).unwrap();
        assert!(!v.holds);
        let v = check_assumption3(&seq, horizon as usize, 1.0).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn corollary1_examples() {
        let v = check_corollary1_bound(&MatrixSequence::constant(avg2()), 0.5, 1, 10).unwrap();
        assert!(v.holds);
        let id = MatrixSequence::constant(StochasticMatrix::identity(2));
        assert!(matches!(
            check_corollary1_bound(&id, 0.5, 2, 10),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn corollary2_examples() {
        let w0 = m(vec![vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5], vec![0.5, 0.5, 0.0]]);
        let seq = MatrixSequence::interleaved(w0.clone(), StochasticMatrix::identity(3), 1).unwrap();
        let c = CheckerConfig {
            horizon_k: 30,
            search_cap_m: 200,
            ..CheckerConfig::for_n(3)
        };
        assert!(check_corollary2(&seq, &w0, &c, 3).unwrap().holds);

        let other = m(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]);
        let bad = MatrixSequence::periodic(vec![w0.clone(), StochasticMatrix::uniform(3), other]).unwrap();
        let v = check_corollary2(&bad, &w0, &c, 1).unwrap();
        assert!(!v.holds);
        assert!(matches!(v.witnesses[0], Witness::NonCommuting { k: 2, .. }));

        assert_eq!(
            check_corollary2(&MatrixSequence::constant(swap2()), &swap2(), &c, 1),
            Err(Error::NotPrimitive)
        );
    }

    #[test]
    fn lemma_contraction_examples() {
        let seq = MatrixSequence::constant(avg2());
        let t = run_equality(&seq, &[0.0, 1.0], 3).unwrap();
        assert!(check_lemma_contraction(&t, &seq, 0, 1, 0.5, 1).unwrap());
        assert_eq!(lemma_contraction_slack(&t, 0, 1, 0.5, 1), 0.0);

        let t = run_equality(&seq, &[0.3, 0.3], 3).unwrap();
        assert_eq!(lemma_contraction_slack(&t, 0, 2, 0.5, 1), 0.0);

        let id = MatrixSequence::constant(StochasticMatrix::identity(2));
        let t = run_equality(&id, &[0.0, 1.0], 3).unwrap();
        assert!(matches!(
            check_lemma_contraction(&t, &id, 0, 1, 0.5, 1),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn bidirectional_first_contact() {
        let seq = MatrixSequence::constant(avg2());
        let t = run_equality(&seq, &[0.0, 1.0], 5).unwrap();
        assert_eq!(find_bidirectional_m(&seq, &t, 0, 1, 10, 0.5).unwrap().m, 1);

        let mut ms = vec![StochasticMatrix::identity(2); 7];
        ms.push(avg2());
        let seq = MatrixSequence::scripted(ms, TailRule::RepeatLast).unwrap();
        let t = run_equality(&seq, &[0.0, 1.0], 12).unwrap();
        let w = find_bidirectional_m(&seq, &t, 0, 1, 20, 0.5).unwrap();
        assert_eq!(w.m, 8);
        let w = find_bidirectional_m(&seq, &t, 2, 1, 20, 0.5).unwrap();
        assert_eq!(w.m, 8);

        let directed = MatrixSequence::constant(m(vec![vec![0.5, 0.5], vec![0.0, 1.0]]));
        let t = run_equality(&directed, &[0.0, 1.0], 5).unwrap();
        assert_eq!(
            find_bidirectional_m(&directed, &t, 0, 1, 5, 0.5),
            Err(Error::NotBidirectional { k: 0, i: 0, j: 1 })
        );

        let id = MatrixSequence::constant(StochasticMatrix::identity(2));
        let t = run_equality(&id, &[0.0, 1.0], 5).unwrap();
        assert_eq!(
            find_bidirectional_m(&id, &t, 0, 1, 5, 0.5),
            Err(Error::NotFoundWithinCap { k: 0, cap: 5 })
        );
    }

    #[test]
    fn tech_bound_and_upper_bound() {
        let seq = MatrixSequence::constant(m(vec![vec![0.6, 0.4], vec![0.2, 0.8]]));
        let slack = SlackPolicy::Geometric { rate: 0.5, scale: 0.2 };
        let t = run_inequality(&seq, &[-1.0, 2.0], &slack, 20).unwrap();
        for p in 0..5 {
            for q in p + 1..10 {
                for l in 0..2 {
                    for j in 0..2 {
                        assert!(tech_bound_slack(&t, &seq, p, q, l, j).unwrap() >= -1e-12);
                    }
                }
            }
        }
        assert!(upper_bound_margin(&t) >= 0.0);
        assert!(tech_bound_slack(&t, &seq, 3, 3, 0, 0).is_err());
    }

    #[test]
    fn verdict_json_shape() {
        let v = check_assumption2(&MatrixSequence::constant(avg2()), 1, 3).unwrap();
        let json: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        for key in ["check", "holds", "horizon", "witnesses", "truncation_note"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
