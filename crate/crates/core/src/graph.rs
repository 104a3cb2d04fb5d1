//! Directed graphs induced by thresholding a matrix, and the structural
//! predicates built on them: strong components, periods, primitivity,
//! isolation of components, reachability and membership in `S_eps`.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;

/// Arc set `{(i, j) : w_ij >= eps}` for `eps > 0`, or `{(i, j) : w_ij > 0}`
/// for `eps == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGraph {
    n: usize,
    eps: f64,
    succ: Vec<Vec<usize>>,
    pub provenance: Option<String>,
}

impl ThresholdGraph {
    pub fn from_dense(m: &DMatrix<f64>, eps: f64) -> Self {
        let n = m.nrows();
        let keep = |v: f64| if eps > 0.0 { v >= eps } else { v > 0.0 };
        let succ = (0..n)
            .map(|i| (0..n).filter(|&j| keep(m[(i, j)])).collect())
            .collect();
        ThresholdGraph {
            n,
            eps,
            succ,
            provenance: None,
        }
    }

    /// Graph with an explicit arc list; duplicate arcs are collapsed.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut succ = vec![BTreeSet::new(); n];
        for &(i, j) in arcs {
            for v in [i, j] {
                if v >= n {
                    return Err(Error::NodeOutOfRange { node: v, n });
                }
            }
            succ[i].insert(j);
        }
        Ok(ThresholdGraph {
            n,
            eps: 0.0,
            succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
            provenance: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.succ[i].binary_search(&j).is_ok()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
    }

    pub fn arc_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Nodes reachable from `from` by walks of length >= 0.
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.succ[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn is_strongly_connected(&self) -> bool {
        strong_components(self).components.len() == 1
    }

    /// `"i j"` per line, 0-based.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.arcs() {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }
}

/// Threshold graph of a stochastic matrix.
pub fn build_graph(w: &StochasticMatrix, eps: f64) -> ThresholdGraph {
    ThresholdGraph::from_dense(w.as_matrix(), eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SccDecomposition {
    /// Components with sorted node lists, ordered by their smallest node.
    pub components: Vec<Vec<usize>>,
    /// Component index of every node.
    pub comp_of: Vec<usize>,
    /// Arcs between distinct components, sorted and deduplicated.
    pub condensation_arcs: Vec<(usize, usize)>,
    /// gcd of cycle lengths per component; 0 for a singleton without a self-loop.
    pub periods: Vec<usize>,
}

impl SccDecomposition {
    pub fn is_aperiodic(&self, c: usize) -> bool {
        self.periods[c] == 1
    }
}

pub fn strong_components(g: &ThresholdGraph) -> SccDecomposition {
    let mut pg: DiGraph<(), ()> = DiGraph::with_capacity(g.n, g.arc_count());
    for _ in 0..g.n {
        pg.add_node(());
    }
    for (i, j) in g.arcs() {
        pg.add_edge(NodeIndex::new(i), NodeIndex::new(j), ());
    }
    let mut components: Vec<Vec<usize>> = tarjan_scc(&pg)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(NodeIndex::index).collect();
            v.sort_unstable();
            v
        })
        .collect();
    components.sort_unstable_by_key(|c| c[0]);

    let mut comp_of = vec![0; g.n];
    for (c, nodes) in components.iter().enumerate() {
        for &v in nodes {
            comp_of[v] = c;
        }
    }
    let condensation_arcs: BTreeSet<(usize, usize)> = g
        .arcs()
        .map(|(i, j)| (comp_of[i], comp_of[j]))
        .filter(|(a, b)| a != b)
        .collect();
    let periods = components
        .iter()
        .map(|c| component_period(g, c).unwrap_or(0))
        .collect();
    SccDecomposition {
        components,
        comp_of,
        condensation_arcs: condensation_arcs.into_iter().collect(),
        periods,
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// gcd of the cycle lengths inside a strongly connected node set.
///
/// Levels come from a BFS restricted to `comp`; the period is the gcd of
/// `|level(u) + 1 - level(v)|` over all arcs `(u, v)` inside `comp`.
pub fn component_period(g: &ThresholdGraph, comp: &[usize]) -> Result<usize> {
    let Some(&root) = comp.first() else {
        return Err(Error::NoCycle);
    };
    let mut inside = vec![false; g.n];
    for &v in comp {
        if v >= g.n {
            return Err(Error::NodeOutOfRange { node: v, n: g.n });
        }
        inside[v] = true;
    }
    let mut level: Vec<Option<usize>> = vec![None; g.n];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for &v in &g.succ[u] {
            if inside[v] && level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    if comp.iter().any(|&v| level[v].is_none()) {
        return Err(Error::NotStronglyConnected);
    }
    let mut back = vec![false; g.n];
    back[root] = true;
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for &u in comp {
            if !back[u] && g.succ[u].contains(&v) {
                back[u] = true;
                stack.push(u);
            }
        }
    }
    if comp.iter().any(|&v| !back[v]) {
        return Err(Error::NotStronglyConnected);
    }
    let mut period = 0;
    for &u in comp {
        let lu = level[u].unwrap();
        for &v in &g.succ[u] {
            if inside[v] {
                let lv = level[v].unwrap();
                period = gcd(period, (lu + 1).abs_diff(lv));
            }
        }
    }
    if period == 0 {
        // no intra-component arc at all: a singleton without a self-loop
        return Err(Error::NoCycle);
    }
    Ok(period)
}

/// Wielandt's bound `n^2 - 2n + 2` on the primitivity exponent.
pub fn wielandt_bound(n: usize) -> usize {
    n * n + 2 - 2 * n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Primitivity {
    pub primitive: bool,
    /// Smallest `d` with `W^d` entrywise positive, when primitive.
    pub witness: Option<usize>,
}

/// Structural primitivity test: strongly connected and aperiodic.
pub fn is_primitive(w: &StochasticMatrix) -> Primitivity {
    let g = build_graph(w, 0.0);
    let scc = strong_components(&g);
    let primitive = scc.components.len() == 1 && scc.periods[0] == 1;
    let witness = if primitive {
        primitivity_exponent(w)
    } else {
        None
    };
    debug_assert_eq!(primitive, witness.is_some());
    Primitivity { primitive, witness }
}

/// Smallest `d <= n^2 - 2n + 2` with `W^d > 0`, found by powering the
/// support pattern.
pub fn primitivity_exponent(w: &StochasticMatrix) -> Option<usize> {
    let n = w.n();
    let base: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| w.get(i, j) > 0.0).collect())
        .collect();
    let mut pow = base.clone();
    for d in 1..=wielandt_bound(n) {
        if pow.iter().all(|r| r.iter().all(|&b| b)) {
            return Some(d);
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if pow[i][k] {
                    for j in 0..n {
                        next[i][j] |= base[k][j];
                    }
                }
            }
        }
        pow = next;
    }
    None
}

/// True iff the condensation has no arcs.
pub fn components_isolated(g: &ThresholdGraph) -> bool {
    let isolated = strong_components(g).condensation_arcs.is_empty();
    debug_assert_eq!(isolated, every_arc_on_cycle(g));
    isolated
}

/// True iff every arc `(i, j)` lies on a cycle, i.e. `i` is reachable from `j`.
pub fn every_arc_on_cycle(g: &ThresholdGraph) -> bool {
    (0..g.n).all(|j| {
        let preds: Vec<usize> = (0..g.n).filter(|&i| g.has_arc(i, j)).collect();
        if preds.is_empty() {
            return true;
        }
        let seen = g.reachable_from(j);
        preds.into_iter().all(|i| seen[i])
    })
}

pub(crate) fn in_s_eps_dense(m: &DMatrix<f64>, eps: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| m[(i, i)] >= eps) && ThresholdGraph::from_dense(m, eps).is_strongly_connected()
}

/// `W` belongs to `S_eps`: every diagonal entry is at least `eps` and the
/// graph of entries `>= eps` is strongly connected.
pub fn in_s_eps(w: &StochasticMatrix, eps: f64) -> bool {
    in_s_eps_dense(w.as_matrix(), eps)
}

/// True iff `from` is in `targets` or some walk from `from` reaches `targets`.
pub fn reaches_set(g: &ThresholdGraph, from: usize, targets: &[usize]) -> bool {
    let seen = g.reachable_from(from);
    targets.iter().any(|&t| t < g.n && seen[t])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn avg2() -> StochasticMatrix {
        StochasticMatrix::uniform(2)
    }

    fn swap2() -> StochasticMatrix {
        StochasticMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn threshold_semantics() {
        assert_eq!(build_graph(&avg2(), 0.6).arc_count(), 0);
        let g = build_graph(&avg2(), 0.5);
        assert_eq!(g.arcs().collect::<Vec<_>>(), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let g = build_graph(&StochasticMatrix::identity(2), 0.0);
        assert_eq!(g.arcs().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn scc_examples() {
        let g = ThresholdGraph::from_arcs(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(strong_components(&g).components, vec![vec![0, 1]]);

        let g = ThresholdGraph::from_arcs(2, &[(0, 1)]).unwrap();
        let scc = strong_components(&g);
        assert_eq!(scc.components, vec![vec![0], vec![1]]);
        assert_eq!(scc.condensation_arcs, vec![(0, 1)]);

        let g = ThresholdGraph::from_arcs(3, &[]).unwrap();
        let scc = strong_components(&g);
        assert_eq!(scc.components.len(), 3);
        assert_eq!(scc.periods, vec![0, 0, 0]);
    }

    #[test]
    fn period_examples() {
        let g = ThresholdGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(component_period(&g, &[0, 1, 2]).unwrap(), 3);
        let g = ThresholdGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0), (1, 1)]).unwrap();
        assert_eq!(component_period(&g, &[0, 1, 2]).unwrap(), 1);
        let g = ThresholdGraph::from_arcs(2, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(component_period(&g, &[0, 1]).unwrap(), 2);
    }

    #[test]
    fn period_errors() {
        let g = ThresholdGraph::from_arcs(2, &[(0, 1)]).unwrap();
        assert_eq!(component_period(&g, &[0]), Err(Error::NoCycle));
        assert_eq!(component_period(&g, &[0, 1]), Err(Error::NotStronglyConnected));
        let g = ThresholdGraph::from_arcs(1, &[(0, 0)]).unwrap();
        assert_eq!(component_period(&g, &[0]).unwrap(), 1);
    }

    #[test]
    fn primitivity_examples() {
        assert_eq!(
            is_primitive(&swap2()),
            Primitivity {
                primitive: false,
                witness: None
            }
        );
        assert_eq!(is_primitive(&avg2()).witness, Some(1));
        let w = StochasticMatrix::new(vec![
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let p = is_primitive(&w);
        assert!(p.primitive);
        // brute-force oracle: first numeric power with all entries positive
        let oracle = (1..=5).find(|&d| w.pow(d).min_entry() > 0.0);
        assert_eq!(p.witness, oracle);
        assert_eq!(p.witness, Some(4));
    }

    #[test]
    fn isolation_examples() {
        let g = ThresholdGraph::from_arcs(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]).unwrap();
        assert!(components_isolated(&g));
        let g = ThresholdGraph::from_arcs(2, &[(0, 1)]).unwrap();
        assert!(!components_isolated(&g));
        assert!(!every_arc_on_cycle(&g));
        let g = ThresholdGraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(components_isolated(&g));
    }

    #[test]
    fn s_eps_examples() {
        assert!(!in_s_eps(&StochasticMatrix::identity(2), 0.5));
        assert!(in_s_eps(&avg2(), 0.5));
        assert!(!in_s_eps(&swap2(), 0.5));
    }

    #[test]
    fn reachability_examples() {
        let chain = ThresholdGraph::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(reaches_set(&chain, 0, &[2]));
        assert!(!reaches_set(&chain, 1, &[0]));
        assert!(reaches_set(&chain, 1, &[1]));
    }

    #[test]
    fn edge_list_format() {
        let g = ThresholdGraph::from_arcs(3, &[(1, 2), (0, 1)]).unwrap();
        assert_eq!(g.to_edge_list(), "0 1\n1 2\n");
    }

    #[test]
    fn out_of_range_arc() {
        assert_eq!(
            ThresholdGraph::from_arcs(2, &[(0, 2)]),
            Err(Error::NodeOutOfRange { node: 2, n: 2 })
        );
    }
}
