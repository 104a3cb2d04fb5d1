//! Generators of matrix sequences `W(k)` and signed sequences `A(k)`.
//!
//! Every sequence is a pure function of `k`: the seeded-random kind derives
//! an independent ChaCha stream per step, so `at(k)` never depends on which
//! other steps were evaluated before.

use std::borrow::Cow;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{MatrixLiteral, SignedInfluenceMatrix, StochasticMatrix};

/// What a scripted sequence emits after its explicit list runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    #[default]
    RepeatLast,
    Cycle,
    Identity,
}

/// Support pattern of a seeded-random sequence. Self-loops are always
/// present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PatternRule {
    /// Every arc present at every step.
    Dense,
    /// Each off-diagonal arc independently with probability `p`.
    Bernoulli {
        p: f64,
        #[serde(default)]
        symmetric: bool,
    },
    /// A fixed Hamiltonian cycle split into `window` chunks; step `k`
    /// carries chunk `k mod window`, so any `window` consecutive steps
    /// jointly contain the whole cycle. Extra arcs are added with
    /// probability `extra_prob`.
    JointCycle {
        window: usize,
        #[serde(default)]
        extra_prob: f64,
        #[serde(default)]
        symmetric: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSequence {
    pub n: usize,
    pub seed: u64,
    pub pattern: PatternRule,
    /// When set, every nonzero entry is at least `delta`.
    pub delta: Option<f64>,
    cycle: Vec<usize>,
}

impl RandomSequence {
    pub fn new(n: usize, seed: u64, pattern: PatternRule, delta: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if let Some(d) = delta {
            if !(d > 0.0 && d * n as f64 <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "delta floor {d} needs 0 < delta <= 1/n for n = {n}"
                )));
            }
        }
        match &pattern {
            PatternRule::Bernoulli { p, .. } if !(0.0..=1.0).contains(p) => {
                return Err(Error::InvalidConfig(format!("arc probability {p} outside [0, 1]")));
            }
            PatternRule::JointCycle {
                window, extra_prob, ..
            } => {
                if *window == 0 {
                    return Err(Error::InvalidConfig("joint-cycle window must be >= 1".into()));
                }
                if !(0.0..=1.0).contains(extra_prob) {
                    return Err(Error::InvalidConfig(format!(
                        "extra arc probability {extra_prob} outside [0, 1]"
                    )));
                }
            }
            _ => {}
        }
        let mut cycle: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        cycle.shuffle(&mut rng);
        Ok(RandomSequence {
            n,
            seed,
            pattern,
            delta,
            cycle,
        })
    }

    fn support(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut s = vec![vec![false; n]; n];
        for (i, row) in s.iter_mut().enumerate() {
            row[i] = true;
        }
        let mut bernoulli = |s: &mut Vec<Vec<bool>>, p: f64, symmetric: bool| {
            for i in 0..n {
                for j in 0..n {
                    if i == j || (symmetric && j < i) {
                        continue;
                    }
                    if rng.gen_bool(p) {
                        s[i][j] = true;
                        if symmetric {
                            s[j][i] = true;
                        }
                    }
                }
            }
        };
        match self.pattern {
            PatternRule::Dense => {
                for row in s.iter_mut() {
                    row.fill(true);
                }
            }
            PatternRule::Bernoulli { p, symmetric } => bernoulli(&mut s, p, symmetric),
            PatternRule::JointCycle {
                window,
                extra_prob,
                symmetric,
            } => {
                if n > 1 {
                    for t in (0..n).filter(|t| t % window == k % window) {
                        let (a, b) = (self.cycle[t], self.cycle[(t + 1) % n]);
                        s[a][b] = true;
                        if symmetric {
                            s[b][a] = true;
                        }
                    }
                }
                bernoulli(&mut s, extra_prob, symmetric);
            }
        }
        s
    }

    pub fn at(&self, k: usize) -> StochasticMatrix {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let support = self.support(k, &mut rng);
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in support.iter().enumerate() {
            let cols: Vec<usize> = (0..n).filter(|&j| row[j]).collect();
            // draws in (0, 1]
            let u: Vec<f64> = cols.iter().map(|_| 1.0 - rng.gen::<f64>()).collect();
            let total: f64 = u.iter().sum();
            let (floor, free) = match self.delta {
                Some(d) => (d, 1.0 - d * cols.len() as f64),
                None => (0.0, 1.0),
            };
            for (&j, uj) in cols.iter().zip(&u) {
                m[(i, j)] = floor + free * uj / total;
            }
        }
        StochasticMatrix::from_product(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceKind {
    Constant(StochasticMatrix),
    Periodic(Vec<StochasticMatrix>),
    Scripted {
        matrices: Vec<StochasticMatrix>,
        tail: TailRule,
    },
    SeededRandom(RandomSequence),
    /// `primary` at steps `t_0 = 0`, `t_{r+1} = t_r + 1 + growth * (r + 1)`,
    /// `filler` everywhere else: filler runs grow without bound.
    Interleaved {
        primary: StochasticMatrix,
        filler: StochasticMatrix,
        growth: usize,
    },
}

/// A deterministic sequence of stochastic matrices `W(0), W(1), ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSequence {
    n: usize,
    kind: SequenceKind,
}

fn common_dim<'a>(ms: impl IntoIterator<Item = &'a StochasticMatrix>) -> Result<usize> {
    let mut n = None;
    for m in ms {
        match n {
            None => n = Some(m.n()),
            Some(d) if d != m.n() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.n(),
                })
            }
            _ => {}
        }
    }
    n.ok_or(Error::Empty)
}

impl MatrixSequence {
    pub fn constant(w: StochasticMatrix) -> Self {
        MatrixSequence {
            n: w.n(),
            kind: SequenceKind::Constant(w),
        }
    }

    pub fn periodic(ms: Vec<StochasticMatrix>) -> Result<Self> {
        let n = common_dim(&ms)?;
        Ok(MatrixSequence {
            n,
            kind: SequenceKind::Periodic(ms),
        })
    }

    pub fn scripted(matrices: Vec<StochasticMatrix>, tail: TailRule) -> Result<Self> {
        let n = common_dim(&matrices)?;
        Ok(MatrixSequence {
            n,
            kind: SequenceKind::Scripted { matrices, tail },
        })
    }

    pub fn seeded_random(r: RandomSequence) -> Self {
        MatrixSequence {
            n: r.n,
            kind: SequenceKind::SeededRandom(r),
        }
    }

    pub fn interleaved(primary: StochasticMatrix, filler: StochasticMatrix, growth: usize) -> Result<Self> {
        let n = common_dim([&primary, &filler])?;
        Ok(MatrixSequence {
            n,
            kind: SequenceKind::Interleaved {
                primary,
                filler,
                growth,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    /// Short label recorded in trajectories.
    pub fn id(&self) -> String {
        match &self.kind {
            SequenceKind::Constant(_) => format!("constant(n={})", self.n),
            SequenceKind::Periodic(ms) => format!("periodic(n={}, period={})", self.n, ms.len()),
            SequenceKind::Scripted { matrices, .. } => {
                format!("scripted(n={}, len={})", self.n, matrices.len())
            }
            SequenceKind::SeededRandom(r) => format!("seeded_random(n={}, seed={})", self.n, r.seed),
            SequenceKind::Interleaved { growth, .. } => {
                format!("interleaved(n={}, growth={growth})", self.n)
            }
        }
    }

    /// `W(k)`.
    pub fn at(&self, k: usize) -> Cow<'_, StochasticMatrix> {
        match &self.kind {
            SequenceKind::Constant(w) => Cow::Borrowed(w),
            SequenceKind::Periodic(ms) => Cow::Borrowed(&ms[k % ms.len()]),
            SequenceKind::Scripted { matrices, tail } => match matrices.get(k) {
                Some(w) => Cow::Borrowed(w),
                None => match tail {
                    TailRule::RepeatLast => Cow::Borrowed(matrices.last().unwrap()),
                    TailRule::Cycle => Cow::Borrowed(&matrices[k % matrices.len()]),
                    TailRule::Identity => Cow::Owned(StochasticMatrix::identity(self.n)),
                },
            },
            SequenceKind::SeededRandom(r) => Cow::Owned(r.at(k)),
            SequenceKind::Interleaved {
                primary,
                filler,
                growth,
            } => {
                if interleaved_is_primary(k, *growth) {
                    Cow::Borrowed(primary)
                } else {
                    Cow::Borrowed(filler)
                }
            }
        }
    }

    pub fn to_spec(&self) -> SequenceSpec {
        match &self.kind {
            SequenceKind::Constant(w) => SequenceSpec::Constant(w.to_literal()),
            SequenceKind::Periodic(ms) => SequenceSpec::Periodic {
                matrices: ms.iter().map(StochasticMatrix::to_literal).collect(),
            },
            SequenceKind::Scripted { matrices, tail } => SequenceSpec::Scripted {
                matrices: matrices.iter().map(StochasticMatrix::to_literal).collect(),
                tail: *tail,
            },
            SequenceKind::SeededRandom(r) => SequenceSpec::SeededRandom {
                n: r.n,
                seed: Some(r.seed),
                pattern: r.pattern.clone(),
                delta: r.delta,
            },
            SequenceKind::Interleaved {
                primary,
                filler,
                growth,
            } => SequenceSpec::Interleaved {
                primary: primary.to_literal(),
                filler: filler.to_literal(),
                growth: *growth,
            },
        }
    }

    /// Builds a sequence from its JSON form; `path` prefixes field names in
    /// schema errors.
    pub fn from_spec(spec: &SequenceSpec, path: &str) -> Result<Self> {
        let lit = |l: &MatrixLiteral, p: String| StochasticMatrix::from_literal(l).map_err(|e| literal_error(e, &p));
        let list = |ms: &[MatrixLiteral]| -> Result<Vec<StochasticMatrix>> {
            if ms.is_empty() {
                return Err(Error::SchemaError {
                    field: format!("{path}.matrices"),
                    reason: "empty matrix list".into(),
                });
            }
            ms.iter()
                .enumerate()
                .map(|(i, l)| lit(l, format!("{path}.matrices[{i}]")))
                .collect()
        };
        let wrap = |e: Error| match e {
            Error::DimensionMismatch { .. } | Error::InvalidConfig(_) | Error::Empty => Error::SchemaError {
                field: path.to_string(),
                reason: e.to_string(),
            },
            other => other,
        };
        match spec {
            SequenceSpec::Constant(l) => Ok(Self::constant(lit(l, path.to_string())?)),
            SequenceSpec::Periodic { matrices } => Self::periodic(list(matrices)?).map_err(wrap),
            SequenceSpec::Scripted { matrices, tail } => Self::scripted(list(matrices)?, *tail).map_err(wrap),
            SequenceSpec::SeededRandom {
                n,
                seed,
                pattern,
                delta,
            } => {
                let seed = seed.ok_or_else(|| Error::SeedMissing {
                    field: format!("{path}.seed"),
                })?;
                Ok(Self::seeded_random(
                    RandomSequence::new(*n, seed, pattern.clone(), *delta).map_err(wrap)?,
                ))
            }
            SequenceSpec::Interleaved {
                primary,
                filler,
                growth,
            } => Self::interleaved(
                lit(primary, format!("{path}.primary"))?,
                lit(filler, format!("{path}.filler"))?,
                *growth,
            )
            .map_err(wrap),
        }
    }
}

pub(crate) fn interleaved_is_primary(k: usize, growth: usize) -> bool {
    let mut t = 0usize;
    let mut r = 0usize;
    while t < k {
        r += 1;
        t += 1 + growth * r;
    }
    t == k
}

/// Maps a matrix validation error to a schema error naming the offending row.
pub(crate) fn literal_error(e: Error, path: &str) -> Error {
    let (field, reason) = match &e {
        Error::RowSumViolation { i, .. } | Error::NegativeDiagonal { i, .. } => {
            (format!("{path}.rows[{i}]"), e.to_string())
        }
        Error::NegativeEntry { i, j, .. } | Error::NonFinite { i, j } => {
            (format!("{path}.rows[{i}][{j}]"), e.to_string())
        }
        Error::NotSquare { row, .. } => (format!("{path}.rows[{row}]"), e.to_string()),
        _ => (format!("{path}.rows"), e.to_string()),
    };
    Error::SchemaError { field, reason }
}

/// JSON form of a [`MatrixSequence`], tagged by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    Constant(MatrixLiteral),
    Periodic {
        matrices: Vec<MatrixLiteral>,
    },
    Scripted {
        matrices: Vec<MatrixLiteral>,
        #[serde(default)]
        tail: TailRule,
    },
    SeededRandom {
        n: usize,
        seed: Option<u64>,
        pattern: PatternRule,
        #[serde(default)]
        delta: Option<f64>,
    },
    Interleaved {
        primary: MatrixLiteral,
        filler: MatrixLiteral,
        #[serde(default = "default_growth")]
        growth: usize,
    },
}

fn default_growth() -> usize {
    1
}

/// `Phi(m, k) = W(m-1) ... W(k)`, with `Phi(k, k) = I`.
pub fn evolutionary_matrix(seq: &MatrixSequence, k: usize, m: usize) -> Result<StochasticMatrix> {
    if m < k {
        return Err(Error::InvalidRange { k, m });
    }
    let mut phi = StochasticMatrix::identity(seq.n());
    for s in k..m {
        phi = seq.at(s).mul(&phi);
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignedKind {
    Constant(SignedInfluenceMatrix),
    Periodic(Vec<SignedInfluenceMatrix>),
    Scripted {
        matrices: Vec<SignedInfluenceMatrix>,
        tail: TailRule,
    },
    /// Off-diagonal entries of `base` negated independently with
    /// probability `flip_prob` at every step.
    RandomSigns {
        base: MatrixSequence,
        seed: u64,
        flip_prob: f64,
    },
}

/// A deterministic sequence of signed influence matrices `A(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSequence {
    n: usize,
    kind: SignedKind,
}

fn common_signed_dim(ms: &[SignedInfluenceMatrix]) -> Result<usize> {
    let n = ms.first().ok_or(Error::Empty)?.n();
    if let Some(m) = ms.iter().find(|m| m.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.n(),
        });
    }
    Ok(n)
}

impl SignedSequence {
    pub fn constant(a: SignedInfluenceMatrix) -> Self {
        SignedSequence {
            n: a.n(),
            kind: SignedKind::Constant(a),
        }
    }

    pub fn periodic(ms: Vec<SignedInfluenceMatrix>) -> Result<Self> {
        Ok(SignedSequence {
            n: common_signed_dim(&ms)?,
            kind: SignedKind::Periodic(ms),
        })
    }

    pub fn scripted(matrices: Vec<SignedInfluenceMatrix>, tail: TailRule) -> Result<Self> {
        Ok(SignedSequence {
            n: common_signed_dim(&matrices)?,
            kind: SignedKind::Scripted { matrices, tail },
        })
    }

    pub fn random_signs(base: MatrixSequence, seed: u64, flip_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(Error::InvalidConfig(format!("flip probability {flip_prob} outside [0, 1]")));
        }
        Ok(SignedSequence {
            n: base.n(),
            kind: SignedKind::RandomSigns {
                base,
                seed,
                flip_prob,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn id(&self) -> String {
        match &self.kind {
            SignedKind::Constant(_) => format!("signed_constant(n={})", self.n),
            SignedKind::Periodic(ms) => format!("signed_periodic(n={}, period={})", self.n, ms.len()),
            SignedKind::Scripted { matrices, .. } => {
                format!("signed_scripted(n={}, len={})", self.n, matrices.len())
            }
            SignedKind::RandomSigns { base, seed, .. } => {
                format!("random_signs({}, seed={seed})", base.id())
            }
        }
    }

    pub fn at(&self, k: usize) -> Cow<'_, SignedInfluenceMatrix> {
        match &self.kind {
            SignedKind::Constant(a) => Cow::Borrowed(a),
            SignedKind::Periodic(ms) => Cow::Borrowed(&ms[k % ms.len()]),
            SignedKind::Scripted { matrices, tail } => match matrices.get(k) {
                Some(a) => Cow::Borrowed(a),
                None => match tail {
                    TailRule::RepeatLast => Cow::Borrowed(matrices.last().unwrap()),
                    TailRule::Cycle => Cow::Borrowed(&matrices[k % matrices.len()]),
                    TailRule::Identity => Cow::Owned(SignedInfluenceMatrix::with_signs(
                        &StochasticMatrix::identity(self.n),
                        |_, _| false,
                    )),
                },
            },
            SignedKind::RandomSigns {
                base,
                seed,
                flip_prob,
            } => {
                let w = base.at(k);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k as u64);
                let n = self.n;
                let flips: Vec<bool> = (0..n * n).map(|_| rng.gen_bool(*flip_prob)).collect();
                Cow::Owned(SignedInfluenceMatrix::with_signs(&w, |i, j| flips[i * n + j]))
            }
        }
    }

    /// The stochastic sequence `|A(k)|`.
    pub fn modulus_sequence(&self) -> MatrixSequence {
        let abs = |a: &SignedInfluenceMatrix| crate::matrix::modulus(a);
        match &self.kind {
            SignedKind::Constant(a) => MatrixSequence::constant(abs(a)),
            SignedKind::Periodic(ms) => MatrixSequence {
                n: self.n,
                kind: SequenceKind::Periodic(ms.iter().map(abs).collect()),
            },
            SignedKind::Scripted { matrices, tail } => MatrixSequence {
                n: self.n,
                kind: SequenceKind::Scripted {
                    matrices: matrices.iter().map(abs).collect(),
                    tail: *tail,
                },
            },
            SignedKind::RandomSigns { base, .. } => base.clone(),
        }
    }

    pub fn from_spec(spec: &SignedSequenceSpec, path: &str) -> Result<Self> {
        let lit = |l: &MatrixLiteral, p: String| SignedInfluenceMatrix::from_literal(l).map_err(|e| literal_error(e, &p));
        let list = |ms: &[MatrixLiteral]| -> Result<Vec<SignedInfluenceMatrix>> {
            if ms.is_empty() {
                return Err(Error::SchemaError {
                    field: format!("{path}.matrices"),
                    reason: "empty matrix list".into(),
                });
            }
            ms.iter()
                .enumerate()
                .map(|(i, l)| lit(l, format!("{path}.matrices[{i}]")))
                .collect()
        };
        let wrap = |e: Error| match e {
            Error::DimensionMismatch { .. } | Error::InvalidConfig(_) => Error::SchemaError {
                field: path.to_string(),
                reason: e.to_string(),
            },
            other => other,
        };
        match spec {
            SignedSequenceSpec::Constant(l) => Ok(Self::constant(lit(l, path.to_string())?)),
            SignedSequenceSpec::Periodic { matrices } => Self::periodic(list(matrices)?).map_err(wrap),
            SignedSequenceSpec::Scripted { matrices, tail } => Self::scripted(list(matrices)?, *tail).map_err(wrap),
            SignedSequenceSpec::RandomSigns {
                base,
                seed,
                flip_prob,
            } => {
                let seed = seed.ok_or_else(|| Error::SeedMissing {
                    field: format!("{path}.seed"),
                })?;
                let base = MatrixSequence::from_spec(base, &format!("{path}.base"))?;
                Self::random_signs(base, seed, *flip_prob).map_err(wrap)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignedSequenceSpec {
    Constant(MatrixLiteral),
    Periodic {
        matrices: Vec<MatrixLiteral>,
    },
    Scripted {
        matrices: Vec<MatrixLiteral>,
        #[serde(default)]
        tail: TailRule,
    },
    RandomSigns {
        base: SequenceSpec,
        seed: Option<u64>,
        #[serde(default = "default_flip")]
        flip_prob: f64,
    },
}

fn default_flip() -> f64 {
    0.5
}
