//! Row-constrained square matrices: stochastic, substochastic and signed
//! influence matrices, together with the handful of operations the rest of
//! the crate needs (products, powers, modulus, spectral radius).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{strong_components, ThresholdGraph};

/// Tolerance on row sums used by every validating constructor.
pub const ROW_TOL: f64 = 1e-12;

/// Default iteration cap for [`spectral_radius`].
pub const SPECTRAL_MAX_ITER: usize = 10_000;
/// Default tolerance for [`spectral_radius`].
pub const SPECTRAL_TOL: f64 = 1e-10;

/// JSON literal `{"rows": [[...], ...]}`, optionally with `"n"`.
///
/// `normalize` rescales every row to sum to one before validation; it is off
/// unless requested explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixLiteral {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

impl MatrixLiteral {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        MatrixLiteral {
            n: Some(rows.len()),
            rows,
            normalize: false,
        }
    }
}

fn dense_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare {
                row: i,
                len: row.len(),
                n,
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i, j });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_nonnegative(m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v < 0.0 {
                return Err(Error::NegativeEntry { i, j, value: v });
            }
        }
    }
    Ok(())
}

pub(crate) fn row_sum(m: &DMatrix<f64>, i: usize) -> f64 {
    (0..m.ncols()).map(|j| m[(i, j)]).sum()
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `y = A x` with a fixed left-to-right summation order.
pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    let mut y = vec![0.0; n];
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, xj) in x.iter().enumerate() {
            acc += m[(i, j)] * xj;
        }
        *yi = acc;
    }
    y
}

/// Nonnegative square matrix whose rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    m: DMatrix<f64>,
}

/// Validates a row array as a stochastic matrix.
pub fn validate_stochastic(rows: &[Vec<f64>]) -> Result<StochasticMatrix> {
    StochasticMatrix::from_dense(dense_from_rows(rows)?)
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        validate_stochastic(&rows)
    }

    /// Rescales every row to sum to one, then validates.
    pub fn normalized(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = dense_from_rows(&rows)?;
        check_nonnegative(&m)?;
        for i in 0..m.nrows() {
            let s = row_sum(&m, i);
            if s <= 0.0 {
                return Err(Error::RowSumViolation { i, sum: s });
            }
            for j in 0..m.ncols() {
                m[(i, j)] /= s;
            }
        }
        Self::from_dense(m)
    }

    pub fn from_literal(lit: &MatrixLiteral) -> Result<Self> {
        if let Some(n) = lit.n.filter(|&n| n != lit.rows.len()) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: lit.rows.len(),
            });
        }
        if lit.normalize {
            Self::normalized(lit.rows.clone())
        } else {
            validate_stochastic(&lit.rows)
        }
    }

    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::Empty);
        }
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                row: 0,
                len: m.ncols(),
                n: m.nrows(),
            });
        }
        if let Some((idx, _)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            return Err(Error::NonFinite {
                i: idx % m.nrows(),
                j: idx / m.nrows(),
            });
        }
        check_nonnegative(&m)?;
        for i in 0..m.nrows() {
            let s = row_sum(&m, i);
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::RowSumViolation { i, sum: s });
            }
        }
        Ok(StochasticMatrix { m })
    }

    /// Wraps a product of stochastic matrices without re-validating.
    pub(crate) fn from_product(m: DMatrix<f64>) -> Self {
        StochasticMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        StochasticMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    /// Every entry equal to `1/n`.
    pub fn uniform(n: usize) -> Self {
        StochasticMatrix {
            m: DMatrix::from_element(n, n, 1.0 / n as f64),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        to_rows(&self.m)
    }

    pub fn to_literal(&self) -> MatrixLiteral {
        MatrixLiteral::new(self.rows())
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &StochasticMatrix) -> StochasticMatrix {
        StochasticMatrix::from_product(&self.m * &rhs.m)
    }

    pub fn pow(&self, d: usize) -> StochasticMatrix {
        let mut acc = StochasticMatrix::identity(self.n());
        for _ in 0..d {
            acc = self.mul(&acc);
        }
        acc
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.m, x)
    }

    pub fn min_entry(&self) -> f64 {
        self.m.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Nonnegative square matrix with row sums at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstochasticMatrix {
    m: DMatrix<f64>,
    deficiency_rows: Vec<usize>,
}

impl SubstochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_dense(dense_from_rows(&rows)?)
    }

    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::Empty);
        }
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                row: 0,
                len: m.ncols(),
                n: m.nrows(),
            });
        }
        check_nonnegative(&m)?;
        let mut deficiency_rows = Vec::new();
        for i in 0..m.nrows() {
            let s = row_sum(&m, i);
            if !s.is_finite() || s > 1.0 + ROW_TOL {
                return Err(Error::RowSumViolation { i, sum: s });
            }
            if s < 1.0 - ROW_TOL {
                deficiency_rows.push(i);
            }
        }
        Ok(SubstochasticMatrix { m, deficiency_rows })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Rows summing to strictly less than one (beyond [`ROW_TOL`]).
    pub fn deficiency_rows(&self) -> &[usize] {
        &self.deficiency_rows
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.m, x)
    }

    /// Stochastic completion `w_ij = a_ij + (1 - sum_l a_il) / n`.
    pub fn stochastic_completion(&self) -> StochasticMatrix {
        let n = self.n();
        let mut w = self.m.clone();
        for i in 0..n {
            let deficit = (1.0 - row_sum(&self.m, i)).max(0.0);
            for j in 0..n {
                w[(i, j)] += deficit / n as f64;
            }
        }
        StochasticMatrix::from_product(w)
    }
}

impl From<&StochasticMatrix> for SubstochasticMatrix {
    fn from(w: &StochasticMatrix) -> Self {
        SubstochasticMatrix {
            m: w.m.clone(),
            deficiency_rows: Vec::new(),
        }
    }
}

/// Signed influence matrix: nonnegative diagonal, stochastic modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedInfluenceMatrix {
    m: DMatrix<f64>,
}

impl SignedInfluenceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_dense(dense_from_rows(&rows)?)
    }

    pub fn from_literal(lit: &MatrixLiteral) -> Result<Self> {
        if let Some(n) = lit.n.filter(|&n| n != lit.rows.len()) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: lit.rows.len(),
            });
        }
        Self::new(lit.rows.clone())
    }

    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        for i in 0..m.nrows() {
            if m[(i, i)] < 0.0 {
                return Err(Error::NegativeDiagonal {
                    i,
                    value: m[(i, i)],
                });
            }
        }
        StochasticMatrix::from_dense(m.abs())?;
        Ok(SignedInfluenceMatrix { m })
    }

    /// Builds `A` from a stochastic modulus and a sign pattern; diagonal
    /// signs are ignored.
    pub fn with_signs(modulus: &StochasticMatrix, negative: impl Fn(usize, usize) -> bool) -> Self {
        let n = modulus.n();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let w = modulus.get(i, j);
            if i != j && negative(i, j) {
                -w
            } else {
                w
            }
        });
        SignedInfluenceMatrix { m }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        to_rows(&self.m)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.m, x)
    }
}

/// Entrywise absolute value `|A|`.
pub fn modulus(a: &SignedInfluenceMatrix) -> StochasticMatrix {
    StochasticMatrix::from_product(a.m.abs())
}

/// Spectral radius of a nonnegative square matrix.
///
/// The matrix is split into the diagonal blocks of its strong-component
/// condensation; the radius is the maximum over blocks. Each irreducible
/// block `B` is handled by power iteration on `(B + I)/2` from the all-ones
/// vector, which is primitive and therefore converges, and the Collatz-Wielandt
/// bracket `min (Sx)_i/x_i <= rho <= max (Sx)_i/x_i` is used as the stopping
/// rule.
pub fn spectral_radius(a: &SubstochasticMatrix, max_iter: usize, tol: f64) -> Result<f64> {
    spectral_radius_nonneg(&a.m, max_iter, tol)
}

pub(crate) fn spectral_radius_nonneg(m: &DMatrix<f64>, max_iter: usize, tol: f64) -> Result<f64> {
    let g = ThresholdGraph::from_dense(m, 0.0);
    let scc = strong_components(&g);
    let mut rho: f64 = 0.0;
    for comp in &scc.components {
        let r = if comp.len() == 1 {
            m[(comp[0], comp[0])]
        } else {
            irreducible_radius(m, comp, max_iter, tol)?
        };
        rho = rho.max(r);
    }
    Ok(rho)
}

fn irreducible_radius(m: &DMatrix<f64>, comp: &[usize], max_iter: usize, tol: f64) -> Result<f64> {
    let s = comp.len();
    let shifted = DMatrix::from_fn(s, s, |a, b| {
        let v = m[(comp[a], comp[b])];
        if a == b {
            0.5 * (v + 1.0)
        } else {
            0.5 * v
        }
    });
    let mut x = vec![1.0; s];
    for _ in 0..max_iter {
        let y = mat_vec(&shifted, &x);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        // rho(B) = 2 mu - 1, so the bracket on rho is twice as wide
        if 2.0 * (hi - lo) <= tol {
            return Ok(lo + hi - 1.0);
        }
        let scale = y.iter().copied().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / scale).collect();
    }
    Err(Error::NoConvergence { max_iter })
}
