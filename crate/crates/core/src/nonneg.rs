//! Nonnegative data types and the Csiszár I-divergence.
//!
//! Everything downstream works on `(N+1) x m` matrices whose rows are time
//! indices `0..=N` and whose columns are repeated experiments. The divergence
//! uses the usual conventions `0 * log 0 = 0` and `0/0 = 0`, and is `+inf`
//! exactly when the first argument has mass somewhere the second has none.

use crate::error::{Error, Result};

/// Dense row-major matrix of finite nonnegative values.
///
/// Row index is time (`0..=N`), column index is the experiment (`0..m-1`
/// internally; user-facing reports number experiments from 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl NonnegMatrix {
    /// Builds a matrix from row-major data, rejecting negative or non-finite
    /// entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        for (pos, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    row: pos / cols.max(1),
                    col: pos % cols.max(1),
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::LengthMismatch {
                    expected: ncols,
                    found: row.len(),
                });
            }
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), ncols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix entry by entry; the closure must return finite
    /// nonnegative values (checked).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Internal constructor for values already known to be valid (products
    /// and sums of validated data).
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sum of row `i` over all experiments (the `U_{i.}` dot notation).
    pub fn row_sum(&self, i: usize) -> f64 {
        self.data[i * self.cols..(i + 1) * self.cols].iter().sum()
    }

    /// Total mass of the matrix.
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for i in 0..self.rows {
            for &j in keep {
                data.push(self.get(i, j));
            }
        }
        Self::from_raw(self.rows, keep.len(), data)
    }

    /// Multiplies every entry by a positive finite factor.
    pub(crate) fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor.is_finite() && factor > 0.0);
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }
}

impl std::ops::Index<(usize, usize)> for NonnegMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

/// Impulse response of a causal FIR filter: `N + 1` finite nonnegative
/// coefficients `h_0, ..., h_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    coeffs: Vec<f64>,
}

impl ImpulseResponse {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        for (index, &value) in coeffs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidCoefficient { index, value });
            }
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        debug_assert!(coeffs.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: vec![0.0; len],
        }
    }

    pub fn ones(len: usize) -> Self {
        Self {
            coeffs: vec![1.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.coeffs.clone()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.coeffs.iter()
    }

    /// Largest coefficient; used to scale "numerically zero" thresholds.
    pub fn max_coefficient(&self) -> f64 {
        self.coeffs.iter().cloned().fold(0.0, f64::max)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<usize> for ImpulseResponse {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.coeffs[k]
    }
}

/// One I-divergence term with the `0 log 0 = 0` / `0/0 = 0` conventions.
///
/// Returns `+inf` exactly when `m > 0` and `n = 0`.
#[inline]
pub(crate) fn div_term(m: f64, n: f64) -> f64 {
    if m == 0.0 {
        n
    } else {
        m * (m / n).ln() - m + n
    }
}

/// I-divergence between two equally long nonnegative slices.
pub fn i_divergence_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (&m, &n) in a.iter().zip(b) {
        acc += div_term(m, n);
    }
    acc
}

/// Csiszár I-divergence `I(M || N) = sum_ij M_ij log(M_ij/N_ij) - M_ij + N_ij`.
///
/// Finite exactly when `M` puts no mass where `N` has none (see
/// [`absolutely_continuous`]); `+inf` otherwise. Accumulation runs in fixed
/// row-major order so results are bit-reproducible.
pub fn i_divergence(m: &NonnegMatrix, n: &NonnegMatrix) -> Result<f64> {
    if m.shape() != n.shape() {
        return Err(Error::ShapeMismatch {
            left: m.shape(),
            right: n.shape(),
        });
    }
    Ok(i_divergence_slices(m.as_slice(), n.as_slice()))
}

/// True when `M_ij > 0` implies `N_ij > 0` (exact zero tests), i.e. when
/// `I(M || N)` is finite.
pub fn absolutely_continuous(m: &NonnegMatrix, n: &NonnegMatrix) -> Result<bool> {
    if m.shape() != n.shape() {
        return Err(Error::ShapeMismatch {
            left: m.shape(),
            right: n.shape(),
        });
    }
    Ok(m.as_slice()
        .iter()
        .zip(n.as_slice())
        .all(|(&a, &b)| a == 0.0 || b > 0.0))
}

/// Divides `Y` and `U` by the total output mass `S = sum(Y)`, returning
/// `(Y/S, U/S, S)`.
///
/// The objective only rescales under this map — `I(Y || T(h)U) =
/// S * I(Y/S || T(h)(U/S))` for every `h` — so minimizers are unchanged and
/// the normalized problem has unit output mass.
pub fn rescale_problem(y: &NonnegMatrix, u: &NonnegMatrix) -> Result<(NonnegMatrix, NonnegMatrix, f64)> {
    if y.shape() != u.shape() {
        return Err(Error::ShapeMismatch {
            left: y.shape(),
            right: u.shape(),
        });
    }
    let s = y.total();
    if s == 0.0 {
        return Err(Error::ZeroOutputMass);
    }
    Ok((y.scaled(1.0 / s), u.scaled(1.0 / s), s))
}

/// Mass distribution of an iterate over the lag coordinates.
///
/// For a system with cumulative input masses `alpha_k = sum_{l<=k} U_{l.}`
/// and total output mass `S`, the weight of lag `k` is
/// `p_k = alpha_{N-k} h_k / S`. After the first multiplicative update every
/// iterate satisfies `sum_k p_k = 1`; arbitrary starting points need not.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    p: Vec<f64>,
    total_mass: f64,
}

impl SimplexWeights {
    /// `alphas[k]` must hold `alpha_k`; the weight of lag `k` uses
    /// `alpha_{N-k}`.
    pub fn new(alphas: &[f64], h: &ImpulseResponse, total_mass: f64) -> Result<Self> {
        if alphas.len() != h.len() {
            return Err(Error::LengthMismatch {
                expected: alphas.len(),
                found: h.len(),
            });
        }
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "total mass must be positive and finite, got {total_mass}"
            )));
        }
        let n = h.len();
        let p = (0..n).map(|k| alphas[n - 1 - k] * h[k] / total_mass).collect();
        Ok(Self { p, total_mass })
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `|sum_k p_k - 1|`; zero (to rounding) for on-simplex iterates.
    pub fn normalization_residual(&self) -> f64 {
        (self.p.iter().sum::<f64>() - 1.0).abs()
    }

    /// I-divergence `I(self || other)` between two weight vectors.
    pub fn divergence_to(&self, other: &SimplexWeights) -> f64 {
        i_divergence_slices(&self.p, &other.p)
    }
}
