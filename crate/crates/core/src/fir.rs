//! The causal FIR convolution operator `T(h)` and its exact inverse.
//!
//! For inputs `U` with rows `0..=N`, `(T(h)U)_{ij} = sum_{k=0}^{i} h_k U_{i-k,j}`:
//! a lower-triangular Toeplitz operator applied to every experiment column.

use crate::error::{Error, Result};
use crate::nonneg::{ImpulseResponse, NonnegMatrix};

/// An input matrix together with the cumulative row masses the update and
/// the gradient both divide by.
///
/// `alpha_k = sum_{l=0}^{k} U_{l.}` (sum of the first `k+1` rows over all
/// experiments). The lag count is `N = rows - 1`, so an impulse response
/// for this system has `N + 1` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionSystem {
    u: NonnegMatrix,
    alphas: Vec<f64>,
}

impl ConvolutionSystem {
    pub fn new(u: NonnegMatrix) -> Result<Self> {
        if u.rows() == 0 {
            return Err(Error::InvalidConfig(
                "input matrix must have at least one row".into(),
            ));
        }
        let mut alphas = Vec::with_capacity(u.rows());
        let mut acc = 0.0;
        for l in 0..u.rows() {
            acc += u.row_sum(l);
            alphas.push(acc);
        }
        Ok(Self { u, alphas })
    }

    /// Highest lag `N`; impulse responses have `N + 1` coefficients.
    pub fn lag_count(&self) -> usize {
        self.u.rows() - 1
    }

    pub fn experiments(&self) -> usize {
        self.u.cols()
    }

    pub fn input(&self) -> &NonnegMatrix {
        &self.u
    }

    /// Cumulative input masses `alpha_0, ..., alpha_N`.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k]
    }

    /// Applies the convolution operator: output row `i`, column `j` is
    /// `sum_{k=0}^{i} h_k U_{i-k,j}`.
    pub fn apply(&self, h: &ImpulseResponse) -> Result<NonnegMatrix> {
        let n1 = self.u.rows();
        if h.len() != n1 {
            return Err(Error::LengthMismatch {
                expected: n1,
                found: h.len(),
            });
        }
        let m = self.u.cols();
        let mut data = vec![0.0; n1 * m];
        for i in 0..n1 {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += h[k] * self.u.get(i - k, j);
                }
                data[i * m + j] = acc;
            }
        }
        Ok(NonnegMatrix::from_raw(n1, m, data))
    }

    /// Solves `T(h) u = y` exactly for a single experiment by forward
    /// substitution. The result is a plain signed vector: when `y` is not in
    /// the convolution cone the coefficients go negative, and that sign
    /// pattern is exactly what distinguishes "perfect model" instances from
    /// genuinely approximate ones.
    pub fn exact_solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if self.u.cols() != 1 {
            return Err(Error::ExpectedSingleColumn {
                found: self.u.cols(),
            });
        }
        let n1 = self.u.rows();
        if y.len() != n1 {
            return Err(Error::LengthMismatch {
                expected: n1,
                found: y.len(),
            });
        }
        let u0 = self.u.get(0, 0);
        if u0 == 0.0 {
            return Err(Error::SingularLeadingInput);
        }
        let mut h = vec![0.0; n1];
        for i in 0..n1 {
            let mut acc = y[i];
            for (k, &hk) in h.iter().enumerate().take(i) {
                acc -= hk * self.u.get(i - k, 0);
            }
            h[i] = acc / u0;
        }
        Ok(h)
    }
}
