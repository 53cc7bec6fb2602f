//! Well-posedness checks and first/second-order optimality diagnostics.
//!
//! Two structural conditions on the data decide everything:
//!
//! 1. *Well-posedness*: wherever `Y_ij > 0` some input must have arrived by
//!    time `i` (`U_{l,j} > 0` for some `l <= i`). Equivalently, the objective
//!    `F(h) = I(Y || T(h)U)` is finite somewhere — concretely, at the
//!    all-ones response.
//! 2. *Strict convexity*: every time row has an experiment with `Y_ij > 0`
//!    and `U_{0,j} > 0`. Together with well-posedness this makes `F` strictly
//!    convex on its domain, so the minimizer is unique.

use crate::error::{Error, Result};
use crate::fir::ConvolutionSystem;
use crate::nonneg::{div_term, ImpulseResponse, NonnegMatrix};

/// Outcome of the structural data checks.
///
/// Witnesses are reported as `(time, experiment)` with the time index
/// starting at 0 and experiments numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// Some finite approximant exists (condition 1).
    pub well_posed: bool,
    /// The objective is strictly convex on its nonempty domain, so the
    /// minimizer is unique. This is condition 2 *and* well-posedness: the
    /// convexity condition alone says nothing when no finite approximant
    /// exists at all.
    pub strictly_convex: bool,
    /// `(time, experiment)` pairs where output mass appears before any input.
    pub condition1_witnesses: Vec<(usize, usize)>,
    /// Time rows with no experiment having both `Y_ij > 0` and `U_{0,j} > 0`.
    pub condition2_witness_rows: Vec<usize>,
}

fn ensure_same_shape(y: &NonnegMatrix, u: &NonnegMatrix) -> Result<()> {
    if y.shape() != u.shape() {
        return Err(Error::ShapeMismatch {
            left: y.shape(),
            right: u.shape(),
        });
    }
    Ok(())
}

/// Checks that no output mass appears before the first input mass could
/// explain it. Returns all violating `(time, experiment)` pairs, experiment
/// numbered from 1.
pub fn check_condition_1(y: &NonnegMatrix, u: &NonnegMatrix) -> Result<(bool, Vec<(usize, usize)>)> {
    ensure_same_shape(y, u)?;
    let mut witnesses = Vec::new();
    for j in 0..y.cols() {
        // First time at which experiment j has seen any input.
        let mut seen_input = false;
        for i in 0..y.rows() {
            if u.get(i, j) > 0.0 {
                seen_input = true;
            }
            if y.get(i, j) > 0.0 && !seen_input {
                witnesses.push((i, j + 1));
            }
        }
    }
    Ok((witnesses.is_empty(), witnesses))
}

/// Checks the uniqueness condition: every time row needs an experiment with
/// `Y_ij > 0` and `U_{0,j} > 0`. Returns the rows where that fails.
pub fn check_condition_2(y: &NonnegMatrix, u: &NonnegMatrix) -> Result<(bool, Vec<usize>)> {
    ensure_same_shape(y, u)?;
    let mut rows = Vec::new();
    for i in 0..y.rows() {
        let ok = (0..y.cols()).any(|j| y.get(i, j) > 0.0 && u.get(0, j) > 0.0);
        if !ok {
            rows.push(i);
        }
    }
    Ok((rows.is_empty(), rows))
}

/// Runs both structural checks.
pub fn check_conditions(y: &NonnegMatrix, u: &NonnegMatrix) -> Result<ConditionReport> {
    let (well_posed, condition1_witnesses) = check_condition_1(y, u)?;
    let (cond2, condition2_witness_rows) = check_condition_2(y, u)?;
    Ok(ConditionReport {
        well_posed,
        strictly_convex: well_posed && cond2,
        condition1_witnesses,
        condition2_witness_rows,
    })
}

/// Objective value `F(h) = I(Y || W)` plus, for every lag `k`, the sum
/// `sum_{i>=k} sum_j Y_ij U_{i-k,j} / W_ij` that both the gradient and the
/// multiplicative update are built from. `W` must be `T(h)U`.
///
/// Terms with `Y_ij = 0` contribute nothing (the `0 log 0` convention); if
/// some `Y_ij > 0` meets `W_ij = 0` the objective comes back `+inf` and the
/// numerators are meaningless.
pub(crate) fn objective_and_numerators(
    y: &NonnegMatrix,
    sys: &ConvolutionSystem,
    w: &NonnegMatrix,
) -> (f64, Vec<f64>) {
    let n1 = y.rows();
    let m = y.cols();
    let u = sys.input();
    let mut numer = vec![0.0; n1];
    let mut obj = 0.0;
    for i in 0..n1 {
        for j in 0..m {
            let yij = y.get(i, j);
            let wij = w.get(i, j);
            obj += div_term(yij, wij);
            if yij > 0.0 && wij > 0.0 {
                let r = yij / wij;
                for (k, nk) in numer.iter_mut().enumerate().take(i + 1) {
                    *nk += r * u.get(i - k, j);
                }
            }
        }
    }
    (obj, numer)
}

/// Objective value `F(h) = I(Y || T(h)U)`, possibly `+inf`.
pub fn objective(y: &NonnegMatrix, sys: &ConvolutionSystem, h: &ImpulseResponse) -> Result<f64> {
    ensure_same_shape(y, sys.input())?;
    let w = sys.apply(h)?;
    crate::nonneg::i_divergence(y, &w)
}

/// Gradient of the objective,
/// `grad_k = alpha_{N-k} - sum_{i>=k} sum_j Y_ij U_{i-k,j} / (T(h)U)_ij`.
///
/// Requires `F(h) < inf`; otherwise the defining sums divide by zero and the
/// call fails with [`Error::InfiniteDivergence`].
pub fn gradient(y: &NonnegMatrix, sys: &ConvolutionSystem, h: &ImpulseResponse) -> Result<Vec<f64>> {
    ensure_same_shape(y, sys.input())?;
    let w = sys.apply(h)?;
    let (obj, numer) = objective_and_numerators(y, sys, &w);
    if !obj.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    let n1 = y.rows();
    Ok((0..n1).map(|k| sys.alpha(n1 - 1 - k) - numer[k]).collect())
}

/// Symmetric matrix stored dense; equality of `get(k, l)` and `get(l, k)`
/// is exact because only one triangle is ever accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.dim + l]
    }

    fn set(&mut self, k: usize, l: usize, v: f64) {
        self.data[k * self.dim + l] = v;
    }

    /// Row-major dense contents.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Hessian of the objective,
/// `H_kl = sum_ij Y_ij U_{i-k,j} U_{i-l,j} / (T(h)U)_ij^2`.
///
/// Always positive semidefinite where finite; strictly positive definite
/// when the data passes [`check_condition_2`].
pub fn hessian(y: &NonnegMatrix, sys: &ConvolutionSystem, h: &ImpulseResponse) -> Result<SymmetricMatrix> {
    ensure_same_shape(y, sys.input())?;
    let w = sys.apply(h)?;
    let n1 = y.rows();
    let m = y.cols();
    let u = sys.input();
    let mut hess = SymmetricMatrix::zeros(n1);
    for i in 0..n1 {
        for j in 0..m {
            let yij = y.get(i, j);
            if yij == 0.0 {
                continue;
            }
            let wij = w.get(i, j);
            if wij == 0.0 {
                return Err(Error::InfiniteDivergence);
            }
            let r = yij / (wij * wij);
            for k in 0..=i {
                let uk = u.get(i - k, j);
                if uk == 0.0 {
                    continue;
                }
                for l in k..=i {
                    let v = hess.get(k, l) + r * uk * u.get(i - l, j);
                    hess.set(k, l, v);
                }
            }
        }
    }
    // Mirror the accumulated upper triangle so symmetry is exact.
    for k in 0..n1 {
        for l in 0..k {
            let v = hess.get(l, k);
            hess.set(k, l, v);
        }
    }
    Ok(hess)
}

/// First-order optimality certificate for the constrained problem
/// `min F(h)` over `h >= 0`: the gradient must vanish on coordinates that
/// are clearly positive and must be nonnegative on (numerically) zero ones.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    pub gradient: Vec<f64>,
    /// Per-coordinate violation: `|grad_k|` off the active set,
    /// `max(0, -grad_k)` on it.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    /// Coordinates treated as zero (`h_k <= tol_active`).
    pub active_set: Vec<usize>,
    /// Threshold actually used to split active from inactive coordinates.
    pub tol_active: f64,
}

/// Evaluates the optimality conditions at `h`.
///
/// `tol_active` defaults to `1e-12 * max_k h_k`, so "active" adapts to the
/// scale of the iterate.
pub fn kkt_residual(
    y: &NonnegMatrix,
    sys: &ConvolutionSystem,
    h: &ImpulseResponse,
    tol_active: Option<f64>,
) -> Result<KktResidual> {
    let gradient = gradient(y, sys, h)?;
    Ok(kkt_from_gradient(&gradient, h, tol_active))
}

/// Same as [`kkt_residual`] but with a precomputed gradient, for callers
/// (like the solver) that already have one.
pub(crate) fn kkt_from_gradient(
    gradient: &[f64],
    h: &ImpulseResponse,
    tol_active: Option<f64>,
) -> KktResidual {
    let tol_active = tol_active.unwrap_or(1e-12 * h.max_coefficient());
    let mut violations = Vec::with_capacity(gradient.len());
    let mut active_set = Vec::new();
    let mut max_violation: f64 = 0.0;
    for (k, &g) in gradient.iter().enumerate() {
        let v = if h[k] <= tol_active {
            active_set.push(k);
            (-g).max(0.0)
        } else {
            g.abs()
        };
        max_violation = max_violation.max(v);
        violations.push(v);
    }
    KktResidual {
        gradient: gradient.to_vec(),
        violations,
        max_violation,
        active_set,
        tol_active,
    }
}
