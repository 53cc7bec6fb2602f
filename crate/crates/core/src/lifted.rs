//! The lifted three-index space behind the alternating-minimization view.
//!
//! A tensor `T` in this space carries entries `T_{ilj}` over time `i`, lag
//! `l` and experiment `j`. Two subsets matter:
//!
//! - the set of tensors whose lag-marginals reproduce the data,
//!   `sum_l T_{ilj} = Y_ij` ("output-consistent" tensors), and
//! - the set of factored tensors `T_{ilj} = h_l U_{i-l,j}` for some
//!   nonnegative `h` ("model" tensors; entries with `i < l` vanish).
//!
//! Minimizing `I(. || .)` from either set towards a fixed member of the
//! other has a closed form, each projection satisfies a Pythagoras identity,
//! and alternating the two projections is exactly the multiplicative update
//! of the solver. The checks in this module make those identities testable
//! at runtime.

use crate::error::{Error, Result};
use crate::fir::ConvolutionSystem;
use crate::nonneg::{i_divergence_slices, ImpulseResponse, NonnegMatrix};

/// Dense `(N+1) x (N+1) x m` tensor indexed by `(time, lag, experiment)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTensor {
    n1: usize,
    m: usize,
    data: Vec<f64>,
}

impl LiftedTensor {
    pub fn zeros(n1: usize, m: usize) -> Self {
        Self {
            n1,
            m,
            data: vec![0.0; n1 * n1 * m],
        }
    }

    /// Builds a tensor entry by entry; the closure gets `(time, lag,
    /// experiment)` and must return finite nonnegative values.
    pub fn from_fn(n1: usize, m: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(n1 * n1 * m);
        for i in 0..n1 {
            for l in 0..n1 {
                for j in 0..m {
                    let v = f(i, l, j);
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::InvalidEntry { row: i, col: l * m + j, value: v });
                    }
                    data.push(v);
                }
            }
        }
        Ok(Self { n1, m, data })
    }

    fn from_raw(n1: usize, m: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n1 * n1 * m);
        Self { n1, m, data }
    }

    /// `(time points, lags, experiments)` = `(N+1, N+1, m)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n1, self.n1, self.m)
    }

    pub fn get(&self, i: usize, l: usize, j: usize) -> f64 {
        self.data[(i * self.n1 + l) * self.m + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Lag marginal: `sum_l T_{ilj}` as an `(N+1) x m` matrix.
    pub fn lag_marginal(&self) -> NonnegMatrix {
        let mut out = vec![0.0; self.n1 * self.m];
        for i in 0..self.n1 {
            for l in 0..self.n1 {
                for j in 0..self.m {
                    out[i * self.m + j] += self.get(i, l, j);
                }
            }
        }
        NonnegMatrix::from_raw(self.n1, self.m, out)
    }

    /// Total mass sitting at lag `l`: `sum_{ij} T_{ilj}`.
    pub fn lag_mass(&self, l: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n1 {
            for j in 0..self.m {
                acc += self.get(i, l, j);
            }
        }
        acc
    }
}

fn ensure_tensor_matches(t: &LiftedTensor, rows: usize, cols: usize) -> Result<()> {
    if t.n1 != rows || t.m != cols {
        return Err(Error::ShapeMismatch {
            left: (t.n1, t.m),
            right: (rows, cols),
        });
    }
    Ok(())
}

/// Factored ("model") tensor of an impulse response: `W_{ilj} = h_l U_{i-l,j}`,
/// zero whenever `i < l`. Its lag marginal is exactly `T(h)U`.
pub fn lift_response(sys: &ConvolutionSystem, h: &ImpulseResponse) -> Result<LiftedTensor> {
    let n1 = sys.input().rows();
    let m = sys.experiments();
    if h.len() != n1 {
        return Err(Error::LengthMismatch {
            expected: n1,
            found: h.len(),
        });
    }
    let mut data = vec![0.0; n1 * n1 * m];
    for i in 0..n1 {
        for l in 0..=i {
            for j in 0..m {
                data[(i * n1 + l) * m + j] = h[l] * sys.input().get(i - l, j);
            }
        }
    }
    Ok(LiftedTensor::from_raw(n1, m, data))
}

/// I-divergence between two tensors of identical shape (`+inf` allowed).
pub fn tensor_i_divergence(a: &LiftedTensor, b: &LiftedTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            left: (a.n1, a.m),
            right: (b.n1, b.m),
        });
    }
    Ok(i_divergence_slices(&a.data, &b.data))
}

/// Minimizes `I(T || W)` over output-consistent tensors `T` (lag marginals
/// equal to `Y`): the optimum redistributes each `Y_ij` across lags in
/// proportion to `W`, `T*_{ilj} = (Y_ij / W_ij) W_{ilj}` with `0/0 = 0`.
///
/// Fails with [`Error::InfiniteDivergence`] when some `Y_ij > 0` meets a
/// zero `W` marginal — then every output-consistent tensor is infinitely
/// far from `W`.
pub fn partial_min_y(y: &NonnegMatrix, w: &LiftedTensor) -> Result<LiftedTensor> {
    ensure_tensor_matches(w, y.rows(), y.cols())?;
    let marg = w.lag_marginal();
    let (n1, m) = (w.n1, w.m);
    let mut data = vec![0.0; n1 * n1 * m];
    for i in 0..n1 {
        for j in 0..m {
            let yij = y.get(i, j);
            let wij = marg.get(i, j);
            if yij > 0.0 && wij == 0.0 {
                return Err(Error::InfiniteDivergence);
            }
            if yij == 0.0 || wij == 0.0 {
                continue;
            }
            let ratio = yij / wij;
            for l in 0..n1 {
                data[(i * n1 + l) * m + j] = ratio * w.get(i, l, j);
            }
        }
    }
    Ok(LiftedTensor::from_raw(n1, m, data))
}

/// Minimizes `I(T || W)` over factored tensors `W` for a fixed `T`: the
/// optimal response collects the mass `T` assigns to each lag,
/// `h*_l = (sum_{ij} T_{ilj}) / alpha_{N-l}`.
///
/// Requires `alpha_0 = U_{0.} > 0`; returns the factored tensor together
/// with the minimizing response.
pub fn partial_min_w(t: &LiftedTensor, sys: &ConvolutionSystem) -> Result<(LiftedTensor, ImpulseResponse)> {
    ensure_tensor_matches(t, sys.input().rows(), sys.experiments())?;
    if sys.alpha(0) == 0.0 {
        return Err(Error::ZeroInitialInputMass);
    }
    let n1 = t.n1;
    let coeffs: Vec<f64> = (0..n1).map(|l| t.lag_mass(l) / sys.alpha(n1 - 1 - l)).collect();
    let h = ImpulseResponse::from_raw(coeffs);
    let w = lift_response(sys, &h)?;
    Ok((w, h))
}

/// How far a tensor is from being output-consistent: the largest normalized
/// gap `|sum_l T_{ilj} - Y_ij| / (1 + Y_ij)`.
pub fn y_membership_residual(t: &LiftedTensor, y: &NonnegMatrix) -> Result<f64> {
    ensure_tensor_matches(t, y.rows(), y.cols())?;
    let marg = t.lag_marginal();
    let mut worst = 0.0f64;
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            let yij = y.get(i, j);
            worst = worst.max((marg.get(i, j) - yij).abs() / (1.0 + yij));
        }
    }
    Ok(worst)
}

/// How far a tensor is from being factored over the given system: the
/// response is recovered lag by lag (`h_l = lag mass / alpha_{N-l}`) and the
/// largest normalized entry gap to `h_l U_{i-l,j}` is returned.
pub fn w_membership_residual(t: &LiftedTensor, sys: &ConvolutionSystem) -> Result<f64> {
    ensure_tensor_matches(t, sys.input().rows(), sys.experiments())?;
    let n1 = t.n1;
    let h: Vec<f64> = (0..n1)
        .map(|l| {
            let a = sys.alpha(n1 - 1 - l);
            if a > 0.0 {
                t.lag_mass(l) / a
            } else {
                0.0
            }
        })
        .collect();
    let mut worst = 0.0f64;
    for i in 0..n1 {
        for (l, &hl) in h.iter().enumerate() {
            for j in 0..t.m {
                let want = if i >= l { hl * sys.input().get(i - l, j) } else { 0.0 };
                let got = t.get(i, l, j);
                worst = worst.max((got - want).abs() / (1.0 + want.abs()));
            }
        }
    }
    Ok(worst)
}

/// Membership of a tensor in the two constraint sets, each verified against
/// its defining equations to `1e-12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembershipTag {
    pub in_output_set: bool,
    pub in_model_set: bool,
}

pub fn membership(t: &LiftedTensor, y: &NonnegMatrix, sys: &ConvolutionSystem) -> Result<MembershipTag> {
    Ok(MembershipTag {
        in_output_set: y_membership_residual(t, y)? <= 1e-12,
        in_model_set: w_membership_residual(t, sys)? <= 1e-12,
    })
}

/// Both sides of a Pythagoras identity: `lhs` is the direct divergence and
/// `residual = |lhs - (leg1 + leg2)|`. The identity is considered verified
/// when `residual <= 1e-10 * (1 + lhs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PythagorasResidual {
    pub lhs: f64,
    pub residual: f64,
}

impl PythagorasResidual {
    pub fn holds(&self) -> bool {
        self.residual <= 1e-10 * (1.0 + self.lhs.abs())
    }
}

/// Checks `I(T || W) = I(T || T*) + I(T* || W)` where `T` is
/// output-consistent and `T*` is its projection [`partial_min_y`] onto `W`.
///
/// Returns `None` when the left side is infinite — the identity degenerates
/// to `inf = inf` and carries no information.
pub fn pythagoras_y_check(t: &LiftedTensor, w: &LiftedTensor) -> Result<Option<PythagorasResidual>> {
    let lhs = tensor_i_divergence(t, w)?;
    if !lhs.is_finite() {
        return Ok(None);
    }
    let projected = partial_min_y(&t.lag_marginal(), w)?;
    let leg1 = tensor_i_divergence(t, &projected)?;
    let leg2 = tensor_i_divergence(&projected, w)?;
    Ok(Some(PythagorasResidual {
        lhs,
        residual: (lhs - (leg1 + leg2)).abs(),
    }))
}

/// Checks `I(T || W(h)) = I(T || W*) + I(W* || W(h))` where `W*` is the
/// projection [`partial_min_w`] of `T` onto the factored set.
///
/// Returns `None` when the left side is infinite.
pub fn pythagoras_w_check(
    t: &LiftedTensor,
    sys: &ConvolutionSystem,
    h: &ImpulseResponse,
) -> Result<Option<PythagorasResidual>> {
    let w = lift_response(sys, h)?;
    let lhs = tensor_i_divergence(t, &w)?;
    if !lhs.is_finite() {
        return Ok(None);
    }
    let (w_star, _) = partial_min_w(t, sys)?;
    let leg1 = tensor_i_divergence(t, &w_star)?;
    let leg2 = tensor_i_divergence(&w_star, &w)?;
    Ok(Some(PythagorasResidual {
        lhs,
        residual: (lhs - (leg1 + leg2)).abs(),
    }))
}
