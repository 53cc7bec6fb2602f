//! The multiplicative-update solver for `min_{h >= 0} I(Y || T(h)U)`.
//!
//! One update reads
//!
//! ```text
//! h'_k = h_k / alpha_{N-k} * sum_{i>=k} sum_j Y_ij U_{i-k,j} / (T(h)U)_ij
//! ```
//!
//! and is simultaneously (a) a descent step whose per-iteration objective
//! drop splits exactly into two nonnegative lifted divergences, (b) the
//! composition of the two closed-form projections of [`crate::lifted`], and
//! (c) a rescaled gradient step `h'_k = h_k (1 - grad_k / alpha_{N-k})`.
//! The solver exploits (c) to get the KKT residual for free each iteration
//! and, in verify mode, re-derives every step through (b) to confirm the
//! identities from (a) numerically.

use crate::diagnostics::{kkt_from_gradient, objective_and_numerators, KktResidual};
use crate::error::{Error, Result};
use crate::fir::ConvolutionSystem;
use crate::lifted::{
    lift_response, partial_min_w, partial_min_y, pythagoras_w_check, pythagoras_y_check,
    w_membership_residual, y_membership_residual,
};
use crate::nonneg::{ImpulseResponse, NonnegMatrix, SimplexWeights};

/// Number of consecutive tiny-decrease iterations that count as a stall.
const STALL_WINDOW: usize = 5;

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// All-ones response; finite objective whenever the data is well posed.
    #[default]
    Ones,
    /// Constant response scaled onto the invariant simplex
    /// `sum_k h_k alpha_{N-k} = sum(Y)`.
    UniformSimplex,
    /// Caller-supplied starting point. Exact zeros stay zero forever under
    /// multiplicative updates; the report records them.
    Custom(ImpulseResponse),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Hard cap on update steps.
    pub max_iters: usize,
    /// Relative objective-decrease threshold: a step counts as stalled when
    /// `F_t - F_{t+1} < tol_objective * (1 + |F_t|)`, and five consecutive
    /// stalled steps end the run.
    pub tol_objective: f64,
    /// KKT tolerance. The gradient scales linearly with the data mass, so
    /// the test applied is `max_violation <= tol_kkt * sum(Y)`.
    pub tol_kkt: f64,
    pub init: Init,
    /// Re-derive every step through the lifted projections and record the
    /// identity residuals. Costs an extra `O(N^2 m)` per iteration.
    pub verify_mode: bool,
    /// Keep the full iterate history in the report (needed for Lyapunov
    /// traces and rate fits).
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            tol_objective: 1e-12,
            tol_kkt: 1e-8,
            init: Init::Ones,
            verify_mode: false,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The KKT residual dropped below tolerance.
    KktSatisfied,
    /// Five consecutive iterations decreased the objective by less than the
    /// relative threshold.
    ObjectiveStalled,
    /// The iteration cap was reached first.
    MaxIters,
}

/// The exact split of one iteration's objective decrease,
/// `F(h_t) - F(h_{t+1}) = gain_output + gain_model`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGains {
    /// `I(T_t || T_{t+1})` between consecutive output-consistent tensors.
    pub gain_output: f64,
    /// `I(W_{t+1} || W_t)` between consecutive model tensors.
    pub gain_model: f64,
    /// The same model gain computed through the lag-weight vectors,
    /// `sum(Y) * I(p_{t+1} || p_t)`; must match `gain_model` to rounding.
    pub gain_model_mass: f64,
}

/// Maxima of all identity residuals observed across a verify-mode run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySummary {
    pub steps_checked: usize,
    /// `|dF - (gain_output + gain_model)| / (1 + |dF|)`.
    pub max_gain_identity_residual: f64,
    /// `|gain_model - gain_model_mass|` (absolute).
    pub max_mass_form_gap: f64,
    /// Output-side Pythagoras residual, normalized by `1 + lhs`.
    pub max_pythagoras_output: f64,
    /// Model-side Pythagoras residual, normalized by `1 + lhs`.
    pub max_pythagoras_model: f64,
    pub max_output_membership: f64,
    pub max_model_membership: f64,
    /// Gap between the multiplicative update and the model projection of
    /// the current output tensor — the two must coincide.
    pub max_update_projection_gap: f64,
}

impl VerifySummary {
    fn new() -> Self {
        Self {
            steps_checked: 0,
            max_gain_identity_residual: 0.0,
            max_mass_form_gap: 0.0,
            max_pythagoras_output: 0.0,
            max_pythagoras_model: 0.0,
            max_output_membership: 0.0,
            max_model_membership: 0.0,
            max_update_projection_gap: 0.0,
        }
    }

    /// True when every recorded residual is within its contract.
    pub fn within_tolerances(&self) -> bool {
        self.max_gain_identity_residual <= 1e-10
            && self.max_mass_form_gap <= 1e-12
            && self.max_pythagoras_output <= 1e-10
            && self.max_pythagoras_model <= 1e-10
            && self.max_output_membership <= 1e-12
            && self.max_model_membership <= 1e-12
            && self.max_update_projection_gap <= 1e-12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub h_final: ImpulseResponse,
    /// `F(h_t)` for `t = 0..=iterations`; nonincreasing.
    pub objective_trace: Vec<f64>,
    /// `|sum_k h_k alpha_{N-k} - sum(Y)|` for every iterate `t >= 1`; the
    /// update lands on that simplex after one step and stays there.
    pub simplex_residuals: Vec<f64>,
    pub kkt_final: KktResidual,
    pub termination: Termination,
    /// Number of update steps taken.
    pub iterations: usize,
    /// Coordinates that started at exactly zero and therefore never moved.
    pub pinned_at_zero: Vec<usize>,
    /// Per-step gain decompositions (verify mode only).
    pub gain_trace: Option<Vec<StepGains>>,
    /// Full iterate history `h_0..h_T` (only with `record_history`).
    pub h_trace: Option<Vec<ImpulseResponse>>,
    pub verify: Option<VerifySummary>,
}

impl SolverReport {
    /// Pinned-at-zero coordinates whose final gradient is negative: the
    /// optimum may want them positive, but a multiplicative update can
    /// never revive them. A nonempty answer flags a possibly suboptimal
    /// active set inherited from the starting point.
    pub fn suspicious_pinned_coordinates(&self) -> Vec<usize> {
        self.pinned_at_zero
            .iter()
            .copied()
            .filter(|&k| self.kkt_final.gradient[k] < 0.0)
            .collect()
    }
}

/// One multiplicative update.
///
/// Requires a finite objective at `h` (otherwise the defining sums divide
/// by zero) and `U_{0.} > 0` so every `alpha_{N-k}` is positive.
pub fn update_step(y: &NonnegMatrix, sys: &ConvolutionSystem, h: &ImpulseResponse) -> Result<ImpulseResponse> {
    if y.shape() != sys.input().shape() {
        return Err(Error::ShapeMismatch {
            left: y.shape(),
            right: sys.input().shape(),
        });
    }
    if h.len() != y.rows() {
        return Err(Error::LengthMismatch {
            expected: y.rows(),
            found: h.len(),
        });
    }
    if sys.alpha(0) == 0.0 {
        return Err(Error::ZeroInitialInputMass);
    }
    let w = sys.apply(h)?;
    let (obj, numer) = objective_and_numerators(y, sys, &w);
    if !obj.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    let n1 = y.rows();
    Ok(ImpulseResponse::from_raw(
        (0..n1).map(|k| h[k] * numer[k] / sys.alpha(n1 - 1 - k)).collect(),
    ))
}

/// The same update written through the gradient,
/// `h'_k = h_k (1 - grad_k / alpha_{N-k})`, clamped at zero against
/// rounding. Algebraically identical to [`update_step`]; kept as an
/// independent arithmetic route for cross-checking.
pub fn gradient_form_step(y: &NonnegMatrix, sys: &ConvolutionSystem, h: &ImpulseResponse) -> Result<ImpulseResponse> {
    if sys.alpha(0) == 0.0 {
        return Err(Error::ZeroInitialInputMass);
    }
    let g = crate::diagnostics::gradient(y, sys, h)?;
    let n1 = h.len();
    Ok(ImpulseResponse::from_raw(
        (0..n1)
            .map(|k| (h[k] * (1.0 - g[k] / sys.alpha(n1 - 1 - k))).max(0.0))
            .collect(),
    ))
}

/// Exact decomposition of the objective decrease of one step into the two
/// lifted projection gains, plus the lag-weight form of the model gain.
pub fn step_gain_decomposition(
    y: &NonnegMatrix,
    sys: &ConvolutionSystem,
    h: &ImpulseResponse,
    h_next: &ImpulseResponse,
) -> Result<StepGains> {
    let w_t = lift_response(sys, h)?;
    let w_next = lift_response(sys, h_next)?;
    let y_t = partial_min_y(y, &w_t)?;
    let y_next = partial_min_y(y, &w_next)?;
    let gain_output = crate::lifted::tensor_i_divergence(&y_t, &y_next)?;
    let gain_model = crate::lifted::tensor_i_divergence(&w_next, &w_t)?;
    let s = y.total();
    let p_t = SimplexWeights::new(sys.alphas(), h, s)?;
    let p_next = SimplexWeights::new(sys.alphas(), h_next, s)?;
    Ok(StepGains {
        gain_output,
        gain_model,
        gain_model_mass: s * p_next.divergence_to(&p_t),
    })
}

/// `|sum_k h_k alpha_{N-k} - total_mass|`: distance from the invariant
/// simplex all post-first-step iterates live on.
pub fn simplex_projection_residual(sys: &ConvolutionSystem, h: &ImpulseResponse, total_mass: f64) -> f64 {
    let n1 = h.len();
    let mut acc = 0.0;
    for k in 0..n1 {
        acc += h[k] * sys.alpha(n1 - 1 - k);
    }
    (acc - total_mass).abs()
}

/// Lyapunov trace `I(p_ref || p_t)` of a run: the divergence of the lag
/// weights of `h_ref` from those of every recorded iterate. Along the
/// algorithm this sequence is nonincreasing when `h_ref` is the limit; a
/// final iterate from a converged run is used as a stand-in for the limit,
/// which is only meaningful post-convergence.
pub fn monotone_lyapunov_trace(
    sys: &ConvolutionSystem,
    total_mass: f64,
    history: &[ImpulseResponse],
    h_ref: &ImpulseResponse,
) -> Result<Vec<f64>> {
    let p_ref = SimplexWeights::new(sys.alphas(), h_ref, total_mass)?;
    history
        .iter()
        .map(|h| Ok(p_ref.divergence_to(&SimplexWeights::new(sys.alphas(), h, total_mass)?)))
        .collect()
}

fn validate_config(config: &SolverConfig) -> Result<()> {
    if !(config.tol_kkt >= 0.0 && config.tol_kkt.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tol_kkt must be finite and nonnegative, got {}",
            config.tol_kkt
        )));
    }
    if !(config.tol_objective >= 0.0 && config.tol_objective.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tol_objective must be finite and nonnegative, got {}",
            config.tol_objective
        )));
    }
    Ok(())
}

fn initial_iterate(sys: &ConvolutionSystem, total_mass: f64, init: &Init) -> Result<ImpulseResponse> {
    let n1 = sys.input().rows();
    match init {
        Init::Ones => Ok(ImpulseResponse::ones(n1)),
        Init::UniformSimplex => {
            let denom: f64 = sys.alphas().iter().sum();
            Ok(ImpulseResponse::from_raw(vec![total_mass / denom; n1]))
        }
        Init::Custom(h) => {
            if h.len() != n1 {
                return Err(Error::LengthMismatch {
                    expected: n1,
                    found: h.len(),
                });
            }
            Ok(h.clone())
        }
    }
}

fn verify_step(
    y: &NonnegMatrix,
    sys: &ConvolutionSystem,
    h: &ImpulseResponse,
    h_next: &ImpulseResponse,
    f_t: f64,
    f_next: f64,
    summary: &mut VerifySummary,
) -> Result<StepGains> {
    let gains = step_gain_decomposition(y, sys, h, h_next)?;
    let delta = f_t - f_next;
    let identity = (delta - (gains.gain_output + gains.gain_model)).abs() / (1.0 + delta.abs());
    summary.max_gain_identity_residual = summary.max_gain_identity_residual.max(identity);
    summary.max_mass_form_gap = summary
        .max_mass_form_gap
        .max((gains.gain_model - gains.gain_model_mass).abs());

    let w_t = lift_response(sys, h)?;
    let y_t = partial_min_y(y, &w_t)?;
    let w_next = lift_response(sys, h_next)?;
    if let Some(p) = pythagoras_y_check(&y_t, &w_next)? {
        summary.max_pythagoras_output = summary
            .max_pythagoras_output
            .max(p.residual / (1.0 + p.lhs.abs()));
    }
    if let Some(p) = pythagoras_w_check(&y_t, sys, h)? {
        summary.max_pythagoras_model = summary
            .max_pythagoras_model
            .max(p.residual / (1.0 + p.lhs.abs()));
    }
    summary.max_output_membership = summary
        .max_output_membership
        .max(y_membership_residual(&y_t, y)?);
    summary.max_model_membership = summary
        .max_model_membership
        .max(w_membership_residual(&w_t, sys)?)
        .max(w_membership_residual(&w_next, sys)?);

    // The multiplicative update must be exactly the model projection of the
    // current output tensor — that equality is what makes the update an
    // alternating-minimization scheme.
    let (_, h_proj) = partial_min_w(&y_t, sys)?;
    for k in 0..h_next.len() {
        let gap = (h_next[k] - h_proj[k]).abs() / (1.0 + h_proj[k]);
        summary.max_update_projection_gap = summary.max_update_projection_gap.max(gap);
    }
    summary.steps_checked += 1;
    Ok(gains)
}

/// Runs the multiplicative-update iteration to convergence.
///
/// Columns where both `Y` and `U` are identically zero are dropped first
/// (they contribute nothing to any sum). `Y` identically zero short-circuits
/// to the exact minimizer `h = 0`. The iteration stops on the first of:
/// KKT residual within tolerance, five consecutive stalled steps, or the
/// iteration cap.
pub fn solve(y: &NonnegMatrix, u: &NonnegMatrix, config: &SolverConfig) -> Result<SolverReport> {
    validate_config(config)?;
    if y.shape() != u.shape() {
        return Err(Error::ShapeMismatch {
            left: y.shape(),
            right: u.shape(),
        });
    }
    if y.rows() == 0 {
        return Err(Error::InvalidConfig("data must have at least one row".into()));
    }

    // Well-posedness first, on the unfiltered data so witness numbering
    // matches the caller's columns.
    let (well_posed, witnesses) = crate::diagnostics::check_condition_1(y, u)?;
    if !well_posed {
        return Err(Error::NotWellPosed { witnesses });
    }

    let n1 = y.rows();

    // Y == 0: F(h) = sum(T(h)U) is minimized exactly at h = 0.
    if y.is_zero() {
        let sys = ConvolutionSystem::new(u.clone())?;
        let h_final = ImpulseResponse::zeros(n1);
        let gradient: Vec<f64> = (0..n1).map(|k| sys.alpha(n1 - 1 - k)).collect();
        let kkt_final = kkt_from_gradient(&gradient, &h_final, None);
        return Ok(SolverReport {
            h_final,
            objective_trace: vec![0.0],
            simplex_residuals: Vec::new(),
            kkt_final,
            termination: Termination::KktSatisfied,
            iterations: 0,
            pinned_at_zero: (0..n1).collect(),
            gain_trace: config.verify_mode.then(Vec::new),
            h_trace: config.record_history.then(|| vec![ImpulseResponse::zeros(n1)]),
            verify: config.verify_mode.then(VerifySummary::new),
        });
    }

    // Drop columns that are zero in both matrices; everything the solver
    // computes is a sum over columns, so this changes nothing numerically
    // but keeps degenerate experiments out of the inner loops.
    let keep: Vec<usize> = (0..y.cols())
        .filter(|&j| !(0..n1).all(|i| y.get(i, j) == 0.0 && u.get(i, j) == 0.0))
        .collect();
    let (y_work, u_work);
    let (y, u) = if keep.len() == y.cols() {
        (y, u)
    } else {
        y_work = y.select_columns(&keep);
        u_work = u.select_columns(&keep);
        (&y_work, &u_work)
    };

    let sys = ConvolutionSystem::new(u.clone())?;
    if sys.alpha(0) == 0.0 {
        return Err(Error::ZeroInitialInputMass);
    }
    let total_mass = y.total();
    let kkt_threshold = config.tol_kkt * total_mass;

    let mut h = initial_iterate(&sys, total_mass, &config.init)?;
    let pinned_at_zero: Vec<usize> = (0..n1).filter(|&k| h[k] == 0.0).collect();

    let mut objective_trace: Vec<f64> = Vec::new();
    let mut simplex_residuals: Vec<f64> = Vec::new();
    let mut gain_trace = config.verify_mode.then(Vec::new);
    let mut h_trace = config.record_history.then(|| vec![h.clone()]);
    let mut verify = config.verify_mode.then(VerifySummary::new);
    let mut stall = 0usize;
    let mut iterations = 0usize;

    let (termination, kkt_final) = loop {
        let w = sys.apply(&h)?;
        let (obj, numer) = objective_and_numerators(y, &sys, &w);
        if !obj.is_finite() {
            return Err(if objective_trace.is_empty() {
                Error::InfiniteInitialObjective
            } else {
                Error::InfiniteDivergence
            });
        }

        let stalled = match objective_trace.last() {
            Some(&prev) => {
                if prev - obj < config.tol_objective * (1.0 + prev.abs()) {
                    stall += 1;
                } else {
                    stall = 0;
                }
                stall >= STALL_WINDOW
            }
            None => false,
        };
        objective_trace.push(obj);

        let gradient: Vec<f64> = (0..n1).map(|k| sys.alpha(n1 - 1 - k) - numer[k]).collect();
        let kkt = kkt_from_gradient(&gradient, &h, None);
        if kkt.max_violation <= kkt_threshold {
            break (Termination::KktSatisfied, kkt);
        }
        if stalled {
            break (Termination::ObjectiveStalled, kkt);
        }
        if iterations >= config.max_iters {
            break (Termination::MaxIters, kkt);
        }

        let h_next = ImpulseResponse::from_raw(
            (0..n1).map(|k| h[k] * numer[k] / sys.alpha(n1 - 1 - k)).collect(),
        );

        if let (Some(trace), Some(summary)) = (gain_trace.as_mut(), verify.as_mut()) {
            let f_next = crate::nonneg::i_divergence(y, &sys.apply(&h_next)?)?;
            trace.push(verify_step(y, &sys, &h, &h_next, obj, f_next, summary)?);
        }

        simplex_residuals.push(simplex_projection_residual(&sys, &h_next, total_mass));
        if let Some(trace) = h_trace.as_mut() {
            trace.push(h_next.clone());
        }
        h = h_next;
        iterations += 1;
    };

    Ok(SolverReport {
        h_final: h,
        objective_trace,
        simplex_residuals,
        kkt_final,
        termination,
        iterations,
        pinned_at_zero,
        gain_trace,
        h_trace,
        verify,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> NonnegMatrix {
        NonnegMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    fn two_tap(u0: f64, u1: f64, y0: f64, y1: f64) -> (NonnegMatrix, NonnegMatrix) {
        (mat(2, 1, &[y0, y1]), mat(2, 1, &[u0, u1]))
    }

    fn sys(u: &NonnegMatrix) -> ConvolutionSystem {
        ConvolutionSystem::new(u.clone()).unwrap()
    }

    #[test]
    fn update_hand_computed_on_boundary_instance() {
        // u = (1, 1), y = (2, 1), h = (1, 1): denominators (1, 2), so
        // h0' = (1/2)(2/1 + 1/2) = 1.25 and h1' = (1/1)(1/2) = 0.5.
        let (y, u) = two_tap(1.0, 1.0, 2.0, 1.0);
        let s = sys(&u);
        let h1 = update_step(&y, &s, &ImpulseResponse::ones(2)).unwrap();
        assert!((h1[0] - 1.25).abs() < 1e-15);
        assert!((h1[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_models_are_fixed_points() {
        let mut rng = ChaCha12Rng::seed_from_u64(30);
        for _ in 0..20 {
            let n1 = rng.random_range(1..=6);
            let m = rng.random_range(1..=4);
            let u = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let s = sys(&u);
            let h = ImpulseResponse::new((0..n1).map(|_| 0.1 + rng.random::<f64>()).collect()).unwrap();
            let y = s.apply(&h).unwrap();
            let h_next = update_step(&y, &s, &h).unwrap();
            for k in 0..n1 {
                assert!((h_next[k] - h[k]).abs() <= 1e-12 * (1.0 + h[k]));
            }
        }
    }

    #[test]
    fn zero_lag_system_converges_in_one_step() {
        // N = 0: the optimum Y_{0.}/U_{0.} is reached from any start.
        let y = mat(1, 2, &[3.0, 1.0]);
        let u = mat(1, 2, &[2.0, 2.0]);
        let s = sys(&u);
        for h0 in [0.1, 1.0, 7.5] {
            let h1 = update_step(&y, &s, &ImpulseResponse::new(vec![h0]).unwrap()).unwrap();
            assert!((h1[0] - 1.0).abs() < 1e-14, "from {h0}: {}", h1[0]);
        }
    }

    #[test]
    fn gradient_form_matches_multiplicative_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n1 = rng.random_range(1..=6);
            let m = rng.random_range(1..=4);
            let u = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let y = NonnegMatrix::from_fn(n1, m, |_, _| 0.05 + rng.random::<f64>()).unwrap();
            let s = sys(&u);
            let h = ImpulseResponse::new((0..n1).map(|_| 0.1 + rng.random::<f64>()).collect()).unwrap();
            let a = update_step(&y, &s, &h).unwrap();
            let b = gradient_form_step(&y, &s, &h).unwrap();
            for k in 0..n1 {
                assert!(
                    (a[k] - b[k]).abs() <= 1e-13 * (1.0 + a[k].abs()),
                    "k={k}: {} vs {}",
                    a[k],
                    b[k]
                );
            }
        }
    }

    #[test]
    fn every_step_descends() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        for _ in 0..50 {
            let n1 = rng.random_range(1..=6);
            let m = rng.random_range(1..=4);
            let u = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let y = NonnegMatrix::from_fn(n1, m, |_, _| 0.05 + rng.random::<f64>()).unwrap();
            let s = sys(&u);
            let mut h = ImpulseResponse::new((0..n1).map(|_| 0.1 + rng.random::<f64>()).collect()).unwrap();
            let mut f = crate::diagnostics::objective(&y, &s, &h).unwrap();
            for _ in 0..25 {
                h = update_step(&y, &s, &h).unwrap();
                let f_next = crate::diagnostics::objective(&y, &s, &h).unwrap();
                assert!(f_next <= f + 1e-12 * (1.0 + f.abs()), "{f_next} > {f}");
                f = f_next;
            }
        }
    }

    #[test]
    fn solve_interior_two_tap_instance() {
        // u = (1, 1), y = (1, 2): exact interior optimum (1, 1), F = 0.
        let (y, u) = two_tap(1.0, 1.0, 1.0, 2.0);
        let report = solve(&y, &u, &SolverConfig::default()).unwrap();
        assert_eq!(report.termination, Termination::KktSatisfied);
        assert!((report.h_final[0] - 1.0).abs() < 1e-6);
        assert!((report.h_final[1] - 1.0).abs() < 1e-6);
        assert!(*report.objective_trace.last().unwrap() <= 1e-10);
        // The trace never increases.
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn solve_boundary_two_tap_instance() {
        // u = (1, 1), y = (2, 1): optimum ((y0+y1)/(u0+u1), 0) = (1.5, 0)
        // with slope 1/3 on the pinned coordinate.
        let (y, u) = two_tap(1.0, 1.0, 2.0, 1.0);
        let report = solve(&y, &u, &SolverConfig::default()).unwrap();
        assert_eq!(report.termination, Termination::KktSatisfied);
        assert!((report.h_final[0] - 1.5).abs() < 1e-6);
        assert!(report.h_final[1] < 1e-7);
        assert!((report.kkt_final.gradient[1] - 1.0 / 3.0).abs() < 1e-6);

        let f_star = crate::diagnostics::objective(
            &y,
            &sys(&u),
            &ImpulseResponse::new(vec![1.5, 0.0]).unwrap(),
        )
        .unwrap();
        let f_end = *report.objective_trace.last().unwrap();
        assert!((f_end - f_star).abs() <= 1e-9 * (1.0 + f_star));
    }

    #[test]
    fn iterates_live_on_the_mass_simplex_after_one_step() {
        let (y, u) = two_tap(0.5, 1.5, 2.0, 1.0);
        let config = SolverConfig { record_history: true, ..SolverConfig::default() };
        let report = solve(&y, &u, &config).unwrap();
        assert!(report.iterations >= 1);
        let s_total = y.total();
        for r in &report.simplex_residuals {
            assert!(*r <= 1e-12 * s_total, "residual {r}");
        }
        // The default all-ones start is generally off the simplex.
        let h0 = &report.h_trace.as_ref().unwrap()[0];
        assert!(simplex_projection_residual(&sys(&u), h0, s_total) > 1e-3);
    }

    #[test]
    fn gain_decomposition_accounts_for_every_drop() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for _ in 0..20 {
            let n1 = rng.random_range(1..=5);
            let m = rng.random_range(1..=4);
            let u = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let y = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let s = sys(&u);
            let h = ImpulseResponse::new((0..n1).map(|_| 0.2 + rng.random::<f64>()).collect()).unwrap();
            let h_next = update_step(&y, &s, &h).unwrap();
            let gains = step_gain_decomposition(&y, &s, &h, &h_next).unwrap();
            assert!(gains.gain_output >= 0.0 && gains.gain_model >= 0.0);
            let f_t = crate::diagnostics::objective(&y, &s, &h).unwrap();
            let f_next = crate::diagnostics::objective(&y, &s, &h_next).unwrap();
            let delta = f_t - f_next;
            let resid = (delta - (gains.gain_output + gains.gain_model)).abs();
            assert!(resid <= 1e-10 * (1.0 + delta.abs()), "residual {resid}");
            assert!((gains.gain_model - gains.gain_model_mass).abs() <= 1e-12);
        }
    }

    #[test]
    fn gains_vanish_at_fixed_points() {
        let u = mat(2, 1, &[1.0, 1.0]);
        let s = sys(&u);
        let h = ImpulseResponse::new(vec![1.0, 1.0]).unwrap();
        let y = s.apply(&h).unwrap();
        let h_next = update_step(&y, &s, &h).unwrap();
        let gains = step_gain_decomposition(&y, &s, &h, &h_next).unwrap();
        assert!(gains.gain_output.abs() < 1e-12);
        assert!(gains.gain_model.abs() < 1e-12);
    }

    #[test]
    fn verify_mode_confirms_all_identities() {
        let mut rng = ChaCha12Rng::seed_from_u64(34);
        for _ in 0..10 {
            let n1 = rng.random_range(1..=5);
            let m = rng.random_range(1..=4);
            let u = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let y = NonnegMatrix::from_fn(n1, m, |_, _| 0.1 + rng.random::<f64>()).unwrap();
            let config = SolverConfig {
                verify_mode: true,
                max_iters: 300,
                ..SolverConfig::default()
            };
            let report = solve(&y, &u, &config).unwrap();
            let summary = report.verify.unwrap();
            assert!(summary.steps_checked == report.iterations);
            assert!(summary.within_tolerances(), "{summary:?}");
            let gains = report.gain_trace.unwrap();
            assert_eq!(gains.len(), report.iterations);
        }
    }

    #[test]
    fn zero_output_short_circuits_to_zero_response() {
        let y = NonnegMatrix::zeros(3, 2);
        let u = mat(3, 2, &[1.0, 0.5, 0.2, 0.1, 0.3, 0.4]);
        let report = solve(&y, &u, &SolverConfig::default()).unwrap();
        assert_eq!(report.h_final.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(report.termination, Termination::KktSatisfied);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.kkt_final.max_violation, 0.0);
    }

    #[test]
    fn ill_posed_data_is_rejected_with_original_column_numbers() {
        // Column 1 is zero everywhere (dropped), column 2 violates
        // well-posedness; the witness must still say experiment 2.
        let y = mat(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let u = mat(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let err = solve(&y, &u, &SolverConfig::default()).unwrap_err();
        assert_eq!(
            err,
            Error::NotWellPosed {
                witnesses: vec![(0, 2)]
            }
        );
    }

    #[test]
    fn dropping_dead_columns_changes_nothing() {
        let y = mat(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let u = mat(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let y1 = mat(2, 1, &[1.0, 2.0]);
        let u1 = mat(2, 1, &[1.0, 1.0]);
        let a = solve(&y, &u, &SolverConfig::default()).unwrap();
        let b = solve(&y1, &u1, &SolverConfig::default()).unwrap();
        assert_eq!(a.h_final, b.h_final);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn missing_initial_input_mass_is_rejected() {
        let y = mat(2, 1, &[0.0, 1.0]);
        let u = mat(2, 1, &[0.0, 1.0]);
        assert_eq!(
            solve(&y, &u, &SolverConfig::default()).unwrap_err(),
            Error::ZeroInitialInputMass
        );
    }

    #[test]
    fn custom_zero_coordinate_stays_pinned_and_is_flagged() {
        // Interior optimum (1, 1), but h1 starts at zero and multiplicative
        // updates can never revive it; the run stalls on the restricted
        // line at h0 = 1.5 where the pinned coordinate's slope is negative.
        let (y, u) = two_tap(1.0, 1.0, 1.0, 2.0);
        let config = SolverConfig {
            init: Init::Custom(ImpulseResponse::new(vec![1.0, 0.0]).unwrap()),
            record_history: true,
            ..SolverConfig::default()
        };
        let report = solve(&y, &u, &config).unwrap();
        assert_eq!(report.pinned_at_zero, vec![1]);
        assert_eq!(report.termination, Termination::ObjectiveStalled);
        for h in report.h_trace.as_ref().unwrap() {
            assert_eq!(h[1], 0.0);
        }
        assert!((report.h_final[0] - 1.5).abs() < 1e-6);
        assert_eq!(report.suspicious_pinned_coordinates(), vec![1]);
        assert!(report.kkt_final.gradient[1] < -0.1);
    }

    #[test]
    fn uniform_simplex_init_starts_on_the_simplex() {
        let (y, u) = two_tap(1.0, 1.0, 2.0, 1.0);
        let config = SolverConfig {
            init: Init::UniformSimplex,
            record_history: true,
            ..SolverConfig::default()
        };
        let report = solve(&y, &u, &config).unwrap();
        let h0 = &report.h_trace.as_ref().unwrap()[0];
        assert!(simplex_projection_residual(&sys(&u), h0, y.total()) <= 1e-12 * y.total());
    }

    #[test]
    fn lyapunov_trace_decreases_towards_the_limit() {
        let (y, u) = two_tap(1.0, 1.0, 2.0, 1.0);
        let config = SolverConfig { record_history: true, ..SolverConfig::default() };
        let report = solve(&y, &u, &config).unwrap();
        let history = report.h_trace.as_ref().unwrap();
        let trace =
            monotone_lyapunov_trace(&sys(&u), y.total(), history, &report.h_final).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert!(*trace.last().unwrap() <= 1e-12);
    }

    #[test]
    fn invalid_tolerances_are_rejected() {
        let (y, u) = two_tap(1.0, 1.0, 1.0, 2.0);
        let config = SolverConfig { tol_kkt: -1.0, ..SolverConfig::default() };
        assert!(matches!(
            solve(&y, &u, &config).unwrap_err(),
            Error::InvalidConfig(_)
        ));
        let config = SolverConfig { tol_objective: f64::NAN, ..SolverConfig::default() };
        assert!(matches!(
            solve(&y, &u, &config).unwrap_err(),
            Error::InvalidConfig(_)
        ));
    }

    #[test]
    fn infinite_start_is_reported() {
        // Condition 1 holds (input arrives at t=0 in column 1), but the
        // custom start (0, 1) produces zero model output at t=0 against
        // positive data.
        let (y, u) = two_tap(1.0, 1.0, 1.0, 2.0);
        let config = SolverConfig {
            init: Init::Custom(ImpulseResponse::new(vec![0.0, 1.0]).unwrap()),
            ..SolverConfig::default()
        };
        assert_eq!(
            solve(&y, &u, &config).unwrap_err(),
            Error::InfiniteInitialObjective
        );
    }
}
