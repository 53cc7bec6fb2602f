//! Independent reference answers for validating the solver.
//!
//! Three sources of ground truth, none of which share code with the
//! iteration itself:
//!
//! * closed forms for the two-tap single-experiment problem
//!   (`N = 1`, `m = 1`), where the minimizer is known exactly;
//! * an exhaustive shrinking-grid search over the box that must contain
//!   the minimizer, usable for any instance small enough to enumerate;
//! * long-run iteration experiments on two-tap instances that measure the
//!   empirical convergence regime (geometric vs `1/t`) and the geometric
//!   ratio where one exists.

use crate::diagnostics::objective;
use crate::error::{Error, Result};
use crate::fir::ConvolutionSystem;
use crate::nonneg::{ImpulseResponse, NonnegMatrix};
use crate::solver::update_step;

/// Which face of the constraint set the two-tap minimizer lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyCase {
    /// Exact fit: `h = (y0/u0, (y1 u0 - y0 u1)/u0^2)`, objective zero.
    Interior,
    /// Second tap clamped: `h = ((y0+y1)/(u0+u1), 0)`, objective positive.
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySolution {
    pub h_star: ImpulseResponse,
    pub case: ToyCase,
    pub objective_at_star: f64,
    /// True when the strict-convexity test certifies a unique minimizer
    /// (here: both outputs positive alongside positive leading input).
    pub unique: bool,
}

fn require_toy_scalar(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

/// Exact minimizer of `I((y0,y1) || T(h)(u0,u1))` over `h >= 0`.
///
/// The dichotomy is decided by the sign of `y1 u0 - y0 u1`: nonnegative
/// means the triangular system solves with nonnegative taps (exact fit),
/// negative means the optimum pins `h_1` at zero and matches total mass
/// with the single remaining tap.
pub fn toy_closed_form(u0: f64, u1: f64, y0: f64, y1: f64) -> Result<ToySolution> {
    require_toy_scalar("u0", u0)?;
    require_toy_scalar("u1", u1)?;
    require_toy_scalar("y0", y0)?;
    require_toy_scalar("y1", y1)?;
    if u0 == 0.0 {
        return Err(Error::SingularLeadingInput);
    }
    let (h_star, case) = if y1 * u0 - y0 * u1 >= 0.0 {
        (
            vec![y0 / u0, (y1 * u0 - y0 * u1) / (u0 * u0)],
            ToyCase::Interior,
        )
    } else {
        (vec![(y0 + y1) / (u0 + u1), 0.0], ToyCase::Boundary)
    };
    let h_star = ImpulseResponse::new(h_star)?;
    let y = NonnegMatrix::new(2, 1, vec![y0, y1])?;
    let sys = ConvolutionSystem::new(NonnegMatrix::new(2, 1, vec![u0, u1])?)?;
    let objective_at_star = objective(&y, &sys, &h_star)?;
    Ok(ToySolution {
        h_star,
        case,
        objective_at_star,
        unique: y0 > 0.0 && y1 > 0.0,
    })
}

/// Shrinking-grid search configuration. Defaults resolve the minimizer to
/// roughly `5e-8` of the initial box width per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchConfig {
    pub points_per_dim: usize,
    pub rounds: usize,
    /// Box-width multiplier applied after each round, centered on the
    /// incumbent.
    pub shrink: f64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            points_per_dim: 11,
            rounds: 10,
            shrink: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub h: ImpulseResponse,
    pub objective: f64,
    pub evaluations: usize,
}

const GRID_MAX_LAGS: usize = 3;
const GRID_MAX_EXPERIMENTS: usize = 3;

/// Exhaustive minimization over the box `0 <= h_k <= sum(Y)/alpha_{N-k}`,
/// which contains every minimizer (the optimality conditions force
/// `sum_k h_k alpha_{N-k} = sum(Y)` with nonnegative terms).
///
/// Grid points are visited in lexicographic coordinate order and ties keep
/// the first incumbent, making the result deterministic. Deliberately
/// brute-force and structurally unrelated to the multiplicative update so
/// the two can arbitrate each other.
pub fn brute_force_minimize(
    y: &NonnegMatrix,
    u: &NonnegMatrix,
    config: &GridSearchConfig,
) -> Result<GridSearchResult> {
    if y.shape() != u.shape() {
        return Err(Error::ShapeMismatch {
            left: y.shape(),
            right: u.shape(),
        });
    }
    if y.rows() == 0 {
        return Err(Error::InvalidConfig("data must have at least one row".into()));
    }
    let lags = y.rows() - 1;
    if lags > GRID_MAX_LAGS || y.cols() > GRID_MAX_EXPERIMENTS {
        return Err(Error::InstanceTooLarge {
            lags,
            experiments: y.cols(),
            max_lags: GRID_MAX_LAGS,
            max_experiments: GRID_MAX_EXPERIMENTS,
        });
    }
    if config.points_per_dim < 2 || config.rounds == 0 {
        return Err(Error::InvalidConfig(
            "grid search needs at least 2 points per dimension and 1 round".into(),
        ));
    }
    if !(config.shrink > 0.0 && config.shrink < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "shrink factor must lie in (0, 1), got {}",
            config.shrink
        )));
    }
    let (well_posed, witnesses) = crate::diagnostics::check_condition_1(y, u)?;
    if !well_posed {
        return Err(Error::NotWellPosed { witnesses });
    }
    let sys = ConvolutionSystem::new(u.clone())?;
    if sys.alpha(0) == 0.0 && !y.is_zero() {
        return Err(Error::ZeroInitialInputMass);
    }

    let n1 = y.rows();
    let s = y.total();
    let cap: Vec<f64> = (0..n1)
        .map(|k| {
            let a = sys.alpha(n1 - 1 - k);
            if a > 0.0 {
                s / a
            } else {
                0.0
            }
        })
        .collect();

    let mut lo = vec![0.0; n1];
    let mut hi = cap.clone();
    let mut best_h = vec![0.0; n1];
    let mut best_f = f64::INFINITY;
    let mut evaluations = 0usize;
    let mut point = vec![0.0; n1];
    let points = config.points_per_dim;

    for _ in 0..config.rounds {
        // Odometer over the grid {lo_k + i*(hi_k-lo_k)/(points-1)}.
        let mut index = vec![0usize; n1];
        loop {
            for k in 0..n1 {
                let step = (hi[k] - lo[k]) / (points - 1) as f64;
                point[k] = lo[k] + index[k] as f64 * step;
            }
            let h = ImpulseResponse::new(point.clone())?;
            let f = objective(y, &sys, &h)?;
            evaluations += 1;
            if f < best_f {
                best_f = f;
                best_h.copy_from_slice(&point);
            }
            let mut k = n1;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                index[k] += 1;
                if index[k] < points {
                    break;
                }
                index[k] = 0;
            }
            if index.iter().all(|&i| i == 0) {
                break;
            }
        }
        for k in 0..n1 {
            let width = (hi[k] - lo[k]) * config.shrink;
            lo[k] = (best_h[k] - width / 2.0).max(0.0);
            hi[k] = (lo[k] + width).min(cap[k]);
            lo[k] = (hi[k] - width).max(0.0);
        }
    }

    Ok(GridSearchResult {
        h: ImpulseResponse::new(best_h)?,
        objective: best_f,
        evaluations,
    })
}

/// Empirical convergence regime of a long two-tap run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRegime {
    /// Residuals decay geometrically; `geometric_rate` estimates the ratio.
    Exponential,
    /// Residuals decay like `1/t` (the critical case where the boundary
    /// and interior solutions coincide).
    OneOverT,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateExperiment {
    pub h_star: ImpulseResponse,
    pub case: ToyCase,
    /// All iterates `h_0 ..= h_T`.
    pub iterates: Vec<ImpulseResponse>,
    /// Euclidean distance of each iterate from `h_star`.
    pub residuals: Vec<f64>,
    pub regime: RateRegime,
    /// `exp(slope)` of the least-squares line through the log-residuals on
    /// the fit window; the per-step contraction ratio in the geometric
    /// regime, and indistinguishable from 1 in the `1/t` regime.
    pub geometric_rate: f64,
    /// Index range of `residuals` used for the fit (the second half of the
    /// stretch that stays above rounding noise).
    pub fit_window: (usize, usize),
}

// Start used for all rate runs. It must avoid directions that collapse in
// a single step: an on-simplex start hides the transient, and for some
// instances equal taps sit exactly on the null direction of the linearized
// map, so an asymmetric off-simplex point is used.
const RATE_START: [f64; 2] = [0.5, 0.25];

/// Runs `iters` multiplicative updates on the two-tap instance and
/// classifies how fast the iterates approach the exact minimizer.
pub fn rate_experiment(u0: f64, u1: f64, y0: f64, y1: f64, iters: usize) -> Result<RateExperiment> {
    let toy = toy_closed_form(u0, u1, y0, y1)?;
    let y = NonnegMatrix::new(2, 1, vec![y0, y1])?;
    let sys = ConvolutionSystem::new(NonnegMatrix::new(2, 1, vec![u0, u1])?)?;

    let mut iterates = Vec::with_capacity(iters + 1);
    let mut h = ImpulseResponse::new(RATE_START.to_vec())?;
    iterates.push(h.clone());
    for _ in 0..iters {
        h = update_step(&y, &sys, &h)?;
        iterates.push(h.clone());
    }

    let dist = |h: &ImpulseResponse| -> f64 {
        let d0 = h[0] - toy.h_star[0];
        let d1 = h[1] - toy.h_star[1];
        (d0 * d0 + d1 * d1).sqrt()
    };
    let residuals: Vec<f64> = iterates.iter().map(dist).collect();

    // Fit only above the rounding-noise floor; geometric runs cross it
    // long before the iteration cap.
    let floor = 1e-13 * (1.0 + toy.h_star.norm());
    let valid_end = residuals
        .iter()
        .position(|&d| d <= floor)
        .unwrap_or(residuals.len());
    let fit_window = (valid_end / 2, valid_end);
    let (regime, geometric_rate) = if fit_window.1 - fit_window.0 < 4 {
        (RateRegime::Exponential, 0.0)
    } else {
        classify_window(&residuals, fit_window)
    };

    Ok(RateExperiment {
        h_star: toy.h_star,
        case: toy.case,
        iterates,
        residuals,
        regime,
        geometric_rate,
        fit_window,
    })
}

/// Least-squares comparison of `log d_t ~ a + b t` (geometric) against
/// `log d_t ~ c - log t` (reciprocal) on the window.
fn classify_window(residuals: &[f64], (start, end): (usize, usize)) -> (RateRegime, f64) {
    let ts: Vec<f64> = (start..end).map(|t| t as f64).collect();
    let logs: Vec<f64> = residuals[start..end].iter().map(|d| d.ln()).collect();
    let n = ts.len() as f64;
    let mean_t = ts.iter().sum::<f64>() / n;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        cov += (t - mean_t) * (l - mean_l);
        var += (t - mean_t) * (t - mean_t);
    }
    let slope = cov / var;
    let intercept = mean_l - slope * mean_t;
    let sse_geometric: f64 = ts
        .iter()
        .zip(&logs)
        .map(|(t, l)| {
            let r = l - (intercept + slope * t);
            r * r
        })
        .sum();

    // One-parameter reciprocal fit: c = mean(log d_t + log t).
    let c = ts
        .iter()
        .zip(&logs)
        .map(|(t, l)| l + t.ln())
        .sum::<f64>()
        / n;
    let sse_reciprocal: f64 = ts
        .iter()
        .zip(&logs)
        .map(|(t, l)| {
            let r = l - (c - t.ln());
            r * r
        })
        .sum();

    if slope.abs() < 1e-3 && sse_reciprocal < sse_geometric {
        (RateRegime::OneOverT, slope.exp())
    } else {
        (RateRegime::Exponential, slope.exp())
    }
}
