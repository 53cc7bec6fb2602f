//! Statistical harness: multiplicative-noise data generation and the
//! sampling experiments used to study the estimator.
//!
//! The data model is `Y_ij = delta_ij * (T(h_true)U)_ij` with i.i.d.
//! mean-one positive noise `delta`. Under that model the expected
//! criterion splits as
//!
//! ```text
//! E I(Y || T(h)U) = E I(T(h_true)U || T(h)U) + E[mass(T(h_true)U)] * E[delta log delta]
//! ```
//!
//! so in the limit the criterion is the noise-free divergence plus a
//! constant: minimizing it recovers `h_true`. The experiments here probe
//! the finite-sample side of that story — consistency of the estimate as
//! experiments accumulate, approximate normality of the scaled errors,
//! and a Monte&nbsp;Carlo verification of the decomposition itself.

use crate::error::{Error, Result};
use crate::fir::ConvolutionSystem;
use crate::nonneg::{i_divergence, ImpulseResponse, NonnegMatrix};
use crate::solver::{solve, SolverConfig};
use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;
use statrs::function::gamma::digamma;

/// Distribution of the (positive) input entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputLaw {
    pub lo: f64,
    pub hi: f64,
}

impl Default for InputLaw {
    /// Uniform on `[0.1, 1]`: bounded away from zero so every experiment
    /// carries input mass at every time.
    fn default() -> Self {
        Self { lo: 0.1, hi: 1.0 }
    }
}

impl InputLaw {
    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && 0.0 <= self.lo && self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!(
                "input law needs 0 <= lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Mean-one positive multiplicative noise families.
///
/// Each family knows its own `E[delta log delta]`, the constant that the
/// noise adds to the expected criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// No noise: `delta = 1`.
    PointMass,
    /// `Gamma(shape, 1/shape)`, so the mean is one for every shape.
    GammaMeanOne { shape: f64 },
    /// `exp(N(-sigma^2/2, sigma^2))`, mean one by construction.
    LognormalMeanOne { sigma: f64 },
    /// Two atoms `1 - down` and `1 + up`, weighted to have mean one.
    TwoPointMeanOne { down: f64, up: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::PointMass => Ok(()),
            NoiseModel::GammaMeanOne { shape } => {
                if shape.is_finite() && shape > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "gamma shape must be finite and positive, got {shape}"
                    )))
                }
            }
            NoiseModel::LognormalMeanOne { sigma } => {
                if sigma.is_finite() && sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "lognormal sigma must be finite and nonnegative, got {sigma}"
                    )))
                }
            }
            NoiseModel::TwoPointMeanOne { down, up } => {
                if down.is_finite() && up.is_finite() && 0.0 < down && down < 1.0 && up > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "two-point noise needs 0 < down < 1 and up > 0, got down={down} up={up}"
                    )))
                }
            }
        }
    }

    /// `E[delta log delta]` in closed form.
    ///
    /// Gamma: `digamma(shape + 1) - log(shape)`. Lognormal: `sigma^2 / 2`.
    /// Two-point: direct enumeration of the two atoms with their
    /// mean-one weights `P(1-down) = up/(down+up)`, `P(1+up) = down/(down+up)`.
    pub fn mean_delta_log_delta(&self) -> f64 {
        match *self {
            NoiseModel::PointMass => 0.0,
            NoiseModel::GammaMeanOne { shape } => digamma(shape + 1.0) - shape.ln(),
            NoiseModel::LognormalMeanOne { sigma } => sigma * sigma / 2.0,
            NoiseModel::TwoPointMeanOne { down, up } => {
                let lo = 1.0 - down;
                let hi = 1.0 + up;
                (up * lo * lo.ln() + down * hi * hi.ln()) / (down + up)
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            NoiseModel::PointMass => 1.0,
            NoiseModel::GammaMeanOne { shape } => {
                rand_distr::Gamma::new(shape, 1.0 / shape)
                    .expect("validated shape")
                    .sample(rng)
            }
            NoiseModel::LognormalMeanOne { sigma } => {
                rand_distr::LogNormal::new(-sigma * sigma / 2.0, sigma)
                    .expect("validated sigma")
                    .sample(rng)
            }
            NoiseModel::TwoPointMeanOne { down, up } => {
                if rng.random::<f64>() < up / (down + up) {
                    1.0 - down
                } else {
                    1.0 + up
                }
            }
        }
    }
}

/// One synthetic data set: inputs, clean outputs, and noisy outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBatch {
    pub u: NonnegMatrix,
    /// `T(h_true)U` before noise.
    pub w_star: NonnegMatrix,
    /// `delta .* w_star`.
    pub y: NonnegMatrix,
    pub h_true: ImpulseResponse,
}

/// splitmix64 finalizer; decorrelates structured seed inputs.
fn scramble(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for job `(lane, index)` of a master
/// seed, so replicates are reproducible regardless of execution order.
pub(crate) fn mix_seed(master: u64, lane: u64, index: u64) -> u64 {
    scramble(scramble(master ^ scramble(lane)) ^ index)
}

/// Runs `f(0..n)` across `threads` OS threads (contiguous chunks) and
/// returns results in index order; the output is independent of the
/// thread count.
pub(crate) fn parallel_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1).min(n.max(1));
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = std::iter::repeat_with(|| None).take(n).collect();
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        for (c, slice) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (off, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f(c * chunk + off));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("job completed")).collect()
}

/// Draws `m` experiments of length `h_true.len()`: inputs from `law`
/// (stream 0 of the seed), noise from `noise` (stream 1), both row-major.
pub fn generate_batch(
    h_true: &ImpulseResponse,
    law: &InputLaw,
    noise: &NoiseModel,
    m: usize,
    seed: u64,
) -> Result<ExperimentBatch> {
    law.validate()?;
    noise.validate()?;
    if h_true.is_empty() {
        return Err(Error::InvalidConfig("true response must be nonempty".into()));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one experiment".into()));
    }
    let n1 = h_true.len();
    let mut input_rng = ChaCha12Rng::seed_from_u64(seed);
    input_rng.set_stream(0);
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);

    let input_dist = Uniform::new(law.lo, law.hi)
        .map_err(|e| Error::InvalidConfig(format!("input law: {e}")))?;
    let u = NonnegMatrix::from_fn(n1, m, |_, _| input_rng.sample(input_dist))?;
    let sys = ConvolutionSystem::new(u.clone())?;
    let w_star = sys.apply(h_true)?;
    let y = NonnegMatrix::from_fn(n1, m, |i, j| noise.sample(&mut noise_rng) * w_star.get(i, j))?;
    Ok(ExperimentBatch {
        u,
        w_star,
        y,
        h_true: h_true.clone(),
    })
}

fn estimate(batch: &ExperimentBatch, solver: &SolverConfig) -> Result<ImpulseResponse> {
    Ok(solve(&batch.y, &batch.u, solver)?.h_final)
}

fn l2_distance(a: &ImpulseResponse, b: &ImpulseResponse) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyConfig {
    /// Numbers of experiments to try, typically increasing.
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub threads: usize,
    pub solver: SolverConfig,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            sample_sizes: vec![16, 64, 256, 1024],
            replicates: 20,
            seed: 0,
            threads: 1,
            solver: SolverConfig::default(),
        }
    }
}

/// Estimation error per sample size per replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyCurve {
    pub sample_sizes: Vec<usize>,
    /// `errors[s][r]` is the l2 error of replicate `r` at sample size
    /// `sample_sizes[s]`; `None` marks a failed solve.
    pub errors: Vec<Vec<Option<f64>>>,
}

impl ConsistencyCurve {
    pub fn medians(&self) -> Vec<f64> {
        self.errors
            .iter()
            .map(|row| {
                let mut vals: Vec<f64> = row.iter().filter_map(|e| *e).collect();
                if vals.is_empty() {
                    return f64::NAN;
                }
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = vals.len();
                if n % 2 == 1 {
                    vals[n / 2]
                } else {
                    0.5 * (vals[n / 2 - 1] + vals[n / 2])
                }
            })
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.errors
            .iter()
            .flat_map(|row| row.iter())
            .filter(|e| e.is_none())
            .count()
    }

    /// Median error should fall as experiments accumulate: at most one
    /// inversion along the curve, and the final median at most half the
    /// first (or the first already at rounding level).
    pub fn trend_ok(&self) -> bool {
        let med = self.medians();
        if med.iter().any(|m| m.is_nan()) || med.is_empty() {
            return false;
        }
        let inversions = med.windows(2).filter(|w| w[1] > w[0]).count();
        let first = med[0];
        let last = *med.last().unwrap();
        inversions <= 1 && (last <= first / 2.0 || first <= 1e-8)
    }
}

/// Estimates `h_true` from independent batches at each sample size and
/// records the error curve. Replicates are deterministic functions of
/// `(seed, sample size index, replicate index)`.
pub fn consistency_experiment(
    h_true: &ImpulseResponse,
    law: &InputLaw,
    noise: &NoiseModel,
    config: &ConsistencyConfig,
) -> Result<ConsistencyCurve> {
    law.validate()?;
    noise.validate()?;
    if config.sample_sizes.is_empty() || config.replicates == 0 {
        return Err(Error::InvalidConfig(
            "consistency experiment needs sample sizes and replicates".into(),
        ));
    }
    let reps = config.replicates;
    let jobs = config.sample_sizes.len() * reps;
    let errors_flat = parallel_map(jobs, config.threads, |job| {
        let (s, r) = (job / reps, job % reps);
        let seed = mix_seed(config.seed, s as u64, r as u64);
        generate_batch(h_true, law, noise, config.sample_sizes[s], seed)
            .and_then(|batch| estimate(&batch, &config.solver))
            .map(|h| l2_distance(&h, h_true))
            .ok()
    });
    let errors = errors_flat.chunks(reps).map(|c| c.to_vec()).collect();
    Ok(ConsistencyCurve {
        sample_sizes: config.sample_sizes.clone(),
        errors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityConfig {
    pub sample_size: usize,
    pub replicates: usize,
    pub seed: u64,
    pub threads: usize,
    /// Replicates with any coefficient below `boundary_tol * ||h||` are
    /// excluded: scaled errors are only comparable for interior solutions.
    pub boundary_tol: f64,
    pub solver: SolverConfig,
}

impl Default for NormalityConfig {
    fn default() -> Self {
        Self {
            sample_size: 1024,
            replicates: 500,
            seed: 0,
            threads: 1,
            boundary_tol: 1e-6,
            solver: SolverConfig::default(),
        }
    }
}

/// Scaled estimation errors `sqrt(m) * (h_hat - h_true)` across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalitySample {
    pub scaled: Vec<Vec<f64>>,
    pub excluded_boundary: usize,
    pub failed: usize,
    dim: usize,
}

impl NormalitySample {
    pub fn count(&self) -> usize {
        self.scaled.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn central_moments(&self, k: usize) -> (f64, f64, f64, f64) {
        let n = self.scaled.len() as f64;
        let mean = self.scaled.iter().map(|row| row[k]).sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for row in &self.scaled {
            let d = row[k] - mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        (mean, m2 / n, m3 / n, m4 / n)
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.central_moments(k).0).collect()
    }

    pub fn skewness(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                let (_, m2, m3, _) = self.central_moments(k);
                m3 / m2.powf(1.5)
            })
            .collect()
    }

    pub fn excess_kurtosis(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                let (_, m2, _, m4) = self.central_moments(k);
                m4 / (m2 * m2) - 3.0
            })
            .collect()
    }

    /// Sample covariance (denominator `n - 1`) of the scaled errors.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.scaled.len();
        let d = self.dim;
        let means = self.means();
        let mut cov = vec![vec![0.0; d]; d];
        for row in &self.scaled {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (row[a] - means[a]) * (row[b] - means[b]);
                }
            }
        }
        let denom = (n.max(2) - 1) as f64;
        for r in cov.iter_mut() {
            for v in r.iter_mut() {
                *v /= denom;
            }
        }
        cov
    }
}

/// Repeatedly estimates at one sample size and collects
/// `sqrt(m) (h_hat - h_true)`, excluding boundary-stuck replicates.
pub fn normality_experiment(
    h_true: &ImpulseResponse,
    law: &InputLaw,
    noise: &NoiseModel,
    config: &NormalityConfig,
) -> Result<NormalitySample> {
    law.validate()?;
    noise.validate()?;
    if h_true.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidConfig(
            "scaled-error sampling requires a strictly positive true response".into(),
        ));
    }
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("need at least one replicate".into()));
    }
    let m = config.sample_size;
    let estimates = parallel_map(config.replicates, config.threads, |r| {
        let seed = mix_seed(config.seed, 0, r as u64);
        generate_batch(h_true, law, noise, m, seed)
            .and_then(|batch| estimate(&batch, &config.solver))
            .ok()
    });

    let mut scaled = Vec::new();
    let mut excluded_boundary = 0;
    let mut failed = 0;
    let root_m = (m as f64).sqrt();
    for est in estimates {
        match est {
            None => failed += 1,
            Some(h) => {
                let norm = h.norm();
                if h.iter().any(|v| *v < config.boundary_tol * norm) {
                    excluded_boundary += 1;
                } else {
                    scaled.push(
                        (0..h.len())
                            .map(|k| root_m * (h[k] - h_true[k]))
                            .collect(),
                    );
                }
            }
        }
    }
    Ok(NormalitySample {
        scaled,
        excluded_boundary,
        failed,
        dim: h_true.len(),
    })
}

/// Monte Carlo check of the expected-criterion decomposition at a fixed
/// probe response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCriterionCheck {
    /// Mean of `I(Y || T(h_probe)U)` over the draws.
    pub lhs_mean: f64,
    /// Mean of `I(T(h_true)U || T(h_probe)U) + mass * E[delta log delta]`.
    pub rhs_mean: f64,
    /// Mean of the per-draw difference (common random numbers).
    pub diff_mean: f64,
    /// Standard error of the per-draw difference.
    pub std_error: f64,
    pub samples: usize,
}

impl LimitCriterionCheck {
    pub fn within_three_se(&self) -> bool {
        self.diff_mean.abs() <= 3.0 * self.std_error
    }
}

/// Samples the two sides of the decomposition with shared inputs and
/// noise, so their difference has mean zero and far smaller variance than
/// either side alone.
pub fn limit_criterion_check(
    h_true: &ImpulseResponse,
    law: &InputLaw,
    noise: &NoiseModel,
    h_probe: &ImpulseResponse,
    experiments_per_draw: usize,
    draws: usize,
    seed: u64,
) -> Result<LimitCriterionCheck> {
    if h_probe.len() != h_true.len() {
        return Err(Error::LengthMismatch {
            expected: h_true.len(),
            found: h_probe.len(),
        });
    }
    if h_probe[0] <= 0.0 {
        return Err(Error::InvalidConfig(
            "probe response needs a positive leading tap to keep the criterion finite".into(),
        ));
    }
    if draws < 2 {
        return Err(Error::InvalidConfig("need at least two draws".into()));
    }
    let noise_constant = noise.mean_delta_log_delta();
    let mut diffs = Vec::with_capacity(draws);
    let (mut lhs_sum, mut rhs_sum) = (0.0, 0.0);
    for s in 0..draws {
        let batch = generate_batch(
            h_true,
            law,
            noise,
            experiments_per_draw,
            mix_seed(seed, 1, s as u64),
        )?;
        let sys = ConvolutionSystem::new(batch.u.clone())?;
        let w_probe = sys.apply(h_probe)?;
        let lhs = i_divergence(&batch.y, &w_probe)?;
        let rhs = i_divergence(&batch.w_star, &w_probe)? + batch.w_star.total() * noise_constant;
        lhs_sum += lhs;
        rhs_sum += rhs;
        diffs.push(lhs - rhs);
    }
    let n = draws as f64;
    let diff_mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - diff_mean) * (d - diff_mean)).sum::<f64>() / (n - 1.0);
    Ok(LimitCriterionCheck {
        lhs_mean: lhs_sum / n,
        rhs_mean: rhs_sum / n,
        diff_mean,
        std_error: (var / n).sqrt(),
        samples: draws,
    })
}
