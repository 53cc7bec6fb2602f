//! JSON report structures. Field order is the serialization order; the
//! schema is documented in `docs/report-schema.json` and versioned through
//! `schema_version`.

use firdiv_core::diagnostics::{ConditionReport, KktResidual};
use firdiv_core::solver::{SolverReport, Termination, VerifySummary};
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

/// How many objective-trace points are kept in a report.
pub const TRACE_CAP: usize = 10_000;

#[derive(Serialize)]
pub struct FileInfo {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Serialize)]
pub struct InputsJson {
    pub output: FileInfo,
    pub input: FileInfo,
}

#[derive(Serialize)]
pub struct ConditionsJson {
    pub well_posed: bool,
    pub strictly_convex: bool,
    /// `(time, experiment)` pairs where output appears before any input
    /// mass; times 0-based, experiments 1-based.
    pub condition1_witnesses: Vec<(usize, usize)>,
    /// Times (0-based) with no experiment pairing positive output with
    /// positive initial input.
    pub condition2_witness_rows: Vec<usize>,
}

impl From<&ConditionReport> for ConditionsJson {
    fn from(r: &ConditionReport) -> Self {
        Self {
            well_posed: r.well_posed,
            strictly_convex: r.strictly_convex,
            condition1_witnesses: r.condition1_witnesses.clone(),
            condition2_witness_rows: r.condition2_witness_rows.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct SolverConfigJson {
    pub max_iters: usize,
    pub tol_kkt: f64,
    pub tol_objective: f64,
    pub init: String,
    pub verify: bool,
}

#[derive(Serialize)]
pub struct KktJson {
    pub max_violation: f64,
    pub tol_active: f64,
    pub gradient: Vec<f64>,
    pub violations: Vec<f64>,
    pub active_set: Vec<usize>,
}

impl From<&KktResidual> for KktJson {
    fn from(k: &KktResidual) -> Self {
        Self {
            max_violation: k.max_violation,
            tol_active: k.tol_active,
            gradient: k.gradient.clone(),
            violations: k.violations.clone(),
            active_set: k.active_set.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct VerifyJson {
    pub steps_checked: usize,
    pub max_gain_identity_residual: f64,
    pub max_mass_form_gap: f64,
    pub max_pythagoras_output: f64,
    pub max_pythagoras_model: f64,
    pub max_output_membership: f64,
    pub max_model_membership: f64,
    pub max_update_projection_gap: f64,
    pub within_tolerances: bool,
}

impl From<&VerifySummary> for VerifyJson {
    fn from(v: &VerifySummary) -> Self {
        Self {
            steps_checked: v.steps_checked,
            max_gain_identity_residual: v.max_gain_identity_residual,
            max_mass_form_gap: v.max_mass_form_gap,
            max_pythagoras_output: v.max_pythagoras_output,
            max_pythagoras_model: v.max_pythagoras_model,
            max_output_membership: v.max_output_membership,
            max_model_membership: v.max_model_membership,
            max_update_projection_gap: v.max_update_projection_gap,
            within_tolerances: v.within_tolerances(),
        }
    }
}

#[derive(Serialize)]
pub struct ResultJson {
    pub h: Vec<f64>,
    pub iterations: usize,
    pub termination: &'static str,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub objective_trace: Vec<f64>,
    pub objective_trace_downsampled: bool,
    pub kkt: KktJson,
    pub pinned_at_zero: Vec<usize>,
    /// Coordinates pinned at zero by the starting point whose final
    /// gradient is negative — the reported optimum may be an artifact of
    /// the initial active set.
    pub possibly_suboptimal_active_set: Vec<usize>,
    pub simplex_residual_max: Option<f64>,
    pub verify: Option<VerifyJson>,
}

#[derive(Serialize)]
pub struct EstimateReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub inputs: InputsJson,
    pub config: SolverConfigJson,
    pub conditions: ConditionsJson,
    pub result: ResultJson,
    pub wall_time_ms: f64,
}

#[derive(Serialize)]
pub struct CheckReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub inputs: InputsJson,
    pub conditions: ConditionsJson,
}

pub fn termination_label(t: Termination) -> &'static str {
    match t {
        Termination::KktSatisfied => "kkt_satisfied",
        Termination::ObjectiveStalled => "objective_stalled",
        Termination::MaxIters => "max_iters",
    }
}

/// Keeps at most `cap` evenly spaced points, always including the first
/// and last; returns whether anything was dropped.
pub fn downsample(trace: &[f64], cap: usize) -> (Vec<f64>, bool) {
    if trace.len() <= cap || cap < 2 {
        return (trace.to_vec(), false);
    }
    let last = trace.len() - 1;
    let step = last as f64 / (cap - 1) as f64;
    let out = (0..cap)
        .map(|i| trace[((i as f64 * step).round() as usize).min(last)])
        .collect();
    (out, true)
}

pub fn result_json(report: &SolverReport) -> ResultJson {
    let (trace, downsampled) = downsample(&report.objective_trace, TRACE_CAP);
    ResultJson {
        h: report.h_final.to_vec(),
        iterations: report.iterations,
        termination: termination_label(report.termination),
        objective_initial: *report.objective_trace.first().unwrap_or(&f64::NAN),
        objective_final: *report.objective_trace.last().unwrap_or(&f64::NAN),
        objective_trace: trace,
        objective_trace_downsampled: downsampled,
        kkt: KktJson::from(&report.kkt_final),
        pinned_at_zero: report.pinned_at_zero.clone(),
        possibly_suboptimal_active_set: report.suspicious_pinned_coordinates(),
        simplex_residual_max: report
            .simplex_residuals
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r)))),
        verify: report.verify.as_ref().map(VerifyJson::from),
    }
}
