//! Batch front end shared by the `framelab` binary and the FFI layer.
//!
//! A job is parsed and validated into a [`Job`], executed into a
//! [`ReportDocument`], and written as `report.json` plus `report.txt`
//! (and `sweep.csv`, `sweep.svg` for sweeps).

mod job;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use job::{
    Analysis, ConditionsSpec, ConstantsSpec, Job, JobSpec, SpacesSpec, SweepParameter, SweepSpec, JOB_SCHEMA,
    MATRIX_KEYS,
};
pub use output::{render_svg, render_text, sweep_csv};

use crate::equivalence::{
    certified_margin, check_equivalence, check_frame_mu_threshold, ConditionInstance, EquivalenceReport,
    MuThresholdReport,
};
use crate::error::FrameError;
use crate::linalg;
use crate::operators::{check_neumann_invertibility_with, frame_bounds_with, BoundsEstimate, InvertibilityCertificate};
use crate::oracles::{self, OracleValue, MAX_ORACLE_DIM};
use crate::perturbation::{
    verify_atomic_decomposition_perturbation, verify_banach_frame_perturbation, verify_banach_frame_projection,
    verify_bessel_perturbation, verify_frame_perturbation, verify_hilbert, verify_operator_perturbation,
    verify_riesz_perturbation, PerturbationConstants, Residual, ResidualForm, TheoremReport, Tolerances, Verdict,
};
use crate::optimize::OptimizerConfig;

pub const REPORT_SCHEMA: &str = "framelab.report/1";

/// Name of the only non-deterministic report field.
pub const TIMESTAMP_FIELD: &str = "generated_at_unix";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// Process exit code: 2 for input errors, 3 for numerical or output
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 3,
        }
    }
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Brute-force reference values whenever the dimensions permit.
    #[default]
    Auto,
    /// Require reference values; dimensions above the limit are an error.
    On,
    Off,
}

impl std::str::FromStr for OracleMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(OracleMode::Auto),
            "on" => Ok(OracleMode::On),
            "off" => Ok(OracleMode::Off),
            other => Err(format!("invalid oracle mode '{other}' (expected auto, on or off)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub max_delta: Option<f64>,
    pub tol_residual: Option<f64>,
    pub oracle: OracleMode,
    pub seed_override: Option<u64>,
    /// Run the job's sweep section even if its analysis is not `sweep`.
    pub force_sweep: bool,
    /// Fixed value for the timestamp field; the current time otherwise.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBoundsResult {
    pub lower: BoundsEstimate,
    pub upper: BoundsEstimate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perturbed: Option<Box<FrameBoundsResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannResult {
    pub certificate: Option<InvertibilityCertificate>,
    /// `||G^{-1}||` and `1 / ||G||`-type extremes of `||G^{-1} x|| / ||x||`,
    /// from the explicit inverse.
    pub inverse_norm: Option<BoundsEstimate>,
    pub inverse_lower: Option<BoundsEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualResult {
    pub form: ResidualForm,
    pub constants: PerturbationConstants,
    pub residual: f64,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalMuResult {
    pub form: ResidualForm,
    pub lambda1: f64,
    pub lambda2: f64,
    pub minimal_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub step: usize,
    pub param: f64,
    pub constants: Option<PerturbationConstants>,
    pub pred_lower: Option<f64>,
    pub pred_upper: Option<f64>,
    pub act_lower: Option<f64>,
    pub act_upper: Option<f64>,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub analysis: Analysis,
    pub parameter: SweepParameter,
    pub match_mu: bool,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisResult {
    Theorem(Box<TheoremReport>),
    Equivalence(Box<EquivalenceReport>),
    MuThreshold(Box<MuThresholdReport>),
    FrameBounds(Box<FrameBoundsResult>),
    Neumann(Box<NeumannResult>),
    Residual(ResidualResult),
    MinimalMu(MinimalMuResult),
    Sweep(SweepResult),
}

impl AnalysisResult {
    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            AnalysisResult::Theorem(t) => Some(t.verdict),
            AnalysisResult::MuThreshold(t) => Some(t.verdict),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub name: String,
    #[serde(flatten)]
    pub value: OracleValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSection {
    pub max_dim: usize,
    pub entries: Vec<OracleEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skipped: Vec<String>,
}

/// Everything written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub generated_at_unix: u64,
    pub schema_version: String,
    pub analysis: Analysis,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub optimizer: OptimizerConfig,
    pub max_delta: Option<f64>,
    pub result: AnalysisResult,
    pub oracle: Option<OracleSection>,
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Paths of the files a run wrote.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub document: ReportDocument,
    pub report_json: PathBuf,
    pub report_txt: PathBuf,
    pub sweep_csv: Option<PathBuf>,
    pub sweep_svg: Option<PathBuf>,
}

fn read_job(path: &Path) -> Result<JobSpec, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read job file {}: {e}", path.display())))?;
    Ok(JobSpec::from_json(&text)?)
}

/// Parses and validates a job file without running it.
pub fn validate_job(path: &Path) -> Result<Job, CliError> {
    Ok(Job::from_spec(&read_job(path)?)?)
}

/// Applies command-line overrides to a parsed job.
pub fn prepare_job(spec: &JobSpec, opts: &RunOptions) -> Result<Job, CliError> {
    let mut spec = spec.clone();
    if let Some(seed) = opts.seed_override {
        spec.seed = seed;
    }
    if opts.max_delta.is_some() {
        spec.max_delta = opts.max_delta;
    }
    if let Some(t) = opts.tol_residual {
        let mut tol = spec.tolerances.unwrap_or_default();
        tol.residual = t;
        spec.tolerances = Some(tol);
    }
    if opts.force_sweep {
        if spec.sweep.is_none() {
            return Err(CliError::Input("sweep: the job has no sweep section".into()));
        }
        if spec.analysis != Analysis::Sweep {
            let sweep = spec.sweep.as_mut().expect("checked");
            sweep.analysis.get_or_insert(spec.analysis);
            spec.analysis = Analysis::Sweep;
        }
    }
    Ok(Job::from_spec(&spec)?)
}

/// Runs a validated job and assembles its report.
pub fn execute(job: &Job, opts: &RunOptions) -> Result<ReportDocument, CliError> {
    let result = match job.analysis {
        Analysis::Sweep => AnalysisResult::Sweep(run_sweep(job)?),
        a => run_analysis(job, a)?,
    };
    let oracle = oracle_section(job, &result, opts.oracle)?;
    let generated_at_unix = opts
        .timestamp
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    Ok(ReportDocument {
        generated_at_unix,
        schema_version: REPORT_SCHEMA.into(),
        analysis: job.analysis,
        seed: job.seed,
        tolerances: job.options.tolerances.clone(),
        optimizer: job.options.optimizer.clone(),
        max_delta: job.options.max_delta,
        result,
        oracle,
    })
}

/// Parses, validates, runs and writes the reports of one job file.
pub fn run_job(path: &Path, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let job = prepare_job(&read_job(path)?, opts)?;
    let document = execute(&job, opts)?;
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from("framelab-out"));
    write_outputs(&document, &out_dir)
}

pub fn write_outputs(document: &ReportDocument, out_dir: &Path) -> Result<RunOutput, CliError> {
    let io = |path: &Path, e: std::io::Error| CliError::Io { path: path.display().to_string(), message: e.to_string() };
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let report_json = out_dir.join("report.json");
    let report_txt = out_dir.join("report.txt");
    fs::write(&report_json, document.to_json()).map_err(|e| io(&report_json, e))?;
    fs::write(&report_txt, render_text(document)).map_err(|e| io(&report_txt, e))?;
    let (mut sweep_csv_path, mut sweep_svg_path) = (None, None);
    if let AnalysisResult::Sweep(sweep) = &document.result {
        let csv_path = out_dir.join("sweep.csv");
        let svg_path = out_dir.join("sweep.svg");
        let csv_text = sweep_csv(sweep).map_err(|e| CliError::Io { path: csv_path.display().to_string(), message: e })?;
        fs::write(&csv_path, csv_text).map_err(|e| io(&csv_path, e))?;
        fs::write(&svg_path, render_svg(sweep)).map_err(|e| io(&svg_path, e))?;
        sweep_csv_path = Some(csv_path);
        sweep_svg_path = Some(svg_path);
    }
    Ok(RunOutput { document: document.clone(), report_json, report_txt, sweep_csv: sweep_csv_path, sweep_svg: sweep_svg_path })
}

/// Drops the timestamp line from a rendered report, for byte comparisons.
pub fn strip_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with(&format!("\"{TIMESTAMP_FIELD}\"")))
        .collect::<Vec<_>>()
        .join("\n")
}

fn theorem(job: &Job, analysis: Analysis) -> Result<TheoremReport, FrameError> {
    let k = &job.constants;
    let o = &job.options;
    match analysis {
        Analysis::Bessel => verify_bessel_perturbation(&job.system("G")?, &job.system("Phi")?, k, o),
        Analysis::Frame => verify_frame_perturbation(&job.system("G")?, &job.system("Phi")?, k, o),
        Analysis::BanachFrame => {
            verify_banach_frame_perturbation(&job.system("G")?, &job.system("Phi")?, job.matrices.get("S"), k, o)
        }
        Analysis::BanachFrameProjection => {
            verify_banach_frame_projection(&job.system("G")?, &job.system("Phi")?, job.matrix("P")?, k, o)
        }
        Analysis::Riesz => verify_riesz_perturbation(&job.system("F")?, &job.system("Psi")?, k, o),
        Analysis::Atomic | Analysis::AtomicTruncated => verify_atomic_decomposition_perturbation(
            &job.system("G")?,
            &job.system("F")?,
            &job.system("Psi")?,
            k,
            job.mode,
            o,
        ),
        Analysis::Operator => {
            let g = job.system("G")?;
            let s = match job.matrices.get("S") {
                Some(s) => s.clone(),
                None => linalg::pinv(&g.matrix)?,
            };
            verify_operator_perturbation(&g, &s, job.matrix("S_tilde")?, k, o)
        }
        Analysis::Hilbert => verify_hilbert(&job.system("G")?, &job.system("Phi")?, k, o),
        other => Err(FrameError::InvalidArgument(format!("\"{}\" is not a theorem verification", other.name()))),
    }
}

fn run_analysis(job: &Job, analysis: Analysis) -> Result<AnalysisResult, CliError> {
    let o = &job.options;
    let cfg = &o.optimizer;
    let out = match analysis {
        a if a.is_theorem() => AnalysisResult::Theorem(Box::new(theorem(job, a)?)),
        Analysis::Equivalence => {
            let c = job.conditions.expect("validated");
            let inst = ConditionInstance {
                g: job.system("G").ok(),
                phi: job.system("Phi").ok(),
                f: job.system("F").ok(),
                psi: job.system("Psi").ok(),
                s: job.matrices.get("S").cloned(),
            };
            AnalysisResult::Equivalence(Box::new(check_equivalence(&inst, c.from, &job.constants, c.to, o)?))
        }
        Analysis::MuThreshold => {
            AnalysisResult::MuThreshold(Box::new(check_frame_mu_threshold(&job.system("F")?, &job.system("Psi")?, o)?))
        }
        Analysis::FrameBounds => {
            let bounds = |key: &str| -> Result<FrameBoundsResult, FrameError> {
                let (lower, upper) = frame_bounds_with(&job.system(key)?, cfg)?;
                Ok(FrameBoundsResult { lower, upper, perturbed: None })
            };
            let mut res = bounds("G")?;
            if job.matrices.contains_key("Phi") {
                res.perturbed = Some(Box::new(bounds("Phi")?));
            }
            AnalysisResult::FrameBounds(Box::new(res))
        }
        Analysis::Neumann => {
            let g = job.matrix("G")?;
            let certificate = check_neumann_invertibility_with(g, &job.space_x, cfg)?;
            let (inverse_norm, inverse_lower) = match linalg::inverse(g, "G") {
                Ok(inv) => (
                    Some(crate::operators::op_norm_with(&inv, &job.space_x, &job.space_x, cfg)?),
                    Some(crate::operators::lower_bound_with(&inv, &job.space_x, &job.space_x, cfg)?),
                ),
                Err(_) => (None, None),
            };
            AnalysisResult::Neumann(Box::new(NeumannResult { certificate, inverse_norm, inverse_lower }))
        }
        Analysis::Residual => {
            let r = Residual::dual_synthesis(&job.system("G")?, &job.system("Phi")?)?;
            let value = r.worst_case(&job.constants, cfg)?;
            AnalysisResult::Residual(ResidualResult {
                form: r.form,
                constants: job.constants,
                residual: value,
                tolerance: o.tolerances.residual,
                holds: value <= o.tolerances.residual,
            })
        }
        Analysis::MinimalMu => {
            let r = Residual::dual_synthesis(&job.system("G")?, &job.system("Phi")?)?;
            let (l1, l2) = (job.constants.lambda1, job.constants.lambda2);
            AnalysisResult::MinimalMu(MinimalMuResult {
                form: r.form,
                lambda1: l1,
                lambda2: l2,
                minimal_mu: r.minimal_mu(l1, l2, cfg)?,
            })
        }
        Analysis::Sweep => AnalysisResult::Sweep(run_sweep(job)?),
        _ => unreachable!("theorems handled above"),
    };
    Ok(out)
}

/// The closeness residual a theorem checks, used to match `mu` in sweeps.
fn residual_for(job: &Job, analysis: Analysis) -> Result<Residual, FrameError> {
    match analysis {
        Analysis::Bessel | Analysis::Frame | Analysis::BanachFrame | Analysis::BanachFrameProjection | Analysis::Hilbert => {
            Residual::dual_synthesis(&job.system("G")?, &job.system("Phi")?)
        }
        Analysis::Riesz => Residual::synthesis(&job.system("F")?, &job.system("Psi")?),
        Analysis::Atomic | Analysis::AtomicTruncated => {
            let g = job.system("G")?;
            Residual::restricted(&g, &job.system("F")?, &job.system("Psi")?, g.len())
        }
        Analysis::Operator => {
            let g = job.system("G")?;
            let s = match job.matrices.get("S") {
                Some(s) => s.clone(),
                None => linalg::pinv(&g.matrix)?,
            };
            Residual::operator(&s, job.matrix("S_tilde")?, job.space_xd, job.space_x)
        }
        other => Err(FrameError::InvalidArgument(format!("sweep cannot drive \"{}\"", other.name()))),
    }
}

fn sweep_step(job: &Job, analysis: Analysis, sweep: &SweepSpec, value: f64) -> Result<TheoremReport, FrameError> {
    let mut step = job.clone();
    step.analysis = analysis;
    let (orig_key, pert_key) = analysis.perturbation_pair().expect("theorem analyses have a pair");
    let original: DMatrix<f64> = match orig_key {
        "S" if !job.matrices.contains_key("S") => linalg::pinv(job.matrix("G")?)?,
        key => job.matrix(key)?.clone(),
    };
    let perturbed = job.matrix(pert_key)?.clone();
    let mut k = job.constants;
    match sweep.parameter {
        SweepParameter::Mu => k.mu = value,
        SweepParameter::Lambda1 => k.lambda1 = value,
        SweepParameter::Lambda2 => k.lambda2 = value,
        SweepParameter::Scale => {
            step.matrices.insert(pert_key.into(), &original + (&perturbed - &original) * value);
        }
    }
    if sweep.match_mu {
        if sweep.parameter == SweepParameter::Mu {
            let norm = residual_for(&step, analysis)?.minimal_mu(0.0, 0.0, &job.options.optimizer)?;
            let factor = if norm > 0.0 { value / norm } else { 0.0 };
            step.matrices.insert(pert_key.into(), &original + (&perturbed - &original) * factor);
        } else {
            let mu = residual_for(&step, analysis)?.minimal_mu(k.lambda1, k.lambda2, &job.options.optimizer)?;
            k.mu = certified_margin(mu);
        }
    }
    k = PerturbationConstants { role: job.constants.role, ..PerturbationConstants::new(k.mu, k.lambda1, k.lambda2)? };
    step.constants = k;
    theorem(&step, analysis)
}

fn run_sweep(job: &Job) -> Result<SweepResult, CliError> {
    let sweep = job.sweep.clone().ok_or_else(|| CliError::Input("sweep: missing sweep section".into()))?;
    let analysis = sweep.analysis.unwrap_or(job.analysis);
    if !analysis.is_theorem() {
        return Err(CliError::Input(format!("sweep.analysis: \"{}\" is not a theorem verification", analysis.name())));
    }
    let values = sweep.values();
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| match sweep_step(job, analysis, &sweep, v) {
            Ok(r) => SweepRow {
                step: i,
                param: v,
                constants: Some(r.constants),
                pred_lower: Some(r.predicted_lower),
                pred_upper: Some(r.predicted_upper),
                act_lower: r.actual_lower.as_ref().map(|e| e.value),
                act_upper: r.actual_upper.as_ref().map(|e| e.value),
                verdict: verdict_name(r.verdict),
                error: None,
            },
            Err(e) => SweepRow {
                step: i,
                param: v,
                constants: None,
                pred_lower: None,
                pred_upper: None,
                act_lower: None,
                act_upper: None,
                verdict: "error".into(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepResult { analysis, parameter: sweep.parameter, match_mu: sweep.match_mu, rows })
}

pub fn verdict_name(v: Verdict) -> String {
    serde_json::to_value(v).ok().and_then(|x| x.as_str().map(str::to_string)).unwrap_or_default()
}

fn oracle_section(job: &Job, result: &AnalysisResult, mode: OracleMode) -> Result<Option<OracleSection>, CliError> {
    if mode == OracleMode::Off {
        return Ok(None);
    }
    let mut section = OracleSection { max_dim: MAX_ORACLE_DIM, entries: Vec::new(), skipped: Vec::new() };
    let mut add = |name: &str, dim: usize, f: &dyn Fn(usize) -> crate::Result<OracleValue>| -> Result<(), CliError> {
        if dim > MAX_ORACLE_DIM {
            if mode == OracleMode::On {
                return Err(CliError::Input(format!(
                    "--oracle on: {name} needs a dimension-{dim} grid, above the limit {MAX_ORACLE_DIM}"
                )));
            }
            section.skipped.push(format!("{name} (dimension {dim})"));
            return Ok(());
        }
        let value = f(oracles::default_resolution(dim))?;
        section.entries.push(OracleEntry { name: name.to_string(), value });
        Ok(())
    };
    let x = job.space_x;
    let xd = job.space_xd;
    let mut bounds_of = |label: &str, m: &DMatrix<f64>| -> Result<(), CliError> {
        add(&format!("{label}.lower"), x.dim, &|r| oracles::brute_lower_bound(m, &x, &xd, r))?;
        add(&format!("{label}.upper"), x.dim, &|r| oracles::brute_op_norm(m, &x, &xd, r))
    };
    match result {
        AnalysisResult::Theorem(t) => {
            let key = match job.effective_analysis() {
                Analysis::Riesz => None,
                Analysis::Atomic | Analysis::AtomicTruncated | Analysis::Operator => None,
                _ => Some("Phi"),
            };
            if let Some(key) = key {
                bounds_of(key, job.matrix(key)?)?;
            }
            if let Some(w) = &t.witness {
                if w.name == "Theta" {
                    bounds_of("Theta", &w.matrix)?;
                }
            }
            if job.effective_analysis() == Analysis::Riesz {
                let t = job.matrix("Psi")?.transpose();
                add("Psi.riesz_lower", xd.dim, &|r| oracles::brute_lower_bound(&t, &xd, &x, r))?;
                add("Psi.riesz_upper", xd.dim, &|r| oracles::brute_op_norm(&t, &xd, &x, r))?;
            }
        }
        AnalysisResult::Residual(_) | AnalysisResult::MinimalMu(_) => {
            let (g, phi) = (job.system("G")?, job.system("Phi")?);
            let k = job.constants;
            match result {
                AnalysisResult::Residual(_) => add("residual", g.len(), &|r| oracles::brute_residual(&g, &phi, &k, r))?,
                _ => add("minimal_mu", g.len(), &|r| oracles::brute_minimal_mu(&g, &phi, k.lambda1, k.lambda2, r))?,
            }
        }
        AnalysisResult::FrameBounds(_) => {
            bounds_of("G", job.matrix("G")?)?;
            if let Ok(phi) = job.matrix("Phi") {
                bounds_of("Phi", phi)?;
            }
        }
        _ => return Ok(None),
    }
    Ok(Some(section))
}
