//! Job files: one JSON document naming the spaces, the matrices, the
//! constants and the analysis to run.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::equivalence::ConditionId;
use crate::error::{FrameError, Result};
use crate::linalg;
use crate::operators::FrameSystem;
use crate::optimize::OptimizerConfig;
use crate::perturbation::{AtomicMode, ConstantsRole, PerturbationConstants, Tolerances, VerifyOptions};
use crate::spaces::SpaceSpec;

pub const JOB_SCHEMA: &str = "framelab.job/1";

/// Matrix names a job may carry.
pub const MATRIX_KEYS: [&str; 7] = ["G", "Phi", "F", "Psi", "S", "S_tilde", "P"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Analysis {
    #[serde(rename = "bessel")]
    Bessel,
    #[serde(rename = "frame")]
    Frame,
    #[serde(rename = "banach_frame")]
    BanachFrame,
    #[serde(rename = "banach_frame_projection")]
    BanachFrameProjection,
    #[serde(rename = "riesz")]
    Riesz,
    #[serde(rename = "atomic")]
    Atomic,
    #[serde(rename = "atomic_truncated")]
    AtomicTruncated,
    #[serde(rename = "operator_perturbation")]
    Operator,
    #[serde(rename = "hilbert")]
    Hilbert,
    #[serde(rename = "equivalence")]
    Equivalence,
    #[serde(rename = "mu_threshold")]
    MuThreshold,
    #[serde(rename = "frame_bounds")]
    FrameBounds,
    #[serde(rename = "neumann")]
    Neumann,
    #[serde(rename = "residual")]
    Residual,
    #[serde(rename = "minimal_mu")]
    MinimalMu,
    #[serde(rename = "sweep")]
    Sweep,
}

impl Analysis {
    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
    }

    /// Theorem verifications, the analyses a sweep can drive.
    pub fn is_theorem(self) -> bool {
        use Analysis::*;
        matches!(
            self,
            Bessel | Frame | BanachFrame | BanachFrameProjection | Riesz | Atomic | AtomicTruncated | Operator | Hilbert
        )
    }

    /// Matrices that must be present.
    pub fn required(self) -> &'static [&'static str] {
        use Analysis::*;
        match self {
            Bessel | Frame | BanachFrame | Hilbert | Residual | MinimalMu => &["G", "Phi"],
            BanachFrameProjection => &["G", "Phi", "P"],
            Riesz | MuThreshold => &["F", "Psi"],
            Atomic | AtomicTruncated => &["G", "F", "Psi"],
            Operator => &["G", "S_tilde"],
            FrameBounds | Neumann => &["G"],
            Equivalence | Sweep => &[],
        }
    }

    /// `(original, perturbed)` matrix names a sweep rescales.
    pub fn perturbation_pair(self) -> Option<(&'static str, &'static str)> {
        use Analysis::*;
        match self {
            Bessel | Frame | BanachFrame | BanachFrameProjection | Hilbert => Some(("G", "Phi")),
            Riesz | Atomic | AtomicTruncated => Some(("F", "Psi")),
            Operator => Some(("S", "S_tilde")),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Mu,
    Lambda1,
    Lambda2,
    /// Multiplies the perturbation (perturbed minus original).
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Theorem to evaluate at each step; defaults to the job's analysis.
    #[serde(default)]
    pub analysis: Option<Analysis>,
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// With `parameter = mu`, rescale the perturbation so that its smallest
    /// admissible `mu` (with zero `lambda`s) equals the step value. With
    /// other parameters, replace `mu` by the certified minimal constant.
    #[serde(default)]
    pub match_mu: bool,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.from];
        }
        (0..self.steps).map(|i| self.from + (self.to - self.from) * i as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesSpec {
    #[serde(rename = "X")]
    pub x: SpaceSpec,
    #[serde(rename = "Xd")]
    pub xd: SpaceSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
}

impl ConstantsSpec {
    pub fn resolve(&self) -> Result<PerturbationConstants> {
        let standard = self.mu.is_some() || self.lambda1.is_some() || self.lambda2.is_some();
        let operator = self.nu.is_some() || self.beta1.is_some() || self.beta2.is_some();
        if standard && operator {
            return Err(FrameError::InvalidArgument(
                "constants: give either {mu, lambda1, lambda2} or {nu, beta1, beta2}, not both".into(),
            ));
        }
        if operator {
            PerturbationConstants::operator(
                self.nu.unwrap_or(0.0),
                self.beta1.unwrap_or(0.0),
                self.beta2.unwrap_or(0.0),
            )
        } else {
            PerturbationConstants::new(self.mu.unwrap_or(0.0), self.lambda1.unwrap_or(0.0), self.lambda2.unwrap_or(0.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSpec {
    pub from: ConditionId,
    pub to: ConditionId,
}

/// The job document as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub spaces: SpacesSpec,
    #[serde(default)]
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    pub constants: ConstantsSpec,
    pub analysis: Analysis,
    /// Atomic decompositions: `full_A9` or `truncated_A10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AtomicMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_delta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl JobSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FrameError::InvalidArgument(format!("job file: {e}")))
    }
}

/// A job whose matrices, spaces and constants passed validation.
#[derive(Debug, Clone)]
pub struct Job {
    pub space_x: SpaceSpec,
    pub space_xd: SpaceSpec,
    pub matrices: BTreeMap<String, DMatrix<f64>>,
    pub constants: PerturbationConstants,
    pub analysis: Analysis,
    pub mode: AtomicMode,
    pub conditions: Option<ConditionsSpec>,
    pub sweep: Option<SweepSpec>,
    pub options: VerifyOptions,
    pub seed: u64,
}

impl Job {
    pub fn from_spec(spec: &JobSpec) -> Result<Self> {
        if let Some(schema) = &spec.schema {
            if schema != JOB_SCHEMA {
                return Err(FrameError::InvalidArgument(format!("schema: expected \"{JOB_SCHEMA}\", got \"{schema}\"")));
            }
        }
        let space_x = SpaceSpec::new(spec.spaces.x.dim, spec.spaces.x.p)
            .map_err(|e| FrameError::InvalidArgument(format!("spaces.X: {e}")))?;
        let space_xd = SpaceSpec::new(spec.spaces.xd.dim, spec.spaces.xd.p)
            .map_err(|e| FrameError::InvalidArgument(format!("spaces.Xd: {e}")))?;
        let mut matrices = BTreeMap::new();
        for (name, rows) in &spec.matrices {
            if !MATRIX_KEYS.contains(&name.as_str()) {
                return Err(FrameError::InvalidArgument(format!(
                    "matrices.{name}: unknown matrix (expected one of {})",
                    MATRIX_KEYS.join(", ")
                )));
            }
            let m = linalg::from_rows(rows, &format!("matrices.{name}"))?;
            let expected = match name.as_str() {
                "S" | "S_tilde" => (space_x.dim, space_xd.dim),
                "P" => (space_xd.dim, space_xd.dim),
                "G" if spec.analysis == Analysis::Neumann => (space_x.dim, space_x.dim),
                _ => (space_xd.dim, space_x.dim),
            };
            if m.shape() != expected {
                return Err(FrameError::InvalidArgument(format!(
                    "matrices.{name}: shape {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    expected.0,
                    expected.1
                )));
            }
            matrices.insert(name.clone(), m);
        }
        let constants = spec.constants.resolve().map_err(|e| FrameError::InvalidArgument(format!("constants: {e}")))?;
        if constants.lambda2 >= 1.0 {
            return Err(FrameError::Lambda2Cap { lambda2: constants.lambda2 });
        }
        let tolerances = spec.tolerances.clone().unwrap_or_default();
        for (name, v) in [
            ("residual", tolerances.residual),
            ("bound_abs", tolerances.bound_abs),
            ("bound_rel", tolerances.bound_rel),
            ("hypothesis", tolerances.hypothesis),
            ("identity", tolerances.identity),
            ("reconstruction", tolerances.reconstruction),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FrameError::InvalidArgument(format!("tolerances.{name} must be finite and >= 0")));
            }
        }
        if let Some(d) = spec.max_delta {
            if !(d.is_finite() && d > 0.0) {
                return Err(FrameError::InvalidArgument("max_delta must be finite and > 0".into()));
            }
        }
        let optimizer = spec.optimizer.clone().unwrap_or_default().with_seed(spec.seed);
        let job = Job {
            space_x,
            space_xd,
            matrices,
            constants,
            analysis: spec.analysis,
            mode: spec.mode.unwrap_or(match spec.analysis {
                Analysis::AtomicTruncated => AtomicMode::Truncated,
                _ => AtomicMode::Full,
            }),
            conditions: spec.conditions,
            sweep: spec.sweep.clone(),
            options: VerifyOptions { tolerances, optimizer, max_delta: spec.max_delta },
            seed: spec.seed,
        };
        job.check_requirements()?;
        Ok(job)
    }

    /// The theorem a sweep evaluates, or the job's own analysis.
    pub fn effective_analysis(&self) -> Analysis {
        match (self.analysis, &self.sweep) {
            (Analysis::Sweep, Some(s)) => s.analysis.unwrap_or(Analysis::Sweep),
            (a, _) => a,
        }
    }

    fn check_requirements(&self) -> Result<()> {
        let analysis = self.effective_analysis();
        if self.analysis == Analysis::Sweep {
            let Some(sweep) = &self.sweep else {
                return Err(FrameError::InvalidArgument("sweep: analysis \"sweep\" needs a sweep section".into()));
            };
            if !analysis.is_theorem() {
                return Err(FrameError::InvalidArgument(format!(
                    "sweep.analysis: \"{}\" is not a theorem verification",
                    analysis.name()
                )));
            }
            self.check_sweep(sweep)?;
        }
        for key in analysis.required() {
            if !self.matrices.contains_key(*key) {
                return Err(FrameError::InvalidArgument(format!(
                    "matrices.{key}: required by analysis \"{}\"",
                    analysis.name()
                )));
            }
        }
        if analysis == Analysis::Equivalence && self.conditions.is_none() {
            return Err(FrameError::InvalidArgument("conditions: analysis \"equivalence\" needs {from, to}".into()));
        }
        Ok(())
    }

    pub(crate) fn check_sweep(&self, sweep: &SweepSpec) -> Result<()> {
        if sweep.steps == 0 || sweep.steps > 10_000 {
            return Err(FrameError::InvalidArgument("sweep.steps must lie in 1..=10000".into()));
        }
        if !(sweep.from.is_finite() && sweep.to.is_finite()) {
            return Err(FrameError::InvalidArgument("sweep.from and sweep.to must be finite".into()));
        }
        if sweep.parameter != SweepParameter::Scale && sweep.from.min(sweep.to) < 0.0 {
            return Err(FrameError::InvalidArgument("sweep: constants must be >= 0".into()));
        }
        if sweep.parameter == SweepParameter::Lambda2 && sweep.from.max(sweep.to) >= 1.0 {
            return Err(FrameError::Lambda2Cap { lambda2: sweep.from.max(sweep.to) });
        }
        Ok(())
    }

    pub fn matrix(&self, key: &str) -> Result<&DMatrix<f64>> {
        self.matrices.get(key).ok_or_else(|| {
            FrameError::InvalidArgument(format!("matrices.{key}: required by analysis \"{}\"", self.effective_analysis().name()))
        })
    }

    /// The family stored under `key`, with rows in `X_d` coordinates.
    pub fn system(&self, key: &str) -> Result<FrameSystem> {
        FrameSystem::new(self.matrix(key)?.clone(), self.space_x, self.space_xd)
    }

    pub fn constants_role(&self) -> ConstantsRole {
        self.constants.role
    }
}
