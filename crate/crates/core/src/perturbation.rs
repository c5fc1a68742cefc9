//! Closeness conditions between two families, the perturbation radius
//! `Delta`, and verification of every perturbation theorem against computed
//! bounds.
//!
//! Each `verify_*` function checks the theorem's hypothesis (the residual of
//! its closeness condition and its strict inequalities), evaluates the
//! predicted bounds, computes the actual bounds of the perturbed object and
//! compares them. The verdict never rests on optimizer optimism: predicted
//! upper bounds are compared with the certified upper end of the actual
//! bracket.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::linalg::{self, identity_deviation};
use crate::operators::{
    bessel_bound_with, check_neumann_invertibility_with, frame_bounds_with, lower_bound_with, op_norm_with,
    riesz_bounds_with, BoundsEstimate, FrameSystem, InvertibilityCertificate,
};
use crate::optimize::{maximize, onto_sphere, Domain, NormTerm, OptimizerConfig, SphereObjective};
use crate::spaces::{Exponent, SpaceSpec};

/// Which constants a [`PerturbationConstants`] value stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsRole {
    /// `(mu, lambda1, lambda2)`.
    #[default]
    Standard,
    /// `(nu, beta1, beta2)` of the operator perturbation condition.
    Operator,
    /// `(mu~, lambda1~, lambda2~)` produced by a translation.
    Translated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConstants {
    pub mu: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub role: ConstantsRole,
}

impl PerturbationConstants {
    pub fn new(mu: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("mu", mu), ("lambda1", lambda1), ("lambda2", lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(FrameError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(PerturbationConstants { mu, lambda1, lambda2, role: ConstantsRole::Standard })
    }

    /// `(nu, beta1, beta2)`, stored in the `mu`, `lambda1`, `lambda2` slots.
    pub fn operator(nu: f64, beta1: f64, beta2: f64) -> Result<Self> {
        Ok(PerturbationConstants { role: ConstantsRole::Operator, ..Self::new(nu, beta1, beta2)? })
    }

    pub fn zero() -> Self {
        PerturbationConstants { mu: 0.0, lambda1: 0.0, lambda2: 0.0, role: ConstantsRole::Standard }
    }

    pub fn with_role(mut self, role: ConstantsRole) -> Self {
        self.role = role;
        self
    }
}

/// `Delta = (B (lambda1 + lambda2) + mu) / (1 - lambda2)`.
pub fn delta(b: f64, k: &PerturbationConstants) -> Result<f64> {
    if k.lambda2 >= 1.0 {
        return Err(FrameError::Lambda2Cap { lambda2: k.lambda2 });
    }
    if !(b >= 0.0) {
        return Err(FrameError::InvalidArgument(format!("bound B must be >= 0, got {b}")));
    }
    Ok((b * (k.lambda1 + k.lambda2) + k.mu) / (1.0 - k.lambda2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// A closeness condition holds when its worst-case residual is at most this.
    pub residual: f64,
    pub bound_abs: f64,
    pub bound_rel: f64,
    /// Strict inequalities need a margin above this.
    pub hypothesis: f64,
    /// Deviation allowed in `S G = I`, `F^T G = I`, `P^2 = P`.
    pub identity: f64,
    /// Deviation allowed in constructed reconstructions.
    pub reconstruction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-8,
            bound_abs: 1e-6,
            bound_rel: 1e-6,
            hypothesis: 1e-9,
            identity: 1e-10,
            reconstruction: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn bound(&self, x: f64) -> f64 {
        self.bound_abs + self.bound_rel * x.abs()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub tolerances: Tolerances,
    pub optimizer: OptimizerConfig,
    /// Optional cap `Delta < max_delta`, added as a hypothesis.
    pub max_delta: Option<f64>,
}

// ---------------------------------------------------------------------------
// Residual forms

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualForm {
    /// `||sum d_i (phi_i - g_i)||` over `d` in `X_d*`.
    DualSynthesis,
    /// `||sum c_i (psi_i - f_i)||` over `c` in `X_d`.
    Synthesis,
    /// `||{g(psi_i - f_i)}||_{X_d*}` over `g` in `X*`.
    Coefficient,
    /// The synthesis form restricted to `c = {g_i(f)}`, `f` in `X`.
    Restricted,
    /// `||S c - S~ c||` over `c` in `X_d`.
    Operator,
}

/// `sup_x [ ||D x|| - mu N(x) - lambda1 ||O x|| - lambda2 ||P x|| ]` over the
/// unit sphere of the domain, where `D = P - O`.
#[derive(Debug, Clone)]
pub struct Residual {
    pub form: ResidualForm,
    pub domain: SpaceSpec,
    pub target: Exponent,
    pub original: DMatrix<f64>,
    pub perturbed: DMatrix<f64>,
    /// Map whose norm multiplies `mu`; `None` means the domain norm itself.
    pub mu_map: Option<(DMatrix<f64>, Exponent)>,
}

impl Residual {
    /// Condition (P*) for functionals `g_i`, `phi_i`.
    pub fn dual_synthesis(g: &FrameSystem, phi: &FrameSystem) -> Result<Self> {
        g.require_same_spaces(phi, "dual synthesis residual")?;
        Ok(Residual {
            form: ResidualForm::DualSynthesis,
            domain: g.space_xd.dual(),
            target: g.space_x.p.dual(),
            original: g.synthesis(),
            perturbed: phi.synthesis(),
            mu_map: None,
        })
    }

    /// Condition (P) for vectors `f_i`, `psi_i`.
    pub fn synthesis(f: &FrameSystem, psi: &FrameSystem) -> Result<Self> {
        f.require_same_spaces(psi, "synthesis residual")?;
        Ok(Residual {
            form: ResidualForm::Synthesis,
            domain: f.space_xd,
            target: f.space_x.p,
            original: f.synthesis(),
            perturbed: psi.synthesis(),
            mu_map: None,
        })
    }

    /// Coefficient form over functionals `g` on `X`.
    pub fn coefficient(f: &FrameSystem, psi: &FrameSystem) -> Result<Self> {
        f.require_same_spaces(psi, "coefficient residual")?;
        Ok(Residual {
            form: ResidualForm::Coefficient,
            domain: f.space_x.dual(),
            target: f.space_xd.p.dual(),
            original: f.matrix.clone(),
            perturbed: psi.matrix.clone(),
            mu_map: None,
        })
    }

    /// Condition (P) for `c = {g_i(f)}`, using only the first `rows`
    /// coefficients (`rows = m` gives the full restriction).
    pub fn restricted(g: &FrameSystem, f: &FrameSystem, psi: &FrameSystem, rows: usize) -> Result<Self> {
        g.require_same_spaces(f, "restricted residual")?;
        f.require_same_spaces(psi, "restricted residual")?;
        if rows == 0 || rows > g.len() {
            return Err(FrameError::InvalidArgument(format!("truncation {rows} outside 1..={}", g.len())));
        }
        let gk = g.matrix.rows(0, rows).clone_owned();
        let fk = f.matrix.rows(0, rows).transpose();
        let pk = psi.matrix.rows(0, rows).transpose();
        Ok(Residual {
            form: ResidualForm::Restricted,
            domain: g.space_x,
            target: g.space_x.p,
            original: &fk * &gk,
            perturbed: &pk * &gk,
            mu_map: Some((gk, g.space_xd.p)),
        })
    }

    /// `||S c - S~ c|| <= nu ||c|| + beta1 ||S c|| + beta2 ||S~ c||`.
    pub fn operator(s: &DMatrix<f64>, s_tilde: &DMatrix<f64>, space_xd: SpaceSpec, space_x: SpaceSpec) -> Result<Self> {
        for (name, m) in [("S", s), ("S_tilde", s_tilde)] {
            if m.shape() != (space_x.dim, space_xd.dim) {
                return Err(FrameError::DimensionMismatch {
                    context: format!("{name} must map X_d to X"),
                    expected: space_x.dim * space_xd.dim,
                    found: m.nrows() * m.ncols(),
                });
            }
        }
        Ok(Residual {
            form: ResidualForm::Operator,
            domain: space_xd,
            target: space_x.p,
            original: s.clone(),
            perturbed: s_tilde.clone(),
            mu_map: None,
        })
    }

    fn difference(&self) -> DMatrix<f64> {
        &self.perturbed - &self.original
    }

    fn target_space(&self) -> SpaceSpec {
        SpaceSpec { dim: self.original.nrows(), p: self.target }
    }

    fn terms(&self, lambda1: f64, lambda2: f64) -> Vec<NormTerm> {
        let mut terms = vec![NormTerm::new(1.0, self.difference(), self.target)];
        if lambda1 != 0.0 {
            terms.push(NormTerm::new(-lambda1, self.original.clone(), self.target));
        }
        if lambda2 != 0.0 {
            terms.push(NormTerm::new(-lambda2, self.perturbed.clone(), self.target));
        }
        terms
    }

    fn seeds(&self) -> Vec<DVector<f64>> {
        let diff = self.difference();
        let svd = diff.svd(false, true);
        let mut seeds = Vec::new();
        if let Some(vt) = svd.v_t {
            for row in vt.row_iter() {
                seeds.push(row.transpose());
                seeds.push(-row.transpose());
            }
        }
        onto_sphere(seeds, self.domain.p)
    }

    /// The residual objective on the unit sphere of the domain.
    pub fn objective(&self, k: &PerturbationConstants) -> SphereObjective {
        let mut terms = self.terms(k.lambda1, k.lambda2);
        let mut constant = 0.0;
        match &self.mu_map {
            None => constant = -k.mu,
            Some((m, e)) => {
                if k.mu != 0.0 {
                    terms.push(NormTerm::new(-k.mu, m.clone(), *e));
                }
            }
        }
        SphereObjective::new(Domain::plain(&self.domain), terms, constant)
    }

    /// Residual at a single (not necessarily unit) point.
    pub fn value_at(&self, x: &DVector<f64>, k: &PerturbationConstants) -> f64 {
        self.objective(k).value(x)
    }

    /// Worst-case residual; the condition holds iff this is `<= 0`.
    pub fn worst_case(&self, k: &PerturbationConstants, cfg: &OptimizerConfig) -> Result<f64> {
        if k.lambda1 == 0.0 && k.lambda2 == 0.0 && self.mu_map.is_none() {
            let e = op_norm_with(&self.difference(), &self.domain, &self.target_space(), cfg)?;
            return Ok(e.value - k.mu);
        }
        Ok(maximize(&self.objective(k), cfg, &self.seeds()).value)
    }

    /// Smallest `mu >= 0` for which the condition holds with the given
    /// `lambda1`, `lambda2`.
    pub fn minimal_mu(&self, lambda1: f64, lambda2: f64, cfg: &OptimizerConfig) -> Result<f64> {
        if lambda2 >= 1.0 {
            return Err(FrameError::Lambda2Cap { lambda2 });
        }
        let terms = self.terms(lambda1, lambda2);
        let value = match &self.mu_map {
            None if lambda1 == 0.0 && lambda2 == 0.0 => {
                op_norm_with(&self.difference(), &self.domain, &self.target_space(), cfg)?.value
            }
            None => maximize(&SphereObjective::new(Domain::plain(&self.domain), terms, 0.0), cfg, &self.seeds()).value,
            Some((m, e)) => {
                if linalg::rank(m, 1e-12) < m.ncols() {
                    return Err(FrameError::NotAFrame { lower: 0.0 });
                }
                let obj = SphereObjective::new(Domain::shaped(m.clone(), *e), terms, 0.0);
                maximize(&obj, cfg, &self.seeds()).value
            }
        };
        Ok(value.max(0.0))
    }
}

/// Worst-case residual of condition (P*).
pub fn worst_case_residual(g: &FrameSystem, phi: &FrameSystem, k: &PerturbationConstants) -> Result<f64> {
    Residual::dual_synthesis(g, phi)?.worst_case(k, &OptimizerConfig::default())
}

/// Smallest `mu` making condition (P*) hold with the given `lambda1`, `lambda2`.
pub fn minimal_mu(g: &FrameSystem, phi: &FrameSystem, lambda1: f64, lambda2: f64) -> Result<f64> {
    Residual::dual_synthesis(g, phi)?.minimal_mu(lambda1, lambda2, &OptimizerConfig::default())
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    HypothesisFails,
    BoundViolated,
    /// The computed brackets are too wide to decide.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginStatus {
    Ok,
    Boundary,
    Fails,
}

/// Slack of a strict inequality `lhs < rhs`, as `rhs - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
    pub status: MarginStatus,
}

impl Margin {
    /// Classifies `value` against the strictness threshold `eps`.
    pub fn new(name: &str, value: f64, eps: f64) -> Self {
        let status = if value > eps {
            MarginStatus::Ok
        } else if value >= 0.0 {
            MarginStatus::Boundary
        } else {
            MarginStatus::Fails
        };
        Margin { name: name.to_string(), value, status }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Inconclusive,
    Fail,
}

/// A computed quantity compared with a limit.
///
/// `value` is the best computed estimate; `conservative` is the end of its
/// bracket that a pass must survive. A check fails only when `value` itself
/// is on the wrong side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub conservative: f64,
    pub relation: Relation,
    pub limit: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
}

impl Check {
    pub fn new(name: &str, value: f64, conservative: f64, relation: Relation, limit: f64, tolerance: f64) -> Self {
        let ok = |x: f64| match relation {
            Relation::AtMost => x <= limit + tolerance,
            Relation::AtLeast => x >= limit - tolerance,
        };
        let status = if !ok(value) || value.is_nan() {
            CheckStatus::Fail
        } else if ok(conservative) {
            CheckStatus::Pass
        } else {
            CheckStatus::Inconclusive
        };
        Check { name: name.to_string(), value, conservative, relation, limit, tolerance, status }
    }

    fn exact(name: &str, value: f64, relation: Relation, limit: f64, tolerance: f64) -> Self {
        Check::new(name, value, value, relation, limit, tolerance)
    }

    /// Upper estimate `est` must not exceed `limit`.
    fn upper(name: &str, est: &BoundsEstimate, limit: f64, tol: &Tolerances) -> Self {
        Check::new(name, est.value, est.certified_high, Relation::AtMost, limit, tol.bound(limit))
    }

    /// Lower estimate `est` must reach `limit`.
    fn lower(name: &str, est: &BoundsEstimate, limit: f64, tol: &Tolerances) -> Self {
        Check::new(name, est.value, est.value, Relation::AtLeast, limit, tol.bound(limit))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub form: ResidualForm,
    pub value: f64,
    pub tolerance: f64,
    pub holds: bool,
    /// Residuals of the truncated conditions, first `k` coefficients.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub truncations: Vec<f64>,
}

impl ResidualCheck {
    fn new(form: ResidualForm, value: f64, tol: f64) -> Self {
        ResidualCheck { form, value, tolerance: tol, holds: value <= tol, truncations: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    #[serde(with = "crate::linalg::rows")]
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: TheoremId,
    pub constants: PerturbationConstants,
    pub residual: ResidualCheck,
    pub hypothesis_holds: bool,
    pub margins: Vec<Margin>,
    pub delta: f64,
    pub predicted_lower: f64,
    pub predicted_upper: f64,
    /// Bounds of the unperturbed object (`A`, `B`, norms of `S`, `P`, ...).
    pub reference: BTreeMap<String, f64>,
    pub actual_lower: Option<BoundsEstimate>,
    pub actual_upper: Option<BoundsEstimate>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<NamedMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub invertibility: Option<InvertibilityCertificate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sub_reports: Vec<TheoremReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl TheoremReport {
    fn new(theorem_id: TheoremId, constants: PerturbationConstants, residual: ResidualCheck) -> Self {
        TheoremReport {
            theorem_id,
            constants,
            residual,
            hypothesis_holds: false,
            margins: Vec::new(),
            delta: 0.0,
            predicted_lower: 0.0,
            predicted_upper: 0.0,
            reference: BTreeMap::new(),
            actual_lower: None,
            actual_upper: None,
            checks: Vec::new(),
            verdict: Verdict::HypothesisFails,
            witness: None,
            invertibility: None,
            sub_reports: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn margin(&mut self, name: &str, value: f64, opts: &VerifyOptions) {
        self.margins.push(Margin::new(name, value, opts.tolerances.hypothesis));
    }

    fn delta_cap(&mut self, opts: &VerifyOptions) {
        if let Some(eps) = opts.max_delta {
            let d = self.delta;
            self.margin("delta < max_delta", eps - d, opts);
        }
    }

    fn compare_bounds(&mut self, tol: &Tolerances) {
        if let Some(lower) = &self.actual_lower {
            let c = Check::lower("actual lower >= predicted lower", lower, self.predicted_lower, tol);
            self.checks.insert(0, c);
        }
        if let Some(upper) = &self.actual_upper {
            let c = Check::upper("actual upper <= predicted upper", upper, self.predicted_upper, tol);
            let at = usize::from(self.actual_lower.is_some());
            self.checks.insert(at, c);
        }
    }

    fn finish(mut self) -> Self {
        self.hypothesis_holds = self.residual.holds && self.margins.iter().all(|m| m.status == MarginStatus::Ok);
        self.verdict = if !self.hypothesis_holds {
            Verdict::HypothesisFails
        } else if self.checks.iter().any(|c| c.status == CheckStatus::Fail) {
            Verdict::BoundViolated
        } else if self.checks.iter().any(|c| c.status == CheckStatus::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Verified
        };
        self
    }
}

fn reference(report: &mut TheoremReport, name: &str, value: f64) {
    report.reference.insert(name.to_string(), value);
}

// ---------------------------------------------------------------------------
// Theorems

/// Upper bound of a Bessel sequence under condition (P*):
/// `B~ = B + Delta`, and the differences form a Bessel sequence with bound
/// `Delta`.
pub fn verify_bessel_perturbation(
    g: &FrameSystem,
    phi: &FrameSystem,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    let residual = Residual::dual_synthesis(g, phi)?;
    let b_est = bessel_bound_with(g, cfg)?;
    let b = b_est.certified_high;
    let d = delta(b, k)?;
    let r = residual.worst_case(k, cfg)?;
    let mut report = TheoremReport::new(TheoremId::Bessel, *k, ResidualCheck::new(residual.form, r, tol.residual));
    reference(&mut report, "B", b);
    report.delta = d;
    report.margin("lambda2 < 1", 1.0 - k.lambda2, opts);
    report.delta_cap(opts);
    report.predicted_upper = b + d;
    report.actual_upper = Some(bessel_bound_with(phi, cfg)?);
    let diff = bessel_bound_with(&g.difference(phi)?, cfg)?;
    report.checks.push(Check::upper("difference bound <= delta", &diff, d, tol));
    report.compare_bounds(tol);
    Ok(report.finish())
}

fn frame_reference(g: &FrameSystem, cfg: &OptimizerConfig) -> Result<(f64, f64)> {
    let (a, b) = frame_bounds_with(g, cfg)?;
    if a.value <= 0.0 {
        return Err(FrameError::NotAFrame { lower: a.value });
    }
    Ok((a.value, b.certified_high))
}

/// Frame bounds under condition (P*) with `mu + lambda2 (A + B) + lambda1 B < A`:
/// `[A - Delta, B + Delta]`.
pub fn verify_frame_perturbation(
    g: &FrameSystem,
    phi: &FrameSystem,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    let residual = Residual::dual_synthesis(g, phi)?;
    let (a, b) = frame_reference(g, cfg)?;
    let d = delta(b, k)?;
    let r = residual.worst_case(k, cfg)?;
    let mut report = TheoremReport::new(TheoremId::Frame, *k, ResidualCheck::new(residual.form, r, tol.residual));
    reference(&mut report, "A", a);
    reference(&mut report, "B", b);
    report.delta = d;
    report.margin(
        "mu + lambda2 (A + B) + lambda1 B < A",
        a - k.mu - k.lambda2 * (a + b) - k.lambda1 * b,
        opts,
    );
    report.delta_cap(opts);
    report.predicted_lower = a - d;
    report.predicted_upper = b + d;
    let (al, au) = frame_bounds_with(phi, cfg)?;
    report.actual_lower = Some(al);
    report.actual_upper = Some(au);
    report.compare_bounds(tol);
    Ok(report.finish())
}

fn check_left_inverse(s: &DMatrix<f64>, g: &FrameSystem, tol: f64) -> Result<()> {
    if s.shape() != (g.dim(), g.len()) {
        return Err(FrameError::DimensionMismatch {
            context: "S must be n x m".into(),
            expected: g.dim() * g.len(),
            found: s.nrows() * s.ncols(),
        });
    }
    linalg::check_finite(s, "S")?;
    let dev = identity_deviation(&(s * &g.matrix));
    if dev > tol {
        return Err(FrameError::NotLeftInverse { deviation: dev });
    }
    Ok(())
}

/// Banach frame perturbation under (P*) with
/// `max(lambda2, lambda1 + mu ||S||) < 1`.
///
/// With `s = None` the pseudo-inverse of the analysis map is used. With an
/// explicit `S`, the pseudo-inverse variant is attached as a sub-report.
pub fn verify_banach_frame_perturbation(
    g: &FrameSystem,
    phi: &FrameSystem,
    s: Option<&DMatrix<f64>>,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let pinv = linalg::pinv(&g.matrix)?;
    match s {
        None => banach_frame_report(g, phi, &pinv, true, k, opts),
        Some(s) => {
            let mut report = banach_frame_report(g, phi, s, false, k, opts)?;
            let alt = banach_frame_report(g, phi, &pinv, true, k, opts)?;
            report.notes.push("sub-report: same perturbation with the pseudo-inverse as S".into());
            report.sub_reports.push(alt);
            Ok(report)
        }
    }
}

fn banach_frame_report(
    g: &FrameSystem,
    phi: &FrameSystem,
    s: &DMatrix<f64>,
    is_pinv: bool,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    check_left_inverse(s, g, tol.identity)?;
    let residual = Residual::dual_synthesis(g, phi)?;
    let b = bessel_bound_with(g, cfg)?.certified_high;
    let s_norm = op_norm_with(s, &g.space_xd, &g.space_x, cfg)?.certified_high;
    let d = delta(b, k)?;
    let r = residual.worst_case(k, cfg)?;
    let mut report =
        TheoremReport::new(TheoremId::BanachFrame, *k, ResidualCheck::new(residual.form, r, tol.residual));
    reference(&mut report, "B", b);
    reference(&mut report, "norm_S", s_norm);
    report.delta = d;
    let rho = k.mu * s_norm + k.lambda1;
    report.margin("lambda2 < 1", 1.0 - k.lambda2, opts);
    report.margin("lambda1 + mu ||S|| < 1", 1.0 - rho, opts);
    report.delta_cap(opts);
    report.predicted_lower = (1.0 - rho) / ((1.0 + k.lambda2) * s_norm);
    report.predicted_upper = b + d;
    let (al, au) = frame_bounds_with(phi, cfg)?;
    report.actual_lower = Some(al);
    report.actual_upper = Some(au);
    report.notes.push(if is_pinv { "S = pseudo-inverse of the analysis map" } else { "S supplied" }.into());

    // Reconstruction witness S~ = (S Phi)^{-1} S.
    let w = s * &phi.matrix;
    match linalg::inverse(&w, "S Phi") {
        Ok(w_inv) => {
            let s_tilde = &w_inv * s;
            let dev = identity_deviation(&(&s_tilde * &phi.matrix));
            report.checks.push(Check::exact("S~ Phi = I", dev, Relation::AtMost, 0.0, tol.reconstruction));
            if rho < 1.0 {
                let inv_norm = op_norm_with(&w_inv, &g.space_x, &g.space_x, cfg)?;
                let limit = (1.0 + k.lambda2) / (1.0 - rho);
                report.checks.push(Check::upper("||(S Phi)^-1|| <= (1 + lambda2)/(1 - rho)", &inv_norm, limit, tol));
            }
            report.witness = Some(NamedMatrix { name: "S_tilde".into(), matrix: s_tilde });
        }
        Err(_) => {
            report.checks.push(Check::exact("S Phi invertible", 0.0, Relation::AtLeast, 1.0, 0.0));
        }
    }

    if is_pinv && g.space_x.p.is_two() && g.space_xd.p.is_two() && rho < 1.0 && k.lambda2 < 1.0 {
        let a_h = linalg::sigma_min(&g.matrix).powi(2);
        let b_h = linalg::sigma_max(&g.matrix).powi(2);
        if let Ok((hl, hu)) = hilbert_bounds(a_h, b_h, k) {
            let l2 = report.predicted_lower.powi(2);
            let u2 = report.predicted_upper.powi(2);
            report.reference.insert("hilbert_lower".into(), hl);
            report.reference.insert("hilbert_upper".into(), hu);
            report.checks.push(Check::exact(
                "squared lower = Hilbert lower",
                (l2 - hl).abs(),
                Relation::AtMost,
                0.0,
                1e-10 * hl.abs().max(1e-300),
            ));
            report.checks.push(Check::exact(
                "squared upper = Hilbert upper",
                (u2 - hu).abs(),
                Relation::AtMost,
                0.0,
                1e-10 * hu.abs().max(1e-300),
            ));
        }
    }
    report.compare_bounds(tol);
    Ok(report.finish())
}

/// Banach frame perturbation through a bounded projection `P` of `X_d` onto
/// the range of the analysis map, with `S = U^{-1} P`.
pub fn verify_banach_frame_projection(
    g: &FrameSystem,
    phi: &FrameSystem,
    p: &DMatrix<f64>,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    let m = g.len();
    if p.shape() != (m, m) {
        return Err(FrameError::NotProjection { reason: format!("P must be {m}x{m}, got {}x{}", p.nrows(), p.ncols()) });
    }
    linalg::check_finite(p, "P")?;
    let scale = linalg::max_abs(p).max(1.0);
    let idem = linalg::max_abs(&(p * p - p));
    if idem > tol.identity * scale {
        return Err(FrameError::NotProjection { reason: format!("P^2 != P (max deviation {idem:e})") });
    }
    let fix = linalg::max_abs(&(p * &g.matrix - &g.matrix));
    if fix > tol.identity * scale * linalg::max_abs(&g.matrix).max(1.0) {
        return Err(FrameError::NotProjection { reason: format!("P does not fix the range (deviation {fix:e})") });
    }
    if linalg::rank(p, 1e-10) != g.dim() {
        return Err(FrameError::NotProjection { reason: "range of P differs from the range of the analysis map".into() });
    }
    let (a, b) = frame_reference(g, cfg)?;
    let p_norm = op_norm_with(p, &g.space_xd, &g.space_xd, cfg)?.certified_high;
    let s = linalg::pinv(&g.matrix)? * p;
    let sub = banach_frame_report(g, phi, &s, false, k, opts)?;

    let mut report = TheoremReport::new(TheoremId::BanachFrameProjection, *k, sub.residual.clone());
    reference(&mut report, "A", a);
    reference(&mut report, "B", b);
    reference(&mut report, "norm_P", p_norm);
    report.delta = sub.delta;
    let rho = k.mu * p_norm / a + k.lambda1;
    report.margin("lambda2 < 1", 1.0 - k.lambda2, opts);
    report.margin("lambda1 + mu ||P|| / A < 1", 1.0 - rho, opts);
    report.delta_cap(opts);
    report.predicted_lower = (a / p_norm) * (1.0 - rho) / (1.0 + k.lambda2);
    report.predicted_upper = b + report.delta;
    report.actual_lower = sub.actual_lower.clone();
    report.actual_upper = sub.actual_upper.clone();
    let s_norm = sub.reference.get("norm_S").copied().unwrap_or(f64::NAN);
    report.checks.push(Check::exact("||S|| <= ||P|| / A", s_norm, Relation::AtMost, p_norm / a, tol.bound(p_norm / a)));
    if sub.hypothesis_holds {
        report.checks.push(Check::exact(
            "theorem lower >= corollary lower",
            sub.predicted_lower,
            Relation::AtLeast,
            report.predicted_lower,
            tol.bound(report.predicted_lower),
        ));
    }
    report.checks.extend(sub.checks.iter().filter(|c| c.name.starts_with("S")).cloned());
    report.witness = sub.witness.clone();
    report.sub_reports.push(sub);
    report.compare_bounds(tol);
    Ok(report.finish())
}

/// Riesz basis perturbation under (P) with `max(lambda2, lambda1 + mu/A) < 1`:
/// `A~ = A - (A (lambda1 + lambda2) + mu)/(1 + lambda2)`, `B~ = B + Delta`.
pub fn verify_riesz_perturbation(
    f: &FrameSystem,
    psi: &FrameSystem,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    let residual = Residual::synthesis(f, psi)?;
    if f.len() != f.dim() {
        return Err(FrameError::NotRieszBasis { reason: format!("{} elements in dimension {}", f.len(), f.dim()) });
    }
    let rb = riesz_bounds_with(f, cfg)?;
    if !rb.complete {
        return Err(FrameError::NotRieszBasis { reason: "family is not complete".into() });
    }
    if rb.lower.value <= 0.0 {
        return Err(FrameError::NotRieszBasis { reason: "lower Riesz bound is zero".into() });
    }
    let a = rb.lower.value;
    let b = rb.upper.certified_high;
    let d = delta(b, k)?;
    let r = residual.worst_case(k, cfg)?;
    let mut report = TheoremReport::new(TheoremId::Riesz, *k, ResidualCheck::new(residual.form, r, tol.residual));
    reference(&mut report, "A", a);
    reference(&mut report, "B", b);
    report.delta = d;
    report.margin("lambda2 < 1", 1.0 - k.lambda2, opts);
    report.margin("lambda1 + mu / A < 1", 1.0 - (k.lambda1 + k.mu / a), opts);
    report.delta_cap(opts);
    report.predicted_lower = a - (a * (k.lambda1 + k.lambda2) + k.mu) / (1.0 + k.lambda2);
    report.predicted_upper = b + d;
    report.checks.push(Check::exact(
        "refined lower >= A - Delta",
        report.predicted_lower,
        Relation::AtLeast,
        a - d,
        1e-12 * a.max(1.0),
    ));
    let rp = riesz_bounds_with(psi, cfg)?;
    report.checks.push(Check::exact(
        "perturbed family complete",
        if rp.complete { 1.0 } else { 0.0 },
        Relation::AtLeast,
        1.0,
        0.0,
    ));
    report.actual_lower = Some(rp.lower);
    report.actual_upper = Some(rp.upper);
    if f.space_x.p.is_two() && f.space_xd.p.is_two() && k.lambda1 + k.mu / a < 1.0 {
        if let Ok((hl, hu)) = hilbert_bounds(a * a, b * b, k) {
            let l2 = report.predicted_lower.powi(2);
            let u2 = report.predicted_upper.powi(2);
            report.reference.insert("hilbert_lower".into(), hl);
            report.reference.insert("hilbert_upper".into(), hu);
            report.checks.push(Check::exact("squared lower = Hilbert lower", (l2 - hl).abs(), Relation::AtMost, 0.0, 1e-10 * hl.max(1e-300)));
            report.checks.push(Check::exact("squared upper = Hilbert upper", (u2 - hu).abs(), Relation::AtMost, 0.0, 1e-10 * hu.max(1e-300)));
        }
    }
    report.compare_bounds(tol);
    Ok(report.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomicMode {
    /// The condition for all `c = {g_i(f)}`.
    #[serde(rename = "full_A9")]
    Full,
    /// The condition for every truncation `{g_i(f)}_{i <= k}`.
    #[serde(rename = "truncated_A10")]
    Truncated,
}

/// Atomic decomposition perturbation: under the restricted condition with
/// `max(lambda2, lambda1 + mu B) < 1`, the functionals
/// `theta_i = g_i o G^{-1}` with `G f = sum g_i(f) psi_i` reconstruct with
/// `psi` and have bounds
/// `[A (1 - lambda2)/(1 + lambda1 + mu B), B (1 + lambda2)/(1 - (lambda1 + mu B))]`.
pub fn verify_atomic_decomposition_perturbation(
    g: &FrameSystem,
    f: &FrameSystem,
    psi: &FrameSystem,
    k: &PerturbationConstants,
    mode: AtomicMode,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    g.require_same_spaces(f, "atomic decomposition")?;
    f.require_same_spaces(psi, "atomic decomposition")?;
    let dev = identity_deviation(&(f.synthesis() * &g.matrix));
    if dev > tol.identity {
        return Err(FrameError::ReconstructionFailed { deviation: dev });
    }
    let (a, b) = frame_reference(g, cfg)?;
    let d = delta(b, k)?;
    let m = g.len();
    let full = Residual::restricted(g, f, psi, m)?;
    let r = full.worst_case(k, cfg)?;
    let id = match mode {
        AtomicMode::Full => TheoremId::Atomic,
        AtomicMode::Truncated => TheoremId::AtomicTruncated,
    };
    let mut check = ResidualCheck::new(full.form, r, tol.residual);
    if mode == AtomicMode::Truncated {
        for rows in 1..=m {
            let rr = if rows == m { r } else { Residual::restricted(g, f, psi, rows)?.worst_case(k, cfg)? };
            check.truncations.push(rr);
        }
        let worst = check.truncations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        check.value = worst;
        check.holds = worst <= tol.residual;
    }
    let mut report = TheoremReport::new(id, *k, check);
    reference(&mut report, "A", a);
    reference(&mut report, "B", b);
    report.delta = d;
    let rho = k.lambda1 + k.mu * b;
    report.margin("lambda2 < 1", 1.0 - k.lambda2, opts);
    report.margin("lambda1 + mu B < 1", 1.0 - rho, opts);
    report.delta_cap(opts);
    report.predicted_lower = a * (1.0 - k.lambda2) / (1.0 + rho);
    report.predicted_upper = b * (1.0 + k.lambda2) / (1.0 - rho);

    let g_op = psi.synthesis() * &g.matrix;
    report.invertibility = check_neumann_invertibility_with(&g_op, &g.space_x, cfg)?;
    match linalg::inverse(&g_op, "G_op") {
        Ok(g_inv) => {
            let theta = &g.matrix * &g_inv;
            let recon = psi.synthesis() * &theta;
            report.checks.push(Check::exact(
                "sum theta_i(f) psi_i = f",
                identity_deviation(&recon),
                Relation::AtMost,
                0.0,
                tol.reconstruction,
            ));
            let worst = random_reconstruction_error(&recon, g.space_x.p, 100, cfg.seed);
            report.checks.push(Check::exact(
                "relative error on 100 random f",
                worst,
                Relation::AtMost,
                0.0,
                tol.reconstruction,
            ));
            if rho < 1.0 && k.lambda2 < 1.0 {
                let inv_norm = op_norm_with(&g_inv, &g.space_x, &g.space_x, cfg)?;
                let limit = (1.0 + k.lambda2) / (1.0 - rho);
                report.checks.push(Check::upper("||G_op^-1|| <= (1 + lambda2)/(1 - rho)", &inv_norm, limit, tol));
            }
            let theta_sys = g.with_matrix(theta.clone())?;
            let (tl, tu) = frame_bounds_with(&theta_sys, cfg)?;
            report.actual_lower = Some(tl);
            report.actual_upper = Some(tu);
            report.witness = Some(NamedMatrix { name: "Theta".into(), matrix: theta });
        }
        Err(_) => {
            report.checks.push(Check::exact("G_op invertible", 0.0, Relation::AtLeast, 1.0, 0.0));
        }
    }
    report.compare_bounds(tol);
    Ok(report.finish())
}

/// Largest `||f - R f|| / ||f||` over deterministic Gaussian samples.
pub fn random_reconstruction_error(r: &DMatrix<f64>, p: Exponent, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7265_636f);
    let n = r.ncols();
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let x = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let nx = p.norm(x.as_slice());
        if nx > 0.0 {
            worst = worst.max(p.norm((&x - r * &x).as_slice()) / nx);
        }
    }
    worst
}

/// Perturbation of the reconstruction operator of a Banach frame `(G, S)`:
/// with `||S c - S~ c|| <= nu ||c|| + beta1 ||S c|| + beta2 ||S~ c||` and
/// `max(beta2, beta1 + nu B) < 1`, `Theta = G (S~ G)^{-1}` gives a Banach
/// frame `(Theta, S~)` with bounds
/// `[A (1 - beta2)/(1 + beta1 + nu B), B (1 + beta2)/(1 - (beta1 + nu B))]`.
pub fn verify_operator_perturbation(
    g: &FrameSystem,
    s: &DMatrix<f64>,
    s_tilde: &DMatrix<f64>,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    check_left_inverse(s, g, tol.identity)?;
    linalg::check_finite(s_tilde, "S_tilde")?;
    let residual = Residual::operator(s, s_tilde, g.space_xd, g.space_x)?;
    let (a, b) = frame_reference(g, cfg)?;
    let k = k.with_role(ConstantsRole::Operator);
    let d = delta(b, &k)?;
    let r = residual.worst_case(&k, cfg)?;
    let mut report = TheoremReport::new(TheoremId::Operator, k, ResidualCheck::new(residual.form, r, tol.residual));
    reference(&mut report, "A", a);
    reference(&mut report, "B", b);
    report.delta = d;
    let rho = k.lambda1 + k.mu * b;
    report.margin("beta2 < 1", 1.0 - k.lambda2, opts);
    report.margin("beta1 + nu B < 1", 1.0 - rho, opts);
    report.delta_cap(opts);
    report.predicted_lower = a * (1.0 - k.lambda2) / (1.0 + rho);
    report.predicted_upper = b * (1.0 + k.lambda2) / (1.0 - rho);
    match linalg::inverse(&(s_tilde * &g.matrix), "S~ G") {
        Ok(w_inv) => {
            let theta = &g.matrix * &w_inv;
            report.checks.push(Check::exact(
                "S~ Theta = I",
                identity_deviation(&(s_tilde * &theta)),
                Relation::AtMost,
                0.0,
                tol.reconstruction,
            ));
            let (tl, tu) = frame_bounds_with(&g.with_matrix(theta.clone())?, cfg)?;
            report.actual_lower = Some(tl);
            report.actual_upper = Some(tu);
            report.witness = Some(NamedMatrix { name: "Theta".into(), matrix: theta });
        }
        Err(_) => report.checks.push(Check::exact("S~ G invertible", 0.0, Relation::AtLeast, 1.0, 0.0)),
    }
    report.compare_bounds(tol);
    Ok(report.finish())
}

/// Hilbert-space bounds for squared frame bounds `A, B`:
/// `(A (1 - (l1 + l2 + mu/sqrt A)/(1 + l2))^2, B (1 + (l1 + l2 + mu/sqrt B)/(1 - l2))^2)`.
pub fn hilbert_bounds(a: f64, b: f64, k: &PerturbationConstants) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(FrameError::InvalidArgument(format!("bounds must be positive, got A = {a}, B = {b}")));
    }
    let cap = (k.lambda1 + k.mu / a.sqrt()).max(k.lambda2);
    if cap >= 1.0 {
        return Err(FrameError::HypothesisFailed(format!("max(lambda1 + mu/sqrt(A), lambda2) = {cap} >= 1")));
    }
    let lower = a * (1.0 - (k.lambda1 + k.lambda2 + k.mu / a.sqrt()) / (1.0 + k.lambda2)).powi(2);
    let upper = b * (1.0 + (k.lambda1 + k.lambda2 + k.mu / b.sqrt()) / (1.0 - k.lambda2)).powi(2);
    Ok((lower, upper))
}

fn squared(e: &BoundsEstimate) -> BoundsEstimate {
    BoundsEstimate {
        value: e.value * e.value,
        certified_low: e.certified_low * e.certified_low,
        certified_high: e.certified_high * e.certified_high,
        method: format!("{} (squared)", e.method),
        ..e.clone()
    }
}

/// The Hilbert-space theorem for `p = q = 2`, in squared-bound convention.
pub fn verify_hilbert(
    g: &FrameSystem,
    phi: &FrameSystem,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<TheoremReport> {
    let cfg = &opts.optimizer;
    let tol = &opts.tolerances;
    if !(g.space_x.p.is_two() && g.space_xd.p.is_two()) {
        return Err(FrameError::InvalidArgument("the Hilbert-space theorem needs p = q = 2".into()));
    }
    let residual = Residual::dual_synthesis(g, phi)?;
    let sa = linalg::sigma_min(&g.matrix);
    let sb = linalg::sigma_max(&g.matrix);
    if sa <= 0.0 || linalg::rank(&g.matrix, 1e-12) < g.dim() {
        return Err(FrameError::NotAFrame { lower: 0.0 });
    }
    let d = delta(sb, k)?;
    let r = residual.worst_case(k, cfg)?;
    let mut report = TheoremReport::new(TheoremId::Hilbert, *k, ResidualCheck::new(residual.form, r, tol.residual));
    reference(&mut report, "A", sa * sa);
    reference(&mut report, "B", sb * sb);
    report.delta = d;
    report.margin("lambda2 < 1", 1.0 - k.lambda2, opts);
    report.margin("lambda1 + mu / sqrt(A) < 1", 1.0 - (k.lambda1 + k.mu / sa), opts);
    report.delta_cap(opts);
    match hilbert_bounds(sa * sa, sb * sb, k) {
        Ok((l, u)) => {
            report.predicted_lower = l;
            report.predicted_upper = u;
        }
        Err(_) => {
            report.predicted_lower = 0.0;
            report.predicted_upper = f64::MAX;
        }
    }
    let (al, au) = frame_bounds_with(phi, cfg)?;
    report.actual_lower = Some(squared(&al));
    report.actual_upper = Some(squared(&au));
    report.compare_bounds(tol);
    Ok(report.finish())
}

/// Lower bound of a frame in `X_d` computed for convenience in reports.
pub fn analysis_lower(g: &FrameSystem, cfg: &OptimizerConfig) -> Result<BoundsEstimate> {
    lower_bound_with(&g.matrix, &g.space_x, &g.space_xd, cfg)
}
