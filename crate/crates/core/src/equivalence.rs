//! Closeness conditions between two families, translations of their
//! constants, and implication checks with explicit constant witnesses.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::linalg;
use crate::operators::{bessel_bound_with, lower_bound_with, op_norm_with, BoundsEstimate, FrameSystem};
use crate::perturbation::{
    delta, Check, CheckStatus, ConstantsRole, Margin, MarginStatus, PerturbationConstants, Relation, Residual, ResidualForm,
    Verdict, VerifyOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    A1,
    A11,
    A12,
    A13,
    A3,
    A3a,
    A3b,
    A3c,
    A6,
    A6tilde,
    A8,
    A8tilde,
    A9,
    A9tilde,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl ConditionId {
    pub const ALL: [ConditionId; 14] = [
        ConditionId::A1,
        ConditionId::A11,
        ConditionId::A12,
        ConditionId::A13,
        ConditionId::A3,
        ConditionId::A3a,
        ConditionId::A3b,
        ConditionId::A3c,
        ConditionId::A6,
        ConditionId::A6tilde,
        ConditionId::A8,
        ConditionId::A8tilde,
        ConditionId::A9,
        ConditionId::A9tilde,
    ];

    pub fn form(self) -> ResidualForm {
        use ConditionId::*;
        match self {
            A1 | A11 | A3 | A3a | A8 | A8tilde => ResidualForm::Synthesis,
            A12 | A13 | A3b | A3c => ResidualForm::Coefficient,
            A6 | A6tilde => ResidualForm::DualSynthesis,
            A9 | A9tilde => ResidualForm::Restricted,
        }
    }

    /// Conditions carrying a single constant `mu~`.
    pub fn is_single_constant(self) -> bool {
        matches!(self, ConditionId::A11 | ConditionId::A12 | ConditionId::A3a | ConditionId::A3b)
    }

    /// The constants of `self` restricted to the shape the condition allows.
    fn admits(self, k: &PerturbationConstants) -> bool {
        use ConditionId::*;
        match self {
            A11 | A12 | A3a | A3b => k.lambda1 == 0.0 && k.lambda2 == 0.0,
            A6tilde | A8tilde => k.lambda1 == 0.0,
            A9tilde => k.mu == 0.0,
            _ => true,
        }
    }
}

/// The families a condition is evaluated on. Synthesis and coefficient forms
/// use `f`, `psi`; the dual synthesis form uses `g`, `phi`; the restricted
/// form uses `g`, `f`, `psi`.
#[derive(Debug, Clone, Default)]
pub struct ConditionInstance {
    pub g: Option<FrameSystem>,
    pub phi: Option<FrameSystem>,
    pub f: Option<FrameSystem>,
    pub psi: Option<FrameSystem>,
    /// Reconstruction operator for the conditions involving `||S||`;
    /// defaults to the pseudo-inverse of the analysis map of `g`.
    pub s: Option<DMatrix<f64>>,
}

impl ConditionInstance {
    pub fn vectors(f: FrameSystem, psi: FrameSystem) -> Self {
        ConditionInstance { f: Some(f), psi: Some(psi), ..Default::default() }
    }

    pub fn functionals(g: FrameSystem, phi: FrameSystem) -> Self {
        ConditionInstance { g: Some(g), phi: Some(phi), ..Default::default() }
    }

    pub fn decomposition(g: FrameSystem, f: FrameSystem, psi: FrameSystem) -> Self {
        ConditionInstance { g: Some(g), f: Some(f), psi: Some(psi), ..Default::default() }
    }

    fn need<'a>(slot: &'a Option<FrameSystem>, name: &str, cond: ConditionId) -> Result<&'a FrameSystem> {
        slot.as_ref()
            .ok_or_else(|| FrameError::InvalidArgument(format!("condition {cond} needs the family {name}")))
    }

    fn residual(&self, cond: ConditionId) -> Result<Residual> {
        match cond.form() {
            ResidualForm::Synthesis => {
                Residual::synthesis(Self::need(&self.f, "F", cond)?, Self::need(&self.psi, "Psi", cond)?)
            }
            ResidualForm::Coefficient => {
                Residual::coefficient(Self::need(&self.f, "F", cond)?, Self::need(&self.psi, "Psi", cond)?)
            }
            ResidualForm::DualSynthesis => {
                Residual::dual_synthesis(Self::need(&self.g, "G", cond)?, Self::need(&self.phi, "Phi", cond)?)
            }
            ResidualForm::Restricted => {
                let g = Self::need(&self.g, "G", cond)?;
                Residual::restricted(g, Self::need(&self.f, "F", cond)?, Self::need(&self.psi, "Psi", cond)?, g.len())
            }
            ResidualForm::Operator => unreachable!("no condition uses the operator form"),
        }
    }
}

/// Bounds of the vectors `f_i` as a frame for the dual of `X` with values
/// in the dual of `X_d`, i.e. of `g -> {g(f_i)}`.
pub fn dual_frame_bounds(f: &FrameSystem, opts: &VerifyOptions) -> Result<(BoundsEstimate, BoundsEstimate)> {
    let from = f.space_x.dual();
    let to = f.space_xd.dual();
    Ok((
        lower_bound_with(&f.matrix, &from, &to, &opts.optimizer)?,
        op_norm_with(&f.matrix, &from, &to, &opts.optimizer)?,
    ))
}

/// Translates constants of `from` into constants of `to`. `b` is the upper
/// bound entering the formula: the Bessel bound of `f` (as synthesis) for
/// `A1`, `A13`, `A8`, of `g` for `A6`, `A9`.
pub fn translate_constants(
    from: ConditionId,
    to: ConditionId,
    k: &PerturbationConstants,
    b: f64,
) -> Result<PerturbationConstants> {
    use ConditionId::*;
    let out = match (from, to) {
        (A1, A11) | (A13, A12) => PerturbationConstants::new(delta(b, k)?, 0.0, 0.0)?,
        (A6, A6tilde) | (A8, A8tilde) => PerturbationConstants::new(k.mu + k.lambda1 * b, 0.0, k.lambda2)?,
        (A9, A9tilde) => PerturbationConstants::new(0.0, k.lambda1 + k.mu * b, k.lambda2)?,
        _ => return Err(FrameError::UnsupportedTranslation { from: from.to_string(), to: to.to_string() }),
    };
    Ok(out.with_role(ConstantsRole::Translated))
}

/// Residual and strict inequalities of one condition with given constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: ConditionId,
    pub constants: PerturbationConstants,
    pub form: ResidualForm,
    pub residual: f64,
    pub tolerance: f64,
    pub residual_holds: bool,
    pub margins: Vec<Margin>,
    pub holds: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// The quantities `A`, `B`, `||S||` the hypotheses refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionBounds {
    pub lower: Option<f64>,
    pub upper: f64,
    pub norm_s: Option<f64>,
}

fn reconstruction_operator(inst: &ConditionInstance, g: &FrameSystem, opts: &VerifyOptions) -> Result<DMatrix<f64>> {
    let s = match &inst.s {
        Some(s) => s.clone(),
        None => linalg::pinv(&g.matrix)?,
    };
    if s.shape() != (g.dim(), g.len()) {
        return Err(FrameError::DimensionMismatch {
            context: "S must be n x m".into(),
            expected: g.dim() * g.len(),
            found: s.len(),
        });
    }
    let dev = linalg::identity_deviation(&(&s * &g.matrix));
    if dev > opts.tolerances.identity {
        return Err(FrameError::NotLeftInverse { deviation: dev });
    }
    Ok(s)
}

fn bounds_for(inst: &ConditionInstance, cond: ConditionId, opts: &VerifyOptions) -> Result<ConditionBounds> {
    use ConditionId::*;
    let cfg = &opts.optimizer;
    match cond {
        A6 | A6tilde => {
            let g = ConditionInstance::need(&inst.g, "G", cond)?;
            let s = reconstruction_operator(inst, g, opts)?;
            let norm_s = op_norm_with(&s, &g.space_xd, &g.space_x, cfg)?.certified_high;
            Ok(ConditionBounds { lower: None, upper: bessel_bound_with(g, cfg)?.certified_high, norm_s: Some(norm_s) })
        }
        A9 | A9tilde => {
            let g = ConditionInstance::need(&inst.g, "G", cond)?;
            Ok(ConditionBounds { lower: None, upper: bessel_bound_with(g, cfg)?.certified_high, norm_s: None })
        }
        _ => {
            let f = ConditionInstance::need(&inst.f, "F", cond)?;
            let (a, b) = dual_frame_bounds(f, opts)?;
            Ok(ConditionBounds { lower: Some(a.value), upper: b.certified_high, norm_s: None })
        }
    }
}

fn margins_for(
    cond: ConditionId,
    k: &PerturbationConstants,
    bounds: &ConditionBounds,
    eps: f64,
    notes: &mut Vec<String>,
) -> Vec<Margin> {
    use ConditionId::*;
    let (mu, l1, l2) = (k.mu, k.lambda1, k.lambda2);
    let b = bounds.upper;
    let a = bounds.lower.unwrap_or(0.0);
    let mut out = Vec::new();
    let mut push = |name: &str, v: f64| out.push(Margin::new(name, v, eps));
    match cond {
        A1 | A13 => push("lambda2 < 1", 1.0 - l2),
        A11 | A12 => {}
        A3 => push("mu + lambda2 (A + B) + lambda1 B < A", a - mu - l2 * (a + b) - l1 * b),
        A3a | A3b => push("mu~ < A", a - mu),
        A3c => {
            push("mu + lambda2 (A + B) + lambda1 B < A", a - mu - l2 * (a + b) - l1 * b);
            push("lambda2 > 0", l2);
            if l2 == 0.0 {
                notes.push("lambda2 = 0 lies outside condition A3c, which requires lambda2 > 0".into());
            }
        }
        A6 => {
            let s = bounds.norm_s.unwrap_or(f64::NAN);
            push("lambda2 < 1", 1.0 - l2);
            push("lambda1 + mu ||S|| < 1", 1.0 - (l1 + mu * s));
        }
        A6tilde => {
            push("lambda2~ < 1", 1.0 - l2);
            push("mu~ / B < 1", 1.0 - mu / b);
        }
        A8 => {
            push("lambda2 < 1", 1.0 - l2);
            push("lambda1 + mu / A < 1", 1.0 - (l1 + mu / a));
        }
        A8tilde => {
            push("lambda2~ < 1", 1.0 - l2);
            push("mu~ / A < 1", 1.0 - mu / a);
        }
        A9 => {
            push("lambda2 < 1", 1.0 - l2);
            push("lambda1 + mu B < 1", 1.0 - (l1 + mu * b));
        }
        A9tilde => {
            push("lambda1~ < 1", 1.0 - l1);
            push("lambda2~ < 1", 1.0 - l2);
        }
    }
    out
}

/// Evaluates one condition on an instance.
pub fn check_condition(
    inst: &ConditionInstance,
    cond: ConditionId,
    k: &PerturbationConstants,
    opts: &VerifyOptions,
) -> Result<ConditionCheck> {
    if !cond.admits(k) {
        return Err(FrameError::InvalidArgument(format!(
            "condition {cond} does not take constants (mu {}, lambda1 {}, lambda2 {})",
            k.mu, k.lambda1, k.lambda2
        )));
    }
    if k.lambda2 >= 1.0 {
        return Err(FrameError::Lambda2Cap { lambda2: k.lambda2 });
    }
    let residual = inst.residual(cond)?;
    let bounds = bounds_for(inst, cond, opts)?;
    let value = residual.worst_case(k, &opts.optimizer)?;
    let tol = opts.tolerances.residual;
    let mut notes = Vec::new();
    let margins = margins_for(cond, k, &bounds, opts.tolerances.hypothesis, &mut notes);
    let residual_holds = value <= tol;
    let holds = residual_holds && margins.iter().all(|m| m.status == MarginStatus::Ok);
    Ok(ConditionCheck {
        condition: cond,
        constants: *k,
        form: residual.form,
        residual: value,
        tolerance: tol,
        residual_holds,
        margins,
        holds,
        notes,
    })
}

/// How the target constants were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMethod {
    /// A closed-form translation of the source constants.
    Translation,
    /// The source constants already have the target's shape.
    Identity,
    /// The smallest `mu` for the target form, keeping the source `lambda`s.
    MinimalConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceStatus {
    Confirmed,
    SourceFails,
    TargetFails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideCondition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub source: ConditionCheck,
    pub target: Option<ConditionCheck>,
    pub method: WitnessMethod,
    pub side_conditions: Vec<SideCondition>,
    pub status: EquivalenceStatus,
}

fn side_conditions(
    inst: &ConditionInstance,
    a: ConditionId,
    b: ConditionId,
    opts: &VerifyOptions,
) -> Result<Vec<SideCondition>> {
    use ConditionId::*;
    let pair = [a, b];
    let mut out = Vec::new();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    if pair.contains(&A6) && pair.contains(&A6tilde) {
        let g = ConditionInstance::need(&inst.g, "G", A6)?;
        let op = reconstruction_operator(inst, g, opts)?;
        let s = op_norm_with(&op, &g.space_xd, &g.space_x, &opts.optimizer)?.value;
        let inv_b = 1.0 / bessel_bound_with(g, &opts.optimizer)?.value;
        if !close(s, inv_b) {
            return Err(FrameError::SideCondition {
                hypothesis: "||S|| = 1/B".into(),
                detail: format!("||S|| = {s}, 1/B = {inv_b}"),
            });
        }
        out.push(SideCondition { name: "||S|| = 1/B".into(), lhs: s, rhs: inv_b, tolerance: 1e-9 });
    }
    if pair.contains(&A8) && pair.contains(&A8tilde) {
        let f = ConditionInstance::need(&inst.f, "F", A8)?;
        let (lo, hi) = dual_frame_bounds(f, opts)?;
        if !close(lo.value, hi.value) {
            return Err(FrameError::SideCondition {
                hypothesis: "A = B".into(),
                detail: format!("A = {}, B = {}", lo.value, hi.value),
            });
        }
        out.push(SideCondition { name: "A = B".into(), lhs: lo.value, rhs: hi.value, tolerance: 1e-9 });
    }
    Ok(out)
}

/// Checks that an instance satisfying `cond_a` with `k_a` satisfies
/// `cond_b` with explicit constants.
pub fn check_equivalence(
    inst: &ConditionInstance,
    cond_a: ConditionId,
    k_a: &PerturbationConstants,
    cond_b: ConditionId,
    opts: &VerifyOptions,
) -> Result<EquivalenceReport> {
    let side = side_conditions(inst, cond_a, cond_b, opts)?;
    let source = check_condition(inst, cond_a, k_a, opts)?;
    let (k_b, method) = witness_constants(inst, cond_a, k_a, cond_b, opts)?;
    if !source.holds {
        return Ok(EquivalenceReport {
            source,
            target: None,
            method,
            side_conditions: side,
            status: EquivalenceStatus::SourceFails,
        });
    }
    let target = check_condition(inst, cond_b, &k_b, opts)?;
    let status = if target.holds { EquivalenceStatus::Confirmed } else { EquivalenceStatus::TargetFails };
    Ok(EquivalenceReport { source, target: Some(target), method, side_conditions: side, status })
}

fn witness_constants(
    inst: &ConditionInstance,
    a: ConditionId,
    k: &PerturbationConstants,
    b: ConditionId,
    opts: &VerifyOptions,
) -> Result<(PerturbationConstants, WitnessMethod)> {
    let bounds = bounds_for(inst, a, opts)?;
    match translate_constants(a, b, k, bounds.upper) {
        Ok(t) => return Ok((t, WitnessMethod::Translation)),
        Err(FrameError::UnsupportedTranslation { .. }) => {}
        Err(e) => return Err(e),
    }
    if a.form() == b.form() && b.admits(k) {
        return Ok((*k, WitnessMethod::Identity));
    }
    let (l1, l2) = if b.is_single_constant() {
        (0.0, 0.0)
    } else if b == ConditionId::A9tilde {
        return Err(FrameError::UnsupportedTranslation { from: a.to_string(), to: b.to_string() });
    } else if matches!(b, ConditionId::A6tilde | ConditionId::A8tilde) {
        (0.0, k.lambda2)
    } else {
        (k.lambda1, k.lambda2)
    };
    let mu = inst.residual(b)?.minimal_mu(l1, l2, &opts.optimizer)?;
    let mu = certified_margin(mu);
    Ok((PerturbationConstants::new(mu, l1, l2)?.with_role(ConstantsRole::Translated), WitnessMethod::MinimalConstant))
}

/// Pads a computed minimal constant so that rounding in the residual does
/// not flip the verdict.
pub fn certified_margin(mu: f64) -> f64 {
    mu * (1.0 + 1e-6) + 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuThresholdReport {
    pub lower_a: f64,
    pub upper_b: f64,
    /// Smallest `mu~` with `||sum c_i (psi_i - f_i)|| <= mu~ ||c||`.
    pub mu_star: f64,
    pub threshold: Margin,
    pub applicable: bool,
    pub predicted_lower: Option<f64>,
    pub actual_lower: Option<BoundsEstimate>,
    pub check: Option<Check>,
    pub verdict: Verdict,
}

/// Whether the single-constant condition holds with `mu~ < A`, and if so
/// whether `psi` keeps the lower bound `A - mu~`.
pub fn check_frame_mu_threshold(f: &FrameSystem, psi: &FrameSystem, opts: &VerifyOptions) -> Result<MuThresholdReport> {
    let (a, b) = dual_frame_bounds(f, opts)?;
    if a.value <= 0.0 {
        return Err(FrameError::NotAFrame { lower: a.value });
    }
    let mu_star = Residual::synthesis(f, psi)?.minimal_mu(0.0, 0.0, &opts.optimizer)?;
    let threshold = Margin::new("mu~ < A", a.value - mu_star, opts.tolerances.hypothesis);
    let applicable = threshold.status == MarginStatus::Ok;
    let mut report = MuThresholdReport {
        lower_a: a.value,
        upper_b: b.certified_high,
        mu_star,
        threshold,
        applicable,
        predicted_lower: None,
        actual_lower: None,
        check: None,
        verdict: Verdict::HypothesisFails,
    };
    if applicable {
        let predicted = a.value - mu_star;
        let (lo, _) = dual_frame_bounds(psi, opts)?;
        let tol = opts.tolerances.bound(predicted);
        let check = Check::new("lower bound of Psi >= A - mu~", lo.value, lo.value, Relation::AtLeast, predicted, tol);
        report.verdict = match check.status {
            CheckStatus::Pass => Verdict::Verified,
            CheckStatus::Inconclusive => Verdict::Inconclusive,
            CheckStatus::Fail => Verdict::BoundViolated,
        };
        report.predicted_lower = Some(predicted);
        report.actual_lower = Some(lo);
        report.check = Some(check);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceSpec;

    fn k(mu: f64, l1: f64, l2: f64) -> PerturbationConstants {
        PerturbationConstants::new(mu, l1, l2).unwrap()
    }

    fn sys(rows: usize, cols: usize, data: &[f64], p: f64, q: f64) -> FrameSystem {
        FrameSystem::new(DMatrix::from_row_slice(rows, cols, data), SpaceSpec::lp(cols, p), SpaceSpec::lp(rows, q))
            .unwrap()
    }

    #[test]
    fn translation_formulas() {
        use ConditionId::*;
        let c = k(0.1, 0.2, 0.3);
        let t = translate_constants(A8, A8tilde, &c, 2.0).unwrap();
        assert!((t.mu - 0.5).abs() < 1e-15 && t.lambda1 == 0.0 && t.lambda2 == 0.3);
        let t = translate_constants(A9, A9tilde, &c, 2.0).unwrap();
        assert!(t.mu == 0.0 && (t.lambda1 - 0.4).abs() < 1e-15 && t.lambda2 == 0.3);
        let t = translate_constants(A1, A11, &PerturbationConstants::zero(), 3.0).unwrap();
        assert_eq!(t.mu, 0.0);
        let t = translate_constants(A1, A11, &k(0.1, 0.1, 0.2), 2.0).unwrap();
        assert!((t.mu - 0.875).abs() < 1e-15);
        assert!(matches!(
            translate_constants(A11, A9, &c, 1.0),
            Err(FrameError::UnsupportedTranslation { .. })
        ));
    }

    #[test]
    fn identical_families_satisfy_everything() {
        let f = sys(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5], 2.0, 2.0);
        let inst = ConditionInstance::vectors(f.clone(), f);
        let opts = VerifyOptions::default();
        for (a, b) in [(ConditionId::A1, ConditionId::A11), (ConditionId::A11, ConditionId::A12), (ConditionId::A12, ConditionId::A11)] {
            let rep = check_equivalence(&inst, a, &PerturbationConstants::zero(), b, &opts).unwrap();
            assert_eq!(rep.status, EquivalenceStatus::Confirmed, "{a} -> {b}");
            assert!(rep.target.unwrap().constants.mu <= 1e-8);
        }
    }

    #[test]
    fn a8_requires_equal_bounds() {
        let f = sys(2, 2, &[1.0, 0.0, 0.0, 2.0], 2.0, 2.0);
        let inst = ConditionInstance::vectors(f.clone(), f);
        let err = check_equivalence(&inst, ConditionId::A8, &PerturbationConstants::zero(), ConditionId::A8tilde, &VerifyOptions::default())
            .unwrap_err();
        assert!(matches!(err, FrameError::SideCondition { ref hypothesis, .. } if hypothesis == "A = B"));
    }

    #[test]
    fn a3c_flags_zero_lambda2() {
        let f = sys(2, 2, &[1.0, 0.0, 0.0, 1.0], 2.0, 2.0);
        let inst = ConditionInstance::vectors(f.clone(), f);
        let c = check_condition(&inst, ConditionId::A3c, &k(0.1, 0.0, 0.0), &VerifyOptions::default()).unwrap();
        assert!(!c.holds);
        assert_eq!(c.notes.len(), 1);
    }

    #[test]
    fn threshold_examples() {
        let f = sys(2, 2, &[1.0, 0.0, 0.0, 1.0], 2.0, 2.0);
        let opts = VerifyOptions::default();
        let r = check_frame_mu_threshold(&f, &f, &opts).unwrap();
        assert_eq!(r.mu_star, 0.0);
        assert_eq!(r.verdict, Verdict::Verified);
        let zero = f.with_matrix(DMatrix::zeros(2, 2)).unwrap();
        let r = check_frame_mu_threshold(&f, &zero, &opts).unwrap();
        assert!((r.mu_star - 1.0).abs() < 1e-12);
        assert!(!r.applicable);
        assert!(r.actual_lower.is_none());
    }
}
