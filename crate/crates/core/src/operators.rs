//! Analysis and synthesis operators, `p -> q` operator norms and lower
//! bounds, frame/Bessel/Riesz bounds, and the Neumann-type invertibility
//! test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certify::hull_upper_bound;
use crate::error::{FrameError, Result};
use crate::linalg::{self, check_finite};
use crate::optimize::{maximize, onto_sphere, Domain, NormTerm, OptimizerConfig, SphereObjective};
use crate::spaces::{inclusion_constant, Exponent, SpaceSpec};

/// A family of functionals `g_i` on `X`, stored as the rows of an `m x n`
/// matrix, together with `X = l^p(n)` and `X_d = l^q(m)`.
///
/// The same type houses vector families `f_i` in `X` (again one per row); for
/// those the synthesis map `c -> sum c_i f_i` is `matrix^T` acting on `X_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSystem {
    #[serde(with = "crate::linalg::rows")]
    pub matrix: DMatrix<f64>,
    pub space_x: SpaceSpec,
    pub space_xd: SpaceSpec,
}

impl FrameSystem {
    pub fn new(matrix: DMatrix<f64>, space_x: SpaceSpec, space_xd: SpaceSpec) -> Result<Self> {
        if matrix.ncols() != space_x.dim {
            return Err(FrameError::DimensionMismatch {
                context: "frame system columns vs dim X".into(),
                expected: space_x.dim,
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() != space_xd.dim {
            return Err(FrameError::DimensionMismatch {
                context: "frame system rows vs dim X_d".into(),
                expected: space_xd.dim,
                found: matrix.nrows(),
            });
        }
        check_finite(&matrix, "frame system")?;
        Ok(FrameSystem { matrix, space_x, space_xd })
    }

    /// Number of elements `m`.
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// Dimension `n` of `X`.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Analysis map `f -> (g_i(f))`, from `X` to `X_d`.
    pub fn analysis(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `matrix^T`: `d -> sum d_i g_i`.
    pub fn synthesis(&self) -> DMatrix<f64> {
        self.matrix.transpose()
    }

    pub fn same_spaces(&self, other: &FrameSystem) -> bool {
        self.space_x == other.space_x && self.space_xd == other.space_xd
    }

    pub(crate) fn require_same_spaces(&self, other: &FrameSystem, context: &str) -> Result<()> {
        if self.same_spaces(other) {
            Ok(())
        } else if self.dim() != other.dim() {
            Err(FrameError::DimensionMismatch { context: context.to_string(), expected: self.dim(), found: other.dim() })
        } else if self.len() != other.len() {
            Err(FrameError::DimensionMismatch { context: context.to_string(), expected: self.len(), found: other.len() })
        } else {
            Err(FrameError::InvalidArgument(format!("{context}: families live in different spaces")))
        }
    }

    /// The family `{other_i - g_i}`.
    pub fn difference(&self, other: &FrameSystem) -> Result<FrameSystem> {
        self.require_same_spaces(other, "difference")?;
        Ok(FrameSystem { matrix: &other.matrix - &self.matrix, ..self.clone() })
    }

    pub fn with_matrix(&self, matrix: DMatrix<f64>) -> Result<FrameSystem> {
        FrameSystem::new(matrix, self.space_x, self.space_xd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "upper_B")]
    UpperB,
    #[serde(rename = "lower_A")]
    LowerA,
}

/// A computed bound with a bracket on the true value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsEstimate {
    pub value: f64,
    pub kind: BoundKind,
    pub certified_low: f64,
    pub certified_high: f64,
    pub evaluations: usize,
    pub method: String,
}

impl BoundsEstimate {
    fn exact(value: f64, kind: BoundKind, method: &str) -> Self {
        BoundsEstimate {
            value,
            kind,
            certified_low: value,
            certified_high: value,
            evaluations: 0,
            method: method.to_string(),
        }
    }

    /// Width of the bracket.
    pub fn gap(&self) -> f64 {
        self.certified_high - self.certified_low
    }

    pub fn is_exact(&self) -> bool {
        self.certified_low == self.certified_high
    }

}

fn check_shapes(m: &DMatrix<f64>, from: &SpaceSpec, to: &SpaceSpec) -> Result<()> {
    if m.ncols() != from.dim {
        return Err(FrameError::DimensionMismatch {
            context: "operator columns vs source dimension".into(),
            expected: from.dim,
            found: m.ncols(),
        });
    }
    if m.nrows() != to.dim {
        return Err(FrameError::DimensionMismatch {
            context: "operator rows vs target dimension".into(),
            expected: to.dim,
            found: m.nrows(),
        });
    }
    check_finite(m, "operator")
}

fn max_column_norm(m: &DMatrix<f64>, q: Exponent) -> f64 {
    m.column_iter()
        .map(|c| q.norm(c.clone_owned().as_slice()))
        .fold(0.0, f64::max)
}

fn max_row_norm(m: &DMatrix<f64>, r: Exponent) -> f64 {
    m.row_iter()
        .map(|row| r.norm(row.transpose().as_slice()))
        .fold(0.0, f64::max)
}

/// Iterates over sign vectors with first entry `+1` (the other half follows
/// by symmetry of norms).
fn for_each_sign_vector(n: usize, mut f: impl FnMut(&DVector<f64>)) {
    let mut s = DVector::from_element(n, 1.0);
    for mask in 0..(1u64 << (n - 1)) {
        for i in 1..n {
            s[i] = if mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
        }
        f(&s);
    }
}

/// Analytic over-estimates of `||M||_{p -> q}` obtained by relaxing to
/// closed-form cases through inclusion constants and Riesz-Thorin.
fn analytic_upper(m: &DMatrix<f64>, p: Exponent, q: Exponent) -> f64 {
    let (rows, cols) = m.shape();
    let one = Exponent::ONE;
    let inf = Exponent::Infinity;
    let two = Exponent::TWO;
    let norm11 = max_column_norm(m, one);
    let norm_inf = max_row_norm(m, one);
    let mut best = inclusion_constant(cols, p, one) * max_column_norm(m, q);
    best = best.min(max_row_norm(m, p.dual()) * inclusion_constant(rows, inf, q));
    best = best.min(inclusion_constant(cols, p, two) * linalg::sigma_max(m) * inclusion_constant(rows, two, q));
    for r in [p, q] {
        let t = r.reciprocal();
        let rr = norm11.powf(t) * norm_inf.powf(1.0 - t);
        best = best.min(inclusion_constant(cols, p, r) * rr * inclusion_constant(rows, r, q));
    }
    best * (1.0 + 1e-12)
}

/// `sup ||Mv||_to` over the unit sphere of `from`.
pub fn op_norm(m: &DMatrix<f64>, from: &SpaceSpec, to: &SpaceSpec) -> Result<BoundsEstimate> {
    op_norm_with(m, from, to, &OptimizerConfig::default())
}

pub fn op_norm_with(
    m: &DMatrix<f64>,
    from: &SpaceSpec,
    to: &SpaceSpec,
    cfg: &OptimizerConfig,
) -> Result<BoundsEstimate> {
    check_shapes(m, from, to)?;
    let (p, q) = (from.p, to.p);
    let up = BoundKind::UpperB;
    if linalg::max_abs(m) == 0.0 {
        return Ok(BoundsEstimate::exact(0.0, up, "zero operator"));
    }
    if p.is_two() && q.is_two() {
        return Ok(BoundsEstimate::exact(linalg::sigma_max(m), up, "largest singular value"));
    }
    if p.is_one() {
        return Ok(BoundsEstimate::exact(max_column_norm(m, q), up, "max column norm"));
    }
    if q.is_infinite() {
        return Ok(BoundsEstimate::exact(max_row_norm(m, p.dual()), up, "max row dual norm"));
    }
    if p.is_infinite() && m.ncols() <= cfg.enumeration_dim {
        let mut best = 0.0_f64;
        for_each_sign_vector(m.ncols(), |s| best = best.max(q.norm((m * s).as_slice())));
        let mut est = BoundsEstimate::exact(best, up, "cube vertex enumeration");
        est.evaluations = 1 << (m.ncols() - 1);
        return Ok(est);
    }
    if q.is_one() && m.nrows() <= cfg.enumeration_dim {
        let mut best = 0.0_f64;
        let mt = m.transpose();
        for_each_sign_vector(m.nrows(), |s| best = best.max(p.dual().norm((&mt * s).as_slice())));
        let mut est = BoundsEstimate::exact(best, up, "dual cube vertex enumeration");
        est.evaluations = 1 << (m.nrows() - 1);
        return Ok(est);
    }

    let obj = SphereObjective::new(Domain::plain(from), vec![NormTerm::new(1.0, m.clone(), q)], 0.0);
    let seeds = operator_seeds(m, from);
    let out = maximize(&obj, cfg, &seeds);
    let mut high = analytic_upper(m, p, q);
    let mut method = "multi-start ascent; analytic bracket".to_string();
    let n = m.ncols();
    if (2..=4).contains(&n) {
        let cells = cfg.certify_cells[n - 2];
        if let Some(h) = hull_upper_bound(n, p, cells, |x| {
            let y = m * DVector::from_column_slice(x);
            q.norm(y.as_slice())
        }) {
            if h < high {
                high = h;
                method = "multi-start ascent; hull certificate".to_string();
            }
        }
    }
    Ok(BoundsEstimate {
        value: out.value,
        kind: up,
        certified_low: out.value,
        certified_high: high.max(out.value),
        evaluations: out.evaluations,
        method,
    })
}

/// Right singular vectors make good starting points for any `p, q`.
fn operator_seeds(m: &DMatrix<f64>, from: &SpaceSpec) -> Vec<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let mut seeds = Vec::new();
    if let Some(vt) = svd.v_t {
        for row in vt.row_iter() {
            let v = row.transpose();
            seeds.push(v.clone());
            seeds.push(-v);
        }
    }
    onto_sphere(seeds, from.p)
}

/// `inf ||Mv||_to` over the unit sphere of `from`.
pub fn lower_bound(m: &DMatrix<f64>, from: &SpaceSpec, to: &SpaceSpec) -> Result<BoundsEstimate> {
    lower_bound_with(m, from, to, &OptimizerConfig::default())
}

pub fn lower_bound_with(
    m: &DMatrix<f64>,
    from: &SpaceSpec,
    to: &SpaceSpec,
    cfg: &OptimizerConfig,
) -> Result<BoundsEstimate> {
    check_shapes(m, from, to)?;
    let (p, q) = (from.p, to.p);
    let low = BoundKind::LowerA;
    let n = m.ncols();
    if linalg::rank(m, 1e-12) < n {
        return Ok(BoundsEstimate::exact(0.0, low, "rank test: nontrivial kernel"));
    }
    if p.is_two() && q.is_two() {
        return Ok(BoundsEstimate::exact(linalg::sigma_min(m), low, "smallest singular value"));
    }
    if m.is_square() {
        let inv = linalg::inverse(m, "lower bound")?;
        let e = op_norm_with(&inv, to, from, cfg)?;
        return Ok(BoundsEstimate {
            value: 1.0 / e.value,
            kind: low,
            certified_low: 1.0 / e.certified_high,
            certified_high: 1.0 / e.certified_low,
            evaluations: e.evaluations,
            method: format!("reciprocal norm of the inverse ({})", e.method),
        });
    }

    // sup { ||x||_p : ||Mx||_q <= 1 } is a convex maximization; for q in
    // {1, inf} the feasible set is a polytope and its vertices suffice.
    let enumerated = if q.is_infinite() {
        enumerate_inf_vertices(m, p)
    } else if q.is_one() {
        enumerate_one_vertices(m, p)
    } else {
        None
    };
    if let Some((best, evals)) = enumerated {
        let mut est = BoundsEstimate::exact(1.0 / best, low, "polytope vertex enumeration");
        est.evaluations = evals;
        return Ok(est);
    }

    let mut seeds = operator_seeds(m, from);
    seeds.reverse();
    let shaped = SphereObjective::new(
        Domain::shaped(m.clone(), q),
        vec![NormTerm::new(1.0, DMatrix::identity(n, n), p)],
        0.0,
    );
    let a = maximize(&shaped, cfg, &seeds);
    let direct = SphereObjective::new(Domain::plain(from), vec![NormTerm::new(-1.0, m.clone(), q)], 0.0);
    let b = maximize(&direct, cfg, &seeds);
    let value = (1.0 / a.value).min(-b.value);

    let pinv = linalg::pinv(m)?;
    let pinv_norm = op_norm_with(&pinv, to, from, cfg)?;
    let mut certified_low = 1.0 / pinv_norm.certified_high;
    let svd_route =
        linalg::sigma_min(m) / (inclusion_constant(m.nrows(), q, Exponent::TWO) * inclusion_constant(n, Exponent::TWO, p));
    certified_low = certified_low.max(svd_route) * (1.0 - 1e-12);
    Ok(BoundsEstimate {
        value,
        kind: low,
        certified_low: certified_low.min(value),
        certified_high: value,
        evaluations: a.evaluations + b.evaluations + pinv_norm.evaluations,
        method: "multi-start descent; pseudo-inverse bracket".into(),
    })
}

const VERTEX_BUDGET: usize = 400_000;

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn for_each_subset(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance the rightmost index that still has room.
        let Some(i) = (0..k).rev().find(|&i| idx[i] < m - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vertices of `{x : ||Mx||_inf <= 1}`: `n` independent active rows with
/// prescribed signs.
fn enumerate_inf_vertices(m: &DMatrix<f64>, p: Exponent) -> Option<(f64, usize)> {
    let (rows, n) = m.shape();
    if binomial(rows, n).saturating_mul(1 << (n - 1)) > VERTEX_BUDGET {
        return None;
    }
    let mut best = 0.0_f64;
    let mut evals = 0;
    for_each_subset(rows, n, |subset| {
        for_each_sign_vector(n, |s| {
            let mut a: Vec<f64> = subset.iter().flat_map(|&i| m.row(i).iter().copied().collect::<Vec<_>>()).collect();
            let mut b = s.as_slice().to_vec();
            if solve_dense(&mut a, &mut b, n) {
                let x = DVector::from_vec(b);
                evals += 1;
                if (m * &x).amax() <= 1.0 + 1e-12 {
                    best = best.max(p.norm(x.as_slice()));
                }
            }
        });
    });
    (best > 0.0).then_some((best, evals))
}

/// Vertices of `{x : ||Mx||_1 <= 1}` lie on rays where `n - 1` independent
/// rows of `M` vanish.
fn enumerate_one_vertices(m: &DMatrix<f64>, p: Exponent) -> Option<(f64, usize)> {
    let (rows, n) = m.shape();
    if binomial(rows, n - 1) > VERTEX_BUDGET {
        return None;
    }
    let mut best = 0.0_f64;
    let mut evals = 0;
    let scale = m.norm();
    for_each_subset(rows, n - 1, |subset| {
        let mut sub = DMatrix::zeros(n, n);
        for (k, &i) in subset.iter().enumerate() {
            sub.set_row(k, &m.row(i));
        }
        if let Some(d) = null_direction(&sub, scale) {
            let y = (m * &d).lp_norm(1);
            evals += 1;
            if y > 1e-14 * scale {
                best = best.max(p.norm(d.as_slice()) / y);
            }
        }
    });
    (best > 0.0).then_some((best, evals))
}

/// Kernel direction of the first `n - 1` rows of `sub` (generalized cross
/// product by cofactors), or `None` when those rows are dependent.
fn null_direction(sub: &DMatrix<f64>, scale: f64) -> Option<DVector<f64>> {
    let n = sub.ncols();
    if n == 1 {
        return Some(DVector::from_element(1, 1.0));
    }
    let rows = sub.rows(0, n - 1);
    let d = DVector::from_fn(n, |j, _| {
        let minor = rows.clone_owned().remove_column(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    });
    (d.norm() > 1e-12 * scale.powi(n as i32 - 1)).then_some(d)
}

fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    linalg::solve_small(a, b, n).is_some() && b.iter().all(|x| x.is_finite())
}

/// Upper frame (Bessel) bound: the norm of the analysis map from `X` to `X_d`.
pub fn bessel_bound(f: &FrameSystem) -> Result<BoundsEstimate> {
    bessel_bound_with(f, &OptimizerConfig::default())
}

pub fn bessel_bound_with(f: &FrameSystem, cfg: &OptimizerConfig) -> Result<BoundsEstimate> {
    op_norm_with(&f.matrix, &f.space_x, &f.space_xd, cfg)
}

/// `(A, B)` of the analysis map. `A = 0` means the family is not a frame.
pub fn frame_bounds(f: &FrameSystem) -> Result<(BoundsEstimate, BoundsEstimate)> {
    frame_bounds_with(f, &OptimizerConfig::default())
}

pub fn frame_bounds_with(f: &FrameSystem, cfg: &OptimizerConfig) -> Result<(BoundsEstimate, BoundsEstimate)> {
    let lower = lower_bound_with(&f.matrix, &f.space_x, &f.space_xd, cfg)?;
    let upper = op_norm_with(&f.matrix, &f.space_x, &f.space_xd, cfg)?;
    Ok((lower, upper))
}

/// Bounds of the synthesis map `c -> sum c_i f_i` from `X_d` to `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszBounds {
    pub lower: BoundsEstimate,
    pub upper: BoundsEstimate,
    /// The family spans `X`.
    pub complete: bool,
}

impl RieszBounds {
    pub fn is_riesz_basis(&self) -> bool {
        self.complete && self.lower.value > 0.0
    }
}

pub fn riesz_bounds(f: &FrameSystem) -> Result<RieszBounds> {
    riesz_bounds_with(f, &OptimizerConfig::default())
}

pub fn riesz_bounds_with(f: &FrameSystem, cfg: &OptimizerConfig) -> Result<RieszBounds> {
    let t = f.synthesis();
    let complete = linalg::rank(&t, 1e-12) == f.dim();
    let lower = lower_bound_with(&t, &f.space_xd, &f.space_x, cfg)?;
    let upper = op_norm_with(&t, &f.space_xd, &f.space_x, cfg)?;
    Ok(RieszBounds { lower, upper, complete })
}

/// Constants `(lambda1, lambda2)` of `||Gx - x|| <= l1 ||x|| + l2 ||Gx||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LambdaPair {
    pub fn is_contractive(&self) -> bool {
        self.lambda1 < 1.0 && self.lambda2 < 1.0 && self.lambda1 >= 0.0 && self.lambda2 >= 0.0
    }

    fn worst(&self) -> f64 {
        self.lambda1.max(self.lambda2)
    }
}

/// Bracket on `||G^{-1} x|| / ||x||` from a contractive pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertibilityCertificate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub inverse_lower: f64,
    pub inverse_upper: f64,
    /// `"primary"` (`lambda1 = ||G - I||`, `lambda2 = 0`) or `"optimized"`.
    pub source: String,
    pub primary: LambdaPair,
    pub optimized: LambdaPair,
    /// Every `(lambda1(lambda2), lambda2)` evaluated on the grid.
    pub candidates: Vec<LambdaPair>,
}

impl InvertibilityCertificate {
    fn from_pair(pair: LambdaPair, source: &str, primary: LambdaPair, optimized: LambdaPair, candidates: Vec<LambdaPair>) -> Self {
        InvertibilityCertificate {
            lambda1: pair.lambda1,
            lambda2: pair.lambda2,
            inverse_lower: (1.0 - pair.lambda2) / (1.0 + pair.lambda1),
            inverse_upper: (1.0 + pair.lambda2) / (1.0 - pair.lambda1),
            source: source.to_string(),
            primary,
            optimized,
            candidates,
        }
    }

    pub fn contains(&self, ratio: f64, tol: f64) -> bool {
        ratio >= self.inverse_lower - tol && ratio <= self.inverse_upper + tol
    }
}

pub fn check_neumann_invertibility(g: &DMatrix<f64>, s: &SpaceSpec) -> Result<Option<InvertibilityCertificate>> {
    check_neumann_invertibility_with(g, s, &OptimizerConfig::default())
}

pub fn check_neumann_invertibility_with(
    g: &DMatrix<f64>,
    s: &SpaceSpec,
    cfg: &OptimizerConfig,
) -> Result<Option<InvertibilityCertificate>> {
    if !g.is_square() {
        return Err(FrameError::NotSquare { rows: g.nrows(), cols: g.ncols() });
    }
    check_shapes(g, s, s)?;
    let n = g.nrows();
    let diff = g - DMatrix::identity(n, n);
    let primary = LambdaPair { lambda1: op_norm_with(&diff, s, s, cfg)?.certified_high, lambda2: 0.0 };

    let mut candidates = Vec::with_capacity(10);
    for step in 0..10 {
        let lambda2 = step as f64 / 10.0;
        let lambda1 = if step == 0 {
            primary.lambda1
        } else {
            let obj = SphereObjective::new(
                Domain::plain(s),
                vec![NormTerm::new(1.0, diff.clone(), s.p), NormTerm::new(-lambda2, g.clone(), s.p)],
                0.0,
            );
            // The ascent returns an attained value; pad it so that the pair
            // remains valid up to optimizer round-off.
            let sup = maximize(&obj, cfg, &[]).value;
            (sup * (1.0 + 1e-9) + 1e-12).max(0.0)
        };
        candidates.push(LambdaPair { lambda1, lambda2 });
    }
    let optimized = candidates
        .iter()
        .copied()
        .fold(candidates[0], |best, c| if c.worst() < best.worst() { c } else { best });

    let chosen = if primary.is_contractive() {
        Some((primary, "primary"))
    } else if optimized.is_contractive() {
        Some((optimized, "optimized"))
    } else {
        None
    };
    Ok(chosen.map(|(pair, source)| InvertibilityCertificate::from_pair(pair, source, primary, optimized, candidates)))
}
