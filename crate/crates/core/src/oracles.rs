//! Brute-force reference values on deterministic grids of low-dimensional
//! `l^p` spheres.
//!
//! The grid is built from generalized spherical angles: the first `n - 2`
//! angles take the values `0, h, 2h, ...` up to `pi` (with `pi` itself always
//! included) and the last one takes `0, h, ..., 2 pi - h`, where
//! `h = 2 pi / resolution`. Each point is rescaled onto the `l^p` sphere and
//! the signed canonical vectors and normalized sign vectors are added.
//! Doubling the resolution therefore yields a superset of the points.
//!
//! Every unit vector of `l^p` lies within `delta_p` (in the `l^p` norm) of a
//! grid point, with
//!
//! ```text
//!     delta_p = 2 (c1 / c2) sqrt(n - 1) h / 2,
//!     c1 = n^max(0, 1/p - 1/2),   c2 = n^min(0, 1/p - 1/2).
//! ```
//!
//! A function with Lipschitz constant `L` on the sphere is then known to the
//! grid to within `L * delta_p`, which is reported as `gap_bound`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};
use crate::operators::FrameSystem;
use crate::perturbation::PerturbationConstants;
use crate::spaces::{inclusion_constant, Exponent, SpaceSpec};

pub const MAX_ORACLE_DIM: usize = 4;
pub const DEFAULT_RESOLUTION: usize = 720;

/// Grid value with a bound on its distance from the true extremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub gap_bound: f64,
    pub points: usize,
    pub resolution: usize,
}

/// Resolution used by the test suites: 720, 180 and 40 points per full
/// angle in dimensions 2, 3 and 4.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        0..=2 => DEFAULT_RESOLUTION,
        3 => 180,
        _ => 40,
    }
}

/// `delta_p` for the grid of the given resolution.
pub fn grid_gap(n: usize, p: Exponent, resolution: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let h = TAU / resolution as f64;
    let e = p.reciprocal() - 0.5;
    let nf = n as f64;
    let c1 = nf.powf(e.max(0.0));
    let c2 = nf.powf(e.min(0.0));
    2.0 * (c1 / c2) * ((n - 1) as f64).sqrt() * h / 2.0
}

fn check_dim(n: usize, resolution: usize) -> Result<()> {
    if n > MAX_ORACLE_DIM {
        return Err(FrameError::OracleDimension { dim: n, max: MAX_ORACLE_DIM });
    }
    if n == 0 {
        return Err(FrameError::InvalidArgument("oracle dimension must be positive".into()));
    }
    if resolution < 4 {
        return Err(FrameError::InvalidArgument(format!("oracle resolution {resolution} must be at least 4")));
    }
    Ok(())
}

fn half_angles(h: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..).map(|i| i as f64 * h).take_while(|&a| a < PI).collect();
    v.push(PI);
    v
}

/// Points of the grid, each on the unit sphere of `p`.
pub fn sphere_grid(n: usize, p: Exponent, resolution: usize) -> Result<Vec<DVector<f64>>> {
    check_dim(n, resolution)?;
    let mut out = extreme_points(n, p);
    if n == 1 {
        return Ok(out);
    }
    let h = TAU / resolution as f64;
    let half = half_angles(h);
    let full: Vec<f64> = (0..resolution).map(|i| i as f64 * h).collect();
    let inner = half.len().pow((n - 2) as u32);
    for idx in 0..inner {
        let mut angles = Vec::with_capacity(n - 1);
        let mut rem = idx;
        for _ in 0..n - 2 {
            angles.push(half[rem % half.len()]);
            rem /= half.len();
        }
        for &last in &full {
            angles.push(last);
            out.push(spherical_point(&angles, p));
            angles.pop();
        }
    }
    Ok(out)
}

fn spherical_point(angles: &[f64], p: Exponent) -> DVector<f64> {
    let n = angles.len() + 1;
    let mut x = DVector::zeros(n);
    let mut s = 1.0;
    for (i, &a) in angles.iter().enumerate() {
        x[i] = s * a.cos();
        s *= a.sin();
    }
    x[n - 1] = s;
    let norm = p.norm(x.as_slice());
    x / norm
}

fn extreme_points(n: usize, p: Exponent) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(n);
            e[i] = sign;
            out.push(e);
        }
    }
    if n > 1 {
        for mask in 0..(1usize << n) {
            let v = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
            let norm = p.norm(v.as_slice());
            out.push(v / norm);
        }
    }
    out
}

fn reduce<F>(n: usize, p: Exponent, resolution: usize, f: F, maximize: bool) -> Result<(f64, usize)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let grid = sphere_grid(n, p, resolution)?;
    let init = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    let value = grid
        .par_iter()
        .map(|x| f(x.as_slice()))
        .reduce(|| init, |a, b| if maximize { a.max(b) } else { a.min(b) });
    Ok((value, grid.len()))
}

/// Grid maximum of `f`; `lipschitz` is its Lipschitz constant for the `l^p`
/// norm on the sphere.
pub fn brute_sup<F>(n: usize, p: Exponent, resolution: usize, lipschitz: f64, f: F) -> Result<OracleValue>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (value, points) = reduce(n, p, resolution, f, true)?;
    Ok(OracleValue { value, gap_bound: lipschitz * grid_gap(n, p, resolution), points, resolution })
}

/// Grid minimum of `f`.
pub fn brute_inf<F>(n: usize, p: Exponent, resolution: usize, lipschitz: f64, f: F) -> Result<OracleValue>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (value, points) = reduce(n, p, resolution, f, false)?;
    Ok(OracleValue { value, gap_bound: lipschitz * grid_gap(n, p, resolution), points, resolution })
}

fn apply(m: &DMatrix<f64>, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum::<f64>()));
}

fn image_norm(m: &DMatrix<f64>, x: &[f64], q: Exponent) -> f64 {
    let mut y = Vec::with_capacity(m.nrows());
    apply(m, x, &mut y);
    q.norm(&y)
}

/// `||I||_{p->2} ||M||_F ||I||_{2->q}`, an upper bound for `||M||_{p->q}`.
pub fn frobenius_lipschitz(m: &DMatrix<f64>, from: Exponent, to: Exponent) -> f64 {
    let fro = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    inclusion_constant(m.ncols(), from, Exponent::TWO) * fro * inclusion_constant(m.nrows(), Exponent::TWO, to)
}

fn check_shape(m: &DMatrix<f64>, from: &SpaceSpec, to: &SpaceSpec) -> Result<()> {
    if m.shape() != (to.dim, from.dim) {
        return Err(FrameError::DimensionMismatch {
            context: "oracle matrix".into(),
            expected: to.dim * from.dim,
            found: m.nrows() * m.ncols(),
        });
    }
    Ok(())
}

/// Grid maximum of `||M x||_q` over the unit sphere of `from`. For
/// `from.p` equal to 1 or infinity the maximum sits at an extreme point of
/// the ball, which the grid contains, so the gap bound is zero.
pub fn brute_op_norm(m: &DMatrix<f64>, from: &SpaceSpec, to: &SpaceSpec, resolution: usize) -> Result<OracleValue> {
    check_shape(m, from, to)?;
    let l = frobenius_lipschitz(m, from.p, to.p);
    let mut out = brute_sup(from.dim, from.p, resolution, l, |x| image_norm(m, x, to.p))?;
    if from.p.is_one() || from.p.is_infinite() {
        out.gap_bound = 0.0;
    }
    Ok(out)
}

/// Grid minimum of `||M x||_q`; an over-estimate of the true infimum by at
/// most `gap_bound`.
pub fn brute_lower_bound(
    m: &DMatrix<f64>,
    from: &SpaceSpec,
    to: &SpaceSpec,
    resolution: usize,
) -> Result<OracleValue> {
    check_shape(m, from, to)?;
    let l = frobenius_lipschitz(m, from.p, to.p);
    brute_inf(from.dim, from.p, resolution, l, |x| image_norm(m, x, to.p))
}

/// Grid frame bounds of the analysis map.
pub fn brute_frame_bounds(f: &FrameSystem, resolution: usize) -> Result<(OracleValue, OracleValue)> {
    Ok((
        brute_lower_bound(&f.matrix, &f.space_x, &f.space_xd, resolution)?,
        brute_op_norm(&f.matrix, &f.space_x, &f.space_xd, resolution)?,
    ))
}

/// Grid maximum of the (P*) residual
/// `||sum d_i (phi_i - g_i)|| - mu ||d|| - lambda1 ||sum d_i g_i|| - lambda2 ||sum d_i phi_i||`
/// over unit `d` in the dual of `X_d`.
pub fn brute_residual(
    g: &FrameSystem,
    phi: &FrameSystem,
    k: &PerturbationConstants,
    resolution: usize,
) -> Result<OracleValue> {
    dual_residual(g, phi, k.mu, k.lambda1, k.lambda2, resolution)
}

/// Grid estimate of the smallest `mu` for which (P*) holds.
pub fn brute_minimal_mu(
    g: &FrameSystem,
    phi: &FrameSystem,
    lambda1: f64,
    lambda2: f64,
    resolution: usize,
) -> Result<OracleValue> {
    let mut v = dual_residual(g, phi, 0.0, lambda1, lambda2, resolution)?;
    v.value = v.value.max(0.0);
    Ok(v)
}

fn dual_residual(
    g: &FrameSystem,
    phi: &FrameSystem,
    mu: f64,
    lambda1: f64,
    lambda2: f64,
    resolution: usize,
) -> Result<OracleValue> {
    if !g.same_spaces(phi) || g.matrix.shape() != phi.matrix.shape() {
        return Err(FrameError::DimensionMismatch {
            context: "oracle residual families".into(),
            expected: g.matrix.len(),
            found: phi.matrix.len(),
        });
    }
    let dom = g.space_xd.p.dual();
    let tgt = g.space_x.p.dual();
    let gt = g.matrix.transpose();
    let pt = phi.matrix.transpose();
    let dt = &pt - &gt;
    let l = frobenius_lipschitz(&dt, dom, tgt)
        + lambda1 * frobenius_lipschitz(&gt, dom, tgt)
        + lambda2 * frobenius_lipschitz(&pt, dom, tgt);
    brute_sup(g.len(), dom, resolution, l, |d| {
        image_norm(&dt, d, tgt) - mu * dom.norm(d) - lambda1 * image_norm(&gt, d, tgt) - lambda2 * image_norm(&pt, d, tgt)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(n: usize, p: f64) -> SpaceSpec {
        SpaceSpec::lp(n, p)
    }

    #[test]
    fn identity_has_norm_one() {
        for res in [8, 64, 720] {
            let v = brute_op_norm(&DMatrix::identity(2, 2), &lp(2, 2.0), &lp(2, 2.0), res).unwrap();
            assert!((v.value - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_points_are_exact_for_l1() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 0.0]);
        let v = brute_op_norm(&m, &lp(2, 1.0), &lp(2, 2.0), 16).unwrap();
        assert_eq!(v.value, 5.0);
        assert_eq!(v.gap_bound, 0.0);
    }

    #[test]
    fn diagonal_lower_bound() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let v = brute_lower_bound(&m, &lp(2, 2.0), &lp(2, 2.0), 720).unwrap();
        assert!((v.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_lower_bound_is_within_gap() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let v = brute_lower_bound(&m, &lp(2, 3.0), &lp(2, 3.0), 720).unwrap();
        assert!(v.value <= v.gap_bound, "{v:?}");
    }

    #[test]
    fn refinement_is_monotone() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -0.4, 0.2, 0.3, 0.9, -0.7, 0.1, 0.5, 1.2]);
        for (p, q) in [(1.5, 3.0), (3.0, 1.0), (2.0, f64::INFINITY)] {
            let mut prev_hi = f64::NEG_INFINITY;
            let mut prev_lo = f64::INFINITY;
            for res in [10, 20, 40, 80] {
                let hi = brute_op_norm(&m, &lp(3, p), &lp(3, q), res).unwrap().value;
                let lo = brute_lower_bound(&m, &lp(3, p), &lp(3, q), res).unwrap().value;
                assert!(hi >= prev_hi && lo <= prev_lo);
                prev_hi = hi;
                prev_lo = lo;
            }
        }
    }

    #[test]
    fn grid_is_superset_after_doubling() {
        let a = sphere_grid(3, Exponent::TWO, 12).unwrap();
        let b = sphere_grid(3, Exponent::TWO, 24).unwrap();
        for x in &a {
            assert!(b.iter().any(|y| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn gap_covers_the_sphere() {
        // The farthest sphere point from the grid, probed on a much finer grid.
        let p = Exponent::Finite(1.5);
        let coarse = sphere_grid(3, p, 16).unwrap();
        let fine = sphere_grid(3, p, 128).unwrap();
        let worst = fine
            .iter()
            .map(|x| coarse.iter().map(|y| p.norm((x - y).as_slice())).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        assert!(worst <= grid_gap(3, p, 16), "{worst} > {}", grid_gap(3, p, 16));
    }

    #[test]
    fn dimension_limit() {
        let m = DMatrix::identity(5, 5);
        assert!(matches!(
            brute_op_norm(&m, &lp(5, 2.0), &lp(5, 2.0), 8),
            Err(FrameError::OracleDimension { dim: 5, max: 4 })
        ));
    }

    #[test]
    fn residual_of_identical_pair() {
        let g = FrameSystem::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.3, 1.0]), lp(2, 2.0), lp(2, 3.0)).unwrap();
        let k = PerturbationConstants::new(0.25, 0.0, 0.0).unwrap();
        assert!((brute_residual(&g, &g, &k, 64).unwrap().value + 0.25).abs() < 1e-15);
    }
}
