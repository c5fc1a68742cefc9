//! Multi-start maximization of signed sums of norms on a unit sphere.
//!
//! Every bound, residual and minimal constant in the laboratory reduces to
//!
//! ```text
//!     sup { c + sum_k w_k ||L_k x||_{e_k} : N(x) = 1 }
//! ```
//!
//! where `N(x) = ||D x||_e` is an `l^p` norm, optionally composed with an
//! injective "shape" matrix `D`. The objective is positively homogeneous of
//! degree one apart from the constant, so it is evaluated as a ratio and the
//! iterates are projected back onto the sphere radially.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spaces::{normalize, sample_unit_sphere, Exponent, SpaceSpec};

/// `w * ||L x||_e`.
#[derive(Debug, Clone)]
pub struct NormTerm {
    pub weight: f64,
    pub map: DMatrix<f64>,
    pub exponent: Exponent,
}

impl NormTerm {
    pub fn new(weight: f64, map: DMatrix<f64>, exponent: Exponent) -> Self {
        NormTerm { weight, map, exponent }
    }
}

/// The norm defining the constraint sphere.
#[derive(Debug, Clone)]
pub struct Domain {
    pub dim: usize,
    pub exponent: Exponent,
    pub shape: Option<DMatrix<f64>>,
}

impl Domain {
    pub fn plain(space: &SpaceSpec) -> Self {
        Domain { dim: space.dim, exponent: space.p, shape: None }
    }

    /// The sphere `{x : ||shape x||_e = 1}`; `shape` must be injective.
    pub fn shaped(shape: DMatrix<f64>, exponent: Exponent) -> Self {
        Domain { dim: shape.ncols(), exponent, shape: Some(shape) }
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        match &self.shape {
            None => self.exponent.norm(x.as_slice()),
            Some(d) => self.exponent.norm((d * x).as_slice()),
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.shape {
            None => self.exponent.norming_functional(x.as_slice()),
            Some(d) => d.tr_mul(&self.exponent.norming_functional((d * x).as_slice())),
        }
    }

    fn project(&self, x: &mut DVector<f64>) -> bool {
        let n = self.norm(x);
        if n > 0.0 && n.is_finite() {
            *x /= n;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone)]
pub struct SphereObjective {
    pub domain: Domain,
    pub terms: Vec<NormTerm>,
    pub constant: f64,
}

impl SphereObjective {
    pub fn new(domain: Domain, terms: Vec<NormTerm>, constant: f64) -> Self {
        SphereObjective { domain, terms, constant }
    }

    /// Objective at any nonzero `x`, using homogeneity.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let scale = self.domain.norm(x);
        if scale == 0.0 {
            return f64::NEG_INFINITY;
        }
        let s: f64 = self
            .terms
            .iter()
            .map(|t| t.weight * t.exponent.norm((&t.map * x).as_slice()))
            .sum();
        self.constant + s / scale
    }

    /// (Sub)gradient of the homogeneous ratio at a unit vector `x`.
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        let mut total = 0.0;
        for t in &self.terms {
            let y = &t.map * x;
            total += t.weight * t.exponent.norm(y.as_slice());
            g += t.weight * t.map.tr_mul(&t.exponent.norming_functional(y.as_slice()));
        }
        g - total * self.domain.gradient(x)
    }

    fn is_smooth(&self) -> bool {
        self.domain.exponent.is_smooth() && self.terms.iter().all(|t| t.exponent.is_smooth())
    }

    /// A single positive norm on a plain sphere: an operator norm, for which
    /// the nonlinear power iteration is monotone.
    fn is_operator_norm(&self) -> bool {
        self.domain.shape.is_none() && self.terms.len() == 1 && self.terms[0].weight > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Number of local ascents, started from the best seeds.
    pub restarts: usize,
    /// Random sphere samples screened for seeds.
    pub samples: usize,
    pub max_iter: usize,
    /// Stop once an accepted step improves the objective by less than this
    /// (relative to `max(1, |f|)`).
    pub tol: f64,
    pub seed: u64,
    /// Cube-sphere cells per face edge used to certify upper bounds in
    /// dimensions 2, 3 and 4.
    pub certify_cells: [usize; 3],
    /// Largest dimension for which extreme points are enumerated.
    pub enumeration_dim: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 32,
            samples: 256,
            max_iter: 500,
            tol: 1e-10,
            seed: 0x5eed,
            certify_cells: [2048, 96, 16],
            enumeration_dim: 8,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub value: f64,
    pub argmax: DVector<f64>,
    pub evaluations: usize,
}

/// Multi-start ascent. Seeds are screened from deterministic sphere samples
/// plus `extra_seeds`; the best `restarts` of them are refined independently
/// (in parallel) and the winner is chosen by value, ties broken by seed index.
pub fn maximize(obj: &SphereObjective, cfg: &OptimizerConfig, extra_seeds: &[DVector<f64>]) -> OptOutcome {
    let n = obj.domain.dim;
    let space = SpaceSpec { dim: n, p: obj.domain.exponent };
    let mut seeds: Vec<DVector<f64>> = extra_seeds.to_vec();
    seeds.extend(crate::polyhedral::candidates(obj));
    seeds.extend(sample_unit_sphere(&space, cfg.samples.max(1), cfg.seed));
    if (2..=4).contains(&n) {
        seeds.extend(cube_grid_points(n, 4));
    } else if n > 4 && n <= cfg.enumeration_dim {
        // Vertices, edge midpoints and face centres of the cube.
        seeds.extend(cube_grid_points(n, 2));
    }
    let mut scored: Vec<(usize, DVector<f64>, f64)> = seeds
        .into_iter()
        .enumerate()
        .filter_map(|(i, mut x)| {
            if obj.domain.project(&mut x) {
                let v = obj.value(&x);
                v.is_finite().then_some((i, x, v))
            } else {
                None
            }
        })
        .collect();
    let screened = scored.len();
    if scored.is_empty() {
        return OptOutcome { value: obj.constant, argmax: DVector::zeros(n), evaluations: 0 };
    }
    scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut starts: Vec<(usize, DVector<f64>)> = Vec::new();
    for (i, x, _) in scored {
        if starts.len() >= cfg.restarts.max(1) {
            break;
        }
        let duplicate = starts.iter().any(|(_, y)| (y - &x).amax() < 1e-9);
        if !duplicate {
            starts.push((i, x));
        }
    }
    let results: Vec<(usize, DVector<f64>, f64, usize)> = starts
        .into_par_iter()
        .map(|(i, x)| {
            let (x, v, evals) = local_ascent(obj, x, cfg);
            (i, x, v, evals)
        })
        .collect();
    let evaluations = screened + results.iter().map(|r| r.3).sum::<usize>();
    let best = results
        .into_iter()
        .fold(None::<(usize, DVector<f64>, f64)>, |acc, (i, x, v, _)| match acc {
            Some((bi, bx, bv)) if bv > v || (bv == v && bi < i) => Some((bi, bx, bv)),
            _ => Some((i, x, v)),
        })
        .expect("at least one start");
    OptOutcome { value: best.2, argmax: best.1, evaluations }
}

fn local_ascent(obj: &SphereObjective, mut x: DVector<f64>, cfg: &OptimizerConfig) -> (DVector<f64>, f64, usize) {
    let mut f = obj.value(&x);
    let mut evals = 1;

    if obj.is_operator_norm() {
        let term = &obj.terms[0];
        let dual_domain = obj.domain.exponent.dual();
        for _ in 0..cfg.max_iter {
            let y = &term.map * &x;
            let z = term.map.tr_mul(&term.exponent.norming_functional(y.as_slice()));
            let mut cand = dual_domain.norming_functional(z.as_slice());
            if !obj.domain.project(&mut cand) {
                break;
            }
            let fc = obj.value(&cand);
            evals += 1;
            if fc > f {
                let gain = fc - f;
                x = cand;
                f = fc;
                if gain <= cfg.tol * f.abs().max(1.0) {
                    break;
                }
            } else {
                break;
            }
        }
    }

    if !obj.is_smooth() {
        // Fixed-schedule subgradient phase; kinks stall step-halving ascent.
        let mut best = (x.clone(), f);
        let mut cur = x.clone();
        for k in 0..cfg.max_iter.min(200) {
            let g = obj.gradient(&cur);
            let gn = g.norm();
            if gn < 1e-15 {
                break;
            }
            let step = 0.2 / ((k + 1) as f64).sqrt();
            let mut cand = &cur + (step * cur.norm() / gn) * g;
            if !obj.domain.project(&mut cand) {
                break;
            }
            let fc = obj.value(&cand);
            evals += 1;
            if fc > best.1 {
                best = (cand.clone(), fc);
            }
            cur = cand;
        }
        x = best.0;
        f = best.1;
    }

    let mut t = 0.25;
    let mut stalls = 0;
    for _ in 0..cfg.max_iter {
        let g = obj.gradient(&x);
        let gn = g.norm();
        if gn < 1e-15 || !gn.is_finite() {
            break;
        }
        let dir = g * (x.norm() / gn);
        let mut accepted = None;
        while t > 1e-13 {
            let mut cand = &x + t * &dir;
            if obj.domain.project(&mut cand) {
                let fc = obj.value(&cand);
                evals += 1;
                if fc > f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let gain = fc - f;
                x = cand;
                f = fc;
                t = (t * 2.0).min(1.0);
                if gain <= cfg.tol * f.abs().max(1.0) {
                    stalls += 1;
                    if stalls >= 3 {
                        break;
                    }
                } else {
                    stalls = 0;
                }
            }
            None => break,
        }
    }
    (x, f, evals)
}

/// Points of the surface of `[-1, 1]^n` on a grid with `cells` cells per
/// face edge (not normalized).
pub(crate) fn cube_grid_points(n: usize, cells: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    let side = cells + 1;
    let count = side.pow((n - 1) as u32);
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            for idx in 0..count {
                let mut rem = idx;
                let mut v = DVector::zeros(n);
                v[axis] = sign;
                for j in (0..n).filter(|&j| j != axis) {
                    let k = rem % side;
                    rem /= side;
                    v[j] = -1.0 + 2.0 * k as f64 / cells as f64;
                }
                out.push(v);
            }
        }
    }
    out
}

/// Normalizes a list of points onto the sphere of `p`.
pub(crate) fn onto_sphere(points: Vec<DVector<f64>>, p: Exponent) -> Vec<DVector<f64>> {
    points
        .into_iter()
        .map(|mut v| {
            normalize(&mut v, p);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn euclidean_operator_norm_matches_sigma_max() {
        let a = m(3, 2, &[1.0, 2.0, -0.5, 1.0, 0.3, 0.7]);
        let obj = SphereObjective::new(
            Domain::plain(&SpaceSpec::lp(2, 2.0)),
            vec![NormTerm::new(1.0, a.clone(), Exponent::TWO)],
            0.0,
        );
        let out = maximize(&obj, &OptimizerConfig::default(), &[]);
        let sigma = crate::linalg::sigma_max(&a);
        assert!((out.value - sigma).abs() < 1e-9 * sigma, "{} vs {}", out.value, sigma);
    }

    #[test]
    fn negative_terms_and_constant() {
        // sup over the unit circle of ||2x|| - ||x|| - 0.5 = 0.5
        let i2 = DMatrix::identity(2, 2);
        let obj = SphereObjective::new(
            Domain::plain(&SpaceSpec::lp(2, 3.0)),
            vec![
                NormTerm::new(1.0, 2.0 * &i2, Exponent::Finite(3.0)),
                NormTerm::new(-1.0, i2, Exponent::Finite(3.0)),
            ],
            -0.5,
        );
        let out = maximize(&obj, &OptimizerConfig::default(), &[]);
        assert!((out.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shaped_domain_inverts_a_diagonal_map() {
        // sup ||x||_2 / ||diag(1, 4) x||_2 = 1
        let d = m(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        let obj = SphereObjective::new(
            Domain::shaped(d, Exponent::TWO),
            vec![NormTerm::new(1.0, DMatrix::identity(2, 2), Exponent::TWO)],
            0.0,
        );
        let out = maximize(&obj, &OptimizerConfig::default(), &[]);
        assert!((out.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = m(2, 3, &[1.0, -2.0, 0.5, 0.3, 1.0, -1.0]);
        let obj = SphereObjective::new(
            Domain::plain(&SpaceSpec::lp(3, 1.5)),
            vec![NormTerm::new(1.0, a, Exponent::Finite(3.0))],
            0.0,
        );
        let cfg = OptimizerConfig::default();
        let a1 = maximize(&obj, &cfg, &[]);
        let a2 = maximize(&obj, &cfg, &[]);
        assert_eq!(a1.value.to_bits(), a2.value.to_bits());
        assert_eq!(a1.argmax, a2.argmax);
    }

    #[test]
    fn cube_grid_has_expected_size() {
        assert_eq!(cube_grid_points(3, 4).len(), 6 * 25);
        assert_eq!(cube_grid_points(2, 2).len(), 4 * 3);
    }
}
