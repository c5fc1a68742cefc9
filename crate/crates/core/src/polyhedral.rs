//! Exact maximization when every norm involved is `l^1` or `l^inf`.
//!
//! A positive `l^inf` (or `l^1`) term is a maximum of linear forms, so the
//! objective is a maximum of concave, positively homogeneous pieces. Each
//! piece is maximized over the unit ball by a linear program; when the
//! optimum is positive it is attained on the sphere.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};

use crate::optimize::SphereObjective;
use crate::spaces::Exponent;

/// Upper limit on the number of linear programs per objective.
const MAX_PIECES: usize = 4096;

fn polyhedral(e: Exponent) -> bool {
    e.is_one() || e.is_infinite()
}

/// Sign patterns of one positive term: each is a linear form `c^T M x`.
fn linear_forms(map: &DMatrix<f64>, e: Exponent) -> Vec<DVector<f64>> {
    let rows = map.nrows();
    if e.is_infinite() {
        (0..rows)
            .flat_map(|i| {
                let r = map.row(i).transpose();
                [r.clone(), -r]
            })
            .collect()
    } else {
        (0..1usize << rows)
            .map(|mask| {
                let s = DVector::from_fn(rows, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
                map.tr_mul(&s)
            })
            .collect()
    }
}

fn expr(pairs: impl IntoIterator<Item = (Variable, f64)>) -> LinearExpr {
    let mut e = LinearExpr::empty();
    for (v, c) in pairs {
        if c != 0.0 {
            e.add(v, c);
        }
    }
    e
}

/// `|(m x)_j| <= bound_j` for every row, with `bound` given per row.
fn abs_rows(problem: &mut Problem, x: &[Variable], m: &DMatrix<f64>, bound: impl Fn(usize) -> (Variable, f64)) {
    for j in 0..m.nrows() {
        let (b, rhs) = bound(j);
        for sign in [1.0, -1.0] {
            let mut e = expr(x.iter().enumerate().map(|(k, &v)| (v, sign * m[(j, k)])));
            e.add(b, -1.0);
            problem.add_constraint(e, ComparisonOp::Le, rhs);
        }
    }
}

/// Solves one piece; returns the maximizer over the unit ball.
fn solve_piece(obj: &SphereObjective, linear: &DVector<f64>) -> Option<DVector<f64>> {
    let n = obj.domain.dim;
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let x: Vec<Variable> = (0..n).map(|k| problem.add_var(linear[k], (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for t in obj.terms.iter().filter(|t| t.weight < 0.0) {
        let w = -t.weight;
        if t.exponent.is_infinite() {
            let s = problem.add_var(-w, (0.0, f64::INFINITY));
            abs_rows(&mut problem, &x, &t.map, |_| (s, 0.0));
        } else {
            let s: Vec<Variable> = (0..t.map.nrows()).map(|_| problem.add_var(-w, (0.0, f64::INFINITY))).collect();
            abs_rows(&mut problem, &x, &t.map, |j| (s[j], 0.0));
        }
    }
    let shape = obj.domain.shape.clone().unwrap_or_else(|| DMatrix::identity(n, n));
    if obj.domain.exponent.is_infinite() {
        // |(S x)_j| <= 1, with a constant bound expressed through a fixed variable.
        let one = problem.add_var(0.0, (1.0, 1.0));
        abs_rows(&mut problem, &x, &shape, |_| (one, 0.0));
    } else {
        let u: Vec<Variable> = (0..shape.nrows()).map(|_| problem.add_var(0.0, (0.0, f64::INFINITY))).collect();
        abs_rows(&mut problem, &x, &shape, |j| (u[j], 0.0));
        problem.add_constraint(expr(u.iter().map(|&v| (v, 1.0))), ComparisonOp::Le, 1.0);
    }
    let solution = problem.solve().ok()?.into_solution().ok()?;
    Some(DVector::from_iterator(n, x.iter().map(|&v| solution.var_value(v))))
}

/// Maximizers of every piece, or nothing when the objective is not
/// polyhedral or has too many pieces. The points are not normalized.
pub(crate) fn candidates(obj: &SphereObjective) -> Vec<DVector<f64>> {
    if !polyhedral(obj.domain.exponent) || !obj.terms.iter().all(|t| polyhedral(t.exponent)) {
        return Vec::new();
    }
    let mut pieces = vec![DVector::zeros(obj.domain.dim)];
    for t in obj.terms.iter().filter(|t| t.weight > 0.0) {
        if t.exponent.is_one() && t.map.nrows() > 12 {
            return Vec::new();
        }
        let forms = linear_forms(&t.map, t.exponent);
        if pieces.len() * forms.len() > MAX_PIECES {
            return Vec::new();
        }
        pieces = pieces.iter().flat_map(|p| forms.iter().map(move |f| p + f * t.weight)).collect();
    }
    pieces.iter().filter_map(|lin| solve_piece(obj, lin)).filter(|x| x.amax() > 1e-14).collect()
}
