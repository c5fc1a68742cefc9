//! Rigorous upper bounds for convex, positively homogeneous functions on
//! low-dimensional `l^p` spheres.
//!
//! The surface of the cube `[-1, 1]^n` is triangulated (Kuhn triangulation of
//! a regular grid on each face). The cones over its simplices partition
//! `R^n`. If `x` lies in the cone spanned by sphere points `y_1..y_n`, write
//! `x = sum a_j y_j` with `a_j >= 0` and let `nu` solve `<nu, y_j> = 1`. Then
//! `sum a_j = <nu, x> <= ||nu||_{p*}` for a unit `x`, and convexity gives
//! `f(x) <= ||nu||_{p*} * max_j f(y_j)`.
//!
//! The geometry depends only on `(n, p, cells)` and is cached.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;

use crate::linalg::solve_small;
use crate::spaces::{normalize, Exponent};

struct Mesh {
    n: usize,
    /// Sphere points, `n` coordinates each.
    vertices: Vec<f64>,
    /// `n` vertex indices per simplex.
    simplices: Vec<u32>,
    /// `||nu||_{p*}` per simplex.
    factors: Vec<f64>,
}

type MeshKey = (usize, u64, usize);

fn cache() -> &'static Mutex<HashMap<MeshKey, Arc<Mesh>>> {
    static CACHE: OnceLock<Mutex<HashMap<MeshKey, Arc<Mesh>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn mesh(n: usize, p: Exponent, cells: usize) -> Arc<Mesh> {
    let key = (n, p.as_f64().to_bits(), cells);
    if let Some(m) = cache().lock().expect("mesh cache").get(&key) {
        return m.clone();
    }
    let built = Arc::new(build_mesh(n, p, cells));
    cache().lock().expect("mesh cache").entry(key).or_insert(built).clone()
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(d - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, d - 1);
            out.push(p);
        }
    }
    out
}

fn build_mesh(n: usize, p: Exponent, cells: usize) -> Mesh {
    let d = n - 1;
    let side = cells + 1;
    let per_face = side.pow(d as u32);
    let perms = permutations(d);
    let dual = p.dual();
    let mut vertices = Vec::with_capacity(2 * n * per_face * n);
    let mut simplices = Vec::new();
    let mut factors = Vec::new();

    for axis in 0..n {
        for sign in [1.0, -1.0] {
            let base = vertices.len() / n;
            let others: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
            for idx in 0..per_face {
                let mut v = DVector::zeros(n);
                v[axis] = sign;
                let mut rem = idx;
                for &j in &others {
                    v[j] = -1.0 + 2.0 * (rem % side) as f64 / cells as f64;
                    rem /= side;
                }
                normalize(&mut v, p);
                vertices.extend(v.iter());
            }
            let cell_count = cells.pow(d as u32);
            for cell in 0..cell_count {
                let mut corner = vec![0usize; d];
                let mut rem = cell;
                for c in corner.iter_mut() {
                    *c = rem % cells;
                    rem /= cells;
                }
                for perm in &perms {
                    let mut pos = corner.clone();
                    let mut ids = Vec::with_capacity(n);
                    ids.push(base + flat_index(&pos, side));
                    for &dir in perm {
                        pos[dir] += 1;
                        ids.push(base + flat_index(&pos, side));
                    }
                    let mut a: Vec<f64> = ids
                        .iter()
                        .flat_map(|&i| vertices[i * n..(i + 1) * n].iter().copied())
                        .collect();
                    let mut b = vec![1.0; n];
                    if solve_small(&mut a, &mut b, n).is_none() {
                        continue;
                    }
                    factors.push(dual.norm(&b));
                    simplices.extend(ids.iter().map(|&i| i as u32));
                }
            }
        }
    }
    Mesh { n, vertices, simplices, factors }
}

fn flat_index(pos: &[usize], side: usize) -> usize {
    pos.iter().rev().fold(0, |acc, &c| acc * side + c)
}

/// Upper bound for `sup { f(x) : ||x||_p = 1 }` where `f` is convex and
/// positively homogeneous on `R^n`, `2 <= n <= 4`. Returns `None` outside
/// that range.
pub(crate) fn hull_upper_bound<F>(n: usize, p: Exponent, cells: usize, f: F) -> Option<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(2..=4).contains(&n) || cells == 0 {
        return None;
    }
    let mesh = mesh(n, p, cells);
    let values: Vec<f64> = mesh.vertices.chunks_exact(mesh.n).map(&f).collect();
    let mut best = 0.0_f64;
    for (s, factor) in mesh.simplices.chunks_exact(mesh.n).zip(&mesh.factors) {
        let vmax = s.iter().fold(0.0_f64, |acc, &i| acc.max(values[i as usize]));
        best = best.max(factor * vmax);
    }
    Some(best * (1.0 + 1e-12))
}
