//! Finite-dimensional `l^p` sequence spaces.
//!
//! Every space in the laboratory is `R^dim` with an `l^p` norm. The exponent
//! `p = inf` is a distinct variant, never a large float.

use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FrameError, Result};

/// An exponent `p` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    /// Builds an exponent, mapping `+inf` to [`Exponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(FrameError::InvalidExponent { value: p })
        }
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// The conjugate exponent `p*` with `1/p + 1/p* = 1`.
    pub fn dual(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::ONE,
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn is_one(self) -> bool {
        self == Exponent::ONE
    }

    pub fn is_two(self) -> bool {
        self == Exponent::TWO
    }

    pub fn is_infinite(self) -> bool {
        self == Exponent::Infinity
    }

    /// True for `1 < p < inf`, where the norm is smooth away from the axes.
    pub fn is_smooth(self) -> bool {
        matches!(self, Exponent::Finite(p) if p > 1.0)
    }

    /// Value as `f64` (`inf` for [`Exponent::Infinity`]).
    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// The `l^p` norm of `v`.
    ///
    /// Finite exponents factor out the largest modulus first so that large
    /// `p` cannot overflow the power sum.
    pub fn norm(self, v: &[f64]) -> f64 {
        let max = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if max == 0.0 || !max.is_finite() {
            return max;
        }
        match self {
            Exponent::Infinity => max,
            Exponent::Finite(p) if p == 1.0 => v.iter().map(|x| x.abs()).sum(),
            Exponent::Finite(p) if p == 2.0 => {
                let s: f64 = v.iter().map(|x| (x / max) * (x / max)).sum();
                max * s.sqrt()
            }
            Exponent::Finite(p) => {
                let s: f64 = v.iter().map(|x| (x.abs() / max).powf(p)).sum();
                max * s.powf(1.0 / p)
            }
        }
    }

    /// A unit vector of the dual space norming `v`: `<w, v> = ||v||_p` and
    /// `||w||_{p*} = 1`. Returns the zero vector for `v = 0`.
    pub fn norming_functional(self, v: &[f64]) -> DVector<f64> {
        let n = v.len();
        let norm = self.norm(v);
        if norm == 0.0 {
            return DVector::zeros(n);
        }
        match self {
            Exponent::Infinity => {
                let (k, _) = v
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |(bk, bv), (i, x)| {
                        if x.abs() > bv {
                            (i, x.abs())
                        } else {
                            (bk, bv)
                        }
                    });
                let mut w = DVector::zeros(n);
                w[k] = v[k].signum();
                w
            }
            Exponent::Finite(p) if p == 1.0 => {
                DVector::from_iterator(n, v.iter().map(|x| if *x == 0.0 { 0.0 } else { x.signum() }))
            }
            Exponent::Finite(p) => DVector::from_iterator(
                n,
                v.iter().map(|x| x.signum() * (x.abs() / norm).powf(p - 1.0)),
            ),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => Exponent::new(p).map_err(serde::de::Error::custom),
            Raw::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
                other => other
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("invalid exponent '{s}'")))
                    .and_then(|p| Exponent::new(p).map_err(serde::de::Error::custom)),
            },
        }
    }
}

/// `R^dim` with the `l^p` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub dim: usize,
    #[serde(alias = "q")]
    pub p: Exponent,
}

impl SpaceSpec {
    pub fn new(dim: usize, p: Exponent) -> Result<Self> {
        if dim == 0 {
            return Err(FrameError::InvalidArgument("space dimension must be >= 1".into()));
        }
        if let Exponent::Finite(v) = p {
            Exponent::new(v)?;
        }
        Ok(SpaceSpec { dim, p })
    }

    /// Shorthand for tests and examples; panics on invalid input.
    pub fn lp(dim: usize, p: f64) -> Self {
        SpaceSpec::new(dim, Exponent::new(p).expect("valid exponent")).expect("valid space")
    }

    /// The dual space `(l^p)* = l^{p*}`.
    pub fn dual(&self) -> SpaceSpec {
        SpaceSpec { dim: self.dim, p: self.p.dual() }
    }

    /// Reflexive spaces with a Schauder basis: `1 < p < inf`.
    pub fn is_reflexive_cb(&self) -> bool {
        self.p.is_smooth()
    }
}

/// `||v||` in the space `s`.
pub fn norm(v: &[f64], s: &SpaceSpec) -> Result<f64> {
    if v.len() != s.dim {
        return Err(FrameError::DimensionMismatch {
            context: "norm".into(),
            expected: s.dim,
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FrameError::NonFinite { context: "norm".into() });
    }
    Ok(s.p.norm(v))
}

pub fn dual_exponent(p: Exponent) -> Exponent {
    p.dual()
}

/// `||I_n||_{from -> to}` on `R^n`, i.e. `n^{max(0, 1/to - 1/from)}`.
pub fn inclusion_constant(n: usize, from: Exponent, to: Exponent) -> f64 {
    let e = (to.reciprocal() - from.reciprocal()).max(0.0);
    (n as f64).powf(e)
}

/// Rescales a nonzero vector onto the unit sphere of `p`.
pub fn normalize(v: &mut DVector<f64>, p: Exponent) -> f64 {
    let n = p.norm(v.as_slice());
    if n > 0.0 {
        *v /= n;
    }
    n
}

/// Deterministic points on the unit sphere of `s`.
///
/// The list starts with the signed canonical vectors `+-e_i`, followed (for
/// `dim <= 4`) by the normalized sign vectors, one per orthant, then by
/// normalized Gaussian samples drawn from a ChaCha stream seeded with `seed`.
/// Exactly `count` vectors are returned; the structured prefix is truncated
/// when `count` is smaller than it.
pub fn sample_unit_sphere(s: &SpaceSpec, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let n = s.dim;
    let mut out = Vec::with_capacity(count);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(n);
            e[i] = sign;
            out.push(e);
        }
    }
    if n <= 4 && n > 1 {
        for mask in 0..(1u32 << n) {
            let mut v = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
            normalize(&mut v, s.p);
            out.push(v);
        }
    } else if n > 4 {
        for sign in [1.0, -1.0] {
            let mut v = DVector::from_element(n, sign);
            normalize(&mut v, s.p);
            out.push(v);
        }
    }
    out.truncate(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        if normalize(&mut v, s.p) > 0.0 {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&[3.0, 4.0], &SpaceSpec::lp(2, 2.0)).unwrap(), 5.0);
        assert_eq!(norm(&[1.0, -1.0, 1.0], &SpaceSpec::lp(3, 1.0)).unwrap(), 3.0);
        assert_eq!(norm(&[1.0, -2.0], &SpaceSpec::lp(2, f64::INFINITY)).unwrap(), 2.0);
    }

    #[test]
    fn norm_rejects_bad_input() {
        let s = SpaceSpec::lp(2, 2.0);
        assert!(matches!(
            norm(&[1.0], &s),
            Err(FrameError::DimensionMismatch { expected: 2, found: 1, .. })
        ));
        assert!(matches!(norm(&[1.0, f64::NAN], &s), Err(FrameError::NonFinite { .. })));
    }

    #[test]
    fn large_exponent_does_not_overflow() {
        let p = Exponent::Finite(800.0);
        let v = [1e300, 1e300];
        let n = p.norm(&v);
        assert!(n.is_finite());
        assert!((n / 1e300 - 2f64.powf(1.0 / 800.0)).abs() < 1e-12);
    }

    #[test]
    fn dual_exponent_examples() {
        assert_eq!(dual_exponent(Exponent::TWO), Exponent::TWO);
        assert_eq!(dual_exponent(Exponent::ONE), Exponent::Infinity);
        assert_eq!(dual_exponent(Exponent::Infinity), Exponent::ONE);
        assert_eq!(dual_exponent(Exponent::Finite(3.0)), Exponent::Finite(1.5));
    }

    #[test]
    fn exponent_validation() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinity);
        assert!(SpaceSpec::new(0, Exponent::TWO).is_err());
    }

    #[test]
    fn exponent_serde() {
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(e, Exponent::Infinity);
        let e: Exponent = serde_json::from_str("1.5").unwrap();
        assert_eq!(e, Exponent::Finite(1.5));
        assert!(serde_json::from_str::<Exponent>("0.2").is_err());
        assert_eq!(serde_json::to_string(&Exponent::Infinity).unwrap(), "\"inf\"");
        let s: SpaceSpec = serde_json::from_str(r#"{"dim": 3, "q": "inf"}"#).unwrap();
        assert_eq!(s, SpaceSpec { dim: 3, p: Exponent::Infinity });
    }

    #[test]
    fn reflexive_flag() {
        assert!(SpaceSpec::lp(2, 3.0).is_reflexive_cb());
        assert!(!SpaceSpec::lp(2, 1.0).is_reflexive_cb());
        assert!(!SpaceSpec::lp(2, f64::INFINITY).is_reflexive_cb());
    }

    #[test]
    fn sphere_samples_include_canonical_vectors() {
        let s = SpaceSpec::lp(2, 2.0);
        let pts = sample_unit_sphere(&s, 16, 3);
        assert_eq!(pts.len(), 16);
        for target in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            assert!(pts.iter().any(|v| v.as_slice() == target));
        }
    }

    #[test]
    fn sphere_samples_lie_on_sphere_and_are_deterministic() {
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            for dim in [1, 2, 3, 5] {
                let s = SpaceSpec::lp(dim, p);
                let a = sample_unit_sphere(&s, 40, 11);
                let b = sample_unit_sphere(&s, 40, 11);
                assert_eq!(a, b);
                for v in &a {
                    assert!((norm(v.as_slice(), &s).unwrap() - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn orthants_are_covered_in_small_dimension() {
        let s = SpaceSpec::lp(3, 1.5);
        let pts = sample_unit_sphere(&s, 14, 0);
        for mask in 0..8u32 {
            assert!(pts.iter().any(|v| (0..3).all(|i| (v[i] < 0.0) == (mask >> i & 1 == 1) && v[i] != 0.0)));
        }
    }

    #[test]
    fn norming_functional_attains_norm() {
        let v = [0.3, -1.2, 0.7];
        for p in [Exponent::ONE, Exponent::Finite(1.5), Exponent::TWO, Exponent::Finite(4.0), Exponent::Infinity] {
            let w = p.norming_functional(&v);
            let pairing: f64 = w.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            assert!((pairing - p.norm(&v)).abs() < 1e-12);
            assert!((p.dual().norm(w.as_slice()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inclusion_constants() {
        assert_eq!(inclusion_constant(4, Exponent::TWO, Exponent::ONE), 2.0);
        assert_eq!(inclusion_constant(4, Exponent::ONE, Exponent::TWO), 1.0);
        assert_eq!(inclusion_constant(9, Exponent::Infinity, Exponent::TWO), 3.0);
    }
}
