//! Hyperbolic toral automorphisms of T² with an exact rational fast path.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::snf::{self, gcd, IMat2};
use crate::error::{Error, Result};

/// Denominator used for seeded generic points: the Mersenne prime 2³¹ − 1.
pub const GENERIC_DEN: i128 = 2_147_483_647;
/// Largest denominator accepted by the rational path (keeps products in i128).
pub const MAX_DEN: i128 = 1 << 62;

/// A point of T². The rational variant carries exact coordinates
/// `num / den` with `0 ≤ num < den`, reduced; the float variant is a plain
/// pair in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TorusPoint {
    Rational { num: [i128; 2], den: i128 },
    Float([f64; 2]),
}

fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `x mod 1` in `[−1/2, 1/2)`.
pub fn wrap_half(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

impl TorusPoint {
    pub fn rational(num: [i128; 2], den: i128) -> Result<Self> {
        if den <= 0 || den >= MAX_DEN {
            return Err(Error::InvalidPoint(format!("denominator {den} out of range")));
        }
        let mut n = [num[0].rem_euclid(den), num[1].rem_euclid(den)];
        let g = gcd(gcd(n[0], n[1]), den);
        let den = den / g;
        n[0] /= g;
        n[1] /= g;
        Ok(TorusPoint::Rational { num: n, den })
    }

    pub fn float(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidPoint("non-finite torus coordinate".into()));
        }
        Ok(TorusPoint::Float([wrap_unit(x), wrap_unit(y)]))
    }

    /// Nearest rational point with the given denominator.
    pub fn rational_near(coords: [f64; 2], den: i128) -> Result<Self> {
        let n0 = (wrap_unit(coords[0]) * den as f64).round() as i128;
        let n1 = (wrap_unit(coords[1]) * den as f64).round() as i128;
        Self::rational([n0, n1], den)
    }

    pub fn coords(&self) -> [f64; 2] {
        match self {
            TorusPoint::Rational { num, den } => [num[0] as f64 / *den as f64, num[1] as f64 / *den as f64],
            TorusPoint::Float(c) => *c,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, TorusPoint::Rational { .. })
    }

    /// Translation by a real vector; the result is a float point.
    pub fn translate(&self, v: [f64; 2]) -> TorusPoint {
        let c = self.coords();
        TorusPoint::Float([wrap_unit(c[0] + v[0]), wrap_unit(c[1] + v[1])])
    }

    /// Exact lexicographic comparison for rational points; float fallback.
    pub fn cmp_lex(&self, other: &TorusPoint) -> Ordering {
        match (self, other) {
            (TorusPoint::Rational { num: a, den: p }, TorusPoint::Rational { num: b, den: q }) => {
                (a[0] * q).cmp(&(b[0] * p)).then((a[1] * q).cmp(&(b[1] * p)))
            }
            _ => {
                let (a, b) = (self.coords(), other.coords());
                a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
            }
        }
    }
}

/// Minimal-lift difference `y − x` in `[−1/2, 1/2)²`.
pub fn lift_difference(x: &TorusPoint, y: &TorusPoint) -> [f64; 2] {
    match (x, y) {
        (TorusPoint::Rational { num: a, den: p }, TorusPoint::Rational { num: b, den: q }) => {
            let den = p * q / gcd(*p, *q);
            let mut out = [0.0; 2];
            for i in 0..2 {
                let diff = (b[i] * (den / q) - a[i] * (den / p)).rem_euclid(den);
                let lifted = if 2 * diff >= den { diff - den } else { diff };
                out[i] = lifted as f64 / den as f64;
            }
            out
        }
        _ => {
            let (a, b) = (x.coords(), y.coords());
            [wrap_half(b[0] - a[0]), wrap_half(b[1] - a[1])]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToralSpec {
    pub matrix: [[i64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct ToralAutomorphism {
    matrix: IMat2,
    inverse: IMat2,
    lambda_u: f64,
    lambda_s: f64,
    unstable_dir: [f64; 2],
    stable_dir: [f64; 2],
    expansion_rate: f64,
}

fn mat_pow(m: &IMat2, n: u64) -> IMat2 {
    let mut acc: IMat2 = [[1, 0], [0, 1]];
    let mut base = *m;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = snf::mat_mul(&acc, &base);
        }
        base = snf::mat_mul(&base, &base);
        e >>= 1;
    }
    acc
}

fn mat_pow_mod(m: &IMat2, n: u64, q: i128) -> IMat2 {
    let red = |a: &IMat2| -> IMat2 {
        let mut o = *a;
        for r in o.iter_mut() {
            for v in r.iter_mut() {
                *v = v.rem_euclid(q);
            }
        }
        o
    };
    let mut acc: IMat2 = red(&[[1, 0], [0, 1]]);
    let mut base = red(m);
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc = red(&snf::mat_mul(&acc, &base));
        }
        base = red(&snf::mat_mul(&base, &base));
        e >>= 1;
    }
    acc
}

fn eigvec(m: &IMat2, lambda: f64) -> [f64; 2] {
    let (a, b, c, d) = (m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64);
    let v = if b != 0.0 { [b, lambda - a] } else { [lambda - d, c] };
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let mut v = [v[0] / n, v[1] / n];
    // fix the sign so that the first nonzero component is positive
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

impl ToralAutomorphism {
    pub fn new(spec: &ToralSpec) -> Result<Self> {
        let m: IMat2 = [
            [spec.matrix[0][0] as i128, spec.matrix[0][1] as i128],
            [spec.matrix[1][0] as i128, spec.matrix[1][1] as i128],
        ];
        let det = snf::det(&m);
        if det.abs() != 1 {
            return Err(Error::InvalidBase(format!("|det M| = {} ≠ 1", det.abs())));
        }
        let tr = m[0][0] + m[1][1];
        let hyperbolic = if det == 1 { tr.abs() > 2 } else { tr != 0 };
        if !hyperbolic {
            return Err(Error::InvalidBase("M has an eigenvalue of modulus 1".into()));
        }
        let inverse: IMat2 = [[m[1][1] * det, -m[0][1] * det], [-m[1][0] * det, m[0][0] * det]];
        let (trf, detf) = (tr as f64, det as f64);
        let disc = (trf * trf - 4.0 * detf).sqrt();
        let lambda_u = (trf + trf.signum() * disc) / 2.0;
        let lambda_s = detf / lambda_u;
        Ok(ToralAutomorphism {
            matrix: m,
            inverse,
            lambda_u,
            lambda_s,
            unstable_dir: eigvec(&m, lambda_u),
            stable_dir: eigvec(&m, lambda_s),
            expansion_rate: lambda_u.abs().ln(),
        })
    }

    pub fn spec(&self) -> ToralSpec {
        let m = &self.matrix;
        ToralSpec { matrix: [[m[0][0] as i64, m[0][1] as i64], [m[1][0] as i64, m[1][1] as i64]] }
    }

    pub fn matrix(&self) -> IMat2 {
        self.matrix
    }
    /// `τ = log ρ(M)`
    pub fn expansion_rate(&self) -> f64 {
        self.expansion_rate
    }
    pub fn stable_dir(&self) -> [f64; 2] {
        self.stable_dir
    }
    pub fn unstable_dir(&self) -> [f64; 2] {
        self.unstable_dir
    }
    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }
    pub fn lambda_u(&self) -> f64 {
        self.lambda_u
    }

    /// Integer matrix of `f^n` (negative powers via the integer inverse).
    pub fn power(&self, n: i64) -> IMat2 {
        if n >= 0 {
            mat_pow(&self.matrix, n as u64)
        } else {
            mat_pow(&self.inverse, n.unsigned_abs())
        }
    }

    pub fn iterate(&self, x: &TorusPoint, n: i64) -> TorusPoint {
        match x {
            TorusPoint::Rational { num, den } => {
                let base = if n >= 0 { &self.matrix } else { &self.inverse };
                let p = mat_pow_mod(base, n.unsigned_abs(), *den);
                let n0 = (p[0][0] * num[0] + p[0][1] * num[1]).rem_euclid(*den);
                let n1 = (p[1][0] * num[0] + p[1][1] * num[1]).rem_euclid(*den);
                TorusPoint::Rational { num: [n0, n1], den: *den }
            }
            TorusPoint::Float(c) => {
                let m = if n >= 0 { &self.matrix } else { &self.inverse };
                let (a, b, cc, d) = (m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64);
                let mut p = *c;
                for _ in 0..n.unsigned_abs() {
                    p = [wrap_unit(a * p[0] + b * p[1]), wrap_unit(cc * p[0] + d * p[1])];
                }
                TorusPoint::Float(p)
            }
        }
    }

    pub fn distance(&self, x: &TorusPoint, y: &TorusPoint) -> f64 {
        let d = lift_difference(x, y);
        d[0].hypot(d[1])
    }

    /// Coordinates `(s, u)` with `v = s·e_s + u·e_u`.
    pub fn eigen_coords(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, u) = (self.stable_dir, self.unstable_dir);
        let det = s[0] * u[1] - s[1] * u[0];
        [(v[0] * u[1] - v[1] * u[0]) / det, (s[0] * v[1] - s[1] * v[0]) / det]
    }

    /// `[y, z]`: the point `w` with `w − y` stable and `w − z` unstable.
    pub fn bracket(&self, y: &TorusPoint, z: &TorusPoint, radius: f64) -> Result<TorusPoint> {
        let dist = self.distance(y, z);
        if dist >= radius {
            return Err(Error::TooFarApart { distance: dist, radius });
        }
        if y == z {
            return Ok(y.clone());
        }
        let delta = lift_difference(y, z);
        let [s, _u] = self.eigen_coords(delta);
        if s == 0.0 {
            return Ok(y.clone());
        }
        let v = self.stable_dir;
        Ok(y.translate([s * v[0], s * v[1]]))
    }

    /// All points with `f^n(x) = x`, via the Smith form of `M^n − I`.
    pub fn fixed_points_of_power(&self, n: u64) -> Result<Vec<TorusPoint>> {
        let mut k = mat_pow(&self.matrix, n);
        k[0][0] -= 1;
        k[1][1] -= 1;
        let det = snf::det(&k);
        if det == 0 {
            return Err(Error::SingularClosing);
        }
        let s = snf::smith_normal_form(&k);
        let (d1, d2) = (s.d[0], s.d[1]);
        let mut pts = Vec::with_capacity((d1 * d2) as usize);
        for j1 in 0..d1 {
            for j2 in 0..d2 {
                let a = j1 * (d2 / d1);
                let num = [s.v[0][0] * a + s.v[0][1] * j2, s.v[1][0] * a + s.v[1][1] * j2];
                pts.push(TorusPoint::rational(num, d2)?);
            }
        }
        Ok(pts)
    }

    pub fn minimal_period(&self, x: &TorusPoint, cap: usize) -> Option<usize> {
        let mut y = self.iterate(x, 1);
        for k in 1..=cap {
            if &y == x {
                return Some(k);
            }
            y = self.iterate(&y, 1);
        }
        None
    }

    /// All orbits of minimal period exactly `n`, each rotated to start at its
    /// lexicographically smallest point and sorted.
    pub fn periodic_orbits(&self, n: usize) -> Result<Vec<Vec<TorusPoint>>> {
        let pts = self.fixed_points_of_power(n as u64)?;
        let mut seen: HashSet<([i128; 2], i128)> = HashSet::new();
        let mut orbits = Vec::new();
        for p in pts {
            let TorusPoint::Rational { num, den } = p else { unreachable!() };
            if seen.contains(&(num, den)) {
                continue;
            }
            if self.minimal_period(&p, n) != Some(n) {
                continue;
            }
            let mut orbit = Vec::with_capacity(n);
            let mut q = p.clone();
            for _ in 0..n {
                if let TorusPoint::Rational { num, den } = &q {
                    seen.insert((*num, *den));
                }
                orbit.push(q.clone());
                q = self.iterate(&q, 1);
            }
            let start = (0..n).min_by(|&a, &b| orbit[a].cmp_lex(&orbit[b])).unwrap_or(0);
            orbit.rotate_left(start);
            orbits.push(orbit);
        }
        orbits.sort_by(|a, b| a[0].cmp_lex(&b[0]));
        Ok(orbits)
    }

    /// Exact closing: `p = (M^n − I)⁻¹·m` where `m` is the integer part of
    /// `(M^n − I)·x` on the minimal lift. Returns `p` and `δ = d(x, f^n x)`.
    pub fn close(&self, x: &TorusPoint, n: usize) -> Result<(TorusPoint, f64)> {
        let mut k = mat_pow(&self.matrix, n as u64);
        k[0][0] -= 1;
        k[1][1] -= 1;
        let det = snf::det(&k);
        if det == 0 {
            return Err(Error::SingularClosing);
        }
        let m: [i128; 2] = match x {
            TorusPoint::Rational { num, den } => {
                let mut m = [0i128; 2];
                for i in 0..2 {
                    let kx = k[i][0] * num[0] + k[i][1] * num[1];
                    let r = kx.rem_euclid(*den);
                    let e = if 2 * r >= *den { r - den } else { r };
                    m[i] = (kx - e) / den;
                }
                m
            }
            TorusPoint::Float(c) => {
                let mut m = [0i128; 2];
                for i in 0..2 {
                    let kx = k[i][0] as f64 * c[0] + k[i][1] as f64 * c[1];
                    m[i] = (kx - wrap_half(kx)).round() as i128;
                }
                m
            }
        };
        let adj: IMat2 = [[k[1][1], -k[0][1]], [-k[1][0], k[0][0]]];
        let mut num = [adj[0][0] * m[0] + adj[0][1] * m[1], adj[1][0] * m[0] + adj[1][1] * m[1]];
        let mut den = det;
        if den < 0 {
            den = -den;
            num = [-num[0], -num[1]];
        }
        let p = TorusPoint::rational(num, den)?;
        let delta = self.distance(x, &self.iterate(x, n as i64));
        Ok((p, delta))
    }

    /// Analytic constant `c′` with `d(f^i p, f^i x) ≤ c′·δ·e^{−τ·min(i, n−i)}`.
    pub fn closing_constant(&self, n: usize) -> f64 {
        let (s, u) = (self.stable_dir, self.unstable_dir);
        let p = nalgebra::Matrix2::new(u[0], s[0], u[1], s[1]);
        let inv_norm = p
            .try_inverse()
            .map(|q| q.singular_values().max())
            .unwrap_or(f64::INFINITY);
        2f64.sqrt() * inv_norm / (1.0 - (-self.expansion_rate * n as f64).exp())
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> TorusPoint {
        let a = rng.gen_range(0..GENERIC_DEN);
        let b = rng.gen_range(0..GENERIC_DEN);
        TorusPoint::Rational { num: [a, b], den: GENERIC_DEN }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> ToralAutomorphism {
        ToralAutomorphism::new(&ToralSpec { matrix: [[2, 1], [1, 1]] }).unwrap()
    }

    #[test]
    fn rejects_non_hyperbolic() {
        assert!(ToralAutomorphism::new(&ToralSpec { matrix: [[1, 1], [0, 1]] }).is_err());
        assert!(ToralAutomorphism::new(&ToralSpec { matrix: [[2, 1], [1, 2]] }).is_err());
        assert!(ToralAutomorphism::new(&ToralSpec { matrix: [[0, 1], [1, 0]] }).is_err());
        assert!(ToralAutomorphism::new(&ToralSpec { matrix: [[1, 1], [1, 0]] }).is_ok());
    }

    #[test]
    fn eigen_data() {
        let f = cat();
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((f.lambda_u() - phi2).abs() < 1e-14);
        assert!((f.expansion_rate() - phi2.ln()).abs() < 1e-14);
        let (s, u) = (f.stable_dir(), f.unstable_dir());
        let m = f.matrix();
        let ms = [m[0][0] as f64 * s[0] + m[0][1] as f64 * s[1], m[1][0] as f64 * s[0] + m[1][1] as f64 * s[1]];
        assert!((ms[0] - f.lambda_s() * s[0]).abs() < 1e-14);
        assert!((ms[1] - f.lambda_s() * s[1]).abs() < 1e-14);
        assert!((s[0] * u[0] + s[1] * u[1]).abs() < 1e-14);
    }

    #[test]
    fn iterate_rational_examples() {
        let f = cat();
        let o = TorusPoint::rational([0, 0], 1).unwrap();
        assert_eq!(f.iterate(&o, 7), o);
        let x = TorusPoint::rational([1, 2], 5).unwrap();
        assert_eq!(f.iterate(&x, 1), TorusPoint::rational([4, 3], 5).unwrap());
        assert_eq!(f.iterate(&f.iterate(&x, 5), -5), x);
    }

    #[test]
    fn distance_wraps() {
        let f = cat();
        let x = TorusPoint::float(0.95, 0.0).unwrap();
        let y = TorusPoint::float(0.05, 0.0).unwrap();
        assert!((f.distance(&x, &y) - 0.1).abs() < 1e-12);
        assert_eq!(f.distance(&x, &x), 0.0);
        let a = TorusPoint::rational([19, 0], 20).unwrap();
        let b = TorusPoint::rational([1, 0], 20).unwrap();
        assert_eq!(f.distance(&a, &b), 0.1);
    }

    #[test]
    fn fixed_point_counts() {
        let f = cat();
        assert_eq!(f.fixed_points_of_power(1).unwrap().len(), 1);
        assert_eq!(f.fixed_points_of_power(2).unwrap().len(), 5);
        assert_eq!(f.fixed_points_of_power(3).unwrap().len(), 16);
        for p in f.fixed_points_of_power(4).unwrap() {
            assert_eq!(f.iterate(&p, 4), p);
        }
    }

    #[test]
    fn bracket_on_stable_line() {
        let f = cat();
        let z = TorusPoint::float(0.3, 0.6).unwrap();
        let v = f.stable_dir();
        let y = z.translate([0.05 * v[0], 0.05 * v[1]]);
        let w = f.bracket(&y, &z, 0.25).unwrap();
        let wy = f.eigen_coords(lift_difference(&y, &w));
        let wz = f.eigen_coords(lift_difference(&z, &w));
        assert!(wy[1].abs() < 1e-12, "w − y not stable: {wy:?}");
        assert!(wz[0].abs() < 1e-12, "w − z not unstable: {wz:?}");
        // y and z share a stable leaf, so the unstable leaf of z meets it at z
        assert!(f.distance(&w, &z) < 1e-12);
    }

    #[test]
    fn bracket_too_far() {
        let f = cat();
        let y = TorusPoint::float(0.0, 0.0).unwrap();
        let z = TorusPoint::float(0.4, 0.4).unwrap();
        assert!(matches!(f.bracket(&y, &z, 0.25), Err(Error::TooFarApart { .. })));
    }
}
