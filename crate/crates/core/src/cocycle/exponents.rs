//! Orbitwise Lyapunov data: exponent estimates, truncated Lyapunov norms,
//! fiber-bunching membership and good-time sets.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::base::{BasePoint, BaseSystem};
use crate::error::{Error, Result};
use crate::operator::{InvertibleOp, Norm, ScaledProduct};

use super::product::{forward_factors, Direction, FactorStream};
use super::spec::Cocycle;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    /// `(1/n)·log‖A_x^n‖`
    pub lambda_plus: f64,
    /// `−(1/n)·log‖(A_x^n)⁻¹‖`
    pub lambda_minus: f64,
    /// `(m, λ₊(m), λ₋(m))` at `m = n/4, n/2, 3n/4, n`.
    pub checkpoints: Vec<(usize, f64, f64)>,
}

pub fn lyapunov_exponents(cocycle: &Cocycle, base: &BaseSystem, x: &BasePoint, n: usize, norm: Norm) -> Result<ExponentEstimate> {
    if n < 100 {
        return Err(Error::Precondition(format!("orbit length {n} < 100")));
    }
    let marks = [n / 4, n / 2, 3 * n / 4, n];
    let mut prod = ScaledProduct::identity(cocycle.dim());
    let mut stream = FactorStream::new(cocycle, base, Direction::Forward);
    let mut p = x.clone();
    stream.feed(p.clone())?;
    let mut checkpoints = Vec::with_capacity(4);
    for m in 1..=n {
        p = base.iterate(&p, 1);
        if let Some(a) = stream.feed(p.clone())? {
            prod.push(&a)?;
        }
        if marks.contains(&m) {
            let mf = m as f64;
            checkpoints.push((m, prod.log_norm(norm) / mf, -prod.log_inv_norm(norm) / mf));
        }
    }
    let &(_, lambda_plus, lambda_minus) = checkpoints.last().expect("n ≥ 100");
    Ok(ExponentEstimate { lambda_plus, lambda_minus, checkpoints })
}

/// Vector norm compatible with the induced operator norm.
pub fn vector_norm(v: &DVector<f64>, norm: Norm) -> f64 {
    match norm {
        Norm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        Norm::Two => v.norm(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovNorm {
    /// Truncated `Σ_{|n| ≤ trunc} ‖A_x^n u‖·e^{−ε|n|}`
    pub value: f64,
    /// A-priori bound on the discarded tail.
    pub tail_bound: f64,
    pub trunc: usize,
    /// `value / ‖u‖`, the proxy for `K_ε(x)`.
    pub ratio: f64,
}

/// `2‖u‖·q^{T+1}/(1 − q)` with `q = R·e^{−ε}`: both tails beyond `T`.
pub fn lyapunov_tail_bound(r: f64, eps: f64, trunc: usize) -> f64 {
    let q = r * (-eps).exp();
    if q >= 1.0 {
        return f64::INFINITY;
    }
    2.0 * q.powi(trunc as i32 + 1) / (1.0 - q)
}

/// Smallest truncation whose tail bound is below `tail_tol`.
pub fn lyapunov_trunc(r: f64, eps: f64, tail_tol: f64) -> Result<usize> {
    let q = r * (-eps).exp();
    if q >= 1.0 {
        return Err(Error::TailNotNegligible { bound: f64::INFINITY, tol: tail_tol });
    }
    let mut t = 0usize;
    while lyapunov_tail_bound(r, eps, t) >= tail_tol {
        t += 1;
        if t > 1_000_000 {
            return Err(Error::TailNotNegligible { bound: lyapunov_tail_bound(r, eps, t), tol: tail_tol });
        }
    }
    Ok(t)
}

/// Truncated two-sided Lyapunov norm. `r` is the generator norm bound
/// `max(‖A‖, ‖A⁻¹‖)`; `trunc = None` picks the smallest certified
/// truncation. The tail bound is relative to `‖u‖`.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_norm(
    cocycle: &Cocycle,
    base: &BaseSystem,
    x: &BasePoint,
    u: &DVector<f64>,
    eps: f64,
    trunc: Option<usize>,
    r: f64,
    tail_tol: f64,
    norm: Norm,
) -> Result<LyapunovNorm> {
    if !(eps > 0.0) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    if u.len() != cocycle.dim() {
        return Err(Error::DimMismatch(cocycle.dim(), u.len()));
    }
    let trunc = match trunc {
        Some(t) => {
            let b = lyapunov_tail_bound(r, eps, t);
            if b >= tail_tol {
                return Err(Error::TailNotNegligible { bound: b, tol: tail_tol });
            }
            t
        }
        None => lyapunov_trunc(r, eps, tail_tol)?,
    };
    let un = vector_norm(u, norm);
    let mut value = un;
    for dir in [Direction::Forward, Direction::Backward] {
        let mut v = u.clone();
        let mut stream = FactorStream::new(cocycle, base, dir);
        let mut p = x.clone();
        stream.feed(p.clone())?;
        for k in 1..=trunc {
            p = base.iterate(&p, dir.step());
            let a = stream.feed(p.clone())?.expect("stream primed");
            v = a.forward() * v;
            value += vector_norm(&v, norm) * (-eps * k as f64).exp();
        }
    }
    let tail_bound = lyapunov_tail_bound(r, eps, trunc) * un;
    Ok(LyapunovNorm { value, tail_bound, trunc, ratio: if un > 0.0 { value / un } else { 0.0 } })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bunching {
    pub pass: bool,
    /// `min_k (kNθ − Σ_j log(‖B_j‖·‖B_j⁻¹‖))` over both directions.
    pub margin: f64,
    pub forward_margin: f64,
    pub backward_margin: f64,
}

/// Membership of `x` in `D(N, θ)` checked for every `k ≤ k_max`, forward
/// along blocks `A^N_{f^{jN}x}` and backward along `A^{−N}_{f^{−jN}x}`.
pub fn bunching_membership(
    cocycle: &Cocycle,
    base: &BaseSystem,
    x: &BasePoint,
    n_block: usize,
    theta: f64,
    k_max: usize,
    norm: Norm,
) -> Result<Bunching> {
    if n_block == 0 || k_max == 0 {
        return Err(Error::Precondition("N and k_max must be positive".into()));
    }
    let mut margins = [f64::INFINITY; 2];
    for (slot, dir) in [Direction::Forward, Direction::Backward].into_iter().enumerate() {
        let mut stream = FactorStream::new(cocycle, base, dir);
        let mut p = x.clone();
        stream.feed(p.clone())?;
        let mut sum = 0.0;
        for k in 1..=k_max {
            let mut block = ScaledProduct::identity(cocycle.dim());
            for _ in 0..n_block {
                p = base.iterate(&p, dir.step());
                block.push(&stream.feed(p.clone())?.expect("stream primed"))?;
            }
            sum += block.log_norm(norm) + block.log_inv_norm(norm);
            let m = (k * n_block) as f64 * theta - sum;
            margins[slot] = margins[slot].min(m);
        }
    }
    let margin = margins[0].min(margins[1]);
    Ok(Bunching { pass: margin >= 0.0, margin, forward_margin: margins[0], backward_margin: margins[1] })
}

/// Nonincreasing tolerance sequence `ε_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsSchedule {
    /// `ε_i = c/√i` (`ε_0 = c`)
    InvSqrt { c: f64 },
    Constant { c: f64 },
}

impl EpsSchedule {
    pub fn at(&self, i: usize) -> f64 {
        match *self {
            EpsSchedule::InvSqrt { c } => {
                if i == 0 {
                    c
                } else {
                    c / (i as f64).sqrt()
                }
            }
            EpsSchedule::Constant { c } => c,
        }
    }
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule::InvSqrt { c: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodTimes {
    /// Members of `S ⊂ [1, n_max]`, increasing.
    pub times: Vec<usize>,
    /// `|S| / n_max`
    pub density: f64,
    /// `max_{N ≥ n_max/2} |S ∩ [1, N]| / N`
    pub upper_density: f64,
}

/// Slack absorbing roundoff in `a_n − a_{n−i}(f^i x)` comparisons.
pub const GOOD_TIME_SLACK: f64 = 1e-9;

/// `S = {n ≤ n_max : a_n(x) − a_{n−i}(f^i x) ≥ (λ − ε_i)·i ∀ 0 ≤ i ≤ n}`
/// with `a_m(y) = log‖A_y^m‖`.
pub fn good_times(
    cocycle: &Cocycle,
    base: &BaseSystem,
    x: &BasePoint,
    n_max: usize,
    lambda: f64,
    eps: &EpsSchedule,
    norm: Norm,
) -> Result<GoodTimes> {
    let factors = forward_factors(cocycle, base, x, n_max)?;
    good_times_from_factors(&factors, n_max, lambda, eps, norm)
}

pub fn good_times_from_factors(
    factors: &[InvertibleOp],
    n_max: usize,
    lambda: f64,
    eps: &EpsSchedule,
    norm: Norm,
) -> Result<GoodTimes> {
    let dim = factors.first().map(|f| f.dim()).unwrap_or(1);
    // a[i][m] = log‖A_{f^i x}^m‖ for i + m ≤ n_max, stored by start index
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    for i in 0..=n_max {
        let mut row = Vec::with_capacity(n_max - i + 1);
        let mut p = ScaledProduct::identity(dim);
        row.push(0.0);
        for f in &factors[i..n_max] {
            p.push(f)?;
            row.push(p.log_norm(norm));
        }
        a.push(row);
    }
    let times: Vec<usize> = (1..=n_max)
        .filter(|&n| (0..=n).all(|i| a[0][n] - a[i][n - i] >= (lambda - eps.at(i)) * i as f64 - GOOD_TIME_SLACK))
        .collect();
    let density = times.len() as f64 / n_max.max(1) as f64;
    let mut upper: f64 = 0.0;
    let mut count = 0usize;
    let mut it = times.iter().peekable();
    for big_n in 1..=n_max {
        while it.peek().is_some_and(|&&t| t <= big_n) {
            it.next();
            count += 1;
        }
        if 2 * big_n >= n_max {
            upper = upper.max(count as f64 / big_n as f64);
        }
    }
    Ok(GoodTimes { times, density, upper_density: upper })
}

/// `max(‖A(x)‖, ‖A(x)⁻¹‖)` over the given points.
pub fn norm_bound_over(cocycle: &Cocycle, base: &BaseSystem, points: &[BasePoint], norm: Norm) -> Result<f64> {
    let mut r: f64 = 1.0;
    for p in points {
        r = r.max(cocycle.eval(base, p)?.norm_bound(norm));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::TorusPoint;
    use crate::cocycle::spec::CocycleSpec;
    use crate::operator::Mat;
    use std::f64::consts::LN_2;

    fn at() -> BasePoint {
        BasePoint::Torus(TorusPoint::rational([12345, 67890], 2_147_483_647).unwrap())
    }

    #[test]
    fn diagonal_exponents_exact() {
        let base = BaseSystem::cat_map();
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let c = Cocycle::new(&CocycleSpec::constant(&m), &base).unwrap();
        let e = lyapunov_exponents(&c, &base, &at(), 400, Norm::Inf).unwrap();
        for (_, lp, lm) in &e.checkpoints {
            assert!((lp - LN_2).abs() < 1e-12);
            assert!((lm + LN_2).abs() < 1e-12);
        }
        let r = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let c = Cocycle::new(&CocycleSpec::constant(&r), &base).unwrap();
        let e = lyapunov_exponents(&c, &base, &at(), 100, Norm::Inf).unwrap();
        assert_eq!((e.lambda_plus, e.lambda_minus), (0.0, 0.0));
    }

    #[test]
    fn identity_lyapunov_norm_is_geometric() {
        let base = BaseSystem::cat_map();
        let c = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
        let u = DVector::from_vec(vec![0.5, -2.0]);
        let eps = 0.3;
        let ln = lyapunov_norm(&c, &base, &at(), &u, eps, Some(40), 1.0, 1e-3, Norm::Inf).unwrap();
        let want = 2.0 * (1.0 + 2.0 * (1..=40).map(|n| (-eps * n as f64).exp()).sum::<f64>());
        assert!((ln.value - want).abs() < 1e-12);
        let big = lyapunov_norm(&c, &base, &at(), &u, 60.0, None, 1.0, 1e-12, Norm::Inf).unwrap();
        assert!((big.value - 2.0).abs() < 1e-12);
        let refused = lyapunov_norm(&c, &base, &at(), &u, 0.1, None, 2.0, 1e-6, Norm::Inf);
        assert!(matches!(refused, Err(Error::TailNotNegligible { .. })));
    }

    #[test]
    fn bunching_closed_forms() {
        let base = BaseSystem::cat_map();
        let id = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
        let b = bunching_membership(&id, &base, &at(), 3, 0.2, 5, Norm::Inf).unwrap();
        assert!(b.pass);
        assert!((b.margin - 3.0 * 0.2).abs() < 1e-12);
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let d = Cocycle::new(&CocycleSpec::constant(&m), &base).unwrap();
        assert!(bunching_membership(&d, &base, &at(), 4, 2.0 * LN_2 + 1e-9, 6, Norm::Inf).unwrap().pass);
        assert!(!bunching_membership(&d, &base, &at(), 4, 2.0 * LN_2 - 1e-3, 6, Norm::Inf).unwrap().pass);
    }

    #[test]
    fn good_times_additive_cases() {
        let base = BaseSystem::cat_map();
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let d = Cocycle::new(&CocycleSpec::constant(&m), &base).unwrap();
        let g = good_times(&d, &base, &at(), 120, LN_2, &EpsSchedule::Constant { c: 0.0 }, Norm::Inf).unwrap();
        assert_eq!(g.times.len(), 120);
        let id = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
        let g = good_times(&id, &base, &at(), 50, 0.0, &EpsSchedule::default(), Norm::Inf).unwrap();
        assert_eq!(g.density, 1.0);
    }
}
