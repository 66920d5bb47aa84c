//! Periodic obstruction battery: products at exact periodic points, the
//! identity test, periodic exponent data, near-closing deviations and the
//! distortion inequalities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{BasePoint, BaseSystem, LeafSide, PeriodicOrbit};
use crate::cocycle::exponents::{good_times, norm_bound_over, EpsSchedule};
use crate::cocycle::{orbit_product, Cocycle};
use crate::error::{Error, Result};
use crate::operator::{op_metric, InvertibleOp, Norm, ScaledProduct};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
        }
    }

    /// `pass` iff `value ≤ tol`, `inconclusive` within `10·tol`.
    pub fn classify(value: f64, tol: f64) -> Self {
        if value <= tol {
            Verdict::Pass
        } else if value <= 10.0 * tol {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObstructionReport {
    pub orbit: PeriodicOrbit,
    pub orbit_key: String,
    pub product: ScaledProduct,
    /// `d(A_p^n, Id)`; infinite when the product overflows.
    pub deviation: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Per-orbit generator bound `R = max_j max(‖A(p_j)‖, ‖A(p_j)⁻¹‖)`.
    pub norm_bound: f64,
    pub log_norm: f64,
    pub log_inv_norm: f64,
}

impl ObstructionReport {
    pub fn period(&self) -> usize {
        self.orbit.period()
    }
}

/// `d(P, Id)` for a scaled product, `∞` on overflow.
pub fn identity_deviation(p: &ScaledProduct, norm: Norm) -> f64 {
    if p.log_scale() > 700.0 || p.inv_log_scale() > 700.0 {
        return f64::INFINITY;
    }
    let op = p.to_op();
    match op_metric(&op, &InvertibleOp::identity(p.dim()), norm) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

pub fn check_orbit(cocycle: &Cocycle, base: &BaseSystem, orbit: PeriodicOrbit, tol_base: f64, norm: Norm) -> Result<ObstructionReport> {
    let n = orbit.period();
    let product = orbit_product(cocycle, base, orbit.start(), n as i64)?;
    let norm_bound = norm_bound_over(cocycle, base, &orbit.points, norm)?;
    let deviation = identity_deviation(&product, norm);
    let tolerance = tol_base * norm_bound.powi(2 * n as i32);
    Ok(ObstructionReport {
        orbit_key: base.orbit_key(&orbit),
        orbit,
        log_norm: product.log_norm(norm),
        log_inv_norm: product.log_inv_norm(norm),
        product,
        deviation,
        tolerance,
        verdict: Verdict::classify(deviation, tolerance),
        norm_bound,
    })
}

/// All orbits of minimal period `1..=period_max`, ordered by period and
/// then canonically within each period.
pub fn all_orbits(base: &BaseSystem, period_max: usize, budget: usize) -> Result<Vec<PeriodicOrbit>> {
    let mut out = Vec::new();
    for n in 1..=period_max {
        out.extend(base.enumerate_periodic(n, budget)?);
    }
    Ok(out)
}

/// The identity test `A_p^n = Id` on every orbit with period `≤ period_max`,
/// at tolerance `tol_base·R^{2n}`.
pub fn obstruction_check(
    cocycle: &Cocycle,
    base: &BaseSystem,
    period_max: usize,
    budget: usize,
    tol_base: f64,
    norm: Norm,
) -> Result<Vec<ObstructionReport>> {
    let orbits = all_orbits(base, period_max, budget)?;
    orbits
        .into_par_iter()
        .map(|o| check_orbit(cocycle, base, o, tol_base, norm))
        .collect()
}

/// Overall verdict of a battery: any fail ⇒ fail, else any inconclusive ⇒
/// inconclusive.
pub fn overall(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    verdicts.into_iter().max().unwrap_or(Verdict::Pass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicExponentRow {
    pub period: usize,
    pub orbit_key: String,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicExponents {
    pub sup_plus: f64,
    pub inf_minus: f64,
    pub table: Vec<PeriodicExponentRow>,
}

pub fn periodic_exponents_from(reports: &[ObstructionReport]) -> PeriodicExponents {
    let table: Vec<PeriodicExponentRow> = reports
        .iter()
        .map(|r| {
            let n = r.period() as f64;
            PeriodicExponentRow {
                period: r.period(),
                orbit_key: r.orbit_key.clone(),
                lambda_plus: r.log_norm / n,
                lambda_minus: -r.log_inv_norm / n,
            }
        })
        .collect();
    let sup_plus = table.iter().map(|r| r.lambda_plus).fold(f64::NEG_INFINITY, f64::max);
    let inf_minus = table.iter().map(|r| r.lambda_minus).fold(f64::INFINITY, f64::min);
    PeriodicExponents { sup_plus, inf_minus, table }
}

pub fn periodic_exponents(cocycle: &Cocycle, base: &BaseSystem, period_max: usize, budget: usize, norm: Norm) -> Result<PeriodicExponents> {
    let reports = obstruction_check(cocycle, base, period_max, budget, 0.0, norm)?;
    Ok(periodic_exponents_from(&reports))
}

#[derive(Debug, Clone)]
pub struct NearClosing {
    pub n: usize,
    /// `d(x, f^n x)`
    pub delta: f64,
    /// `d(A_x^n, Id)`
    pub deviation: f64,
    /// `deviation / δ^α`
    pub fitted: f64,
    /// Identity deviation of the closing orbit's product `A_p^n`.
    pub closed_deviation: f64,
    pub closed_verdict: Verdict,
}

pub fn near_closing_deviation(
    cocycle: &Cocycle,
    base: &BaseSystem,
    x: &BasePoint,
    n: usize,
    tol_base: f64,
    norm: Norm,
) -> Result<NearClosing> {
    let closing = base.close_orbit(x, n).map_err(|e| Error::ClosingFailed(e.to_string()))?;
    let p = closing.orbit.start();
    let closed = orbit_product(cocycle, base, p, n as i64)?;
    let closed_deviation = identity_deviation(&closed, norm);
    let r = norm_bound_over(cocycle, base, &closing.orbit.points, norm)?;
    let prod = orbit_product(cocycle, base, x, n as i64)?;
    let deviation = identity_deviation(&prod, norm);
    let delta = closing.delta;
    let fitted = if delta > 0.0 { deviation / delta.powf(cocycle.alpha()) } else { 0.0 };
    Ok(NearClosing {
        n,
        delta,
        deviation,
        fitted,
        closed_deviation,
        closed_verdict: Verdict::classify(closed_deviation, tol_base * r.powi(2 * n as i32)),
    })
}

/// Near returns `(f^m z, n, δ)` of the orbit of `z` with
/// `δ = d(f^m z, f^{m+n} z) < radius` and `n_min ≤ n ≤ n_max`, stratified over
/// `δ` on a log scale and capped at `count`.
pub fn find_near_returns(
    base: &BaseSystem,
    z: &BasePoint,
    orbit_len: usize,
    n_min: usize,
    n_max: usize,
    radius: f64,
    count: usize,
) -> Vec<(BasePoint, usize, f64)> {
    let mut orbit = Vec::with_capacity(orbit_len + n_max + 1);
    let mut p = z.clone();
    for _ in 0..orbit_len + n_max + 1 {
        let next = base.iterate(&p, 1);
        orbit.push(p);
        p = next;
    }
    let mut found = Vec::new();
    for m in 0..orbit_len {
        for n in n_min..=n_max {
            let d = base.distance(&orbit[m], &orbit[m + n]);
            if d > 0.0 && d < radius {
                found.push((m, n, d));
            }
        }
    }
    // stratify: buckets of a quarter decade, round-robin from the smallest δ
    let mut buckets: std::collections::BTreeMap<i64, Vec<(usize, usize, f64)>> = Default::default();
    for f in found {
        buckets.entry((f.2.log10() * 4.0).floor() as i64).or_default().push(f);
    }
    let mut picked = Vec::new();
    let mut depth = 0;
    while picked.len() < count {
        let mut any = false;
        for b in buckets.values() {
            if let Some(&f) = b.get(depth) {
                any = true;
                if picked.len() < count {
                    picked.push(f);
                }
            }
        }
        if !any {
            break;
        }
        depth += 1;
    }
    picked.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    picked.into_iter().map(|(m, n, d)| (orbit[m].clone(), n, d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionMode {
    /// Two-sided exponential closeness, `λ±(p) = 0`.
    Symmetric,
    /// One-sided closeness `d(f^j x, f^j p) ≤ δ·e^{−τj/2}` at a good time `n`.
    HalfRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distortion {
    /// `‖A_p^n‖ / ‖A_x^n‖`
    pub ratio_norm: f64,
    /// `‖(A_p^n)⁻¹‖ / ‖(A_x^n)⁻¹‖`
    pub ratio_inv: f64,
    pub within: bool,
}

/// Exponent tolerance for the `λ±(p) = 0` precondition.
pub const ZERO_EXPONENT_TOL: f64 = 1e-9;

/// Ratio check for the shadowing pair `(p, x)` over `n` steps. `delta` is
/// the closeness amplitude: `d(x, f^n x)` in symmetric mode (with the base
/// closing constant), the half-rate amplitude otherwise.
#[allow(clippy::too_many_arguments)]
pub fn distortion_check(
    cocycle: &Cocycle,
    base: &BaseSystem,
    p: &PeriodicOrbit,
    x: &BasePoint,
    n: usize,
    mode: DistortionMode,
    delta: f64,
    eps: &EpsSchedule,
    norm: Norm,
) -> Result<Distortion> {
    let tau = base.expansion_rate();
    let c_prime = match base {
        BaseSystem::Toral(t) => t.closing_constant(n.max(1)),
        BaseSystem::Sft(_) => 1.0,
    };
    let mut xi = x.clone();
    let mut pi = p.start().clone();
    for j in 0..=n {
        let d = base.distance(&xi, &pi);
        let bound = match mode {
            DistortionMode::Symmetric => c_prime * delta * (-tau * j.min(n - j) as f64).exp(),
            DistortionMode::HalfRate => delta * (-0.5 * tau * j as f64).exp(),
        };
        // relative slack for the float distance of exact points
        if d > bound * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::ProfileViolated { index: j, distance: d, bound });
        }
        xi = base.iterate(&xi, 1);
        pi = base.iterate(&pi, 1);
    }
    let m = p.period() as i64;
    match mode {
        DistortionMode::Symmetric => {
            let pp = orbit_product(cocycle, base, p.start(), m)?;
            let (lp, lm) = (pp.log_norm(norm) / m as f64, -pp.log_inv_norm(norm) / m as f64);
            if lp.abs() > ZERO_EXPONENT_TOL || lm.abs() > ZERO_EXPONENT_TOL {
                return Err(Error::Precondition(format!("periodic exponents ({lp:e}, {lm:e}) are not zero")));
            }
        }
        DistortionMode::HalfRate => {
            let pp = orbit_product(cocycle, base, p.start(), m)?;
            let lambda = pp.log_norm(norm) / m as f64;
            let g = good_times(cocycle, base, p.start(), n, lambda, eps, norm)?;
            if !g.times.contains(&n) {
                return Err(Error::Precondition(format!("n = {n} is not a good time of p")));
            }
        }
    }
    let ap = orbit_product(cocycle, base, p.start(), n as i64)?;
    let ax = orbit_product(cocycle, base, x, n as i64)?;
    let ratio_norm = (ap.log_norm(norm) - ax.log_norm(norm)).exp();
    let ratio_inv = (ap.log_inv_norm(norm) - ax.log_inv_norm(norm)).exp();
    let inside = |r: f64| (0.5..=2.0).contains(&r);
    Ok(Distortion { ratio_norm, ratio_inv, within: inside(ratio_norm) && inside(ratio_inv) })
}

/// A point on the local stable leaf of `p` at distance `s`, for half-rate
/// distortion triples.
pub fn stable_neighbor<R: rand::Rng + ?Sized>(base: &BaseSystem, p: &BasePoint, s: f64, rng: &mut R) -> Result<BasePoint> {
    base.leaf_partner(p, LeafSide::Stable, s, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::CocycleSpec;
    use crate::operator::Mat;

    #[test]
    fn rotation_fails_at_fixed_point() {
        let base = BaseSystem::cat_map();
        let r = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let c = Cocycle::new(&CocycleSpec::constant(&r), &base).unwrap();
        let reps = obstruction_check(&c, &base, 1, 14, 1e-9, Norm::Inf).unwrap();
        assert_eq!(reps.len(), 1);
        assert!((reps[0].deviation - 4.0).abs() < 1e-12);
        assert_eq!(reps[0].verdict, Verdict::Fail);
    }

    #[test]
    fn identity_passes_exactly() {
        let base = BaseSystem::golden_mean();
        let c = Cocycle::new(&CocycleSpec::constant(&Mat::identity(3, 3)), &base).unwrap();
        for r in obstruction_check(&c, &base, 6, 14, 1e-9, Norm::Inf).unwrap() {
            assert_eq!(r.deviation, 0.0);
            assert_eq!(r.verdict, Verdict::Pass);
        }
    }

    #[test]
    fn diagonal_periodic_exponents() {
        let base = BaseSystem::cat_map();
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let c = Cocycle::new(&CocycleSpec::constant(&m), &base).unwrap();
        let pe = periodic_exponents(&c, &base, 5, 14, Norm::Inf).unwrap();
        assert!((pe.sup_plus - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(pe.table.iter().all(|r| (r.lambda_minus + std::f64::consts::LN_2).abs() < 1e-15));
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(Verdict::classify(1.0, 1.0), Verdict::Pass);
        assert_eq!(Verdict::classify(5.0, 1.0), Verdict::Inconclusive);
        assert_eq!(Verdict::classify(11.0, 1.0), Verdict::Fail);
        assert_eq!(Verdict::classify(f64::INFINITY, 1.0), Verdict::Fail);
        assert_eq!(overall([Verdict::Pass, Verdict::Inconclusive]), Verdict::Inconclusive);
    }
}
