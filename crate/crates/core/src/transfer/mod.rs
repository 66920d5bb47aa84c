//! Numerical transfer maps `C` with `A(x) = C(fx)·C(x)⁻¹`: sample storage,
//! nearest-sample evaluation, residuals, comparison up to a constant and
//! regularity estimates.

mod solve;

pub use solve::{
    default_probes, patch_grid, solve_holonomy_extension, solve_orbit_propagation, HolonomyExtension, Precheck,
    PropagationConfig, Start,
};

use rayon::prelude::*;

use crate::base::{BasePoint, BaseSystem};
use crate::cocycle::{Cocycle, TransferFn};
use crate::error::{Error, Result};
use crate::fit::{decades, fit_log_log};
use crate::operator::{op_metric, InvertibleOp, Norm, ScaledProduct};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    OrbitPropagation,
    HolonomyExtension,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::OrbitPropagation => "orbit_propagation",
            Method::HolonomyExtension => "holonomy_extension",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub point: BasePoint,
    pub value: ScaledProduct,
    /// Orbit index `n` of `f^n z₀` for propagated samples.
    pub index: Option<u64>,
}

/// A transfer map known at finitely many points, evaluated elsewhere by the
/// nearest sample.
#[derive(Debug, Clone)]
pub struct TransferMap {
    pub method: Method,
    pub samples: Vec<Sample>,
    /// Position of the anchor `(z₀, Id)` in `samples`.
    pub anchor: usize,
    /// Largest distance from a probe target to its nearest sample.
    pub coverage_radius: f64,
    pub norm: Norm,
}

/// Anything that assigns a transfer value to a point.
pub trait TransferEval: Sync {
    fn anchor_point(&self) -> &BasePoint;
    /// Value at `x` and the distance to the point it was read from.
    fn value_at(&self, base: &BaseSystem, x: &BasePoint) -> Result<(ScaledProduct, f64)>;
}

impl TransferMap {
    pub fn anchor_sample(&self) -> &Sample {
        &self.samples[self.anchor]
    }

    /// Index of the nearest sample (lowest index on ties) and its distance.
    pub fn nearest(&self, base: &BaseSystem, x: &BasePoint) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, s) in self.samples.iter().enumerate() {
            let d = base.distance(&s.point, x);
            if d < best.1 {
                best = (i, d);
                if d == 0.0 {
                    break;
                }
            }
        }
        best
    }

    /// Every sample right-multiplied by `g`; the anchor value becomes `g`.
    pub fn right_multiplied(&self, g: &InvertibleOp) -> Result<TransferMap> {
        let gp = ScaledProduct::from_op(g)?;
        let samples = self
            .samples
            .iter()
            .map(|s| Ok(Sample { point: s.point.clone(), value: gp.then(&s.value)?, index: s.index }))
            .collect::<Result<Vec<_>>>()?;
        Ok(TransferMap { samples, ..self.clone() })
    }
}

impl TransferEval for TransferMap {
    fn anchor_point(&self) -> &BasePoint {
        &self.anchor_sample().point
    }
    fn value_at(&self, base: &BaseSystem, x: &BasePoint) -> Result<(ScaledProduct, f64)> {
        if self.samples.is_empty() {
            return Err(Error::Precondition("empty transfer map".into()));
        }
        let (i, d) = self.nearest(base, x);
        Ok((self.samples[i].value.clone(), d))
    }
}

/// Closed-form `x ↦ C(x)·C(z₀)⁻¹`.
pub struct ExactTransfer {
    f: TransferFn,
    anchor: BasePoint,
    c0_inv: InvertibleOp,
}

impl ExactTransfer {
    pub fn new(f: TransferFn, base: &BaseSystem, anchor: BasePoint) -> Result<Self> {
        let c0_inv = f.eval(base, &anchor)?.inverted();
        Ok(ExactTransfer { f, anchor, c0_inv })
    }
}

impl TransferEval for ExactTransfer {
    fn anchor_point(&self) -> &BasePoint {
        &self.anchor
    }
    fn value_at(&self, base: &BaseSystem, x: &BasePoint) -> Result<(ScaledProduct, f64)> {
        Ok((ScaledProduct::from_op(&self.f.eval(base, x)?.compose(&self.c0_inv))?, 0.0))
    }
}

fn materialize(p: &ScaledProduct) -> Option<InvertibleOp> {
    let op = p.to_op();
    let finite = op.forward().iter().chain(op.inverse().iter()).all(|v| v.is_finite());
    finite.then_some(op)
}

fn metric_or_inf(a: &InvertibleOp, b: &InvertibleOp, norm: Norm) -> f64 {
    match op_metric(a, b, norm) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub probe: String,
    pub residual: f64,
    /// Distances from `x` and `fx` to the samples used.
    pub coverage_x: f64,
    pub coverage_fx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub sup: f64,
    pub mean: f64,
    pub rows: Vec<ResidualRow>,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let sup = values.clone().fold(0.0, f64::max);
    (sup, values.sum::<f64>() / n)
}

/// `op_metric(A(x), C(fx)·C(x)⁻¹)` over probes.
pub fn residual(
    cocycle: &Cocycle,
    base: &BaseSystem,
    c: &dyn TransferEval,
    probes: &[BasePoint],
    norm: Norm,
) -> Result<ResidualReport> {
    let rows = probes
        .par_iter()
        .map(|x| {
            let fx = base.iterate(x, 1);
            let a = cocycle.eval_pair(base, x, &fx, None, None)?.value;
            let (cx, dx) = c.value_at(base, x)?;
            let (cfx, dfx) = c.value_at(base, &fx)?;
            let r = match cx.inverse().then(&cfx).ok().as_ref().and_then(materialize) {
                Some(q) => metric_or_inf(&a, &q, norm),
                None => f64::INFINITY,
            };
            Ok(ResidualRow { probe: x.key(), residual: r, coverage_x: dx, coverage_fx: dfx })
        })
        .collect::<Result<Vec<_>>>()?;
    let (sup, mean) = summarize(rows.iter().map(|r| r.residual));
    Ok(ResidualReport { sup, mean, rows })
}

/// Residual on consecutive propagated samples `(f^n z₀, f^{n+1} z₀)`, where
/// the construction is exact up to generator roundoff.
pub fn on_orbit_residual(cocycle: &Cocycle, base: &BaseSystem, map: &TransferMap, norm: Norm) -> Result<(f64, usize)> {
    let pairs: Vec<(&Sample, &Sample)> = map
        .samples
        .windows(2)
        .filter(|w| matches!((w[0].index, w[1].index), (Some(a), Some(b)) if b == a + 1))
        .map(|w| (&w[0], &w[1]))
        .collect();
    let worst = pairs
        .par_iter()
        .map(|(s, t)| {
            let a = cocycle.eval_pair(base, &s.point, &t.point, None, None)?.value;
            Ok(match s.value.inverse().then(&t.value).ok().as_ref().and_then(materialize) {
                Some(q) => metric_or_inf(&a, &q, norm),
                None => f64::INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst, pairs.len()))
}

/// `op_metric(A_x^k, C(f^k x)·C(x)⁻¹)` for two propagated samples, with the
/// product recomputed from scratch.
pub fn segment_defect(cocycle: &Cocycle, base: &BaseSystem, s: &Sample, t: &Sample, norm: Norm) -> Result<f64> {
    let (Some(a), Some(b)) = (s.index, t.index) else {
        return Err(Error::Precondition("samples carry no orbit index".into()));
    };
    if b <= a {
        return Err(Error::Precondition("segment must run forward".into()));
    }
    let prod = crate::cocycle::product::orbit_product(cocycle, base, &s.point, (b - a) as i64)?;
    let lhs = materialize(&prod);
    let rhs = s.value.inverse().then(&t.value).ok().as_ref().and_then(materialize);
    Ok(match (lhs, rhs) {
        (Some(l), Some(r)) => metric_or_inf(&l, &r, norm),
        _ => f64::INFINITY,
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub sup: f64,
    pub mean: f64,
    /// `D = C₁(a)⁻¹·C₂(a)` at the anchor `a` of `C₂`.
    pub constant: InvertibleOp,
}

/// `sup_x op_metric(C₂(x), C₁(x)·D)`.
pub fn compare_up_to_constant(
    base: &BaseSystem,
    c1: &dyn TransferEval,
    c2: &dyn TransferEval,
    probes: &[BasePoint],
    norm: Norm,
) -> Result<Comparison> {
    let a = c2.anchor_point();
    let d = c2.value_at(base, a)?.0.then(&c1.value_at(base, a)?.0.inverse())?;
    let constant = materialize(&d).ok_or_else(|| Error::NonFinite("comparison constant overflowed".into()))?;
    let values = probes
        .par_iter()
        .map(|x| {
            let lhs = c2.value_at(base, x)?.0;
            let rhs = d.then(&c1.value_at(base, x)?.0)?;
            Ok(match (materialize(&lhs), materialize(&rhs)) {
                (Some(l), Some(r)) => metric_or_inf(&l, &r, norm),
                _ => f64::INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (sup, mean) = summarize(values.iter().copied());
    Ok(Comparison { sup, mean, constant })
}

/// Error budgets of nearest-sample interpolation for a transfer map with
/// `‖C(x) − C(y)‖∞ ≤ L·d(x,y)^γ` and `‖C^{±1}‖∞ ≤ B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub lipschitz: f64,
    pub gamma: f64,
    pub norm_budget: f64,
    pub dim: usize,
}

impl Budget {
    pub fn for_transfer(f: &TransferFn, base: &BaseSystem, norm_budget: f64) -> Self {
        Budget { lipschitz: f.lipschitz_bound(base), gamma: base.chart_holder().1, norm_budget, dim: f.dim() }
    }

    fn norm_factor(&self, norm: Norm) -> f64 {
        match norm {
            Norm::Inf => 1.0,
            Norm::Two => (self.dim as f64).sqrt(),
        }
    }

    /// Bound on `op_metric(C(s)·K, C(x)·K)` for `d(s,x) ≤ r` and `‖K^{±1}‖ ≤ B`.
    pub fn interpolation(&self, r: f64, norm: Norm) -> f64 {
        let b = self.norm_budget;
        self.lipschitz * r.powf(self.gamma) * b * (1.0 + b * b) * self.norm_factor(norm)
    }

    /// Bound on the residual of a nearest-sample map whose samples are exact
    /// up to a constant right factor: two interpolation errors.
    pub fn residual(&self, r: f64, norm: Norm) -> f64 {
        2.0 * self.interpolation(r, norm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderEstimate {
    /// `∞` when the map is constant on every pair.
    pub alpha: f64,
    pub constant: f64,
    pub residual: f64,
    pub fitted_pairs: usize,
    pub candidate_pairs: usize,
}

/// Log-log regression of `op_metric(C(x), C(y))` against `d(x,y)` over
/// sample pairs with `4·coverage_radius ≤ d ≤ d_max`.
pub fn holder_exponent_estimate(
    base: &BaseSystem,
    map: &TransferMap,
    pair_budget: usize,
    d_max: f64,
    norm: Norm,
) -> Result<HolderEstimate> {
    let n = map.samples.len();
    let total = n * n.saturating_sub(1) / 2;
    let stride = total.div_ceil(pair_budget.max(1)).max(1);
    let mut pairs = Vec::new();
    let mut k = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if k % stride == 0 {
                pairs.push((i, j));
            }
            k += 1;
        }
    }
    let ops: Vec<Option<InvertibleOp>> = map.samples.iter().map(|s| materialize(&s.value)).collect();
    let data: Vec<(f64, f64)> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let d = base.distance(&map.samples[i].point, &map.samples[j].point);
            (d > 0.0).then(|| {
                let v = match (&ops[i], &ops[j]) {
                    (Some(a), Some(b)) => metric_or_inf(a, b, norm),
                    _ => f64::INFINITY,
                };
                (d, v)
            })
        })
        .collect();
    if data.len() < 100 {
        return Err(Error::InsufficientSpread(format!("{} sample pairs (need ≥ 100)", data.len())));
    }
    let all_d: Vec<f64> = data.iter().map(|p| p.0).collect();
    let dec = decades(&all_d);
    if dec < 2.0 {
        return Err(Error::InsufficientSpread(format!("pair distances span {dec:.3} decades (need ≥ 2)")));
    }
    let lo = 4.0 * map.coverage_radius;
    let window: Vec<(f64, f64)> = data.iter().copied().filter(|(d, v)| *d >= lo && *d <= d_max && v.is_finite()).collect();
    if window.iter().all(|p| p.1 == 0.0) {
        return Ok(HolderEstimate {
            alpha: f64::INFINITY,
            constant: 0.0,
            residual: 0.0,
            fitted_pairs: 0,
            candidate_pairs: data.len(),
        });
    }
    let (ds, vs): (Vec<f64>, Vec<f64>) = window.into_iter().unzip();
    let fit = fit_log_log(&ds, &vs)
        .ok_or_else(|| Error::InsufficientSpread(format!("no usable pairs in [{lo:.3e}, {d_max:.3e}]")))?;
    Ok(HolderEstimate {
        alpha: fit.slope,
        constant: fit.intercept.exp(),
        residual: fit.residual,
        fitted_pairs: fit.n,
        candidate_pairs: data.len(),
    })
}
