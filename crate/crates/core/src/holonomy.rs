//! Stable and unstable holonomies as Cauchy-certified limits.

use crate::base::{BasePoint, BaseSystem, LeafSide};
use crate::cocycle::product::{Direction, FactorStream};
use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::fit::{decades, fit_log_log, LineFit};
use crate::operator::{op_metric, operator_norm, InvertibleOp, Mat, Norm, ScaledProduct};

pub const DEFAULT_HOLONOMY_TOL: f64 = 1e-9;
pub const DEFAULT_HOLONOMY_CAP: usize = 400;
/// Stride of the Cauchy test.
pub const CAUCHY_STRIDE: usize = 5;

#[derive(Debug, Clone)]
pub struct HolonomyResult {
    pub value: InvertibleOp,
    pub side: LeafSide,
    pub y: BasePoint,
    pub z: BasePoint,
    pub iterations_used: usize,
    /// `d(H_n, H_{n+5})` at the last test.
    pub cauchy_gap: f64,
    pub certified: bool,
    /// `(n, gap)` at every stride, for divergence diagnostics.
    pub profile: Vec<(usize, f64)>,
}

fn holonomy_iterate(py: &ScaledProduct, pz: &ScaledProduct) -> Result<InvertibleOp> {
    // (A_z^n)⁻¹·A_y^n
    let h = py.then(&pz.inverse())?;
    let op = h.to_op();
    if op.forward().iter().chain(op.inverse().iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("holonomy iterate overflowed".into()));
    }
    Ok(op)
}

/// `H_{y,z} = lim (A_z^{±n})⁻¹·A_y^{±n}` with `z` on the local `side` leaf
/// of `y`. Not converging within `n_cap` is reported through `certified`.
#[allow(clippy::too_many_arguments)]
pub fn holonomy(
    cocycle: &Cocycle,
    base: &BaseSystem,
    y: &BasePoint,
    z: &BasePoint,
    side: LeafSide,
    tol: f64,
    n_cap: usize,
    norm: Norm,
) -> Result<HolonomyResult> {
    let walk = base.leaf_walk(y, z, side, n_cap)?;
    let dim = cocycle.dim();
    if base.distance(y, z) == 0.0 {
        return Ok(HolonomyResult {
            value: InvertibleOp::identity(dim),
            side,
            y: y.clone(),
            z: z.clone(),
            iterations_used: 0,
            cauchy_gap: 0.0,
            certified: true,
            profile: vec![],
        });
    }
    let dir = match side {
        LeafSide::Stable => Direction::Forward,
        LeafSide::Unstable => Direction::Backward,
    };
    let mut sy = FactorStream::new(cocycle, base, dir);
    let mut sz = FactorStream::new(cocycle, base, dir);
    let mut py = ScaledProduct::identity(dim);
    let mut pz = ScaledProduct::identity(dim);
    let mut iterates: Vec<InvertibleOp> = Vec::with_capacity(n_cap + 1);
    let mut profile = Vec::new();
    for (n, (yn, zn)) in walk.into_iter().enumerate() {
        if let Some(a) = sy.feed(yn)? {
            py.push(&a)?;
        }
        if let Some(a) = sz.feed(zn)? {
            pz.push(&a)?;
        }
        iterates.push(holonomy_iterate(&py, &pz)?);
        if n >= CAUCHY_STRIDE {
            let m = n - CAUCHY_STRIDE;
            let gap = op_metric(&iterates[m], &iterates[n], norm)?;
            profile.push((m, gap));
            if gap <= tol {
                return Ok(HolonomyResult {
                    value: iterates[n].clone(),
                    side,
                    y: y.clone(),
                    z: z.clone(),
                    iterations_used: n,
                    cauchy_gap: gap,
                    certified: true,
                    profile,
                });
            }
        }
    }
    let last = iterates.len() - 1;
    let gap = profile.last().map(|p| p.1).unwrap_or(f64::INFINITY);
    Ok(HolonomyResult {
        value: iterates[last].clone(),
        side,
        y: y.clone(),
        z: z.clone(),
        iterations_used: last,
        cauchy_gap: gap,
        certified: false,
        profile,
    })
}

pub fn stable_holonomy(
    cocycle: &Cocycle,
    base: &BaseSystem,
    y: &BasePoint,
    z: &BasePoint,
    tol: f64,
    n_cap: usize,
    norm: Norm,
) -> Result<HolonomyResult> {
    holonomy(cocycle, base, y, z, LeafSide::Stable, tol, n_cap, norm)
}

pub fn unstable_holonomy(
    cocycle: &Cocycle,
    base: &BaseSystem,
    y: &BasePoint,
    z: &BasePoint,
    tol: f64,
    n_cap: usize,
    norm: Norm,
) -> Result<HolonomyResult> {
    holonomy(cocycle, base, y, z, LeafSide::Unstable, tol, n_cap, norm)
}

/// `d(H_{x,z}, H_{y,z}∘H_{x,y})` for three points on one local leaf.
#[allow(clippy::too_many_arguments)]
pub fn holonomy_chain_check(
    cocycle: &Cocycle,
    base: &BaseSystem,
    x: &BasePoint,
    y: &BasePoint,
    z: &BasePoint,
    side: LeafSide,
    tol: f64,
    n_cap: usize,
    norm: Norm,
) -> Result<f64> {
    let hxz = holonomy(cocycle, base, x, z, side, tol, n_cap, norm)?;
    let hxy = holonomy(cocycle, base, x, y, side, tol, n_cap, norm)?;
    let hyz = holonomy(cocycle, base, y, z, side, tol, n_cap, norm)?;
    op_metric(&hxz.value, &hyz.value.compose(&hxy.value), norm)
}

/// `‖H − Id‖`
pub fn distance_from_identity(h: &InvertibleOp, norm: Norm) -> f64 {
    let d = h.dim();
    operator_norm(&(h.forward() - Mat::identity(d, d)), norm)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HolderFit {
    /// `H = Id` on every pair.
    ExactZero { pairs: usize },
    Fit {
        /// Slope: the `α` estimate.
        alpha: f64,
        /// `exp(intercept)`: the `L` estimate.
        constant: f64,
        residual: f64,
        /// Pairs used in the regression.
        fitted_pairs: usize,
        /// Pairs with `H = Id` exactly (excluded from the regression).
        plateau_pairs: usize,
    },
}

/// Log-log fit of `‖H_{y,z} − Id‖` against `d(y,z)`.
pub fn holonomy_holder_fit(distances: &[f64], deviations: &[f64]) -> Result<HolderFit> {
    if distances.len() < 20 || distances.len() != deviations.len() {
        return Err(Error::InsufficientSpread(format!("{} pairs (need ≥ 20)", distances.len())));
    }
    let dec = decades(distances);
    if dec < 2.0 {
        return Err(Error::InsufficientSpread(format!("distances span {dec:.3} decades (need ≥ 2)")));
    }
    let plateau = deviations.iter().filter(|v| **v == 0.0).count();
    if plateau == deviations.len() {
        return Ok(HolderFit::ExactZero { pairs: plateau });
    }
    let fit: LineFit = fit_log_log(distances, deviations)
        .ok_or_else(|| Error::InsufficientSpread("nonzero deviations at a single distance".into()))?;
    Ok(HolderFit::Fit {
        alpha: fit.slope,
        constant: fit.intercept.exp(),
        residual: fit.residual,
        fitted_pairs: fit.n,
        plateau_pairs: plateau,
    })
}
