//! Orbit products `A_x^n` for both signs of `n`.

use crate::base::{BasePoint, BaseSystem};
use crate::error::Result;
use crate::operator::{InvertibleOp, ScaledProduct};

use super::spec::Cocycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn step(&self) -> i64 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

/// Turns a stream of points `p_0, p_1, …` with `p_{k+1} = f^{±1}(p_k)` into
/// the factors of `A^{±n}`: `A(p_k)` forward, `A(p_{k+1})⁻¹` backward.
/// Transfer-map values are reused between consecutive factors.
pub struct FactorStream<'a> {
    cocycle: &'a Cocycle,
    base: &'a BaseSystem,
    dir: Direction,
    prev: Option<BasePoint>,
    cached: Option<InvertibleOp>,
}

impl<'a> FactorStream<'a> {
    pub fn new(cocycle: &'a Cocycle, base: &'a BaseSystem, dir: Direction) -> Self {
        FactorStream { cocycle, base, dir, prev: None, cached: None }
    }

    /// Feeds the next point; returns the factor ending at it (none for the
    /// first point).
    pub fn feed(&mut self, p: BasePoint) -> Result<Option<InvertibleOp>> {
        let Some(prev) = self.prev.take() else {
            self.prev = Some(p);
            return Ok(None);
        };
        let factor = match self.dir {
            Direction::Forward => {
                let e = self.cocycle.eval_pair(self.base, &prev, &p, self.cached.as_ref(), None)?;
                self.cached = e.c_fx;
                e.value
            }
            Direction::Backward => {
                // prev = f(p): the factor is A(p)⁻¹ and C(prev) is cached
                let e = self.cocycle.eval_pair(self.base, &p, &prev, None, self.cached.as_ref())?;
                self.cached = e.c_x;
                e.value.inverted()
            }
        };
        self.prev = Some(p);
        Ok(Some(factor))
    }
}

/// `A_x^n` as a scaled product with its inverse track.
pub fn orbit_product(cocycle: &Cocycle, base: &BaseSystem, x: &BasePoint, n: i64) -> Result<ScaledProduct> {
    let mut prod = ScaledProduct::identity(cocycle.dim());
    let dir = if n >= 0 { Direction::Forward } else { Direction::Backward };
    let mut stream = FactorStream::new(cocycle, base, dir);
    let mut p = x.clone();
    stream.feed(p.clone())?;
    for _ in 0..n.unsigned_abs() {
        p = base.iterate(&p, dir.step());
        if let Some(a) = stream.feed(p.clone())? {
            prod.push(&a)?;
        }
    }
    Ok(prod)
}

/// Factors `A(f^j x)`, `0 ≤ j < n`.
pub fn forward_factors(cocycle: &Cocycle, base: &BaseSystem, x: &BasePoint, n: usize) -> Result<Vec<InvertibleOp>> {
    let mut out = Vec::with_capacity(n);
    let mut stream = FactorStream::new(cocycle, base, Direction::Forward);
    let mut p = x.clone();
    stream.feed(p.clone())?;
    for _ in 0..n {
        p = base.iterate(&p, 1);
        if let Some(a) = stream.feed(p.clone())? {
            out.push(a);
        }
    }
    Ok(out)
}

/// Running products along an explicit point sequence: element `k` is the
/// product of the first `k` factors.
pub fn running_products(cocycle: &Cocycle, base: &BaseSystem, points: &[BasePoint], dir: Direction) -> Result<Vec<ScaledProduct>> {
    let mut out = Vec::with_capacity(points.len());
    let mut prod = ScaledProduct::identity(cocycle.dim());
    let mut stream = FactorStream::new(cocycle, base, dir);
    for p in points {
        if let Some(a) = stream.feed(p.clone())? {
            prod.push(&a)?;
        }
        out.push(prod.clone());
    }
    Ok(out)
}
