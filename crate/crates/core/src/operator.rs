//! Invertible-matrix arithmetic: induced norms, the metric
//! `d(A, B) = ‖A − B‖ + ‖A⁻¹ − B⁻¹‖`, and log-scaled long products.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Induced operator norm used throughout a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Max absolute row sum. Exact in floating point.
    #[default]
    Inf,
    /// Largest singular value.
    Two,
}

impl Norm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Norm::Inf => "inf",
            Norm::Two => "two",
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" => Ok(Norm::Inf),
            "two" => Ok(Norm::Two),
            other => Err(Error::Config(format!("unknown norm {other:?} (expected inf|two)"))),
        }
    }
}

pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn two_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn operator_norm(m: &Mat, norm: Norm) -> f64 {
    match norm {
        Norm::Inf => inf_norm(m),
        Norm::Two => two_norm(m),
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &Mat) -> Mat {
    let d = m.nrows();
    let nrm = inf_norm(m);
    let squarings = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(squarings);
    let mut term = Mat::identity(d, d);
    let mut acc = Mat::identity(d, d);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        acc += &term;
        if inf_norm(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}

/// A d×d real matrix together with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertibleOp {
    forward: Mat,
    inverse: Mat,
}

impl InvertibleOp {
    pub fn identity(dim: usize) -> Self {
        InvertibleOp { forward: Mat::identity(dim, dim), inverse: Mat::identity(dim, dim) }
    }

    /// Inverts `forward` by LU and checks the pair.
    pub fn new(forward: Mat) -> Result<Self> {
        if !forward.is_square() {
            return Err(Error::DimMismatch(forward.nrows(), forward.ncols()));
        }
        let inverse = forward
            .clone()
            .try_inverse()
            .ok_or(Error::NotInvertible(f64::INFINITY))?;
        Self::from_pair(forward, inverse)
    }

    /// Accepts an explicit (matrix, inverse) pair after checking
    /// `‖F·F⁻¹ − Id‖∞ ≤ 1e−10·d`.
    pub fn from_pair(forward: Mat, inverse: Mat) -> Result<Self> {
        let d = forward.nrows();
        if forward.ncols() != d || inverse.nrows() != d || inverse.ncols() != d {
            return Err(Error::DimMismatch(d, inverse.nrows()));
        }
        if forward.iter().chain(inverse.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator entries".into()));
        }
        let resid = inf_norm(&(&forward * &inverse - Mat::identity(d, d)));
        if resid > 1e-10 * d as f64 {
            return Err(Error::NotInvertible(resid));
        }
        Ok(InvertibleOp { forward, inverse })
    }

    /// Pair known to be mutually inverse by construction (e.g. a materialized
    /// long product, whose residual reflects its conditioning, not an error).
    pub fn from_pair_unchecked(forward: Mat, inverse: Mat) -> Self {
        debug_assert_eq!(forward.shape(), inverse.shape());
        InvertibleOp { forward, inverse }
    }

    pub fn scalar(dim: usize, s: f64) -> Result<Self> {
        Self::from_pair(Mat::identity(dim, dim) * s, Mat::identity(dim, dim) / s)
    }

    pub fn dim(&self) -> usize {
        self.forward.nrows()
    }

    pub fn forward(&self) -> &Mat {
        &self.forward
    }

    pub fn inverse(&self) -> &Mat {
        &self.inverse
    }

    pub fn inverted(&self) -> Self {
        InvertibleOp { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    /// `self ∘ rhs`
    pub fn compose(&self, rhs: &InvertibleOp) -> Self {
        InvertibleOp {
            forward: &self.forward * &rhs.forward,
            inverse: &rhs.inverse * &self.inverse,
        }
    }

    pub fn norm(&self, norm: Norm) -> f64 {
        operator_norm(&self.forward, norm)
    }

    pub fn inv_norm(&self, norm: Norm) -> f64 {
        operator_norm(&self.inverse, norm)
    }

    /// `m(A) = inf_{‖v‖=1} ‖Av‖ = ‖A⁻¹‖⁻¹`
    pub fn m_lower(&self, norm: Norm) -> f64 {
        1.0 / self.inv_norm(norm)
    }

    /// `max(‖A‖, ‖A⁻¹‖)`
    pub fn norm_bound(&self, norm: Norm) -> f64 {
        self.norm(norm).max(self.inv_norm(norm))
    }
}

pub fn op_metric(a: &InvertibleOp, b: &InvertibleOp, norm: Norm) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    Ok(operator_norm(&(a.forward() - b.forward()), norm)
        + operator_norm(&(a.inverse() - b.inverse()), norm))
}

pub fn m_lower(a: &InvertibleOp, norm: Norm) -> f64 {
    a.m_lower(norm)
}

const BAND_LO: f64 = 0.5;
const BAND_HI: f64 = 2.0;

/// An orbit product stored as `e^{log_scale}·unit` with its inverse
/// `e^{inv_log_scale}·inv_unit`, so that products of thousands of factors
/// neither overflow nor underflow. `unit` and `inv_unit` are kept with
/// ∞-norm in `[1/2, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledProduct {
    unit: Mat,
    log_scale: f64,
    inv_unit: Mat,
    inv_log_scale: f64,
    length: usize,
}

fn renormalize(m: &mut Mat, log_scale: &mut f64) -> Result<()> {
    let n = inf_norm(m);
    if !n.is_finite() || n == 0.0 {
        return Err(Error::NonFinite(format!("renormalization norm {n}")));
    }
    if !(BAND_LO..=BAND_HI).contains(&n) {
        *m /= n;
        *log_scale += n.ln();
    }
    Ok(())
}

impl ScaledProduct {
    pub fn identity(dim: usize) -> Self {
        ScaledProduct {
            unit: Mat::identity(dim, dim),
            log_scale: 0.0,
            inv_unit: Mat::identity(dim, dim),
            inv_log_scale: 0.0,
            length: 0,
        }
    }

    pub fn from_op(op: &InvertibleOp) -> Result<Self> {
        let mut p = Self::identity(op.dim());
        p.push(op)?;
        p.length = 1;
        Ok(p)
    }

    pub fn from_parts(unit: Mat, log_scale: f64, inv_unit: Mat, inv_log_scale: f64, length: usize) -> Result<Self> {
        let mut p = ScaledProduct { unit, log_scale, inv_unit, inv_log_scale, length };
        renormalize(&mut p.unit, &mut p.log_scale)?;
        renormalize(&mut p.inv_unit, &mut p.inv_log_scale)?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.unit.nrows()
    }
    pub fn unit(&self) -> &Mat {
        &self.unit
    }
    pub fn inv_unit(&self) -> &Mat {
        &self.inv_unit
    }
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }
    pub fn inv_log_scale(&self) -> f64 {
        self.inv_log_scale
    }
    pub fn len(&self) -> usize {
        self.length
    }
    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    /// Appends `a` on the left: `P ← a·P`, `P⁻¹ ← P⁻¹·a⁻¹`.
    pub fn push(&mut self, a: &InvertibleOp) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::DimMismatch(self.dim(), a.dim()));
        }
        self.unit = a.forward() * &self.unit;
        self.inv_unit = &self.inv_unit * a.inverse();
        renormalize(&mut self.unit, &mut self.log_scale)?;
        renormalize(&mut self.inv_unit, &mut self.inv_log_scale)?;
        self.length += 1;
        Ok(())
    }

    pub fn scaled_compose(&self, a: &InvertibleOp) -> Result<Self> {
        let mut out = self.clone();
        out.push(a)?;
        Ok(out)
    }

    /// `later ∘ self`
    pub fn then(&self, later: &ScaledProduct) -> Result<Self> {
        if later.dim() != self.dim() {
            return Err(Error::DimMismatch(self.dim(), later.dim()));
        }
        ScaledProduct::from_parts(
            &later.unit * &self.unit,
            later.log_scale + self.log_scale,
            &self.inv_unit * &later.inv_unit,
            self.inv_log_scale + later.inv_log_scale,
            self.length + later.length,
        )
    }

    pub fn inverse(&self) -> Self {
        ScaledProduct {
            unit: self.inv_unit.clone(),
            log_scale: self.inv_log_scale,
            inv_unit: self.unit.clone(),
            inv_log_scale: self.log_scale,
            length: self.length,
        }
    }

    /// `log‖P‖`
    pub fn log_norm(&self, norm: Norm) -> f64 {
        self.log_scale + operator_norm(&self.unit, norm).ln()
    }

    /// `log‖P⁻¹‖`
    pub fn log_inv_norm(&self, norm: Norm) -> f64 {
        self.inv_log_scale + operator_norm(&self.inv_unit, norm).ln()
    }

    /// Materializes the product. Entries may be infinite for very long
    /// expanding products.
    pub fn to_op(&self) -> InvertibleOp {
        InvertibleOp::from_pair_unchecked(
            &self.unit * self.log_scale.exp(),
            &self.inv_unit * self.inv_log_scale.exp(),
        )
    }

    /// Metric between two products after aligning each track to the larger
    /// of the two scales; equals `op_metric` divided by those scales.
    pub fn aligned_distance(&self, other: &ScaledProduct, norm: Norm) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(Error::DimMismatch(self.dim(), other.dim()));
        }
        let s = self.log_scale.max(other.log_scale);
        let f = &self.unit * (self.log_scale - s).exp() - &other.unit * (other.log_scale - s).exp();
        let t = self.inv_log_scale.max(other.inv_log_scale);
        let g = &self.inv_unit * (self.inv_log_scale - t).exp()
            - &other.inv_unit * (other.inv_log_scale - t).exp();
        Ok(operator_norm(&f, norm) + operator_norm(&g, norm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn rot(theta: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn metric_examples() {
        let id = InvertibleOp::identity(3);
        assert_eq!(op_metric(&id, &id, Norm::Inf).unwrap(), 0.0);
        let two = InvertibleOp::scalar(3, 2.0).unwrap();
        assert!((op_metric(&id, &two, Norm::Inf).unwrap() - 1.5).abs() < 1e-15);
        let r = InvertibleOp::new(rot(FRAC_PI_2)).unwrap();
        assert!((op_metric(&InvertibleOp::identity(2), &r, Norm::Inf).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn metric_dim_mismatch() {
        let e = op_metric(&InvertibleOp::identity(2), &InvertibleOp::identity(3), Norm::Inf);
        assert_eq!(e, Err(Error::DimMismatch(2, 3)));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(inf_norm(&Mat::identity(3, 3)), 1.0);
        let cat = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        assert_eq!(inf_norm(&cat), 3.0);
        let golden = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((two_norm(&cat) - golden).abs() / golden < 1e-12);
    }

    #[test]
    fn m_lower_examples() {
        assert_eq!(InvertibleOp::identity(2).m_lower(Norm::Inf), 1.0);
        let d = InvertibleOp::new(Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]))).unwrap();
        assert_eq!(d.m_lower(Norm::Inf), 0.5);
        let sr = InvertibleOp::new(rot(0.7) * 2.0).unwrap();
        assert!((sr.m_lower(Norm::Two) - 2.0).abs() < 1e-12);
        assert!((sr.norm(Norm::Two) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        let s = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(InvertibleOp::new(s).is_err());
        let bad = InvertibleOp::from_pair(Mat::identity(2, 2), Mat::identity(2, 2) * 1.1);
        assert!(matches!(bad, Err(Error::NotInvertible(_))));
    }

    #[test]
    fn compose_identity_stays_trivial() {
        let mut p = ScaledProduct::identity(2);
        for _ in 0..100 {
            p.push(&InvertibleOp::identity(2)).unwrap();
        }
        assert_eq!(p.log_scale(), 0.0);
        assert_eq!(p.unit(), &Mat::identity(2, 2));
        assert_eq!(p.len(), 100);
    }

    #[test]
    fn compose_diagonal_powers() {
        let a = InvertibleOp::new(Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]))).unwrap();
        let mut p = ScaledProduct::identity(2);
        for _ in 0..50 {
            p.push(&a).unwrap();
        }
        assert!((p.log_norm(Norm::Inf) - 50.0 * LN_2).abs() < 1e-12);
        assert!((p.log_inv_norm(Norm::Inf) - 50.0 * LN_2).abs() < 1e-12);
        let n = inf_norm(p.unit());
        assert!((0.5..=2.0).contains(&n));
    }

    #[test]
    fn expm_matches_closed_forms() {
        let n = Mat::from_row_slice(2, 2, &[0.0, 0.3, 0.0, 0.0]);
        let e = expm(&n);
        assert!((e - Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0])).abs().max() < 1e-15);
        let g = Mat::from_row_slice(2, 2, &[0.0, -1.3, 1.3, 0.0]);
        assert!((expm(&g) - rot(1.3)).abs().max() < 1e-14);
        let big = Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -3.0]);
        let e = expm(&big);
        assert!((e[(0, 0)] / 3f64.exp() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn then_matches_push_sequence() {
        let a = InvertibleOp::new(Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])).unwrap();
        let b = InvertibleOp::new(rot(0.4) * 1.5).unwrap();
        let mut ab = ScaledProduct::identity(2);
        ab.push(&a).unwrap();
        ab.push(&b).unwrap();
        let pa = ScaledProduct::from_op(&a).unwrap();
        let pb = ScaledProduct::from_op(&b).unwrap();
        let joined = pa.then(&pb).unwrap();
        assert!(ab.aligned_distance(&joined, Norm::Inf).unwrap() < 1e-14);
        assert_eq!(joined.len(), 2);
    }
}
