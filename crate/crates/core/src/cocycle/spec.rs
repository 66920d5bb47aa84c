//! Declarative generator descriptions and their compiled evaluators.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::base::{word_string, BasePoint, BaseSystem};
use crate::error::{Error, Result};
use crate::operator::{expm, inf_norm, InvertibleOp, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Constant,
    ExpTrig,
    LocallyConstant,
    CoboundaryOf,
    Perturbed,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Constant => "constant",
            Kind::ExpTrig => "exp_trig",
            Kind::LocallyConstant => "locally_constant",
            Kind::CoboundaryOf => "coboundary_of",
            Kind::Perturbed => "perturbed",
        }
    }
}

/// `coef · sin(2π·freq·chart(x) + phase)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub coef: Vec<Vec<f64>>,
    pub freq: [i64; 2],
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoWord {
    #[serde(rename = "auto")]
    Auto,
}

/// Declared Hölder constant: a number, or `"auto"` for empirical estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HolderConst {
    Value(f64),
    Auto(AutoWord),
}

/// A generator `A: M → GL(d)` (or a transfer map `C`). Only the fields that
/// belong to `kind` may be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleSpec {
    pub dim: usize,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TrigTerm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<BTreeMap<String, Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<Box<CocycleSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<CocycleSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<HolderConst>,
}

/// Transfer maps share the generator format, restricted to the
/// point-evaluable kinds.
pub type TransferSpec = CocycleSpec;

impl CocycleSpec {
    fn bare(dim: usize, kind: Kind) -> Self {
        CocycleSpec {
            dim,
            kind,
            matrix: None,
            terms: None,
            window: None,
            offset: None,
            table: None,
            transfer: None,
            inner: None,
            alpha: None,
            c0: None,
        }
    }

    pub fn constant(m: &Mat) -> Self {
        let mut s = Self::bare(m.nrows(), Kind::Constant);
        s.matrix = Some(mat_rows(m));
        s
    }

    pub fn exp_trig(dim: usize, terms: Vec<TrigTerm>) -> Self {
        let mut s = Self::bare(dim, Kind::ExpTrig);
        s.terms = Some(terms);
        s
    }

    pub fn locally_constant(dim: usize, window: usize, offset: i64, table: BTreeMap<String, Vec<Vec<f64>>>) -> Self {
        let mut s = Self::bare(dim, Kind::LocallyConstant);
        s.window = Some(window);
        s.offset = Some(offset);
        s.table = Some(table);
        s
    }

    pub fn coboundary_of(transfer: TransferSpec) -> Self {
        let mut s = Self::bare(transfer.dim, Kind::CoboundaryOf);
        s.transfer = Some(Box::new(transfer));
        s
    }

    pub fn perturbed(inner: CocycleSpec, terms: Vec<TrigTerm>) -> Self {
        let mut s = Self::bare(inner.dim, Kind::Perturbed);
        s.alpha = inner.alpha;
        s.inner = Some(Box::new(inner));
        s.terms = Some(terms);
        s
    }

    pub fn with_holder(mut self, alpha: f64, c0: HolderConst) -> Self {
        self.alpha = Some(alpha);
        self.c0 = Some(c0);
        self
    }

    /// The innermost transfer map when this generator is a (perturbed)
    /// coboundary.
    pub fn transfer_part(&self) -> Option<&TransferSpec> {
        match self.kind {
            Kind::CoboundaryOf => self.transfer.as_deref(),
            Kind::Perturbed => self.inner.as_deref().and_then(|i| i.transfer_part()),
            _ => None,
        }
    }

    pub fn is_coboundary(&self) -> bool {
        self.kind == Kind::CoboundaryOf
    }

    fn check_fields(&self, allowed: &[&str]) -> Result<()> {
        let present = [
            ("matrix", self.matrix.is_some()),
            ("terms", self.terms.is_some()),
            ("window", self.window.is_some()),
            ("offset", self.offset.is_some()),
            ("table", self.table.is_some()),
            ("transfer", self.transfer.is_some()),
            ("inner", self.inner.is_some()),
        ];
        for (name, is) in present {
            if is && !allowed.contains(&name) {
                return Err(Error::InvalidSpec(format!("field {name:?} not allowed for kind {}", self.kind.as_str())));
            }
        }
        Ok(())
    }
}

pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn mat_from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Mat> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidSpec(format!("expected a {dim}x{dim} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("non-finite matrix entry".into()));
    }
    Ok(Mat::from_fn(dim, dim, |i, j| rows[i][j]))
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    coef: Mat,
    freq: [f64; 2],
    phase: f64,
}

#[derive(Debug, Clone)]
enum Compiled {
    Constant(InvertibleOp),
    ExpTrig(Vec<CompiledTerm>),
    LocallyConstant { window: usize, offset: i64, table: HashMap<Vec<u8>, InvertibleOp> },
    Coboundary(Box<Compiled>),
    Perturbed { inner: Box<Compiled>, terms: Vec<CompiledTerm> },
}

fn parse_word(key: &str) -> Result<Vec<u8>> {
    if key.contains('-') {
        key.split('-')
            .map(|t| t.parse::<u8>().map_err(|_| Error::InvalidSpec(format!("bad table key {key:?}"))))
            .collect()
    } else {
        key.chars()
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| Error::InvalidSpec(format!("bad table key {key:?}"))))
            .collect()
    }
}

fn compile_terms(terms: &[TrigTerm], dim: usize) -> Result<Vec<CompiledTerm>> {
    terms
        .iter()
        .map(|t| {
            Ok(CompiledTerm {
                coef: mat_from_rows(&t.coef, dim)?,
                freq: [t.freq[0] as f64, t.freq[1] as f64],
                phase: t.phase,
            })
        })
        .collect()
}

fn compile(spec: &CocycleSpec, base: &BaseSystem, as_transfer: bool) -> Result<Compiled> {
    let dim = spec.dim;
    if dim == 0 {
        return Err(Error::InvalidSpec("dim must be positive".into()));
    }
    match spec.kind {
        Kind::Constant => {
            spec.check_fields(&["matrix"])?;
            let m = spec.matrix.as_ref().ok_or_else(|| Error::InvalidSpec("constant needs matrix".into()))?;
            Ok(Compiled::Constant(InvertibleOp::new(mat_from_rows(m, dim)?)?))
        }
        Kind::ExpTrig => {
            spec.check_fields(&["terms"])?;
            let t = spec.terms.as_ref().ok_or_else(|| Error::InvalidSpec("exp_trig needs terms".into()))?;
            Ok(Compiled::ExpTrig(compile_terms(t, dim)?))
        }
        Kind::LocallyConstant => {
            spec.check_fields(&["window", "offset", "table"])?;
            let BaseSystem::Sft(sft) = base else {
                return Err(Error::InvalidSpec("locally_constant needs a symbolic base".into()));
            };
            let window = spec.window.ok_or_else(|| Error::InvalidSpec("locally_constant needs window".into()))?;
            if window == 0 {
                return Err(Error::InvalidSpec("window must be positive".into()));
            }
            let raw = spec.table.as_ref().ok_or_else(|| Error::InvalidSpec("locally_constant needs table".into()))?;
            let mut table = HashMap::with_capacity(raw.len());
            for (key, rows) in raw {
                let w = parse_word(key)?;
                if w.len() != window || !sft.word_admissible(&w) {
                    return Err(Error::InadmissibleWord(key.clone()));
                }
                table.insert(w, InvertibleOp::new(mat_from_rows(rows, dim)?)?);
            }
            Ok(Compiled::LocallyConstant { window, offset: spec.offset.unwrap_or(0), table })
        }
        Kind::CoboundaryOf if !as_transfer => {
            spec.check_fields(&["transfer"])?;
            let t = spec.transfer.as_ref().ok_or_else(|| Error::InvalidSpec("coboundary_of needs transfer".into()))?;
            if t.dim != dim {
                return Err(Error::DimMismatch(dim, t.dim));
            }
            Ok(Compiled::Coboundary(Box::new(compile(t, base, true)?)))
        }
        Kind::Perturbed if !as_transfer => {
            spec.check_fields(&["inner", "terms"])?;
            let inner = spec.inner.as_ref().ok_or_else(|| Error::InvalidSpec("perturbed needs inner".into()))?;
            if inner.dim != dim {
                return Err(Error::DimMismatch(dim, inner.dim));
            }
            let t = spec.terms.as_ref().ok_or_else(|| Error::InvalidSpec("perturbed needs terms".into()))?;
            Ok(Compiled::Perturbed { inner: Box::new(compile(inner, base, false)?), terms: compile_terms(t, dim)? })
        }
        k => Err(Error::InvalidSpec(format!("kind {} is not a point-evaluable transfer map", k.as_str()))),
    }
}

fn trig_exponent(terms: &[CompiledTerm], dim: usize, chart: [f64; 2]) -> Mat {
    let mut x = Mat::zeros(dim, dim);
    for t in terms {
        let s = (TAU * (t.freq[0] * chart[0] + t.freq[1] * chart[1]) + t.phase).sin();
        x += &t.coef * s;
    }
    x
}

fn exp_pair(x: &Mat) -> InvertibleOp {
    InvertibleOp::from_pair_unchecked(expm(x), expm(&(-x)))
}

/// Point evaluation of the point-evaluable kinds.
fn eval_map(c: &Compiled, base: &BaseSystem, dim: usize, x: &BasePoint) -> Result<InvertibleOp> {
    match c {
        Compiled::Constant(a) => Ok(a.clone()),
        Compiled::ExpTrig(terms) => Ok(exp_pair(&trig_exponent(terms, dim, base.chart(x)))),
        Compiled::LocallyConstant { window, offset, table } => {
            let p = x.as_symbolic().ok_or_else(|| Error::InvalidSpec("locally_constant on a torus point".into()))?;
            let w = p.window(*offset, *offset + *window as i64);
            table.get(&w).cloned().ok_or_else(|| Error::InadmissibleWord(word_string(&w)))
        }
        _ => Err(Error::InvalidSpec("not a point-evaluable map".into())),
    }
}

fn sup_coef(terms: &[CompiledTerm]) -> f64 {
    terms.iter().map(|t| inf_norm(&t.coef)).sum()
}

/// A compiled transfer map `C: M → GL(d)`.
#[derive(Debug, Clone)]
pub struct TransferFn {
    spec: TransferSpec,
    compiled: Compiled,
}

impl TransferFn {
    pub fn new(spec: &TransferSpec, base: &BaseSystem) -> Result<Self> {
        Ok(TransferFn { spec: spec.clone(), compiled: compile(spec, base, true)? })
    }
    pub fn spec(&self) -> &TransferSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.spec.dim
    }
    pub fn eval(&self, base: &BaseSystem, x: &BasePoint) -> Result<InvertibleOp> {
        eval_map(&self.compiled, base, self.spec.dim, x)
    }

    /// Analytic bound on `max(‖C‖∞, ‖C⁻¹‖∞)` where one is available.
    pub fn analytic_norm_bound(&self) -> Option<f64> {
        match &self.compiled {
            Compiled::Constant(a) => Some(a.norm_bound(crate::operator::Norm::Inf)),
            Compiled::ExpTrig(t) => Some(sup_coef(t).exp()),
            Compiled::LocallyConstant { table, .. } => {
                Some(table.values().map(|a| a.norm_bound(crate::operator::Norm::Inf)).fold(1.0, f64::max))
            }
            _ => None,
        }
    }

    /// Lipschitz-type constant `L` with `‖C(x) − C(y)‖∞ ≤ L·d(x,y)^γ`, where
    /// `γ` is the chart exponent of the base (1 on the torus and on binary
    /// shifts with base 1/2).
    pub fn lipschitz_bound(&self, base: &BaseSystem) -> f64 {
        let (k, _) = base.chart_holder();
        match &self.compiled {
            Compiled::Constant(_) => 0.0,
            Compiled::ExpTrig(terms) => {
                // ‖e^X − e^Y‖ ≤ e^{max‖X‖,‖Y‖}‖X − Y‖ and |∇ sin(2π f·u)| ≤ 2π|f|₂
                let s = sup_coef(terms);
                let grad: f64 = terms.iter().map(|t| inf_norm(&t.coef) * TAU * t.freq[0].hypot(t.freq[1])).sum();
                s.exp() * grad * k
            }
            Compiled::LocallyConstant { window, offset, table } => {
                let b = table.values().map(|a| a.norm(crate::operator::Norm::Inf)).fold(0.0, f64::max);
                let reach = offset.unsigned_abs().max((offset + *window as i64 - 1).unsigned_abs());
                let beta = match base {
                    BaseSystem::Sft(s) => s.metric_base(),
                    BaseSystem::Toral(_) => 0.5,
                };
                2.0 * b * beta.powi(-(reach as i32))
            }
            _ => f64::INFINITY,
        }
    }
}

/// A compiled cocycle generator.
#[derive(Debug, Clone)]
pub struct Cocycle {
    spec: CocycleSpec,
    compiled: Compiled,
}

impl Cocycle {
    pub fn new(spec: &CocycleSpec, base: &BaseSystem) -> Result<Self> {
        if let Some(a) = spec.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidSpec(format!("alpha {a} not in (0,1]")));
            }
        }
        if let Some(HolderConst::Value(c)) = spec.c0 {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::InvalidSpec(format!("c0 {c} must be a nonnegative number")));
            }
        }
        Ok(Cocycle { spec: spec.clone(), compiled: compile(spec, base, false)? })
    }

    pub fn spec(&self) -> &CocycleSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.spec.dim
    }
    pub fn alpha(&self) -> f64 {
        self.spec.alpha.unwrap_or(1.0)
    }

    pub fn transfer(&self, base: &BaseSystem) -> Option<TransferFn> {
        self.spec.transfer_part().and_then(|t| TransferFn::new(t, base).ok())
    }

    /// `A(x)`; coboundaries evaluate `C(fx)·C(x)⁻¹`.
    pub fn eval(&self, base: &BaseSystem, x: &BasePoint) -> Result<InvertibleOp> {
        let fx = base.iterate(x, 1);
        self.eval_pair(base, x, &fx, None, None).map(|e| e.value)
    }

    /// `A(x)` given `fx`, reusing cached transfer values `C(x)`, `C(fx)` of a
    /// coboundary chain when supplied.
    pub fn eval_pair(
        &self,
        base: &BaseSystem,
        x: &BasePoint,
        fx: &BasePoint,
        c_x: Option<&InvertibleOp>,
        c_fx: Option<&InvertibleOp>,
    ) -> Result<PairEval> {
        eval_pair_rec(&self.compiled, base, self.spec.dim, x, fx, c_x, c_fx)
    }

    /// Hölder ratio data on sampled pairs: `max ‖A(x) − A(y)‖ / d(x,y)^α`.
    pub fn holder_ratio(&self, base: &BaseSystem, pairs: &[(BasePoint, BasePoint)]) -> Result<f64> {
        let alpha = self.alpha();
        let mut worst: f64 = 0.0;
        for (x, y) in pairs {
            let d = base.distance(x, y);
            if d == 0.0 {
                continue;
            }
            let diff = inf_norm(&(self.eval(base, x)?.forward() - self.eval(base, y)?.forward()));
            worst = worst.max(diff / d.powf(alpha));
        }
        Ok(worst)
    }
}

/// A generator value with the transfer values it used, if any.
pub struct PairEval {
    pub value: InvertibleOp,
    pub c_x: Option<InvertibleOp>,
    pub c_fx: Option<InvertibleOp>,
}

fn eval_pair_rec(
    c: &Compiled,
    base: &BaseSystem,
    dim: usize,
    x: &BasePoint,
    fx: &BasePoint,
    c_x: Option<&InvertibleOp>,
    c_fx: Option<&InvertibleOp>,
) -> Result<PairEval> {
    match c {
        Compiled::Coboundary(t) => {
            let cx = match c_x {
                Some(v) => v.clone(),
                None => eval_map(t, base, dim, x)?,
            };
            let cfx = match c_fx {
                Some(v) => v.clone(),
                None => eval_map(t, base, dim, fx)?,
            };
            Ok(PairEval { value: cfx.compose(&cx.inverted()), c_x: Some(cx), c_fx: Some(cfx) })
        }
        Compiled::Perturbed { inner, terms } => {
            let mut r = eval_pair_rec(inner, base, dim, x, fx, c_x, c_fx)?;
            let e = exp_pair(&trig_exponent(terms, dim, base.chart(x)));
            r.value = e.compose(&r.value);
            Ok(r)
        }
        other => Ok(PairEval { value: eval_map(other, base, dim, x)?, c_x: None, c_fx: None }),
    }
}
