//! The two constructions of a transfer map: propagation along one dense
//! orbit, and holonomy extension over a local product neighborhood.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Method, Sample, TransferMap};
use crate::base::{BasePoint, BaseSystem, LeafSide, TorusPoint, DEFAULT_PERIOD_BUDGET};
use crate::cocycle::product::{Direction, FactorStream};
use crate::cocycle::Cocycle;
use crate::error::{Error, Result};
use crate::holonomy::holonomy;
use crate::operator::{InvertibleOp, Norm, ScaledProduct};
use crate::periodic::{obstruction_check, Verdict};

/// Where the propagated orbit starts.
#[derive(Debug, Clone)]
pub enum Start {
    /// A seeded generic point.
    Seeded(u64),
    Point(BasePoint),
}

/// Periodic obstruction test run before propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precheck {
    pub period_max: usize,
    pub tol_base: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    /// Exact orbit length; `None` runs until every target is within
    /// `grid_eps` of a sample (or the step cap is hit).
    pub orbit_len: Option<u64>,
    pub grid_eps: f64,
    pub precheck: Option<Precheck>,
    pub norm: Norm,
}

/// Step cap of the automatic torus run: the chance that a fixed target stays
/// uncovered is about `exp(−40)`.
fn torus_auto_cap(eps: f64) -> u64 {
    (40.0 / (PI * eps * eps)).ceil() as u64
}

const SFT_STEP_CAP: u64 = 50_000_000;

/// Candidate lookup of probe targets near an orbit point.
enum TargetIndex {
    /// Torus: every target is registered in the 3×3 block of cells around
    /// its own cell.
    Cells { g: usize, occupied: Vec<bool>, lists: HashMap<usize, Vec<u32>> },
    /// SFT: targets keyed by their central window `[−q, q]`.
    Windows { q: i64, lists: HashMap<Vec<u8>, Vec<u32>> },
}

impl TargetIndex {
    fn new(base: &BaseSystem, targets: &[BasePoint], eps: f64) -> Self {
        match base {
            BaseSystem::Toral(_) => {
                let g = ((0.5 / eps).floor() as usize).clamp(1, 8192);
                let mut occupied = vec![false; g * g];
                let mut lists: HashMap<usize, Vec<u32>> = HashMap::new();
                for (t, p) in targets.iter().enumerate() {
                    let (cx, cy) = Self::cell(g, p);
                    for dx in [g - 1, 0, 1] {
                        for dy in [g - 1, 0, 1] {
                            let c = ((cx + dx) % g) * g + (cy + dy) % g;
                            occupied[c] = true;
                            let l = lists.entry(c).or_default();
                            if l.last() != Some(&(t as u32)) {
                                l.push(t as u32);
                            }
                        }
                    }
                }
                TargetIndex::Cells { g, occupied, lists }
            }
            BaseSystem::Sft(s) => {
                let q = (sft_match_depth(s.metric_base(), eps) - 2).max(0);
                let mut lists: HashMap<Vec<u8>, Vec<u32>> = HashMap::new();
                for (t, p) in targets.iter().enumerate() {
                    let w = p.as_symbolic().map(|x| x.window(-q, q + 1)).unwrap_or_default();
                    lists.entry(w).or_default().push(t as u32);
                }
                TargetIndex::Windows { q, lists }
            }
        }
    }

    fn cell(g: usize, p: &BasePoint) -> (usize, usize) {
        let c = p.as_torus().map(TorusPoint::coords).unwrap_or([0.0, 0.0]);
        let gf = g as f64;
        (((c[0] * gf) as usize).min(g - 1), ((c[1] * gf) as usize).min(g - 1))
    }

    fn candidates(&self, x: &BasePoint) -> &[u32] {
        match self {
            TargetIndex::Cells { g, occupied, lists } => {
                let (cx, cy) = Self::cell(*g, x);
                let c = cx * g + cy;
                if occupied[c] {
                    lists.get(&c).map(Vec::as_slice).unwrap_or(&[])
                } else {
                    &[]
                }
            }
            TargetIndex::Windows { q, lists } => match x.as_symbolic() {
                Some(p) => lists.get(&p.window(-q, q + 1)).map(Vec::as_slice).unwrap_or(&[]),
                None => &[],
            },
        }
    }
}

/// Smallest `m` with `β^m ≤ eps`: points agreeing on `|i| < m` are
/// `eps`-close.
fn sft_match_depth(beta: f64, eps: f64) -> i64 {
    ((eps.ln() / beta.ln()) - 1e-12).ceil().max(0.0) as i64
}

struct Best {
    dist: f64,
    index: u64,
    point: BasePoint,
    value: ScaledProduct,
    successor: Option<(BasePoint, ScaledProduct)>,
}

fn targets_of(base: &BaseSystem, probes: &[BasePoint]) -> Vec<BasePoint> {
    let mut t = probes.to_vec();
    t.extend(probes.iter().map(|p| base.iterate(p, 1)));
    t
}

/// Largest distance from a target to its nearest sample.
fn coverage(base: &BaseSystem, map: &TransferMap, targets: &[BasePoint]) -> f64 {
    targets.par_iter().map(|t| map.nearest(base, t).1).reduce(|| 0.0, f64::max)
}

fn run_precheck(cocycle: &Cocycle, base: &BaseSystem, pc: &Precheck, norm: Norm) -> Result<()> {
    let reports = obstruction_check(cocycle, base, pc.period_max, DEFAULT_PERIOD_BUDGET.max(pc.period_max), pc.tol_base, norm)?;
    match reports.iter().find(|r| r.verdict == Verdict::Fail) {
        Some(r) => Err(Error::ObstructionFailed { period: r.period(), deviation: r.deviation }),
        None => Ok(()),
    }
}

/// `C(f^n z₀) = A_{z₀}^n` with `C(z₀) = Id`, kept at the orbit points nearest
/// to each probe and each probe image, together with their successors.
pub fn solve_orbit_propagation(
    cocycle: &Cocycle,
    base: &BaseSystem,
    start: &Start,
    probes: &[BasePoint],
    cfg: &PropagationConfig,
) -> Result<TransferMap> {
    if !(cfg.grid_eps > 0.0 && cfg.grid_eps < 1.0) {
        return Err(Error::Precondition(format!("grid_eps {} not in (0,1)", cfg.grid_eps)));
    }
    if probes.is_empty() {
        return Err(Error::Precondition("no probe points".into()));
    }
    for p in probes {
        base.check_point(p)?;
    }
    if let Some(pc) = &cfg.precheck {
        run_precheck(cocycle, base, pc, cfg.norm)?;
    }
    let eps = cfg.grid_eps;
    let targets = targets_of(base, probes);
    let index = TargetIndex::new(base, &targets, eps);

    let (len, cap) = match (base, cfg.orbit_len) {
        (_, Some(l)) => (l, l),
        (BaseSystem::Toral(_), None) => (torus_auto_cap(eps), torus_auto_cap(eps)),
        (BaseSystem::Sft(s), None) => {
            let m = sft_match_depth(s.metric_base(), eps);
            let rarest = targets
                .iter()
                .filter_map(|t| t.as_symbolic())
                .map(|t| s.cylinder_measure(&t.window(-(m - 1).max(0), m)))
                .fold(1.0, f64::min);
            let l = ((40.0 / rarest).ceil() as u64).min(SFT_STEP_CAP);
            (l, l)
        }
    };
    let z0 = match (start, base) {
        (Start::Point(p), _) => {
            base.check_point(p)?;
            p.clone()
        }
        (Start::Seeded(seed), BaseSystem::Toral(_)) => base.random_point(&mut ChaCha8Rng::seed_from_u64(*seed), 0),
        (Start::Seeded(seed), BaseSystem::Sft(s)) => {
            let margin = sft_match_depth(s.metric_base(), eps) as usize + 4;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            BasePoint::Symbolic(s.random_point(&mut rng, len as usize + 2 * margin + 2, margin))
        }
    };

    let dim = cocycle.dim();
    let mut best: Vec<Option<Best>> = (0..targets.len()).map(|_| None).collect();
    let mut uncovered = targets.len();
    let mut pending: Vec<usize> = Vec::new();
    let mut stream = FactorStream::new(cocycle, base, Direction::Forward);
    let mut x = z0.clone();
    let mut prod = ScaledProduct::identity(dim);
    stream.feed(x.clone())?;
    let mut anchor_successor = None;
    let mut n: u64 = 0;
    loop {
        for t in pending.drain(..) {
            if let Some(b) = best[t].as_mut() {
                b.successor = Some((x.clone(), prod.clone()));
            }
        }
        if n == 1 {
            anchor_successor = Some((x.clone(), prod.clone()));
        }
        if n >= cap {
            break;
        }
        for &t in index.candidates(&x) {
            let t = t as usize;
            let d = base.distance(&x, &targets[t]);
            let improves = best[t].as_ref().is_none_or(|b| d < b.dist);
            if improves {
                let was_covered = best[t].as_ref().is_some_and(|b| b.dist <= eps);
                if !was_covered && d <= eps {
                    uncovered -= 1;
                }
                best[t] = Some(Best { dist: d, index: n, point: x.clone(), value: prod.clone(), successor: None });
                pending.push(t);
            }
        }
        if cfg.orbit_len.is_none() && uncovered == 0 && pending.is_empty() && n >= 1 {
            break;
        }
        let next = base.iterate(&x, 1);
        if let Some(a) = stream.feed(next.clone())? {
            prod.push(&a)?;
        }
        x = next;
        n += 1;
    }

    let mut chosen: BTreeMap<u64, (BasePoint, ScaledProduct)> = BTreeMap::new();
    chosen.insert(0, (z0, ScaledProduct::identity(dim)));
    if let Some(s) = anchor_successor {
        chosen.insert(1, s);
    }
    for b in best.into_iter().flatten() {
        if let Some(s) = b.successor {
            chosen.entry(b.index + 1).or_insert(s);
        }
        chosen.entry(b.index).or_insert((b.point, b.value));
    }
    let samples = chosen
        .into_iter()
        .map(|(i, (point, value))| Sample { point, value, index: Some(i) })
        .collect();
    let mut map = TransferMap { method: Method::OrbitPropagation, samples, anchor: 0, coverage_radius: 0.0, norm: cfg.norm };
    map.coverage_radius = coverage(base, &map, &targets);
    if map.coverage_radius > eps {
        return Err(Error::OrbitNotDense { coverage: map.coverage_radius, grid_eps: eps });
    }
    Ok(map)
}

/// A holonomy-extension solution and the grid points it had to skip.
#[derive(Debug, Clone)]
pub struct HolonomyExtension {
    pub map: TransferMap,
    /// `(point key, reason)`
    pub skipped: Vec<(String, String)>,
}

/// `Ĉ(z) = H^u_{[x₀,z],z}·H^s_{x₀,[x₀,z]}` with `Ĉ(x₀) = Id` on the grid.
/// Points whose bracket fails or whose holonomies are not certified are
/// skipped and listed.
pub fn solve_holonomy_extension(
    cocycle: &Cocycle,
    base: &BaseSystem,
    x0: &BasePoint,
    grid: &[BasePoint],
    tol: f64,
    n_cap: usize,
    norm: Norm,
) -> Result<HolonomyExtension> {
    base.check_point(x0)?;
    let dim = cocycle.dim();
    let one = |z: &BasePoint| -> Result<std::result::Result<InvertibleOp, String>> {
        base.check_point(z)?;
        let w = match base.bracket(x0, z) {
            Ok(w) => w,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let hs = holonomy(cocycle, base, x0, &w, LeafSide::Stable, tol, n_cap, norm)?;
        let hu = holonomy(cocycle, base, &w, z, LeafSide::Unstable, tol, n_cap, norm)?;
        if !hs.certified || !hu.certified {
            return Ok(Err(format!("holonomy not certified (gaps {:e}, {:e})", hs.cauchy_gap, hu.cauchy_gap)));
        }
        Ok(Ok(hu.value.compose(&hs.value)))
    };
    let values = grid.par_iter().map(one).collect::<Result<Vec<_>>>()?;
    let mut samples = vec![Sample { point: x0.clone(), value: ScaledProduct::identity(dim), index: None }];
    let mut skipped = Vec::new();
    for (z, v) in grid.iter().zip(values) {
        match v {
            Ok(op) => {
                if samples.iter().any(|s| base.distance(&s.point, z) == 0.0) {
                    continue;
                }
                samples.push(Sample { point: z.clone(), value: ScaledProduct::from_op(&op)?, index: None });
            }
            Err(reason) => skipped.push((z.key(), reason)),
        }
    }
    let mut map = TransferMap { method: Method::HolonomyExtension, samples, anchor: 0, coverage_radius: 0.0, norm };
    map.coverage_radius = coverage(base, &map, grid);
    Ok(HolonomyExtension { map, skipped })
}

/// Grid points in the product neighborhood of `x₀` with radius `patch`.
/// Torus: `x₀ + s·e_s + u·e_u` for `s, u` on an `m`-point lattice in
/// `[−patch/2, patch/2]`. SFT: `x₀` with its past changed at depth `k₁` and
/// its future at depth `k₂`, for `m` depths each starting at the first depth
/// inside the patch.
pub fn patch_grid<R: Rng + ?Sized>(base: &BaseSystem, x0: &BasePoint, patch: f64, m: usize, rng: &mut R) -> Result<Vec<BasePoint>> {
    let mut out = Vec::with_capacity(m * m + 1);
    match (base, x0) {
        (BaseSystem::Toral(t), BasePoint::Torus(p)) => {
            let (es, eu) = (t.stable_dir(), t.unstable_dir());
            let a = 0.5 * patch * (1.0 - 1e-9);
            let lattice: Vec<f64> = (0..m)
                .map(|i| if m == 1 { 0.0 } else { -a + 2.0 * a * i as f64 / (m - 1) as f64 })
                .collect();
            for &s in &lattice {
                for &u in &lattice {
                    out.push(BasePoint::Torus(p.translate([s * es[0] + u * eu[0], s * es[1] + u * eu[1]])));
                }
            }
        }
        (BaseSystem::Sft(s), BasePoint::Symbolic(_)) => {
            let beta = s.metric_base();
            let k0 = sft_match_depth(beta, patch) + 1;
            out.push(x0.clone());
            for k1 in k0..k0 + m as i64 {
                for k2 in k0..k0 + m as i64 {
                    let y = base.leaf_partner(x0, LeafSide::Stable, beta.powi(k1 as i32), rng)?;
                    out.push(base.leaf_partner(&y, LeafSide::Unstable, beta.powi(k2 as i32), rng)?);
                }
            }
        }
        _ => return Err(Error::InvalidPoint("point does not belong to this base system".into())),
    }
    Ok(out)
}

/// Seeded probe set: a regular `n × n` lattice on the torus (`n²` Parry
/// random points on an SFT), plus `clusters` multiscale clusters whose
/// members sit at distances `≈ 2^{−j}`, `1 ≤ j ≤ 10`, from a random centre.
pub fn default_probes(base: &BaseSystem, seed: u64, n: usize, clusters: usize) -> Result<Vec<BasePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    match base {
        BaseSystem::Toral(_) => {
            let den = 2 * n as i128;
            for i in 0..n as i128 {
                for j in 0..n as i128 {
                    out.push(BasePoint::Torus(TorusPoint::rational([2 * i + 1, 2 * j + 1], den)?));
                }
            }
            for _ in 0..clusters {
                let BasePoint::Torus(c) = base.random_point(&mut rng, 0) else { unreachable!() };
                for j in 1..=10 {
                    let theta: f64 = rng.gen_range(0.0..2.0 * PI);
                    let r = 0.5f64.powi(j);
                    out.push(BasePoint::Torus(c.translate([r * theta.cos(), r * theta.sin()])));
                }
                out.push(BasePoint::Torus(c));
            }
        }
        BaseSystem::Sft(s) => {
            for _ in 0..n * n {
                out.push(base.random_point(&mut rng, 30));
            }
            for _ in 0..clusters {
                let c = base.random_point(&mut rng, 30);
                for j in 1..=10 {
                    let side = if j % 2 == 0 { LeafSide::Stable } else { LeafSide::Unstable };
                    out.push(base.leaf_partner(&c, side, s.metric_base().powi(j), &mut rng)?);
                }
                out.push(c);
            }
        }
    }
    Ok(out)
}
