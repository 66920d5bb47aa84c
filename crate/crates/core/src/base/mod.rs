//! Uniformly hyperbolic base systems: hyperbolic toral automorphisms and
//! subshifts of finite type behind one dispatching interface.

pub mod sft;
pub mod snf;
pub mod torus;

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use sft::{GluedOrbit, Sft, SftSpec, SymbolicPoint};
pub use torus::{lift_difference, ToralAutomorphism, ToralSpec, TorusPoint};

use crate::error::{Error, Result};

pub const DEFAULT_PERIOD_BUDGET: usize = 14;
pub const TORUS_PRODUCT_RADIUS: f64 = 0.25;
pub const TORUS_CLOSING_RADIUS: f64 = 0.1;
/// Largest transversal component accepted for a torus leaf pair.
pub const LEAF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BaseSpec {
    Toral { matrix: [[i64; 2]; 2] },
    Sft {
        adjacency: Vec<Vec<u8>>,
        #[serde(default = "default_metric_base")]
        metric_base: f64,
        #[serde(default = "default_true")]
        mixing: bool,
    },
}

fn default_metric_base() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone)]
pub enum BaseSystem {
    Toral(ToralAutomorphism),
    Sft(Sft),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasePoint {
    Torus(TorusPoint),
    Symbolic(SymbolicPoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafSide {
    Stable,
    Unstable,
}

impl LeafSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            LeafSide::Stable => "stable",
            LeafSide::Unstable => "unstable",
        }
    }
}

/// A periodic orbit of minimal period `points.len()`, with
/// `f(points[i]) = points[(i + 1) % n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub points: Vec<BasePoint>,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }
    pub fn start(&self) -> &BasePoint {
        &self.points[0]
    }
}

#[derive(Debug, Clone)]
pub struct ClosingResult {
    /// Orbit of the closing point `p`, starting at `p`.
    pub orbit: PeriodicOrbit,
    /// `δ = d(x, f^n x)`
    pub delta: f64,
    /// Reported constant `c′` of the closeness profile.
    pub c_prime: f64,
    /// `d(f^i p, f^i x)` for `0 ≤ i ≤ n`.
    pub profile: Vec<f64>,
    /// `max_i d(f^i p, f^i x) / (δ·e^{−τ min(i, n−i)})`; `0` when `δ = 0`.
    pub measured_constant: f64,
}

impl BasePoint {
    pub fn as_torus(&self) -> Option<&TorusPoint> {
        match self {
            BasePoint::Torus(p) => Some(p),
            _ => None,
        }
    }
    pub fn as_symbolic(&self) -> Option<&SymbolicPoint> {
        match self {
            BasePoint::Symbolic(p) => Some(p),
            _ => None,
        }
    }

    /// Stable text form: exact rationals as `a/q,b/q`, floats with 17
    /// significant digits, symbolic points as the window `[-8, 8]`.
    pub fn key(&self) -> String {
        match self {
            BasePoint::Torus(TorusPoint::Rational { num, den }) => format!("{}/{den};{}/{den}", num[0], num[1]),
            BasePoint::Torus(TorusPoint::Float(c)) => format!("{:.16e};{:.16e}", c[0], c[1]),
            BasePoint::Symbolic(s) => {
                let past = word_string(&s.window(-8, 0));
                let future = word_string(&s.window(0, 9));
                format!("{past}.{future}")
            }
        }
    }
}

pub fn word_string(w: &[u8]) -> String {
    if w.iter().all(|&s| s < 10) {
        w.iter().map(|s| char::from(b'0' + s)).collect()
    } else {
        w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
    }
}

impl BaseSystem {
    pub fn from_spec(spec: &BaseSpec) -> Result<Self> {
        match spec {
            BaseSpec::Toral { matrix } => Ok(BaseSystem::Toral(ToralAutomorphism::new(&ToralSpec { matrix: *matrix })?)),
            BaseSpec::Sft { adjacency, metric_base, mixing } => Ok(BaseSystem::Sft(Sft::new(&SftSpec {
                adjacency: adjacency.clone(),
                metric_base: *metric_base,
                mixing: *mixing,
            })?)),
        }
    }

    pub fn cat_map() -> Self {
        BaseSystem::Toral(ToralAutomorphism::new(&ToralSpec { matrix: [[2, 1], [1, 1]] }).expect("cat map is hyperbolic"))
    }

    pub fn golden_mean() -> Self {
        BaseSystem::Sft(
            Sft::new(&SftSpec { adjacency: vec![vec![1, 1], vec![1, 0]], metric_base: 0.5, mixing: true })
                .expect("golden-mean shift is mixing"),
        )
    }

    pub fn full_shift(k: usize) -> Self {
        BaseSystem::Sft(
            Sft::new(&SftSpec { adjacency: vec![vec![1; k]; k], metric_base: 0.5, mixing: true })
                .expect("full shift is mixing"),
        )
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, BaseSystem::Toral(_))
    }

    pub fn expansion_rate(&self) -> f64 {
        match self {
            BaseSystem::Toral(t) => t.expansion_rate(),
            BaseSystem::Sft(s) => s.expansion_rate(),
        }
    }

    pub fn product_structure_radius(&self) -> f64 {
        match self {
            BaseSystem::Toral(_) => TORUS_PRODUCT_RADIUS,
            BaseSystem::Sft(s) => s.metric_base(),
        }
    }

    pub fn closing_radius(&self) -> f64 {
        match self {
            BaseSystem::Toral(_) => TORUS_CLOSING_RADIUS,
            BaseSystem::Sft(s) => s.metric_base(),
        }
    }

    fn mismatch() -> Error {
        Error::InvalidPoint("point does not belong to this base system".into())
    }

    pub fn check_point(&self, x: &BasePoint) -> Result<()> {
        match (self, x) {
            (BaseSystem::Toral(_), BasePoint::Torus(_)) => Ok(()),
            (BaseSystem::Sft(_), BasePoint::Symbolic(_)) => Ok(()),
            _ => Err(Self::mismatch()),
        }
    }

    pub fn iterate(&self, x: &BasePoint, n: i64) -> BasePoint {
        match (self, x) {
            (BaseSystem::Toral(t), BasePoint::Torus(p)) => BasePoint::Torus(t.iterate(p, n)),
            (BaseSystem::Sft(s), BasePoint::Symbolic(p)) => BasePoint::Symbolic(s.iterate(p, n)),
            _ => panic!("point does not belong to this base system"),
        }
    }

    pub fn distance(&self, x: &BasePoint, y: &BasePoint) -> f64 {
        match (self, x, y) {
            (BaseSystem::Toral(t), BasePoint::Torus(a), BasePoint::Torus(b)) => t.distance(a, b),
            (BaseSystem::Sft(s), BasePoint::Symbolic(a), BasePoint::Symbolic(b)) => s.distance(a, b),
            _ => panic!("point does not belong to this base system"),
        }
    }

    /// `[y, z]` with the default product-structure radius.
    pub fn bracket(&self, y: &BasePoint, z: &BasePoint) -> Result<BasePoint> {
        self.bracket_within(y, z, self.product_structure_radius())
    }

    pub fn bracket_within(&self, y: &BasePoint, z: &BasePoint, radius: f64) -> Result<BasePoint> {
        match (self, y, z) {
            (BaseSystem::Toral(t), BasePoint::Torus(a), BasePoint::Torus(b)) => Ok(BasePoint::Torus(t.bracket(a, b, radius)?)),
            (BaseSystem::Sft(s), BasePoint::Symbolic(a), BasePoint::Symbolic(b)) => {
                Ok(BasePoint::Symbolic(s.bracket(a, b, radius)?))
            }
            _ => Err(Self::mismatch()),
        }
    }

    /// Continuous chart into `[0,1)²` used by trigonometric generators.
    /// Symbolic points map to `(Σ_{i≥0} x_i a^{−i−1}, Σ_{i≥1} x_{−i} a^{−i})`
    /// for alphabet size `a`.
    pub fn chart(&self, x: &BasePoint) -> [f64; 2] {
        match (self, x) {
            (_, BasePoint::Torus(p)) => p.coords(),
            (BaseSystem::Sft(s), BasePoint::Symbolic(p)) => {
                let a = s.alphabet_size() as f64;
                let terms = (60.0 / a.log2()).ceil() as i64;
                let (mut u, mut v) = (0.0, 0.0);
                for i in (0..terms).rev() {
                    u = (u + p.symbol(i) as f64) / a;
                    v = (v + p.symbol(-i - 1) as f64) / a;
                }
                [u, v]
            }
            _ => panic!("point does not belong to this base system"),
        }
    }

    /// Hölder data `(K, γ)` of the chart: `‖chart(x) − chart(y)‖ ≤ K·d(x,y)^γ`.
    pub fn chart_holder(&self) -> (f64, f64) {
        match self {
            BaseSystem::Toral(_) => (1.0, 1.0),
            BaseSystem::Sft(s) => {
                let gamma = ((s.alphabet_size() as f64).ln() / -s.metric_base().ln()).min(1.0);
                (2f64.sqrt(), gamma)
            }
        }
    }

    /// Seeded generic point. Symbolic points carry a Parry-random word on
    /// `[−span, span]`; torus points are rationals with a large prime
    /// denominator, so arbitrarily long orbits stay exact.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, span: usize) -> BasePoint {
        match self {
            BaseSystem::Toral(t) => BasePoint::Torus(t.random_point(rng)),
            BaseSystem::Sft(s) => BasePoint::Symbolic(s.random_point(rng, 2 * span + 1, span)),
        }
    }

    pub fn orbit_key(&self, orbit: &PeriodicOrbit) -> String {
        match orbit.start() {
            BasePoint::Symbolic(p) => word_string(&p.window(0, orbit.period() as i64)),
            other => other.key(),
        }
    }

    /// All orbits of minimal period exactly `n`, canonically ordered.
    pub fn enumerate_periodic(&self, n: usize, budget: usize) -> Result<Vec<PeriodicOrbit>> {
        if n == 0 {
            return Err(Error::InvalidPoint("period must be at least 1".into()));
        }
        if n > budget {
            return Err(Error::PeriodBudgetExceeded { requested: n, budget });
        }
        match self {
            BaseSystem::Toral(t) => Ok(t
                .periodic_orbits(n)?
                .into_iter()
                .map(|pts| PeriodicOrbit { points: pts.into_iter().map(BasePoint::Torus).collect() })
                .collect()),
            BaseSystem::Sft(s) => s
                .cycle_words(n)
                .into_iter()
                .map(|w| {
                    let p = s.periodic_point(&w)?;
                    Ok(PeriodicOrbit { points: (0..n as i64).map(|i| BasePoint::Symbolic(p.shifted(i))).collect() })
                })
                .collect(),
        }
    }

    /// Number of points with `f^n x = x`: `|det(M^n − I)|` or `trace(A^n)`.
    pub fn fixed_point_count(&self, n: usize) -> u128 {
        match self {
            BaseSystem::Toral(t) => {
                let mut k = t.power(n as i64);
                k[0][0] -= 1;
                k[1][1] -= 1;
                snf::det(&k).unsigned_abs()
            }
            BaseSystem::Sft(s) => s.trace_power(n),
        }
    }

    pub fn minimal_period(&self, x: &BasePoint, cap: usize) -> Option<usize> {
        let mut y = self.iterate(x, 1);
        for k in 1..=cap {
            if &y == x {
                return Some(k);
            }
            y = self.iterate(&y, 1);
        }
        None
    }

    fn orbit_of(&self, p: BasePoint, n: usize) -> PeriodicOrbit {
        let period = self.minimal_period(&p, n).unwrap_or(n);
        let mut points = Vec::with_capacity(period);
        let mut q = p;
        for _ in 0..period {
            let next = self.iterate(&q, 1);
            points.push(q);
            q = next;
        }
        PeriodicOrbit { points }
    }

    /// Constructive closing of the segment `x, …, f^n x` with the default
    /// closing radius.
    pub fn close_orbit(&self, x: &BasePoint, n: usize) -> Result<ClosingResult> {
        self.close_orbit_within(x, n, self.closing_radius())
    }

    pub fn close_orbit_within(&self, x: &BasePoint, n: usize, radius: f64) -> Result<ClosingResult> {
        if n == 0 {
            return Err(Error::ClosingFailed("period must be positive".into()));
        }
        let fnx = self.iterate(x, n as i64);
        let delta = self.distance(x, &fnx);
        if delta >= radius {
            return Err(Error::NotCloseEnough { distance: delta, radius });
        }
        let (p, c_prime) = match (self, x) {
            (BaseSystem::Toral(t), BasePoint::Torus(xp)) => {
                let (p, _) = t.close(xp, n)?;
                (BasePoint::Torus(p), t.closing_constant(n))
            }
            (BaseSystem::Sft(s), BasePoint::Symbolic(xp)) => {
                let (p, _) = s.close(xp, n)?;
                (BasePoint::Symbolic(p), 1.0)
            }
            _ => return Err(Self::mismatch()),
        };
        let tau = self.expansion_rate();
        let mut profile = Vec::with_capacity(n + 1);
        let mut measured: f64 = 0.0;
        let (mut pi, mut xi) = (p.clone(), x.clone());
        for i in 0..=n {
            let d = self.distance(&pi, &xi);
            if delta > 0.0 {
                let scale = delta * (-tau * i.min(n - i) as f64).exp();
                measured = measured.max(d / scale);
            }
            profile.push(d);
            pi = self.iterate(&pi, 1);
            xi = self.iterate(&xi, 1);
        }
        Ok(ClosingResult { orbit: self.orbit_of(p, n), delta, c_prime, profile, measured_constant: measured })
    }

    /// Offset of `z` from the local leaf of `y`: the transversal component on
    /// the torus, `metric_base^k` at the first violating index on the SFT,
    /// `0` on the leaf.
    pub fn leaf_offset(&self, y: &BasePoint, z: &BasePoint, side: LeafSide) -> f64 {
        match (self, y, z) {
            (BaseSystem::Toral(t), BasePoint::Torus(a), BasePoint::Torus(b)) => {
                let [s, u] = t.eigen_coords(lift_difference(a, b));
                match side {
                    LeafSide::Stable => u.abs(),
                    LeafSide::Unstable => s.abs(),
                }
            }
            (BaseSystem::Sft(s), BasePoint::Symbolic(a), BasePoint::Symbolic(b)) => {
                // stable leaf: agreement on i ≥ 0; unstable: on i ≤ 0
                match sft::first_difference_on(a, b, side == LeafSide::Unstable) {
                    Some(k) => s.metric_base().powi(k as i32),
                    None => 0.0,
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Pairs `(f^{±j} y, f^{±j} z)` for `0 ≤ j ≤ n` along a common leaf
    /// (forward for stable, backward for unstable). On the torus the partner
    /// orbit is carried as `f^j y + c·λ^j·v`, so no error is amplified.
    pub fn leaf_walk(&self, y: &BasePoint, z: &BasePoint, side: LeafSide, n: usize) -> Result<Vec<(BasePoint, BasePoint)>> {
        let off = self.leaf_offset(y, z, side);
        let bad = match self {
            BaseSystem::Toral(_) => off > LEAF_TOL,
            BaseSystem::Sft(_) => off > 0.0,
        };
        if bad {
            return Err(match side {
                LeafSide::Stable => Error::NotOnStableLeaf(off),
                LeafSide::Unstable => Error::NotOnUnstableLeaf(off),
            });
        }
        let step: i64 = match side {
            LeafSide::Stable => 1,
            LeafSide::Unstable => -1,
        };
        let mut out = Vec::with_capacity(n + 1);
        match (self, y, z) {
            (BaseSystem::Toral(t), BasePoint::Torus(a), BasePoint::Torus(b)) => {
                let [s, u] = t.eigen_coords(lift_difference(a, b));
                let (c, v, lambda) = match side {
                    LeafSide::Stable => (s, t.stable_dir(), t.lambda_s()),
                    LeafSide::Unstable => (u, t.unstable_dir(), 1.0 / t.lambda_u()),
                };
                let mut yj = a.clone();
                let mut cj = c;
                for _ in 0..=n {
                    let zj = if cj == 0.0 { yj.clone() } else { yj.translate([cj * v[0], cj * v[1]]) };
                    let next = t.iterate(&yj, step);
                    out.push((BasePoint::Torus(yj), BasePoint::Torus(zj)));
                    yj = next;
                    cj *= lambda;
                }
            }
            (BaseSystem::Sft(_), BasePoint::Symbolic(a), BasePoint::Symbolic(b)) => {
                for j in 0..=n as i64 {
                    out.push((BasePoint::Symbolic(a.shifted(step * j)), BasePoint::Symbolic(b.shifted(step * j))));
                }
            }
            _ => return Err(Self::mismatch()),
        }
        Ok(out)
    }

    /// A partner of `y` on its local `side` leaf at distance close to `dist`
    /// (exactly `dist·|v|` on the torus; the nearest admissible power of
    /// `metric_base` not exceeding `dist` on the SFT).
    pub fn leaf_partner<R: Rng + ?Sized>(&self, y: &BasePoint, side: LeafSide, dist: f64, rng: &mut R) -> Result<BasePoint> {
        match (self, y) {
            (BaseSystem::Toral(t), BasePoint::Torus(p)) => {
                let v = match side {
                    LeafSide::Stable => t.stable_dir(),
                    LeafSide::Unstable => t.unstable_dir(),
                };
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                Ok(BasePoint::Torus(p.translate([sign * dist * v[0], sign * dist * v[1]])))
            }
            (BaseSystem::Sft(s), BasePoint::Symbolic(p)) => {
                let k0 = (dist.ln() / s.metric_base().ln()).round().max(1.0) as i64;
                let past = side == LeafSide::Stable;
                for k in k0..k0 + 64 {
                    let mut cands: Vec<u8> = (0..s.alphabet_size() as u8).collect();
                    let r = rng.gen_range(0..cands.len());
                    cands.rotate_left(r);
                    if let Some(q) = cands.into_iter().find_map(|c| s.perturb_at(p, k, c, past)) {
                        return Ok(BasePoint::Symbolic(q));
                    }
                }
                Err(Error::InvalidPoint("no leaf partner found".into()))
            }
            _ => Err(Self::mismatch()),
        }
    }
}

impl PartialOrd for BasePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (BasePoint::Torus(a), BasePoint::Torus(b)) => Some(a.cmp_lex(b)),
            _ => Some(self.key().cmp(&other.key())),
        }
    }
}
