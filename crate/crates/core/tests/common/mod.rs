//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use livsic::base::{BaseSystem, TorusPoint};
use livsic::cocycle::{CocycleSpec, TrigTerm};
use livsic::config::{Command, ExperimentConfig, Overrides, Resolved};
use livsic::operator::{InvertibleOp, Mat};
use rand::Rng;

pub fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs")
}

pub fn spec_path(name: &str) -> PathBuf {
    specs_dir().join(format!("{name}.json"))
}

pub const COBOUNDARIES: [&str; 5] = [
    "coboundary_torus_unitriangular",
    "coboundary_torus_exp_trig_d2",
    "coboundary_torus_exp_trig_d3",
    "coboundary_sft_exp_trig_d2",
    "coboundary_sft_locally_constant_d3",
];

pub const CONTROLS: [&str; 2] = ["control_diagonal", "control_rotation"];

/// Every shipped spec with a cocycle block.
pub fn cocycle_specs() -> Vec<&'static str> {
    let mut v: Vec<&str> = COBOUNDARIES.to_vec();
    v.extend(CONTROLS);
    v.push("perturbed_torus_exp_trig_d2");
    v
}

pub fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&spec_path(name)).unwrap()
}

pub fn resolve(name: &str, cmd: Command, o: Overrides) -> Resolved {
    load(name).resolve(cmd, &o).unwrap()
}

// ---- double-double arithmetic -------------------------------------------

/// An unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            Dd { hi: -self.hi, lo: -self.lo }
        } else {
            self
        }
    }

    /// Multiplication by `2^k` (exact).
    pub fn ldexp(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn ln(self) -> f64 {
        self.hi.ln() + (self.lo / self.hi).ln_1p()
    }
}

/// Double-double square matrix with a separate power-of-two exponent.
#[derive(Debug, Clone)]
pub struct DdMat {
    pub d: usize,
    pub a: Vec<Dd>,
    pub exp2: i64,
}

impl DdMat {
    pub fn identity(d: usize) -> Self {
        let mut a = vec![Dd::ZERO; d * d];
        for i in 0..d {
            a[i * d + i] = Dd::from(1.0);
        }
        DdMat { d, a, exp2: 0 }
    }

    /// `M ← F·M`, then an exact rescale by a power of two.
    pub fn left_mul(&mut self, f: &Mat) {
        let d = self.d;
        let mut out = vec![Dd::ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = Dd::ZERO;
                for k in 0..d {
                    s = s.add(Dd::from(f[(i, k)]).mul(self.a[k * d + j]));
                }
                out[i * d + j] = s;
            }
        }
        self.a = out;
        let big = self.a.iter().map(|x| x.hi.abs()).fold(0.0, f64::max);
        if big > 0.0 {
            let k = big.log2().floor() as i32;
            for x in &mut self.a {
                *x = x.ldexp(-k);
            }
            self.exp2 += k as i64;
        }
    }

    /// `log‖M‖∞`
    pub fn log_inf_norm(&self) -> f64 {
        let d = self.d;
        let mut best = Dd::ZERO;
        for i in 0..d {
            let mut s = Dd::ZERO;
            for j in 0..d {
                s = s.add(self.a[i * d + j].abs());
            }
            if s.hi > best.hi || (s.hi == best.hi && s.lo > best.lo) {
                best = s;
            }
        }
        best.ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }
}

// ---- random specs --------------------------------------------------------

fn rand_mat<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..d).map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect()).collect()
}

/// A random `exp_trig` spec with `terms` terms of coefficient size `scale`.
pub fn random_exp_trig<R: Rng>(rng: &mut R, d: usize, terms: usize, scale: f64) -> CocycleSpec {
    let t = (0..terms)
        .map(|_| TrigTerm {
            coef: rand_mat(rng, d, scale),
            freq: [rng.gen_range(-2..=2), rng.gen_range(-2..=2)],
            phase: rng.gen_range(0.0..6.0),
        })
        .collect();
    CocycleSpec::exp_trig(d, t)
}

/// A random invertible matrix with entries in `[-1, 1]` (rejection sampled
/// on its condition number).
pub fn random_invertible<R: Rng>(rng: &mut R, d: usize) -> InvertibleOp {
    loop {
        let m = Mat::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        if let Ok(op) = InvertibleOp::new(m) {
            if op.norm_bound(livsic::operator::Norm::Inf) < 1e3 {
                return op;
            }
        }
    }
}

// ---- brute-force periodic counts ------------------------------------------

/// `#{x ∈ (Z/q)² : M^n x ≡ x}` for `q = |det(M^n − I)|`, where every
/// fixed point of `M^n` lives. Exhaustive over the `q²` grid points.
pub fn brute_force_fixed_points(m: [[i64; 2]; 2], n: u32) -> u64 {
    let mut p = [[1i64, 0], [0, 1]];
    for _ in 0..n {
        p = [
            [p[0][0] * m[0][0] + p[0][1] * m[1][0], p[0][0] * m[0][1] + p[0][1] * m[1][1]],
            [p[1][0] * m[0][0] + p[1][1] * m[1][0], p[1][0] * m[0][1] + p[1][1] * m[1][1]],
        ];
    }
    let k = [[p[0][0] - 1, p[0][1]], [p[1][0], p[1][1] - 1]];
    let q = (k[0][0] * k[1][1] - k[0][1] * k[1][0]).abs();
    let mut count = 0;
    for a in 0..q {
        for b in 0..q {
            if (k[0][0] * a + k[0][1] * b).rem_euclid(q) == 0 && (k[1][0] * a + k[1][1] * b).rem_euclid(q) == 0 {
                count += 1;
            }
        }
    }
    count
}

/// Number of periodic points of the SFT with adjacency `adj` and period
/// dividing `n`, by enumerating all closed words.
pub fn brute_force_closed_words(adj: &[Vec<u8>], n: usize) -> u64 {
    let k = adj.len();
    let mut count = 0;
    let mut w = vec![0usize; n];
    loop {
        if (0..n).all(|i| adj[w[i]][w[(i + 1) % n]] == 1) {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return count;
            }
            w[i] += 1;
            if w[i] < k {
                break;
            }
            w[i] = 0;
            i += 1;
        }
    }
}

// ---- good-times oracle ----------------------------------------------------

/// Direct double loop: for each start `i`, a fresh renormalized product of
/// the factors `i..n` gives `a_{n−i}(f^i x)`; returns the good-time flags and
/// the minimum margin of each `n`.
pub fn good_times_oracle(factors: &[InvertibleOp], lambda: f64, eps: impl Fn(usize) -> f64) -> (Vec<bool>, Vec<f64>) {
    let n_max = factors.len();
    let d = factors[0].dim();
    let inf = |m: &Mat| m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    // a[i][m] for i + m ≤ n_max
    let mut a = vec![Vec::new(); n_max + 1];
    for (i, row) in a.iter_mut().enumerate() {
        let mut p = Mat::identity(d, d);
        let mut log = 0.0;
        row.push(0.0);
        for f in &factors[i..n_max] {
            p = f.forward() * p;
            let s = inf(&p);
            p /= s;
            log += s.ln();
            row.push(log);
        }
    }
    let mut good = vec![false; n_max + 1];
    let mut margin = vec![f64::INFINITY; n_max + 1];
    for n in 1..=n_max {
        for i in 0..=n {
            let m = a[0][n] - a[i][n - i] - (lambda - eps(i)) * i as f64;
            margin[n] = margin[n].min(m);
        }
        good[n] = margin[n] >= 0.0;
    }
    (good, margin)
}

pub fn torus_point(a: i128, b: i128, q: i128) -> livsic::base::BasePoint {
    livsic::base::BasePoint::Torus(TorusPoint::rational([a, b], q).unwrap())
}

pub fn cat() -> BaseSystem {
    BaseSystem::cat_map()
}
