//! Command-line workflows. Each command fills an [`Outcome`]; the outcome is
//! written once, after all computation, through a single serialization point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::base::{BasePoint, BaseSystem, LeafSide, DEFAULT_PERIOD_BUDGET};
use crate::cocycle::exponents::norm_bound_over;
use crate::cocycle::spec::mat_rows;
use crate::cocycle::{
    bunching_membership, good_times, lyapunov_exponents, lyapunov_norm, TransferFn,
};
use crate::config::{Command, ExperimentConfig, Overrides, Resolved};
use crate::error::{Error, Result};
use crate::holonomy::{distance_from_identity, holonomy, holonomy_chain_check, holonomy_holder_fit, HolderFit};
use crate::operator::{op_metric, Norm};
use crate::periodic::{obstruction_check, overall, periodic_exponents_from, Verdict};
use crate::report::{fmt_f64, num, to_json, Table};
use crate::synth::{holder_check, make_coboundary, make_perturbed};
use crate::transfer::{
    compare_up_to_constant, default_probes, holder_exponent_estimate, on_orbit_residual, patch_grid, residual,
    solve_holonomy_extension, solve_orbit_propagation, Budget, ExactTransfer, Precheck, PropagationConfig, Start,
    TransferMap,
};

pub const ARTIFACT: &str = "livsic";

/// Exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// On-orbit residual bound of a propagated solution.
pub const ON_ORBIT_TOL: f64 = 1e-8;
/// Allowed gap between the top periodic exponent and the orbit estimate.
pub const KALININ_TOL: f64 = 0.05;
/// Roundoff slack added to the telescoping exponent bound.
pub const TELESCOPING_SLACK: f64 = 1e-6;
/// Chain triples per leaf side.
pub const CHAIN_TRIPLES: usize = 20;
/// Side of the holonomy-extension patch grid.
pub const PATCH_SIDE: usize = 7;
/// Upper end of the distance window of the Hölder regression.
pub fn holder_window(base: &BaseSystem) -> f64 {
    if base.is_torus() {
        0.2
    } else {
        0.5
    }
}

/// Probe layout: an `n × n` grid (torus) or `n²` sampled points (SFT), plus
/// distance-ladder clusters.
const PROBE_SIDE: usize = 16;
const PROBE_CLUSTERS: usize = 4;
/// Pairs fed to the Hölder regression.
const HOLDER_PAIRS: usize = 200_000;
/// Pairs in the declared-Hölder-constant check.
const HOLDER_CHECK_PAIRS: usize = 10_000;
/// Symbolic span of sampled SFT points beyond the orbit length they feed.
const SPAN_MARGIN: usize = 40;

#[derive(Debug, Parser)]
#[command(name = "livsic", version, about = "Cohomological equations of matrix cocycles over hyperbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build a coboundary from a transfer block, optionally perturbed.
    Synth(RunArgs),
    /// Periodic obstruction check.
    Obstruct(RunArgs),
    /// Lyapunov and periodic exponents.
    Exponents(RunArgs),
    /// Pointwise fiber-bunching membership.
    Bunching(RunArgs),
    /// Good-time set along a sampled orbit.
    Goodtimes(RunArgs),
    /// Stable and unstable holonomies on sampled leaf pairs.
    Holonomy(RunArgs),
    /// Solve the cohomological equation by orbit propagation.
    Solve(RunArgs),
    /// Obstruction, exponents, holonomies and solver in one battery.
    Verify(RunArgs),
    /// Orbit-propagation against holonomy-extension solutions.
    Compare(RunArgs),
}

impl Cmd {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Cmd::Synth(a) => (Command::Synth, a),
            Cmd::Obstruct(a) => (Command::Obstruct, a),
            Cmd::Exponents(a) => (Command::Exponents, a),
            Cmd::Bunching(a) => (Command::Bunching, a),
            Cmd::Goodtimes(a) => (Command::Goodtimes, a),
            Cmd::Holonomy(a) => (Command::Holonomy, a),
            Cmd::Solve(a) => (Command::Solve, a),
            Cmd::Verify(a) => (Command::Verify, a),
            Cmd::Compare(a) => (Command::Compare, a),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment spec (JSON).
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub period_max: Option<usize>,
    #[arg(long)]
    pub orbit_len: Option<u64>,
    #[arg(long)]
    pub grid_eps: Option<f64>,
    /// Holonomy Cauchy tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Obstruction tolerance base.
    #[arg(long)]
    pub tol_base: Option<f64>,
    #[arg(long, value_parser = ["inf", "two"])]
    pub norm: Option<String>,
    /// Perturbation size for synth.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides> {
        let norm = match &self.norm {
            Some(s) => Some(s.parse::<Norm>().map_err(|e| Error::Config(format!("{e}")))?),
            None => None,
        };
        Ok(Overrides {
            seed: self.seed,
            period_max: self.period_max,
            orbit_len: self.orbit_len,
            grid_eps: self.grid_eps,
            tol: self.tol,
            tol_base: self.tol_base,
            norm,
            eta: self.eta,
        })
    }
}

/// One verdict line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl Check {
    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), json!(self.name));
        m.insert("value".into(), num(self.value));
        m.insert("bound".into(), num(self.bound));
        m.insert("verdict".into(), json!(self.verdict.as_str()));
        if let Some(n) = &self.note {
            m.insert("note".into(), json!(n));
        }
        Value::Object(m)
    }
}

/// Everything a command produces, in canonical order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Extra files as `(name, contents)`.
    pub artifacts: Vec<(String, String)>,
    pub timings: Vec<(String, f64)>,
}

impl Outcome {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let t = Instant::now();
        let out = f(self);
        self.timings.push((name.into(), t.elapsed().as_secs_f64()));
        out
    }

    fn check(&mut self, name: &str, value: f64, bound: f64, verdict: Verdict) {
        self.checks.push(Check { name: name.into(), value, bound, verdict, note: None });
    }

    /// `pass` iff `value ≤ bound`.
    fn check_le(&mut self, name: &str, value: f64, bound: f64) {
        let v = if value <= bound { Verdict::Pass } else { Verdict::Fail };
        self.check(name, value, bound, v);
    }

    fn error(&mut self, name: &str, e: &Error) {
        self.checks.push(Check {
            name: name.into(),
            value: f64::NAN,
            bound: f64::NAN,
            verdict: Verdict::Fail,
            note: Some(e.to_string()),
        });
    }

    fn result(&mut self, key: &str, v: Value) {
        self.results.insert(key.into(), v);
    }

    pub fn verdict(&self) -> Verdict {
        overall(self.checks.iter().map(|c| c.verdict))
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn err_json(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

/// Independent stream `stream` of the run's seed.
fn rng_for(r: &Resolved, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed());
    rng.set_stream(stream);
    rng
}

/// The closed-form transfer map of a pure coboundary.
fn truth(r: &Resolved) -> Option<TransferFn> {
    let c = r.cocycle.as_ref()?;
    if c.spec().is_coboundary() {
        c.transfer(&r.base)
    } else {
        None
    }
}

/// Sampled `max(‖C‖, ‖C⁻¹‖)` of the closed-form transfer map.
fn norm_budget(r: &Resolved, f: &TransferFn) -> Result<f64> {
    Ok(make_coboundary(f.spec(), &r.base, r.seed(), r.norm())?.norm_budget)
}

/// Runs `cmd` on a resolved configuration.
pub fn execute(r: &Resolved) -> Outcome {
    let mut o = Outcome::default();
    match r.command {
        Command::Synth => o.stage("synth", |o| synth(r, o)),
        Command::Obstruct => o.stage("obstruct", |o| obstruct(r, o)),
        Command::Exponents => o.stage("exponents", |o| exponents(r, o)),
        Command::Bunching => o.stage("bunching", |o| bunching(r, o)),
        Command::Goodtimes => o.stage("goodtimes", |o| goodtimes(r, o)),
        Command::Holonomy => o.stage("holonomy", |o| holonomies(r, o)),
        Command::Solve => {
            o.stage("solve", |o| {
                solve(r, o);
            });
        }
        Command::Compare => o.stage("compare", |o| compare(r, o)),
        Command::Verify => {
            o.stage("obstruct", |o| obstruct(r, o));
            o.stage("exponents", |o| exponents(r, o));
            o.stage("holonomy", |o| holonomies(r, o));
            o.stage("solve", |o| {
                solve(r, o);
            });
        }
    }
    o
}

fn synth(r: &Resolved, o: &mut Outcome) {
    let seed = r.seed();
    let eta = r.config.eta.unwrap_or(0.0);
    let built = match (&r.config.transfer, &r.config.cocycle) {
        (Some(t), _) => make_coboundary(t, &r.base, seed, r.norm()).map(|s| (s.spec, Some(s.norm_budget))),
        (None, Some(c)) => Ok((c.clone(), None)),
        (None, None) => unreachable!("validated"),
    };
    let (spec, budget) = match built {
        Ok(b) => b,
        Err(e) => return o.error("synthesize", &e),
    };
    let spec = match make_perturbed(&spec, eta, seed) {
        Ok(s) => s,
        Err(e) => return o.error("perturb", &e),
    };
    let mut res = Map::new();
    res.insert("kind".into(), json!(spec.kind.as_str()));
    res.insert("eta".into(), num(eta));
    if let Some(b) = budget {
        res.insert("norm_budget".into(), num(b));
        res.insert("budget_samples".into(), json!(crate::synth::BUDGET_SAMPLES));
    }
    let out = ExperimentConfig { cocycle: Some(spec.clone()), seed: Some(seed), ..bare(&r.config) };
    match to_json(&out) {
        Ok(s) => o.artifacts.push(("synthesized_spec.json".into(), s)),
        Err(e) => return o.error("serialize", &e),
    }
    match crate::cocycle::Cocycle::new(&spec, &r.base).and_then(|c| holder_check(&c, &r.base, seed, HOLDER_CHECK_PAIRS)) {
        Ok(h) => {
            res.insert(
                "holder_check".into(),
                json!({
                    "alpha": num(h.alpha),
                    "declared": h.declared.map(num),
                    "empirical": num(h.empirical),
                    "pairs": h.pairs,
                }),
            );
            if let Some(ok) = h.consistent {
                let v = if ok { Verdict::Pass } else { Verdict::Fail };
                o.check("holder_constant", h.empirical, h.declared.unwrap_or(f64::NAN), v);
            }
        }
        Err(e) => o.error("holder_constant", &e),
    }
    o.result("synth", Value::Object(res));
}

/// The base block alone, for derived spec files.
fn bare(c: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        base: c.base.clone(),
        cocycle: None,
        transfer: None,
        seed: None,
        period_max: None,
        orbit_len: None,
        grid_eps: None,
        eps: None,
        eps_schedule: None,
        theta: None,
        block: None,
        k_max: None,
        tol_base: None,
        tol: None,
        n_cap: None,
        norm: None,
        eta: None,
        points: None,
    }
}

fn obstruct(r: &Resolved, o: &mut Outcome) {
    let period_max = r.config.period_max.expect("defaulted");
    let tol_base = r.config.tol_base.expect("defaulted");
    let reports = match obstruction_check(r.cocycle(), &r.base, period_max, DEFAULT_PERIOD_BUDGET, tol_base, r.norm()) {
        Ok(v) => v,
        Err(e) => return o.error("obstruction", &e),
    };
    let mut t = Table::new(
        "obstruction",
        &["period", "orbit_key", "deviation", "tolerance", "verdict", "log_norm", "log_inv_norm"],
    );
    for rep in &reports {
        t.push(vec![
            rep.period().to_string(),
            rep.orbit_key.clone(),
            fmt_f64(rep.deviation),
            fmt_f64(rep.tolerance),
            rep.verdict.as_str().into(),
            fmt_f64(rep.log_norm),
            fmt_f64(rep.log_inv_norm),
        ]);
    }
    let mut per_period = Vec::new();
    for n in 1..=period_max {
        let rows: Vec<_> = reports.iter().filter(|r| r.period() == n).collect();
        if rows.is_empty() {
            continue;
        }
        let worst = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
        let tol = rows.iter().map(|r| r.tolerance).fold(0.0, f64::max);
        let v = overall(rows.iter().map(|r| r.verdict));
        o.check(&format!("obstruction_period_{n}"), worst, tol, v);
        per_period.push(json!({ "period": n, "orbits": rows.len(), "max_deviation": num(worst), "verdict": v.as_str() }));
    }
    let pe = periodic_exponents_from(&reports);
    o.result(
        "obstruction",
        json!({
            "orbits": reports.len(),
            "verdict": overall(reports.iter().map(|r| r.verdict)).as_str(),
            "periods": per_period,
            "periodic_sup_plus": num(pe.sup_plus),
            "periodic_inf_minus": num(pe.inf_minus),
        }),
    );
    o.tables.push(t);
}

fn sample_point(r: &Resolved, rng: &mut ChaCha8Rng, orbit: usize) -> BasePoint {
    r.base.random_point(rng, orbit + SPAN_MARGIN)
}

fn exponents(r: &Resolved, o: &mut Outcome) {
    let n = r.config.orbit_len.expect("defaulted") as usize;
    let period_max = r.config.period_max.expect("defaulted");
    let norm = r.norm();
    let c = r.cocycle();
    let mut rng = rng_for(r, 1);
    let x = sample_point(r, &mut rng, n);
    let est = match lyapunov_exponents(c, &r.base, &x, n, norm) {
        Ok(e) => e,
        Err(e) => return o.error("lyapunov", &e),
    };
    let mut t = Table::new("exponents", &["n", "lambda_plus", "lambda_minus"]);
    for (m, p, q) in &est.checkpoints {
        t.push(vec![m.to_string(), fmt_f64(*p), fmt_f64(*q)]);
    }
    o.tables.push(t);
    let mut res = Map::new();
    res.insert("start".into(), json!(x.key()));
    res.insert("orbit_len".into(), json!(n));
    res.insert("lambda_plus".into(), num(est.lambda_plus));
    res.insert("lambda_minus".into(), num(est.lambda_minus));

    match crate::periodic::periodic_exponents(c, &r.base, period_max, DEFAULT_PERIOD_BUDGET, norm) {
        Ok(pe) => {
            let mut t = Table::new("periodic_exponents", &["period", "orbit_key", "lambda_plus", "lambda_minus"]);
            for row in &pe.table {
                t.push(vec![
                    row.period.to_string(),
                    row.orbit_key.clone(),
                    fmt_f64(row.lambda_plus),
                    fmt_f64(row.lambda_minus),
                ]);
            }
            o.tables.push(t);
            res.insert("periodic_sup_plus".into(), num(pe.sup_plus));
            res.insert("periodic_inf_minus".into(), num(pe.inf_minus));
            o.check_le("kalinin", (pe.sup_plus - est.lambda_plus).abs(), KALININ_TOL);
        }
        Err(e) => o.error("kalinin", &e),
    }

    if let Some(f) = truth(r) {
        match norm_budget(r, &f) {
            Ok(b) => {
                let bound = 2.0 / n as f64 * (b * b).ln() + TELESCOPING_SLACK;
                res.insert("norm_budget".into(), num(b));
                o.check_le("telescoping_plus", est.lambda_plus.abs(), bound);
                o.check_le("telescoping_minus", est.lambda_minus.abs(), bound);
            }
            Err(e) => o.error("telescoping", &e),
        }
    }

    let eps = r.config.eps.expect("defaulted");
    let pts: Vec<BasePoint> = (0..256).map(|_| sample_point(r, &mut rng, 0)).collect();
    let ln = norm_bound_over(c, &r.base, &pts, norm).and_then(|bound| {
        let mut u = DVector::zeros(c.dim());
        u[0] = 1.0;
        lyapunov_norm(c, &r.base, &x, &u, eps, None, bound, 1e-6, norm)
    });
    let lyap = match ln {
        Ok(l) => json!({
            "eps": num(eps),
            "value": num(l.value),
            "ratio": num(l.ratio),
            "tail_bound": num(l.tail_bound),
            "trunc": l.trunc,
        }),
        Err(e) => err_json(&e),
    };
    res.insert("lyapunov_norm".into(), lyap);
    o.result("exponents", Value::Object(res));
}

fn bunching(r: &Resolved, o: &mut Outcome) {
    let cfg = &r.config;
    let (n_block, theta, k_max) = (cfg.block.expect("defaulted"), cfg.theta.expect("defaulted"), cfg.k_max.expect("defaulted"));
    let mut rng = rng_for(r, 2);
    let pts: Vec<BasePoint> =
        (0..cfg.points.expect("defaulted")).map(|_| sample_point(r, &mut rng, n_block * k_max)).collect();
    let rows: Vec<Result<_>> =
        pts.par_iter().map(|x| bunching_membership(r.cocycle(), &r.base, x, n_block, theta, k_max, r.norm())).collect();
    let mut t = Table::new("bunching", &["point", "member", "margin", "forward_margin", "backward_margin", "error"]);
    let (mut members, mut failed) = (0usize, 0usize);
    for (x, row) in pts.iter().zip(&rows) {
        match row {
            Ok(b) => {
                members += b.pass as usize;
                t.push(vec![
                    x.key(),
                    b.pass.to_string(),
                    fmt_f64(b.margin),
                    fmt_f64(b.forward_margin),
                    fmt_f64(b.backward_margin),
                    String::new(),
                ]);
            }
            Err(e) => {
                failed += 1;
                t.push(vec![x.key(), String::new(), String::new(), String::new(), String::new(), e.to_string()]);
            }
        }
    }
    let non_members = pts.len() - members;
    // non-membership is data about the cocycle, not a failed computation
    let v = if failed > 0 {
        Verdict::Fail
    } else if non_members > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    o.check("bunching", non_members as f64, 0.0, v);
    o.result(
        "bunching",
        json!({ "N": n_block, "theta": num(theta), "k_max": k_max, "points": pts.len(), "members": members, "errors": failed }),
    );
    o.tables.push(t);
}

fn goodtimes(r: &Resolved, o: &mut Outcome) {
    let n = r.config.orbit_len.expect("defaulted") as usize;
    let schedule = r.config.eps_schedule.clone().expect("defaulted");
    let mut rng = rng_for(r, 3);
    let x = sample_point(r, &mut rng, n);
    let run = lyapunov_exponents(r.cocycle(), &r.base, &x, n, r.norm())
        .and_then(|e| good_times(r.cocycle(), &r.base, &x, n, e.lambda_plus, &schedule, r.norm()).map(|g| (e, g)));
    let (est, gt) = match run {
        Ok(v) => v,
        Err(e) => return o.error("good_times", &e),
    };
    let mut t = Table::new("good_times", &["time"]);
    for k in &gt.times {
        t.push(vec![k.to_string()]);
    }
    o.tables.push(t);
    let v = if gt.density > 0.0 { Verdict::Pass } else { Verdict::Inconclusive };
    o.check("good_time_density", gt.density, 0.0, v);
    o.result(
        "good_times",
        json!({
            "start": x.key(),
            "n_max": n,
            "lambda": num(est.lambda_plus),
            "count": gt.times.len(),
            "density": num(gt.density),
            "upper_density": num(gt.upper_density),
        }),
    );
}

fn holonomies(r: &Resolved, o: &mut Outcome) {
    let cfg = &r.config;
    let (tol, n_cap, pts) = (cfg.tol.expect("defaulted"), cfg.n_cap.expect("defaulted"), cfg.points.expect("defaulted"));
    let norm = r.norm();
    let c = r.cocycle();
    let base = &r.base;
    let truth = truth(r);
    let rho = base.product_structure_radius();
    let mut t = Table::new(
        "holonomy",
        &["y", "z", "side", "iterations", "cauchy_gap", "norm_H_minus_Id", "certified", "truth_error", "error"],
    );
    let mut res = Map::new();
    for (s, side) in [LeafSide::Stable, LeafSide::Unstable].into_iter().enumerate() {
        let name = side.as_str();
        let mut rng = rng_for(r, 10 + s as u64);
        let pairs: Vec<Result<(BasePoint, BasePoint)>> = (0..pts)
            .map(|i| {
                let frac = if pts > 1 { i as f64 / (pts - 1) as f64 } else { 0.0 };
                let y = sample_point(r, &mut rng, n_cap);
                let z = base.leaf_partner(&y, side, rho / 2.0 * 10f64.powf(-3.0 * frac), &mut rng)?;
                Ok((y, z))
            })
            .collect();
        let rows: Vec<Result<_>> = pairs
            .par_iter()
            .map(|p| {
                let (y, z) = p.as_ref().map_err(Clone::clone)?;
                let h = holonomy(c, base, y, z, side, tol, n_cap, norm)?;
                let err = match &truth {
                    Some(f) => Some(op_metric(&h.value, &f.eval(base, z)?.compose(&f.eval(base, y)?.inverted()), norm)?),
                    None => None,
                };
                Ok((h, err))
            })
            .collect();
        let (mut uncertified, mut errors, mut worst_truth) = (0usize, 0usize, 0.0f64);
        let (mut dists, mut devs) = (Vec::new(), Vec::new());
        for (p, row) in pairs.iter().zip(&rows) {
            let (yk, zk) = match p {
                Ok((y, z)) => (y.key(), z.key()),
                Err(_) => (String::new(), String::new()),
            };
            match row {
                Ok((h, err)) => {
                    let dev = distance_from_identity(&h.value, norm);
                    if h.certified {
                        dists.push(base.distance(&h.y, &h.z));
                        devs.push(dev);
                    } else {
                        uncertified += 1;
                    }
                    if let Some(e) = err {
                        worst_truth = worst_truth.max(*e);
                    }
                    t.push(vec![
                        yk,
                        zk,
                        name.into(),
                        h.iterations_used.to_string(),
                        fmt_f64(h.cauchy_gap),
                        fmt_f64(dev),
                        h.certified.to_string(),
                        err.map(fmt_f64).unwrap_or_default(),
                        String::new(),
                    ]);
                }
                Err(e) => {
                    errors += 1;
                    let blank = String::new;
                    t.push(vec![yk, zk, name.into(), blank(), blank(), blank(), blank(), blank(), e.to_string()]);
                }
            }
        }
        let v = if errors > 0 {
            Verdict::Fail
        } else if uncertified > 0 {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        o.check(&format!("holonomy_certified_{name}"), (uncertified + errors) as f64, 0.0, v);
        if truth.is_some() {
            o.check_le(&format!("holonomy_truth_{name}"), worst_truth, 10.0 * tol);
        }
        let fit = match holonomy_holder_fit(&dists, &devs) {
            Ok(HolderFit::ExactZero { pairs }) => json!({ "exact_zero": true, "pairs": pairs }),
            Ok(HolderFit::Fit { alpha, constant, residual, fitted_pairs, plateau_pairs }) => json!({
                "alpha": num(alpha),
                "constant": num(constant),
                "residual": num(residual),
                "fitted_pairs": fitted_pairs,
                "plateau_pairs": plateau_pairs,
            }),
            Err(e) => err_json(&e),
        };

        let mut rng = rng_for(r, 20 + s as u64);
        let triples: Vec<Result<[BasePoint; 3]>> = (0..CHAIN_TRIPLES)
            .map(|_| {
                let x = sample_point(r, &mut rng, n_cap);
                let y = base.leaf_partner(&x, side, rho * rng.gen_range(0.01..0.45), &mut rng)?;
                let z = base.leaf_partner(&x, side, rho * rng.gen_range(0.01..0.45), &mut rng)?;
                Ok([x, y, z])
            })
            .collect();
        let defects: Vec<Result<f64>> = triples
            .par_iter()
            .map(|tr| {
                let [x, y, z] = tr.as_ref().map_err(Clone::clone)?;
                holonomy_chain_check(c, base, x, y, z, side, tol, n_cap, norm)
            })
            .collect();
        let chain = match defects.into_iter().collect::<Result<Vec<f64>>>() {
            Ok(d) => {
                let worst = d.into_iter().fold(0.0, f64::max);
                o.check(&format!("holonomy_chain_{name}"), worst, 10.0 * tol, Verdict::classify(worst, 10.0 * tol));
                num(worst)
            }
            Err(e) => {
                o.error(&format!("holonomy_chain_{name}"), &e);
                err_json(&e)
            }
        };
        res.insert(
            name.into(),
            json!({
                "pairs": pts,
                "uncertified": uncertified,
                "errors": errors,
                "max_truth_error": truth.as_ref().map(|_| num(worst_truth)),
                "holder_fit": fit,
                "max_chain_defect": chain,
            }),
        );
    }
    res.insert("tol".into(), num(tol));
    res.insert("n_cap".into(), json!(n_cap));
    o.result("holonomy", Value::Object(res));
    o.tables.push(t);
}

fn propagation_config(r: &Resolved) -> PropagationConfig {
    PropagationConfig {
        orbit_len: if r.command == Command::Verify { None } else { r.config.orbit_len },
        grid_eps: r.config.grid_eps.expect("defaulted"),
        precheck: r.config.period_max.map(|period_max| Precheck {
            period_max,
            tol_base: r.config.tol_base.unwrap_or(crate::config::DEFAULT_TOL_BASE),
        }),
        norm: r.norm(),
    }
}

/// The JSON serialization of a transfer map.
pub fn transfer_map_json(map: &TransferMap) -> Result<String> {
    #[derive(Serialize)]
    struct Header<'a> {
        method: &'a str,
        anchor: String,
        coverage_radius: Value,
        norm: Norm,
        samples: usize,
    }
    #[derive(Serialize)]
    struct Row {
        point: String,
        index: Option<u64>,
        matrix: Vec<Vec<f64>>,
        log_scale: f64,
    }
    let header = Header {
        method: map.method.as_str(),
        anchor: map.anchor_sample().point.key(),
        coverage_radius: num(map.coverage_radius),
        norm: map.norm,
        samples: map.samples.len(),
    };
    let rows: Vec<Row> = map
        .samples
        .iter()
        .map(|s| Row {
            point: s.point.key(),
            index: s.index,
            matrix: mat_rows(s.value.unit()),
            log_scale: s.value.log_scale(),
        })
        .collect();
    to_json(&json!({ "header": header, "samples": rows }))
}

fn solve(r: &Resolved, o: &mut Outcome) -> Option<(TransferMap, Vec<BasePoint>)> {
    let probes = match default_probes(&r.base, r.seed(), PROBE_SIDE, PROBE_CLUSTERS) {
        Ok(p) => p,
        Err(e) => {
            o.error("probes", &e);
            return None;
        }
    };
    solve_with(r, o, probes)
}

fn solve_with(r: &Resolved, o: &mut Outcome, probes: Vec<BasePoint>) -> Option<(TransferMap, Vec<BasePoint>)> {
    let base = &r.base;
    let norm = r.norm();
    let c = r.cocycle();
    let cfg = propagation_config(r);
    let map = match solve_orbit_propagation(c, base, &Start::Seeded(r.seed()), &probes, &cfg) {
        Ok(m) => m,
        Err(e) => {
            o.error("solve", &e);
            o.result("solve", err_json(&e));
            return None;
        }
    };
    let mut res = Map::new();
    let steps = map.samples.iter().filter_map(|s| s.index).max().unwrap_or(0);
    res.insert("method".into(), json!(map.method.as_str()));
    res.insert("orbit_steps".into(), json!(steps));
    res.insert("samples".into(), json!(map.samples.len()));
    res.insert("probes".into(), json!(probes.len()));
    res.insert("coverage_radius".into(), num(map.coverage_radius));
    // uniqueness up to a constant is only claimed on mixing bases
    let scope = match base {
        BaseSystem::Sft(s) if s.mixing_time().is_none() => "per_component",
        _ => "global",
    };
    res.insert("uniqueness_scope".into(), json!(scope));
    match transfer_map_json(&map) {
        Ok(s) => o.artifacts.push(("transfer_map.json".into(), s)),
        Err(e) => o.error("serialize", &e),
    }
    match on_orbit_residual(c, base, &map, norm) {
        Ok((worst, pairs)) => {
            res.insert("on_orbit_pairs".into(), json!(pairs));
            o.check_le("on_orbit_residual", worst, ON_ORBIT_TOL);
        }
        Err(e) => o.error("on_orbit_residual", &e),
    }
    let rr = residual(c, base, &map, &probes, norm);
    let budget = truth(r).map(|f| norm_budget(r, &f).map(|b| (Budget::for_transfer(&f, base, b), f)));
    match (&rr, budget) {
        (Ok(rep), Some(Ok((b, f)))) => {
            let rad = map.coverage_radius;
            res.insert("norm_budget".into(), num(b.norm_budget));
            res.insert("residual_budget".into(), num(b.residual(rad, norm)));
            res.insert("interpolation_budget".into(), num(b.interpolation(rad, norm)));
            o.check_le("residual", rep.sup, b.residual(rad, norm));
            let cmp = ExactTransfer::new(f, base, map.anchor_sample().point.clone())
                .and_then(|exact| compare_up_to_constant(base, &map, &exact, &probes, norm));
            match cmp {
                Ok(cmp) => {
                    res.insert("truth_sup".into(), num(cmp.sup));
                    res.insert("truth_mean".into(), num(cmp.mean));
                    o.check_le("compare_to_truth", cmp.sup, b.interpolation(rad, norm));
                }
                Err(e) => o.error("compare_to_truth", &e),
            }
        }
        (Err(e), _) => o.error("residual", e),
        (_, Some(Err(e))) => o.error("residual", &e),
        (Ok(_), None) => {}
    }
    if let Ok(rep) = rr {
        res.insert("residual_sup".into(), num(rep.sup));
        res.insert("residual_mean".into(), num(rep.mean));
        let mut t = Table::new("residual", &["probe", "residual", "coverage_x", "coverage_fx"]);
        for row in &rep.rows {
            t.push(vec![row.probe.clone(), fmt_f64(row.residual), fmt_f64(row.coverage_x), fmt_f64(row.coverage_fx)]);
        }
        o.tables.push(t);
    }
    let d_max = holder_window(base);
    res.insert(
        "holder".into(),
        match holder_exponent_estimate(base, &map, HOLDER_PAIRS, d_max, norm) {
            Ok(h) => json!({
                "alpha": num(h.alpha),
                "constant": num(h.constant),
                "residual": num(h.residual),
                "fitted_pairs": h.fitted_pairs,
                "candidate_pairs": h.candidate_pairs,
                "d_max": num(d_max),
            }),
            Err(e) => err_json(&e),
        },
    );
    o.result("solve", Value::Object(res));
    Some((map, probes))
}

fn compare(r: &Resolved, o: &mut Outcome) {
    let base = &r.base;
    let norm = r.norm();
    let (tol, n_cap) = (r.config.tol.expect("defaulted"), r.config.n_cap.expect("defaulted"));
    let mut rng = rng_for(r, 30);
    let x0 = sample_point(r, &mut rng, n_cap);
    let grid = match patch_grid(base, &x0, base.product_structure_radius() / 2.0, PATCH_SIDE, &mut rng) {
        Ok(g) => g,
        Err(e) => return o.error("patch_grid", &e),
    };
    let ext = match solve_holonomy_extension(r.cocycle(), base, &x0, &grid, tol, n_cap, norm) {
        Ok(e) => e,
        Err(e) => return o.error("holonomy_extension", &e),
    };
    let mut t = Table::new("extension_skipped", &["point", "reason"]);
    for (p, why) in &ext.skipped {
        t.push(vec![p.clone(), why.clone()]);
    }
    o.tables.push(t);
    let v = if ext.skipped.is_empty() { Verdict::Pass } else { Verdict::Inconclusive };
    o.check("extension_coverage", ext.skipped.len() as f64, 0.0, v);
    let holo_points: Vec<BasePoint> = ext.map.samples.iter().map(|s| s.point.clone()).collect();
    let mut probes = match default_probes(base, r.seed(), PROBE_SIDE, PROBE_CLUSTERS) {
        Ok(p) => p,
        Err(e) => return o.error("probes", &e),
    };
    probes.extend(holo_points.iter().cloned());
    let Some((orbit, _)) = solve_with(r, o, probes) else { return };
    let mut res = Map::new();
    res.insert("patch_points".into(), json!(grid.len()));
    res.insert("extension_samples".into(), json!(ext.map.samples.len()));
    match compare_up_to_constant(base, &orbit, &ext.map, &holo_points, norm) {
        Ok(cmp) => {
            res.insert("sup".into(), num(cmp.sup));
            res.insert("mean".into(), num(cmp.mean));
            res.insert("constant".into(), json!(mat_rows(cmp.constant.forward())));
            if let Some(f) = truth(r) {
                match norm_budget(r, &f) {
                    Ok(b) => {
                        let budget = Budget::for_transfer(&f, base, b);
                        let combined = 2.0 * budget.interpolation(orbit.coverage_radius, norm) + 20.0 * tol;
                        res.insert("combined_budget".into(), num(combined));
                        o.check_le("orbit_vs_holonomy", cmp.sup, combined);
                    }
                    Err(e) => o.error("orbit_vs_holonomy", &e),
                }
            }
        }
        Err(e) => o.error("orbit_vs_holonomy", &e),
    }
    o.result("compare", Value::Object(res));
}

/// The report document of an outcome.
pub fn report_json(r: &Resolved, o: &Outcome) -> Result<String> {
    let config = serde_json::to_value(&r.config).map_err(|e| Error::Io(e.to_string()))?;
    let doc = json!({
        "artifact": ARTIFACT,
        "version": env!("CARGO_PKG_VERSION"),
        "command": r.command.as_str(),
        "config": config,
        "verdict": o.verdict().as_str(),
        "checks": o.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "results": Value::Object(o.results.clone()),
        "tables": o.tables.iter().map(Table::file_name).collect::<Vec<_>>(),
        "artifacts": o.artifacts.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    to_json(&doc)
}

/// Writes `report.json`, the tables, the artifacts and `timings.json`.
pub fn write_outputs(dir: &Path, r: &Resolved, o: &Outcome) -> Result<()> {
    let report = report_json(r, o)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report)?;
    for t in &o.tables {
        t.write_to(dir)?;
    }
    for (name, body) in &o.artifacts {
        std::fs::write(dir.join(name), body)?;
    }
    let stages: Vec<Value> = o.timings.iter().map(|(n, s)| json!({ "stage": n, "seconds": num(*s) })).collect();
    std::fs::write(dir.join("timings.json"), to_json(&json!({ "stages": stages }))?)?;
    Ok(())
}

/// Loads and validates the spec file of a command invocation.
pub fn resolve(cmd: Command, args: &RunArgs) -> Result<Resolved> {
    ExperimentConfig::load(&args.spec)?.resolve(cmd, &args.overrides()?)
}

/// Entry point: parses `argv`, runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let (cmd, args) = cli.command.split();
    let resolved = match resolve(cmd, &args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match args.workers {
        Some(0) => {
            eprintln!("error: --workers must be positive");
            return EXIT_USAGE;
        }
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| execute(&resolved)),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
        None => execute(&resolved),
    };
    if let Err(e) = write_outputs(&args.out, &resolved, &outcome) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let v = outcome.verdict();
    eprintln!("{}: {}", cmd.as_str(), v.as_str());
    exit_code(v)
}
