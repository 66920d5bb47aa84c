//! Experiment configuration: the spec file, command-line overrides, defaults
//! and validation. Everything is checked before any computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base::{BaseSpec, BaseSystem, DEFAULT_PERIOD_BUDGET};
use crate::cocycle::{Cocycle, CocycleSpec, EpsSchedule, TransferFn, TransferSpec};
use crate::error::{Error, Result};
use crate::operator::Norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Synth,
    Obstruct,
    Exponents,
    Bunching,
    Goodtimes,
    Holonomy,
    Solve,
    Verify,
    Compare,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Obstruct => "obstruct",
            Command::Exponents => "exponents",
            Command::Bunching => "bunching",
            Command::Goodtimes => "goodtimes",
            Command::Holonomy => "holonomy",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Compare => "compare",
        }
    }

    /// Commands with a randomized step need a seed.
    pub fn needs_seed(&self) -> bool {
        !matches!(self, Command::Obstruct)
    }
}

/// A spec file. Absent parameters take per-command defaults when resolved;
/// the resolved config is echoed in every report and reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: BaseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<CocycleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_len: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_eps: Option<f64>,
    /// Lyapunov-norm `ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<EpsSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Block length of the bunching test.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_base: Option<f64>,
    /// Holonomy Cauchy tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Norm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Number of sampled points or pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

/// Command-line values that take precedence over the spec file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub period_max: Option<usize>,
    pub orbit_len: Option<u64>,
    pub grid_eps: Option<f64>,
    pub tol: Option<f64>,
    pub tol_base: Option<f64>,
    pub norm: Option<Norm>,
    pub eta: Option<f64>,
}

pub const DEFAULT_PERIOD_MAX: usize = 10;
pub const DEFAULT_ORBIT_LEN: u64 = 2000;
pub const DEFAULT_GRID_EPS: f64 = 1e-3;
pub const DEFAULT_TOL_BASE: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_N_CAP: usize = 400;
/// Bunching block length: `Nθ` at the default `θ = τ/2` covers the
/// `4·log B` telescoping bound of coboundaries with `B ≤ 1.6` on the cat map.
pub const DEFAULT_BLOCK: usize = 4;

/// A validated configuration with its compiled objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    pub config: ExperimentConfig,
    pub base: BaseSystem,
    pub cocycle: Option<Cocycle>,
    pub transfer: Option<TransferFn>,
}

impl Resolved {
    pub fn seed(&self) -> u64 {
        self.config.seed.expect("validated")
    }
    pub fn norm(&self) -> Norm {
        self.config.norm.unwrap_or_default()
    }
    pub fn cocycle(&self) -> &Cocycle {
        self.cocycle.as_ref().expect("validated")
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_range(name: &str, v: Option<f64>, lo_open: f64, hi: f64) -> Result<()> {
    match v {
        Some(x) if !(x > lo_open && x <= hi && x.is_finite()) => Err(cfg_err(format!("{name} = {x} out of range"))),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(format!("spec file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn apply(&mut self, o: &Overrides) {
        macro_rules! over {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f; } )* };
        }
        over!(seed, period_max, orbit_len, grid_eps, tol, tol_base, norm, eta);
    }

    fn fill_defaults(&mut self, cmd: Command, base: &BaseSystem) {
        use Command::*;
        self.norm.get_or_insert(Norm::Inf);
        if matches!(cmd, Obstruct | Exponents | Verify | Solve | Compare) {
            self.period_max.get_or_insert(DEFAULT_PERIOD_MAX);
            self.tol_base.get_or_insert(DEFAULT_TOL_BASE);
        }
        if matches!(cmd, Exponents | Goodtimes | Bunching | Verify) {
            self.orbit_len.get_or_insert(DEFAULT_ORBIT_LEN);
        }
        if matches!(cmd, Exponents | Verify) {
            self.eps.get_or_insert(base.expansion_rate() / 8.0);
        }
        if matches!(cmd, Goodtimes | Verify) {
            self.eps_schedule.get_or_insert(EpsSchedule::default());
        }
        if matches!(cmd, Bunching) {
            self.block.get_or_insert(DEFAULT_BLOCK);
            self.k_max.get_or_insert(10);
            self.theta.get_or_insert(base.expansion_rate() / 2.0);
            self.points.get_or_insert(16);
        }
        if matches!(cmd, Holonomy | Solve | Verify | Compare) {
            self.tol.get_or_insert(DEFAULT_TOL);
            self.n_cap.get_or_insert(DEFAULT_N_CAP);
        }
        if matches!(cmd, Holonomy | Verify) {
            self.points.get_or_insert(50);
        }
        if matches!(cmd, Solve | Verify | Compare) {
            self.grid_eps.get_or_insert(DEFAULT_GRID_EPS);
        }
        if matches!(cmd, Synth) {
            self.eta.get_or_insert(0.0);
        }
    }

    /// Applies overrides and defaults, then validates and compiles.
    pub fn resolve(mut self, cmd: Command, overrides: &Overrides) -> Result<Resolved> {
        self.apply(overrides);
        let base = BaseSystem::from_spec(&self.base).map_err(|e| cfg_err(format!("base: {e}")))?;
        self.fill_defaults(cmd, &base);
        if cmd.needs_seed() && self.seed.is_none() {
            return Err(cfg_err(format!("command {} has randomized steps and needs a seed", cmd.as_str())));
        }
        check_range("grid_eps", self.grid_eps, 0.0, 0.5)?;
        check_range("tol", self.tol, 0.0, 1.0)?;
        check_range("tol_base", self.tol_base, 0.0, 1.0)?;
        check_range("eps", self.eps, 0.0, f64::MAX)?;
        check_range("theta", self.theta, 0.0, f64::MAX)?;
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(cfg_err(format!("eta = {eta} must be nonnegative")));
            }
        }
        if let Some(p) = self.period_max {
            if p == 0 || p > DEFAULT_PERIOD_BUDGET {
                return Err(cfg_err(format!("period_max = {p} not in 1..={DEFAULT_PERIOD_BUDGET}")));
            }
        }
        if matches!(cmd, Command::Exponents | Command::Verify) && self.orbit_len.is_some_and(|n| n < 100) {
            return Err(cfg_err("orbit_len must be at least 100 for exponent estimates"));
        }
        for (name, v) in [("N", self.block), ("k_max", self.k_max), ("n_cap", self.n_cap), ("points", self.points)] {
            if v == Some(0) {
                return Err(cfg_err(format!("{name} must be positive")));
            }
        }
        let cocycle = match (&self.cocycle, cmd) {
            (Some(c), _) => Some(Cocycle::new(c, &base).map_err(|e| cfg_err(format!("cocycle: {e}")))?),
            (None, Command::Synth) => None,
            (None, _) => return Err(cfg_err(format!("command {} needs a cocycle block", cmd.as_str()))),
        };
        let transfer = match &self.transfer {
            Some(t) => Some(TransferFn::new(t, &base).map_err(|e| cfg_err(format!("transfer: {e}")))?),
            None => None,
        };
        if cmd == Command::Synth && transfer.is_none() && cocycle.is_none() {
            return Err(cfg_err("synth needs a transfer block (or a cocycle block to perturb)"));
        }
        if let (Some(c), Some(t)) = (&cocycle, &transfer) {
            if c.dim() != t.dim() {
                return Err(cfg_err(format!("cocycle dim {} differs from transfer dim {}", c.dim(), t.dim())));
            }
        }
        Ok(Resolved { command: cmd, config: self, base, cocycle, transfer })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
        "base": {"type": "toral", "matrix": [[2, 1], [1, 1]]},
        "cocycle": {"dim": 2, "kind": "exp_trig",
                    "terms": [{"coef": [[0, 0.3], [0, 0]], "freq": [1, 0], "phase": 0.0}],
                    "alpha": 1.0, "c0": "auto"},
        "seed": 7
    }"#;

    #[test]
    fn parses_and_resolves_with_defaults() {
        let r = ExperimentConfig::from_json(GOOD).unwrap().resolve(Command::Obstruct, &Overrides::default()).unwrap();
        assert_eq!(r.config.period_max, Some(DEFAULT_PERIOD_MAX));
        assert_eq!(r.config.tol_base, Some(DEFAULT_TOL_BASE));
        assert_eq!(r.config.grid_eps, None);
        let o = Overrides { period_max: Some(4), norm: Some(Norm::Two), ..Default::default() };
        let r = ExperimentConfig::from_json(GOOD).unwrap().resolve(Command::Obstruct, &o).unwrap();
        assert_eq!((r.config.period_max, r.norm()), (Some(4), Norm::Two));
    }

    #[test]
    fn echo_round_trips() {
        let r = ExperimentConfig::from_json(GOOD).unwrap().resolve(Command::Solve, &Overrides::default()).unwrap();
        let text = serde_json::to_string(&r.config).unwrap();
        let again = ExperimentConfig::from_json(&text).unwrap().resolve(Command::Solve, &Overrides::default()).unwrap();
        assert_eq!(again.config, r.config);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            GOOD.replace("\"seed\": 7", "\"seed\": 7, \"colour\": 1"),
            GOOD.replace("\"type\": \"toral\",", "\"type\": \"toral\", \"extra\": 0,"),
            GOOD.replace("[[2, 1], [1, 1]]", "[[1, 1], [0, 1]]"),
            GOOD.replace("\"phase\": 0.0", "\"phase\": 0.0, \"x\": 1"),
            GOOD.replace("\"alpha\": 1.0", "\"alpha\": 2.0"),
            GOOD.replace("\"seed\": 7", "\"grid_eps\": -1"),
            "{ not json".to_string(),
        ];
        for text in bad {
            let r = ExperimentConfig::from_json(&text).and_then(|c| c.resolve(Command::Solve, &Overrides::default()));
            assert!(matches!(r, Err(Error::Config(_))), "{text}");
        }
        let no_seed = GOOD.replace(",\n        \"seed\": 7", "");
        let c = ExperimentConfig::from_json(&no_seed).unwrap();
        assert!(c.clone().resolve(Command::Obstruct, &Overrides::default()).is_ok());
        assert!(matches!(c.resolve(Command::Solve, &Overrides::default()), Err(Error::Config(_))));
    }
}
