//! Ground-truth synthesis: coboundaries from a transfer map, seeded
//! perturbations, and the declared-Hölder-constant check.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::base::{BasePoint, BaseSystem, LeafSide};
use crate::cocycle::{Cocycle, CocycleSpec, HolderConst, TransferFn, TransferSpec, TrigTerm};
use crate::error::{Error, Result};
use crate::operator::{inf_norm, Norm};

/// Points used to record the norm budget of a synthesized coboundary.
pub const BUDGET_SAMPLES: usize = 4096;
/// Symbolic span of sampled SFT points.
const SAMPLE_SPAN: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub spec: CocycleSpec,
    /// `B = max max(‖C(x)‖, ‖C(x)⁻¹‖)` over the sampled points.
    pub norm_budget: f64,
    pub samples: usize,
}

/// `coboundary_of(C)` together with its sampled norm budget `B`.
pub fn make_coboundary(transfer: &TransferSpec, base: &BaseSystem, seed: u64, norm: Norm) -> Result<Synthesized> {
    let f = TransferFn::new(transfer, base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<BasePoint> = (0..BUDGET_SAMPLES).map(|_| base.random_point(&mut rng, SAMPLE_SPAN)).collect();
    let norm_budget = points
        .par_iter()
        .map(|x| f.eval(base, x).map(|c| c.norm_bound(norm)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(1.0, f64::max);
    let mut spec = CocycleSpec::coboundary_of(transfer.clone());
    spec.alpha = transfer.alpha;
    Ok(Synthesized { spec, norm_budget, samples: BUDGET_SAMPLES })
}

/// Number of trigonometric terms in a seeded perturbation.
const PERTURBATION_TERMS: usize = 3;

/// Left-multiplies the generator by `exp(η·G(x))` for a seeded trigonometric
/// `G` with `Σ‖coef‖∞ = 1`. `η = 0` returns the input unchanged.
pub fn make_perturbed(spec: &CocycleSpec, eta: f64, seed: u64) -> Result<CocycleSpec> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidSpec(format!("eta {eta} must be a nonnegative number")));
    }
    if eta == 0.0 {
        return Ok(spec.clone());
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(Vec<Vec<f64>>, [i64; 2], f64)> = (0..PERTURBATION_TERMS)
        .map(|_| {
            let coef: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let freq = loop {
                let f = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
                if f != [0, 0] {
                    break f;
                }
            };
            (coef, freq, rng.gen_range(0.0..TAU))
        })
        .collect();
    let total: f64 = raw
        .iter()
        .map(|(c, _, _)| inf_norm(&crate::cocycle::spec::mat_from_rows(c, d).expect("square by construction")))
        .sum();
    let terms = raw
        .into_iter()
        .map(|(coef, freq, phase)| TrigTerm {
            coef: coef.into_iter().map(|r| r.into_iter().map(|v| eta * v / total).collect()).collect(),
            freq,
            phase,
        })
        .collect();
    let mut out = CocycleSpec::perturbed(spec.clone(), terms);
    if spec.c0.is_some() {
        out.c0 = Some(HolderConst::Auto(crate::cocycle::AutoWord::Auto));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderCheck {
    pub alpha: f64,
    pub declared: Option<f64>,
    /// `max ‖A(x) − A(y)‖∞ / d(x,y)^α` over the sampled pairs.
    pub empirical: f64,
    pub pairs: usize,
    /// `None` when no constant was declared (or it was `"auto"`).
    pub consistent: Option<bool>,
}

/// Near pairs at log-uniform distances in `[10⁻⁴, 10⁻¹]` (torus) or at
/// depths `1..=16` (SFT).
pub fn near_pairs(base: &BaseSystem, seed: u64, count: usize) -> Result<Vec<(BasePoint, BasePoint)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = base.random_point(&mut rng, SAMPLE_SPAN);
            let y = match (base, &x) {
                (BaseSystem::Toral(_), BasePoint::Torus(p)) => {
                    let r = 10f64.powf(rng.gen_range(-4.0..-1.0));
                    let th: f64 = rng.gen_range(0.0..TAU);
                    BasePoint::Torus(p.translate([r * th.cos(), r * th.sin()]))
                }
                (BaseSystem::Sft(s), _) => {
                    let beta = s.metric_base();
                    let k1: i32 = rng.gen_range(1..=16);
                    let k2: i32 = rng.gen_range(1..=16);
                    let y = base.leaf_partner(&x, LeafSide::Stable, beta.powi(k1), &mut rng)?;
                    base.leaf_partner(&y, LeafSide::Unstable, beta.powi(k2), &mut rng)?
                }
                _ => unreachable!("random points belong to their base"),
            };
            Ok((x, y))
        })
        .collect()
}

/// Checks the declared `(c₀, α)` of a generator on `count` sampled pairs.
pub fn holder_check(cocycle: &Cocycle, base: &BaseSystem, seed: u64, count: usize) -> Result<HolderCheck> {
    let pairs = near_pairs(base, seed, count)?;
    let chunks: Vec<&[(BasePoint, BasePoint)]> = pairs.chunks(256).collect();
    let empirical = chunks
        .par_iter()
        .map(|c| cocycle.holder_ratio(base, c))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let declared = match cocycle.spec().c0 {
        Some(HolderConst::Value(v)) => Some(v),
        _ => None,
    };
    Ok(HolderCheck {
        alpha: cocycle.alpha(),
        declared,
        empirical,
        pairs: pairs.len(),
        consistent: declared.map(|c| empirical <= c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::TorusPoint;
    use crate::operator::{op_metric, InvertibleOp, Mat};
    use std::collections::BTreeMap;

    fn unitriangular() -> TransferSpec {
        CocycleSpec::exp_trig(
            2,
            vec![TrigTerm { coef: vec![vec![0.0, 0.3], vec![0.0, 0.0]], freq: [1, 0], phase: 0.0 }],
        )
    }

    #[test]
    fn constant_transfer_gives_identity() {
        let base = BaseSystem::cat_map();
        let g = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let s = make_coboundary(&CocycleSpec::constant(&g), &base, 1, Norm::Inf).unwrap();
        let c = Cocycle::new(&s.spec, &base).unwrap();
        let x = BasePoint::Torus(TorusPoint::float(0.1, 0.8).unwrap());
        assert!(op_metric(&c.eval(&base, &x).unwrap(), &InvertibleOp::identity(2), Norm::Inf).unwrap() < 1e-15);
        assert_eq!(s.norm_budget, 3f64.max(inf_norm(&g.try_inverse().unwrap())));
    }

    #[test]
    fn unitriangular_generator_and_budget() {
        let base = BaseSystem::cat_map();
        let s = make_coboundary(&unitriangular(), &base, 2, Norm::Inf).unwrap();
        let c = Cocycle::new(&s.spec, &base).unwrap();
        let x = BasePoint::Torus(TorusPoint::rational([5, 9], 23).unwrap());
        let fx = base.iterate(&x, 1);
        let [x1, _] = x.as_torus().unwrap().coords();
        let [f1, _] = fx.as_torus().unwrap().coords();
        let b = 0.3 * ((TAU * f1).sin() - (TAU * x1).sin());
        let want = Mat::from_row_slice(2, 2, &[1.0, b, 0.0, 1.0]);
        assert!((c.eval(&base, &x).unwrap().forward() - want).abs().max() < 1e-14);
        // ‖C^{±1}‖∞ = 1 + 0.3|sin| ≤ 1.3, attained up to sampling
        assert!(s.norm_budget <= 1.3 && s.norm_budget > 1.29);
    }

    #[test]
    fn locally_constant_window_grows_by_one() {
        let base = BaseSystem::golden_mean();
        let mut table = BTreeMap::new();
        let mats = [[1.0, 0.5, 0.0, 1.0], [2.0, 0.0, 0.0, 0.5], [1.0, 0.0, -0.4, 1.0]];
        for (w, m) in ["00", "01", "10"].iter().zip(mats) {
            table.insert(w.to_string(), vec![vec![m[0], m[1]], vec![m[2], m[3]]]);
        }
        let s = make_coboundary(&CocycleSpec::locally_constant(2, 2, 0, table), &base, 3, Norm::Inf).unwrap();
        let c = Cocycle::new(&s.spec, &base).unwrap();
        let BaseSystem::Sft(sft) = &base else { unreachable!() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = base.random_point(&mut rng, 10);
            let w = x.as_symbolic().unwrap().window(0, 3);
            let y = BasePoint::Symbolic(sft.periodic_point(&periodic_extension(sft, &w)).unwrap());
            assert_eq!(c.eval(&base, &x).unwrap(), c.eval(&base, &y).unwrap());
        }
    }

    /// A cycle word starting with `w`.
    fn periodic_extension(sft: &crate::base::Sft, w: &[u8]) -> Vec<u8> {
        let last = *w.last().unwrap();
        (0..4)
            .find_map(|len| sft.connector(last, w[0], len))
            .map(|c| [w, &c[..]].concat())
            .unwrap()
    }

    #[test]
    fn zero_perturbation_is_identity_and_seeding_is_deterministic() {
        let spec = CocycleSpec::coboundary_of(unitriangular());
        assert_eq!(make_perturbed(&spec, 0.0, 9).unwrap(), spec);
        let a = serde_json::to_string(&make_perturbed(&spec, 0.1, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&make_perturbed(&spec, 0.1, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        let p = make_perturbed(&spec, 0.1, 9).unwrap();
        let total: f64 = p
            .terms
            .unwrap()
            .iter()
            .map(|t| inf_norm(&crate::cocycle::spec::mat_from_rows(&t.coef, 2).unwrap()))
            .sum();
        assert!((total - 0.1).abs() < 1e-15);
        assert!(make_perturbed(&spec, -1.0, 9).is_err());
    }

    #[test]
    fn declared_holder_constant_is_checked() {
        let base = BaseSystem::cat_map();
        let spec = CocycleSpec::coboundary_of(unitriangular()).with_holder(1.0, HolderConst::Value(100.0));
        let c = Cocycle::new(&spec, &base).unwrap();
        let h = holder_check(&c, &base, 1, 2000).unwrap();
        assert_eq!(h.consistent, Some(true));
        assert!(h.empirical > 0.0);
        let tight = CocycleSpec::coboundary_of(unitriangular()).with_holder(1.0, HolderConst::Value(1e-3));
        let c = Cocycle::new(&tight, &base).unwrap();
        assert_eq!(holder_check(&c, &base, 1, 2000).unwrap().consistent, Some(false));
    }
}
