use livsic::base::{BasePoint, BaseSystem, LeafSide, TorusPoint};
use livsic::cocycle::{Cocycle, CocycleSpec, TrigTerm};
use livsic::holonomy::stable_holonomy;
use livsic::operator::{op_metric, InvertibleOp, Mat, Norm};
use livsic::transfer::*;
use livsic::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn smooth_transfer() -> CocycleSpec {
    CocycleSpec::exp_trig(
        2,
        vec![
            TrigTerm { coef: vec![vec![0.2, 0.1], vec![-0.1, 0.0]], freq: [1, 0], phase: 0.3 },
            TrigTerm { coef: vec![vec![0.0, 0.0], vec![0.15, -0.1]], freq: [1, 1], phase: 0.0 },
        ],
    )
}

fn coarse(orbit_len: Option<u64>) -> PropagationConfig {
    PropagationConfig { orbit_len, grid_eps: 0.05, precheck: None, norm: Norm::Inf }
}

fn lattice(base: &BaseSystem) -> Vec<BasePoint> {
    default_probes(base, 11, 4, 1).unwrap()
}

#[test]
fn identity_cocycle_gives_identity_samples() {
    for base in [BaseSystem::cat_map(), BaseSystem::golden_mean()] {
        let c = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
        let probes = lattice(&base);
        let m = solve_orbit_propagation(&c, &base, &Start::Seeded(1), &probes, &coarse(None)).unwrap();
        assert!(m.samples.iter().all(|s| s.value.to_op() == InvertibleOp::identity(2)));
        let r = residual(&c, &base, &m, &probes, Norm::Inf).unwrap();
        assert_eq!(r.sup, 0.0);
    }
}

#[test]
fn coboundary_samples_match_closed_form() {
    let base = BaseSystem::cat_map();
    let c = Cocycle::new(&CocycleSpec::coboundary_of(smooth_transfer()), &base).unwrap();
    let t = c.transfer(&base).unwrap();
    let m = solve_orbit_propagation(&c, &base, &Start::Seeded(2), &lattice(&base), &coarse(Some(20_000))).unwrap();
    let c0_inv = t.eval(&base, &m.anchor_sample().point).unwrap().inverted();
    for s in &m.samples {
        let want = t.eval(&base, &s.point).unwrap().compose(&c0_inv);
        let n = s.index.unwrap().max(1) as f64;
        assert!(op_metric(&s.value.to_op(), &want, Norm::Inf).unwrap() <= 1e-8 * n);
    }
    let (on_orbit, pairs) = on_orbit_residual(&c, &base, &m, Norm::Inf).unwrap();
    assert!(pairs > 10);
    assert!(on_orbit <= 1e-10, "{on_orbit:e}");
}

#[test]
fn segment_products_telescope() {
    let base = BaseSystem::cat_map();
    let c = Cocycle::new(&CocycleSpec::coboundary_of(smooth_transfer()), &base).unwrap();
    let m = solve_orbit_propagation(&c, &base, &Start::Seeded(3), &lattice(&base), &coarse(Some(5_000))).unwrap();
    for w in m.samples.windows(2).take(20) {
        let k = (w[1].index.unwrap() - w[0].index.unwrap()) as f64;
        assert!(segment_defect(&c, &base, &w[0], &w[1], Norm::Inf).unwrap() <= 1e-8 * k);
    }
}

#[test]
fn precheck_rejects_non_coboundary() {
    let base = BaseSystem::cat_map();
    let diag = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    let c = Cocycle::new(&CocycleSpec::constant(&diag), &base).unwrap();
    let cfg = PropagationConfig { precheck: Some(Precheck { period_max: 3, tol_base: 1e-9 }), ..coarse(Some(100)) };
    let err = solve_orbit_propagation(&c, &base, &Start::Seeded(1), &lattice(&base), &cfg).unwrap_err();
    assert!(matches!(err, Error::ObstructionFailed { period: 1, .. }));
    // without the pre-check the samples grow like 2^n and the residual explodes
    let m = solve_orbit_propagation(&c, &base, &Start::Seeded(1), &lattice(&base), &coarse(Some(20_000))).unwrap();
    let r = residual(&c, &base, &m, &lattice(&base), Norm::Inf).unwrap();
    assert!(r.sup > 0.1);
}

#[test]
fn short_orbit_is_not_dense() {
    let base = BaseSystem::cat_map();
    let c = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
    let err = solve_orbit_propagation(&c, &base, &Start::Seeded(1), &lattice(&base), &coarse(Some(10))).unwrap_err();
    assert!(matches!(err, Error::OrbitNotDense { .. }));
}

#[test]
fn comparison_up_to_constant() {
    let base = BaseSystem::golden_mean();
    let c = Cocycle::new(&CocycleSpec::coboundary_of(smooth_transfer()), &base).unwrap();
    let probes = lattice(&base);
    let m = solve_orbit_propagation(&c, &base, &Start::Seeded(4), &probes, &coarse(None)).unwrap();
    let same = compare_up_to_constant(&base, &m, &m, &probes, Norm::Inf).unwrap();
    assert_eq!(same.sup, 0.0);
    assert_eq!(same.constant, InvertibleOp::identity(2));
    let g = InvertibleOp::new(Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.5, 3.0])).unwrap();
    let shifted = m.right_multiplied(&g).unwrap();
    assert!(compare_up_to_constant(&base, &m, &shifted, &probes, Norm::Inf).unwrap().sup < 1e-12);
}

#[test]
fn holonomy_extension_matches_closed_form() {
    for base in [BaseSystem::cat_map(), BaseSystem::golden_mean()] {
        let c = Cocycle::new(&CocycleSpec::coboundary_of(smooth_transfer()), &base).unwrap();
        let t = c.transfer(&base).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = base.random_point(&mut rng, 40);
        let grid = patch_grid(&base, &x0, base.product_structure_radius() / 2.0, 5, &mut rng).unwrap();
        let tol = 1e-9;
        let ext = solve_holonomy_extension(&c, &base, &x0, &grid, tol, 400, Norm::Inf).unwrap();
        assert!(ext.skipped.is_empty(), "{:?}", ext.skipped);
        assert_eq!(ext.map.anchor_sample().value.to_op(), InvertibleOp::identity(2));
        let c0_inv = t.eval(&base, &x0).unwrap().inverted();
        for s in &ext.map.samples {
            let want = t.eval(&base, &s.point).unwrap().compose(&c0_inv);
            assert!(op_metric(&s.value.to_op(), &want, Norm::Inf).unwrap() <= 10.0 * tol);
        }
    }
}

#[test]
fn holonomy_extension_on_stable_leaf_is_stable_holonomy() {
    let base = BaseSystem::cat_map();
    let c = Cocycle::new(&CocycleSpec::coboundary_of(smooth_transfer()), &base).unwrap();
    let x0 = BasePoint::Torus(TorusPoint::rational([123, 456], 1009).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = base.leaf_partner(&x0, LeafSide::Stable, 0.05, &mut rng).unwrap();
    let ext = solve_holonomy_extension(&c, &base, &x0, &[z.clone()], 1e-9, 400, Norm::Inf).unwrap();
    let hs = stable_holonomy(&c, &base, &x0, &z, 1e-9, 400, Norm::Inf).unwrap();
    let got = ext.map.samples[1].value.to_op();
    assert!(op_metric(&got, &hs.value, Norm::Inf).unwrap() < 1e-12);
}

#[test]
fn holder_estimate_of_constant_map_is_infinite() {
    let base = BaseSystem::cat_map();
    let c = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
    let probes = default_probes(&base, 5, 8, 2).unwrap();
    let cfg = PropagationConfig { grid_eps: 0.01, ..coarse(None) };
    let m = solve_orbit_propagation(&c, &base, &Start::Seeded(5), &probes, &cfg).unwrap();
    let h = holder_exponent_estimate(&base, &m, 10_000, 0.2, Norm::Inf).unwrap();
    assert!(h.alpha.is_infinite());
}

#[test]
fn holder_estimate_needs_pairs() {
    let base = BaseSystem::cat_map();
    let c = Cocycle::new(&CocycleSpec::constant(&Mat::identity(2, 2)), &base).unwrap();
    let probes = vec![BasePoint::Torus(TorusPoint::rational([1, 1], 3).unwrap())];
    let m = solve_orbit_propagation(&c, &base, &Start::Seeded(5), &probes, &coarse(None)).unwrap();
    assert!(matches!(holder_exponent_estimate(&base, &m, 10_000, 0.2, Norm::Inf), Err(Error::InsufficientSpread(_))));
}
