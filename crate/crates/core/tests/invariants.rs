use std::sync::Arc;

use jumplab_core::compensator::integral_formula_check;
use jumplab_core::drift::variation_decompose;
use jumplab_core::{
    classify, classify_with, gallery, parse, simulate_paths, Atom, CompensatedJump, DensityPiece,
    DriftSpec, JumpLaw, ProbeOptions, SimOptions, Tri,
};
use proptest::prelude::*;

fn find(name: &str) -> jumplab_core::GalleryEntry {
    gallery::load(name).unwrap()
}

fn mixed_law() -> JumpLaw {
    JumpLaw::new(
        vec![DensityPiece {
            lower: 0.0,
            upper: 1.0,
            density: parse("1.5 * t").unwrap(),
        }],
        vec![Atom {
            at: 0.5,
            mass: 0.25,
        }],
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stieltjes_integral_is_additive(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0, p in 0u32..4) {
        let mut v = [x, y, z];
        v.sort_by(f64::total_cmp);
        prop_assume!(v[1] - v[0] > 1e-6 && v[2] - v[1] > 1e-6);
        let [a, b, c] = v;
        let phi = move |t: f64| Ok(1.0 + t.powi(p as i32) - 0.5 * t);
        for law in [JumpLaw::uniform(), mixed_law()] {
            let whole = law.stieltjes_integral(&phi, a, c).unwrap();
            let split = law.stieltjes_integral(&phi, a, b).unwrap() + law.stieltjes_integral(&phi, b, c).unwrap();
            prop_assert!((whole - split).abs() <= 2e-9 * whole.abs().max(1.0), "{whole} vs {split}");
        }
    }

    #[test]
    fn integral_formula_holds_on_random_intervals(x in 0.0f64..1.0, y in 0.0f64..1.0, which in 0usize..3) {
        let name = ["integrable-slm", "h1-bounded", "hazard-compensated"][which];
        let e = find(name);
        let comp = CompensatedJump::new(&e.spec, &e.law).unwrap();
        let top = if e.law.right_endpoint().is_finite() { e.law.truncation(6) } else { 8.0 };
        let (a, b) = (x.min(y) * top, x.max(y) * top);
        prop_assume!(b - a > 1e-9);
        let check = integral_formula_check(&comp, a, b).unwrap();
        prop_assert!(check.passed, "{name}: {}", check.detail);
    }

    #[test]
    fn decomposition_holds_pointwise(t in 0.0f64..0.98) {
        let e = find("nonintegrable-slm");
        let parts = variation_decompose(&e.spec);
        let f = e.spec.bind(&e.law).unwrap();
        let up = parts.up.bind(&e.law).unwrap();
        let down = parts.down.bind(&e.law).unwrap();
        let abs = parts.abs.bind(&e.law).unwrap();
        let (fu, fd) = (up.value(t).unwrap(), down.value(t).unwrap());
        let scale = fu.max(fd).max(1.0);
        prop_assert!((f.value(t).unwrap() - (f.f0() + fu - fd)).abs() <= 2e-8 * scale);
        prop_assert!((abs.value(t).unwrap() - (fu + fd)).abs() <= 2e-8 * scale);
    }

    #[test]
    fn simulation_ignores_worker_count(seed in any::<u64>(), threads in 1usize..5) {
        let e = find("integrable-slm");
        let comp = Arc::new(CompensatedJump::new(&e.spec, &e.law).unwrap());
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let one = simulate_paths(&comp, &grid, 64, seed, &SimOptions { threads: Some(1) }).unwrap();
        let many = simulate_paths(&comp, &grid, 64, seed, &SimOptions { threads: Some(threads) }).unwrap();
        prop_assert_eq!(one.gammas(), many.gammas());
        for p in 0..64 {
            prop_assert_eq!(one.path(p), many.path(p));
        }
    }

    #[test]
    fn paths_are_flat_after_the_jump(seed in any::<u64>()) {
        let e = find("h1-bounded");
        let comp = Arc::new(CompensatedJump::new(&e.spec, &e.law).unwrap());
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let b = simulate_paths(&comp, &grid, 32, seed, &SimOptions::default()).unwrap();
        for p in 0..32 {
            let gamma = b.gammas()[p];
            let jumped = comp.op(gamma).unwrap();
            for (i, &t) in grid.iter().enumerate() {
                let v = b.value(p, i);
                if t >= gamma {
                    prop_assert_eq!(v, jumped);
                } else {
                    prop_assert_eq!(v, comp.drift().value(t).unwrap());
                }
            }
        }
    }
}

#[test]
fn matching_hints_leave_the_regime_alone() {
    for name in gallery::list() {
        let e = find(name);
        let before = classify(&e.spec, &e.law).unwrap();
        let comp = CompensatedJump::new(&e.spec, &e.law).unwrap();
        let Some(known) = comp.op_integrable().unwrap().0 else {
            continue;
        };
        let mut spec = e.spec.clone();
        spec.hints.op_integrable = if known { Tri::Yes } else { Tri::No };
        let after = classify(&spec, &e.law).unwrap();
        assert_eq!(before.regime.name(), after.regime.name(), "{name}");
    }
}

#[test]
fn a_hint_refines_unknown_to_a_leaf() {
    let spec = DriftSpec::new(1f64.sin(), parse("cos(1/(1-t))/(1-t)^2").unwrap())
        .with_closed_form(parse("sin(1/(1-t))").unwrap());
    let opts = ProbeOptions {
        max_depth: 20,
        ..ProbeOptions::default()
    };
    let law = JumpLaw::uniform();
    assert!(classify_with(&spec, &law, &opts)
        .unwrap()
        .regime
        .is_unknown());

    let mut hinted = spec.clone();
    hinted.hints.op_integrable = Tri::No;
    let v = classify_with(&hinted, &law, &opts).unwrap();
    assert_eq!(v.regime.name(), "nonintegrable_local_martingale");
}
