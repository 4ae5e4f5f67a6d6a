mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twoway::blockdiagram::{build_topology, Signal};
use twoway::closedloop::{closed_form_tfs, is_internally_stable, CodingScheme, LoopModel};
use twoway::decoupling::{
    check_decoupled, design_decoupling, design_with_gain, verify_impossibility, DecouplingTarget, DesignResult,
    FreeParams, REASON_BOTH,
};
use twoway::polyrat::rf_equal;
use twoway::RationalFunction;

const TOL: f64 = 1e-8;

/// Coefficient agreement relative to the largest coefficient; products of
/// random factors reach coefficients in the hundreds.
fn same(x: &RationalFunction, y: &RationalFunction) -> bool {
    let scale = [x.num(), x.den()].iter().map(|p| p.max_abs()).fold(1.0, f64::max);
    rf_equal(x, y, TOL * scale)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn plant_output_is_plant_times_input(seed in any::<u64>(), variant in 0usize..3) {
        let mut rng = rng(seed);
        let coding = random_coding(&mut rng, variant);
        let model = random_model(&mut rng, coding);
        let graph = build_topology(&model).unwrap();
        for input in [Signal::R, Signal::W, Signal::Z] {
            let u = graph.solve_tf(input, Signal::UBar).unwrap();
            let y = graph.solve_tf(input, Signal::YBar).unwrap();
            let py = model.plant() * &u;
            prop_assert!(same(&y, &py), "{:?}: {} vs {}", input, y, py);
        }
    }

    #[test]
    fn equation_order_does_not_matter(seed in any::<u64>(), variant in 0usize..3) {
        let mut rng = rng(seed);
        let coding = random_coding(&mut rng, variant);
        let model = random_model(&mut rng, coding);
        let graph = build_topology(&model).unwrap();
        let mut shuffled = graph.clone();
        shuffled.equations.shuffle(&mut rng);
        for eq in shuffled.equations.iter_mut() {
            eq.terms.shuffle(&mut rng);
        }
        for input in [Signal::R, Signal::W, Signal::Z] {
            for output in [Signal::UBar, Signal::YBar] {
                let a = graph.solve_tf(input, output).unwrap();
                let b = shuffled.solve_tf(input, output).unwrap();
                prop_assert!(same(&a, &b), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn closed_forms_satisfy_loop_identities(seed in any::<u64>(), variant in 0usize..3) {
        let mut rng = rng(seed);
        let coding = random_coding(&mut rng, variant);
        let model = random_model(&mut rng, coding);
        let t = closed_form_tfs(&model).unwrap();
        let p = model.plant();
        for (u, y) in [(&t.t_ur, &t.t_yr), (&t.t_uw, &t.t_yw), (&t.t_uz, &t.t_yz)] {
            prop_assert!(same(y, &(p * u)));
        }
        // the reference path does not see the coding
        let plain = LoopModel::new(p.clone(), model.controller().clone(), CodingScheme::None).unwrap();
        let t0 = closed_form_tfs(&plain).unwrap();
        prop_assert!(same(&t.t_ur, &t0.t_ur));
        // S = 1/(1+KP) and T_ur = K·S
        let s = (RationalFunction::one() + model.controller() * p).inv().unwrap();
        prop_assert!(same(&t0.t_ur, &(model.controller() * &s)));
        prop_assert!(same(&t0.t_uw, &s));
        prop_assert!(same(&t0.t_uz, &-(model.controller() * &s)));
    }

    #[test]
    fn one_way_coding_scales_attack_maps(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let coding = random_one_way(&mut rng);
        let CodingScheme::OneWay { alpha, beta } = coding else { unreachable!() };
        let model = random_model(&mut rng, coding);
        let plain = LoopModel::new(model.plant().clone(), model.controller().clone(), CodingScheme::None).unwrap();
        let a = closed_form_tfs(&model).unwrap();
        let b = closed_form_tfs(&plain).unwrap();
        prop_assert!(same(&a.t_ur, &b.t_ur));
        prop_assert!(same(&a.t_yr, &b.t_yr));
        prop_assert!(same(&a.t_uw, &b.t_uw.scale(1.0 / alpha)));
        prop_assert!(same(&a.t_uz, &b.t_uz.scale(1.0 / beta)));
    }

    #[test]
    fn designs_decouple_their_target(seed in any::<u64>(), forward in any::<bool>()) {
        let mut rng = rng(seed);
        let (p, _) = random_stabilizable_plant(&mut rng);
        let target = if forward { DecouplingTarget::ForwardAttackW } else { DecouplingTarget::FeedbackAttackZ };
        let design = design_decoupling(&p, target, FreeParams::default()).unwrap();
        let DesignResult::Feasible { gain, coding } = design else {
            return Err(TestCaseError::fail("stabilizable plant reported infeasible"));
        };
        prop_assert!(coding.det() != 0.0 && coding.a * coding.d != 0.0);
        let model = LoopModel::new(p.clone(), RationalFunction::constant(gain), CodingScheme::TwoWay(coding)).unwrap();
        prop_assert!(is_internally_stable(&model));
        let tfs = closed_form_tfs(&model).unwrap();
        prop_assert!(check_decoupled(&tfs, target));
        if forward {
            prop_assert!(tfs.t_uw.is_zero() || rf_equal(&tfs.t_uw, &RationalFunction::zero(), 1e-9));
        }
    }

    #[test]
    fn decoupling_survives_plant_changes(seed in any::<u64>(), forward in any::<bool>()) {
        let mut rng = rng(seed);
        let p = random_plant(&mut rng);
        let gain = 0.5 + 2.0 * rand::Rng::gen::<f64>(&mut rng);
        let target = if forward { DecouplingTarget::ForwardAttackW } else { DecouplingTarget::FeedbackAttackZ };
        let a = 0.5 + rand::Rng::gen::<f64>(&mut rng);
        let d = -0.5 - rand::Rng::gen::<f64>(&mut rng);
        let free = FreeParams { a, d, b: 0.7, c: -0.3 };
        // the coding depends only on K, so it decouples any plant the loop
        // is well defined for
        let coding = match target {
            DecouplingTarget::ForwardAttackW => twoway::closedloop::TwoWayCoding { a, b: free.b, c: -1.0 / gain, d },
            // b = (ad - bc)K solved for b
            _ => twoway::closedloop::TwoWayCoding { a, b: a * d * gain / (1.0 + free.c * gain), c: free.c, d },
        };
        prop_assume!(coding.det().abs() > 1e-3 && coding.b.abs() < 1e6);
        let model = LoopModel::new(p, RationalFunction::constant(gain), CodingScheme::TwoWay(coding));
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        prop_assume!(!model.characteristic_polynomial().is_zero());
        let tfs = closed_form_tfs(&model).unwrap();
        prop_assert!(check_decoupled(&tfs, target));
    }

    #[test]
    fn both_targets_are_infeasible(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let (p, k) = random_stabilizable_plant(&mut rng);
        let r = design_decoupling(&p, DecouplingTarget::Both, FreeParams::default()).unwrap();
        prop_assert_eq!(r, DesignResult::Infeasible { reason: REASON_BOTH.to_string() });
        let r = design_with_gain(&p, DecouplingTarget::Both, k, FreeParams::default()).unwrap();
        prop_assert!(!r.is_feasible());
    }

    #[test]
    fn simultaneous_conditions_force_ad_k_zero(
        a in 0.1..3.0f64, d in 0.1..3.0f64, k in 0.1..3.0f64, sa in any::<bool>(), sd in any::<bool>(), sk in any::<bool>(),
    ) {
        let a = if sa { -a } else { a };
        let d = if sd { -d } else { d };
        let k = if sk { -k } else { k };
        // c = -1/K, b = (ad - bc)K  =>  b = adK + b, i.e. adK = 0
        let c = -1.0 / k;
        prop_assert!(verify_impossibility(a, 0.5, c, d, k).unwrap());
    }
}
