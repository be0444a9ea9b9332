use proptest::prelude::*;
use reservoir_hydro::kmc::{replica_rng, Engine, Method};
use reservoir_hydro::measures::{
    detailed_balance_residual, entropy_bound, relative_entropy, reservoir_entropy_term, reversible_measure, sample_with,
};
use reservoir_hydro::model::{apply_jump, enabled_transitions, total_mass};
use reservoir_hydro::oracle::{stationary_pi, transition_matrix};
use reservoir_hydro::stats::{tv_distance, SiteLaw};
use reservoir_hydro::{Configuration, ModelKind, ModelParams, Profile};

fn kind() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Rw), Just(ModelKind::Sep)]
}

fn params() -> impl Strategy<Value = ModelParams> {
    (kind(), 2usize..12, 0.0f64..2.5, 0.2f64..3.0).prop_map(|(k, n, th, a)| ModelParams::new(k, n, th, a).unwrap())
}

fn config_for(p: &ModelParams, seed: u64) -> Configuration {
    let level = if p.kind == ModelKind::Sep { 0.4 } else { 0.8 };
    let m = reversible_measure(level, p).unwrap();
    sample_with(&m, &mut replica_rng(seed, 1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jumps_conserve_mass_and_exclusion(p in params(), seed in any::<u64>()) {
        let cfg = config_for(&p, seed);
        for tr in enabled_transitions(&cfg, &p) {
            prop_assert!(tr.rate > 0.0 && tr.rate.is_finite());
            prop_assert_eq!(tr.from.abs_diff(tr.to), 1);
            let next = apply_jump(&cfg, tr.from, tr.to, &p).unwrap();
            prop_assert_eq!(total_mass(&next), total_mass(&cfg));
            prop_assert!(next.validate(&p).is_ok());
        }
    }

    #[test]
    fn engines_conserve_mass(p in params(), seed in any::<u64>(), t in 0.0f64..0.05) {
        let cfg = config_for(&p, seed);
        let methods: &[Method] = if p.kind == ModelKind::Rw { &[Method::EventDriven, Method::Particlewise] } else { &[Method::EventDriven] };
        for &m in methods {
            let mut e = Engine::with_method(&cfg, &p, m).unwrap();
            e.advance_to(t, &mut replica_rng(seed, 2));
            let occ = e.occupations().to_vec();
            prop_assert_eq!(occ.iter().sum::<u64>(), total_mass(&cfg));
            prop_assert!(Configuration::new(occ).validate(&p).is_ok());
        }
    }

    #[test]
    fn reversible_measures_satisfy_detailed_balance(
        kind in kind(), theta in 0.0f64..2.0, alpha in 0.3f64..2.5, level in 0.2f64..0.8,
    ) {
        let n = if kind == ModelKind::Rw { 3 } else { 4 };
        let p = ModelParams::new(kind, n, theta, alpha).unwrap();
        prop_assert!(detailed_balance_residual(&p, level, 3).unwrap() < 1e-12);
    }

    #[test]
    fn walk_law_is_stochastic_and_fixes_pi(n in 2usize..8, theta in 0.0f64..2.0, alpha in 0.3f64..2.5, t in 0.0f64..0.5) {
        let p = ModelParams::new(ModelKind::Rw, n, theta, alpha).unwrap();
        let law = transition_matrix(&p, t).unwrap().p;
        let pi = stationary_pi(&p).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..=n {
            let s: f64 = (0..=n).map(|i| pi[i] * law[(i, j)]).sum();
            prop_assert!((s - pi[j]).abs() < 1e-10);
        }
        prop_assert!(law.iter().all(|&v| v >= -1e-15));
    }

    #[test]
    fn entropy_stays_below_its_bound(a in 0.05f64..0.95, b in 0.05f64..0.95, n in 2usize..5000) {
        let g = Profile::parse(&format!("affine({a:?},{:?})", b - a)).unwrap();
        let p_ref = a / (1.0 + a);
        let p = ModelParams::new(ModelKind::Sep, n, 1.0, 1.0).unwrap();
        let h = relative_entropy(&g, p_ref, &p).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h + reservoir_entropy_term(&g, p_ref, &p).unwrap() <= entropy_bound(n, p_ref));
    }

    #[test]
    fn profiles_round_trip_through_display(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0.0f64..4.0) {
        let text = format!("sum(cos({a:?},{b:?},{k:?}),clamp01(affine({b:?},{a:?})))");
        let p = Profile::parse(&text).unwrap();
        prop_assert_eq!(Profile::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn tv_distance_is_a_probability(samples in prop::collection::vec(0u64..40, 1..200), mean in 0.01f64..30.0) {
        let d = tv_distance(&samples, SiteLaw::Poisson(mean));
        prop_assert!((0.0..=1.0).contains(&d));
    }
}
