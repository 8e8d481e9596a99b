use proptest::prelude::*;

use totpos::coop_sim::{self, AssumptionOptions, EntrainmentOptions, NonlinearSystem, OrderingOptions};
use totpos::forms::{builtin_spec, BoxDomain, SystemSource, BUILTIN_NAMES};
use totpos::{Error, Exec};

fn builtin(name: &str) -> NonlinearSystem {
    NonlinearSystem::from_spec(&builtin_spec(name).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_preserves_componentwise_order(
        a in prop::collection::vec(0.0f64..0.8, 3),
        d in prop::collection::vec(0.0f64..0.2, 3),
    ) {
        let sys = builtin("d3");
        let b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
        let ta = coop_sim::simulate(&sys, &a, 3.0, 1e-2).unwrap();
        let tb = coop_sim::simulate(&sys, &b, 3.0, 1e-2).unwrap();
        for (x, y) in ta.states.iter().zip(&tb.states) {
            for i in 0..3 {
                prop_assert!(x[i] <= y[i] + 1e-8);
            }
        }
    }

    #[test]
    fn ordering_on_d3_settles(a in prop::collection::vec(0.0f64..1.0, 3), b in prop::collection::vec(0.0f64..1.0, 3)) {
        prop_assume!(a != b);
        let sys = builtin("d3");
        let r = coop_sim::ordering_check(&sys, &a, &b, &OrderingOptions::default()).unwrap();
        prop_assert!(r.zero_bound_holds, "{} zeros", r.z1_zeros.count);
        prop_assert!(r.residual_consistent, "residual {}", r.max_residual);
        prop_assert!(r.passed);
    }
}

#[test]
fn analytic_jacobians_match_differences() {
    for name in BUILTIN_NAMES {
        let sys = builtin(name);
        for (k, x) in sys.random_states(20, 7).into_iter().enumerate() {
            let t = 0.13 * k as f64;
            let exact = sys.field().jacobian(t, &x).expect("analytic jacobian");
            let fd = coop_sim::jacobian_fd(&sys, t, &x);
            assert!(exact.max_abs_diff(&fd) < 1e-5, "{name}: {}", exact.max_abs_diff(&fd));
        }
    }
}

#[test]
fn ordered_start_stays_ordered() {
    let sys = builtin("d3");
    let b = vec![0.3, 0.4, 0.2];
    let a = vec![0.35, 0.4, 0.2];
    let r = coop_sim::ordering_check(&sys, &a, &b, &OrderingOptions::default()).unwrap();
    assert!(r.preserved_from_start);
    assert_eq!(r.settled_sign, Some(1));
    assert_eq!(r.z1_zeros.count, 0);
}

#[test]
fn identical_states_rejected() {
    let sys = builtin("d3");
    assert!(coop_sim::ordering_check(&sys, &[0.2; 3], &[0.2; 3], &OrderingOptions::default()).is_err());
}

#[test]
fn leaving_the_box_is_reported() {
    let src: SystemSource = serde_json::from_str(
        r#"{"builtin":"cubic_1d","overrides":{"omega":{"lo":[0.5],"hi":[0.9]}}}"#,
    )
    .unwrap();
    let sys = NonlinearSystem::from_spec(&src.resolve().unwrap()).unwrap();
    assert_eq!(sys.omega(), &BoxDomain::new(vec![0.5], vec![0.9]).unwrap());
    let err = coop_sim::simulate(&sys, &[0.8], 5.0, 1e-3).unwrap_err();
    assert!(matches!(err, Error::InvarianceViolation { coord: 0, .. }), "{err:?}");
    assert!(matches!(coop_sim::simulate(&sys, &[0.2], 1.0, 1e-3), Err(Error::Domain { .. })));
}

#[test]
fn sweeps_agree_across_executors() {
    let sys = builtin("d3");
    let x0s = sys.random_states(6, 3);
    let opts = EntrainmentOptions {
        max_periods: 40,
        ..EntrainmentOptions::default()
    };
    let seq = coop_sim::entrainment_sweep(&sys, &x0s, &opts, Exec::Sequential);
    let par = coop_sim::entrainment_sweep(&sys, &x0s, &opts, Exec::Parallel);
    assert_eq!(seq, par);

    let aopts = AssumptionOptions {
        n_samples: 500,
        n_pairs: 50,
        ..AssumptionOptions::default()
    };
    assert_eq!(
        coop_sim::check_assumptions(&sys, &aopts, Exec::Sequential),
        coop_sim::check_assumptions(&sys, &aopts, Exec::Parallel)
    );
}
