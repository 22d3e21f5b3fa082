use proptest::prelude::*;

use udual::fixtures::{self, RandomTreeSpec};
use udual::primal::is_feasible_consumption;
use udual::scenario::format::{parse_scenario, ScenarioFile};
use udual::scenario::validate_scenario;
use udual::verify::probes;
use udual::{Error, Instance, NumericPolicy, UtilityField};

fn tiny(seed: u64) -> Option<Instance> {
    let policy = NumericPolicy { vertex_cap: 40, ..NumericPolicy::default() };
    match Instance::from_file(&fixtures::random_file(seed, RandomTreeSpec::tiny()), policy) {
        Ok(i) => Some(i),
        Err(Error::Capacity { .. }) => None,
        Err(e) => panic!("seed {seed}: {e}"),
    }
}

fn tri1(gamma: Option<f64>) -> Instance {
    let field = gamma.map_or_else(UtilityField::log, |g| UtilityField::power(g).unwrap());
    Instance::new(fixtures::tri1(), field, NumericPolicy::default()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scenario_round_trip(seed in 0u64..10_000) {
        let file = fixtures::random_file(seed, RandomTreeSpec::medium());
        let back = parse_scenario(&file.to_json()).unwrap();
        prop_assert_eq!(&back, &file);
        let model = file.to_scenario().unwrap();
        let field = file.utility_field().unwrap();
        let rebuilt = ScenarioFile::from_model(&model, field.as_ref()).to_scenario().unwrap();
        prop_assert_eq!(rebuilt, model);
    }

    #[test]
    fn validation_is_idempotent_and_clock_mass_bounded(seed in 0u64..10_000) {
        let s = fixtures::random_file(seed, RandomTreeSpec::medium()).to_scenario().unwrap();
        let first = validate_scenario(&s);
        prop_assert!(first.is_empty());
        prop_assert_eq!(validate_scenario(&s), first);
        let mass: f64 = s.clock_weights().iter().sum();
        prop_assert!(mass <= s.clock().bound + 1e-12);
    }

    #[test]
    fn primal_optimum_is_feasible(seed in 0u64..2_000, k in 0usize..4) {
        let Some(inst) = tiny(seed) else { return Ok(()) };
        let pts = probes::interior_k(&inst.cones, 4, seed);
        let p = &pts[k];
        let sol = inst.primal(p[0], &p[1..]).unwrap();
        let feas = is_feasible_consumption(&inst.scenario, &inst.polytope, &sol.consumption, p[0], &p[1..], 1e-8).unwrap();
        prop_assert!(feas.feasible, "violation {}", feas.worst_violation);
    }

    #[test]
    fn fenchel_young(seed in 0u64..2_000) {
        let Some(inst) = tiny(seed) else { return Ok(()) };
        let ks = probes::interior_k(&inst.cones, 3, seed);
        let ls = probes::interior_l(&inst.cones, 3, seed ^ 1);
        for k in &ks {
            let u = inst.u(k[0], &k[1..]).unwrap();
            for l in &ls {
                let v = inst.v(l[0], &l[1..]).unwrap();
                let pair: f64 = k.iter().zip(l).map(|(a, b)| a * b).sum();
                prop_assert!(u <= v + pair + 1e-7, "u {u} v {v} pair {pair}");
            }
        }
    }

    #[test]
    fn u_concave_and_increasing_in_x(x in 0.2f64..3.0, h in 0.05f64..1.0) {
        let inst = tri1(None);
        let q = [0.1];
        let lo = inst.u(x, &q).unwrap();
        let hi = inst.u(x + 2.0 * h, &q).unwrap();
        let mid = inst.u(x + h, &q).unwrap();
        prop_assert!(lo <= mid + 1e-10 && mid <= hi + 1e-10);
        prop_assert!(mid + 1e-9 >= 0.5 * (lo + hi));
    }

    #[test]
    fn v_convex_in_y(y in 0.5f64..3.0, h in 0.05f64..0.5) {
        let inst = tri1(None);
        let r = [0.1];
        let a = inst.v(y, &r).unwrap();
        let b = inst.v(y + 2.0 * h, &r).unwrap();
        let m = inst.v(y + h, &r).unwrap();
        prop_assert!(m <= 0.5 * (a + b) + 1e-9);
    }

    #[test]
    fn log_utility_scales_additively(x in 0.5f64..2.0, s in 0.2f64..5.0) {
        let inst = tri1(None);
        let mass: f64 = inst.scenario.clock_weights().iter().sum();
        let q = [0.2 * x];
        let base = inst.u(x, &q).unwrap();
        let scaled = inst.u(s * x, &[s * q[0]]).unwrap();
        prop_assert!(close(scaled, base + mass * s.ln(), 1e-9), "{scaled} vs {base}");
    }

    #[test]
    fn power_utility_is_homogeneous(x in 0.5f64..2.0, s in 0.2f64..5.0, g in prop::sample::select(vec![0.5, 0.3, -1.0, -2.0])) {
        let inst = tri1(Some(g));
        let q = [0.2 * x];
        let u = inst.u(x, &q).unwrap();
        let us = inst.u(s * x, &[s * q[0]]).unwrap();
        prop_assert!(close(us, s.powf(g) * u, 1e-8), "{us} vs {}", s.powf(g) * u);
        let r = [0.1];
        let v = inst.v(1.0, &r).unwrap();
        let vs = inst.v(s, &[s * r[0]]).unwrap();
        prop_assert!(close(vs, s.powf(g / (g - 1.0)) * v, 1e-8), "{vs} vs {v}");
    }

    #[test]
    fn primal_solutions_are_unique(x in 0.3f64..3.0) {
        // a second solve from the same data reproduces the optimizer exactly
        let inst = tri1(Some(0.5));
        let a = inst.primal(x, &[0.0]).unwrap();
        let b = inst.primal(x, &[0.0]).unwrap();
        prop_assert_eq!(a.consumption, b.consumption);
    }
}

#[test]
fn random_trees_are_arbitrage_free() {
    for seed in 0..50 {
        let s = fixtures::random_file(seed, RandomTreeSpec::tiny()).to_scenario().unwrap();
        match udual::geometry::MeasurePolytope::enumerate(&s, 40) {
            Ok(p) => assert!(p.has_equivalent()),
            Err(Error::Capacity { .. }) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}
