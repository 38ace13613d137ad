mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use tensegrity::forces::{actuation_coefficient, DerivativeForm, RestLength};
use tensegrity::members::{rotation_2d, MemberTemplate, Tag};
use tensegrity::scenarios::{builtin, parse_scenario, BuiltinParams, Example2Setup};

use common::*;

fn setup() -> impl Strategy<Value = Example2Setup> {
    prop_oneof![
        Just(Example2Setup::Static),
        Just(Example2Setup::Un),
        Just(Example2Setup::Dn),
        Just(Example2Setup::Us),
        Just(Example2Setup::UsAux),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bar_kinetic_energy_splits_into_translation_and_rotation(
        mass in 0.1f64..5.0,
        length in 0.1f64..2.0,
        angle in -3.2f64..3.2,
        vx in -2.0f64..2.0,
        vy in -2.0f64..2.0,
        omega in -5.0f64..5.0,
    ) {
        let j = mass * length * length / 12.0;
        let tpl = MemberTemplate::bar(Tag::Rr, 2, mass, length, j).unwrap();
        let rot = rotation_2d(angle);
        let half = &rot * DVector::from_vec(vec![0.5 * length, 0.0]);
        // Endpoint velocities of the rigid motion: v_c ± ω × half.
        let spin = DVector::from_vec(vec![-omega * half[1], omega * half[0]]);
        let vc = DVector::from_vec(vec![vx, vy]);
        let v1 = &vc - &spin;
        let v2 = &vc + &spin;
        let qdot = DVector::from_vec(vec![v1[0], v1[1], v2[0], v2[1]]);
        let ke = tpl.kinetic_energy(&qdot).unwrap();
        let expected = 0.5 * mass * vc.norm_squared() + 0.5 * j * omega * omega;
        prop_assert!((ke - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    #[test]
    fn gravity_load_is_linear_in_g(g1 in 0.0f64..20.0, g2 in 0.0f64..20.0) {
        let load = |g: f64| {
            let p = BuiltinParams { gravity_m_per_s2: Some(g), ..Default::default() };
            model("example1", &p).structure.load_force().clone()
        };
        let sum = load(g1) + load(g2);
        let both = load(g1 + g2);
        prop_assert!((sum - both).amax() <= 1e-13 * (1.0 + g1 + g2));
    }

    #[test]
    fn actuation_ramp_is_monotone_and_clamped(
        duration in 0.01f64..20.0,
        a in -5.0f64..30.0,
        b in -5.0f64..30.0,
        start in 0.1f64..2.0,
        end in 0.1f64..2.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (tlo, thi) = (actuation_coefficient(lo, duration), actuation_coefficient(hi, duration));
        prop_assert!((0.0..=1.0).contains(&tlo) && (0.0..=1.0).contains(&thi));
        prop_assert!(tlo <= thi);
        // Lipschitz with constant 1/T.
        prop_assert!(thi - tlo <= (hi - lo) / duration + 1e-15);
        let mu = RestLength::Actuated { start, end, duration };
        prop_assert_eq!(mu.at(0.0), start);
        prop_assert!((mu.at(duration) - end).abs() <= 1e-15 * end);
        prop_assert_eq!(mu.at(duration + 1.0), mu.at(duration * (1.0 + 1e-12)));
    }

    #[test]
    fn tower_scenarios_survive_a_toml_round_trip(
        alpha in 0.5f64..1.0,
        beta in 0.5f64..1.0,
        setup in setup(),
    ) {
        let p = BuiltinParams { alpha: Some(alpha), beta: Some(beta), setup: Some(setup), ..Default::default() };
        let sc = builtin("example2", &p).unwrap();
        let back = parse_scenario(&sc.to_toml().unwrap()).unwrap().scenario;
        prop_assert_eq!(back, sc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn exact_tension_derivatives_match_differences_on_random_states(
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let m = example2_model(0.9, 0.9, Example2Setup::Dn);
        let s = &m.structure;
        let topo = s.topology();
        let mut q = m.q0.clone();
        let mut v = DVector::zeros(q.len());
        for (k, &g) in topo.free_indices().iter().enumerate() {
            q[g] += 2e-3 * seed[k % 64];
            v[g] = 0.05 * seed[(k + 17) % 64];
        }
        let states = s.cable_states(&q, &v, 0.0).unwrap();
        // Stay clear of the slack threshold so differences do not straddle it.
        prop_assume!(states.iter().all(|c| c.tension > 1e-3));
        let (kq, kv) = s.tension_derivatives(&states, DerivativeForm::Exact);
        let (fq, fv) = tension_jacobians_fd(s, &q, &v);
        prop_assert!(rel_gap(&kq, &fq) < 1e-6, "kq {:e}", rel_gap(&kq, &fq));
        prop_assert!(rel_gap(&kv, &fv) < 1e-6, "kv {:e}", rel_gap(&kv, &fv));
        // Both blocks are finite and square in the free coordinates.
        prop_assert_eq!(kq.shape(), (topo.n_free(), topo.n_free()));
        prop_assert!(kq.iter().chain(kv.iter()).all(|x| x.is_finite()));
    }
}
