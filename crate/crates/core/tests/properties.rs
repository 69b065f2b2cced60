use cubic_core::analysis::{bound_perturbed, bound_unperturbed, regime_classify, verify_bound_along};
use cubic_core::dynamics::{simulate, OVERFLOW_GUARD};
use cubic_core::perturb::{check_u_le_h, NoiseStream};
use cubic_core::seqcore::{iterlog_sum_bounds, iterlog_term, Summability};
use cubic_core::{Envelope, HepCase, LimitClass, Noise, PerturbationSpec, Schedule, StoppingRule};
use proptest::prelude::*;

fn schedule() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        (0.1..12.0f64, 0u64..2).prop_map(|(p, s)| Schedule::power_law(p, s).unwrap()),
        Just(Schedule::super_exp_plain()),
        (1u32..3).prop_map(|k| Schedule::case1_tower(k).unwrap()),
        Just(Schedule::shifted_super_exp(1).unwrap()),
        Just(Schedule::hep_case(HepCase::I).unwrap()),
        Just(Schedule::hep_case(HepCase::II).unwrap()),
        Just(Schedule::hep_case(HepCase::III).unwrap()),
        (0.05..3.0f64).prop_map(|h| Schedule::table(vec![h]).unwrap()),
    ]
}

fn product(s: &Schedule, n: u64, x: f64) -> f64 {
    s.step(n).unwrap() * x * x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn contraction_regime_is_absorbing(s in schedule(), x0 in -3.0..3.0f64) {
        let t = simulate(x0, &s, &PerturbationSpec::zero(), StoppingRule::None, 300, 0).unwrap();
        prop_assume!(t.diverged_at.is_none());
        let o = t.origin;
        if let Some(n) = (0..t.x.len()).find(|&i| product(&s, o + i as u64, t.x[i]) < 2.0) {
            for m in n..t.x.len() - 1 {
                prop_assert!(t.x[m + 1].abs() <= t.x[m].abs());
                prop_assert!(product(&s, o + m as u64 + 1, t.x[m + 1]) < 2.0);
            }
        }
        if let Some(n) = (0..t.x.len()).find(|&i| product(&s, o + i as u64, t.x[i]) < 1.0) {
            prop_assert!(t.x[n..].iter().all(|v| v * t.x[n] >= 0.0));
        }
    }

    #[test]
    fn summability_decides_the_limit(s in schedule(), x0 in -3.0..3.0f64) {
        prop_assume!(x0.abs() > 1e-3);
        let horizon = 5000;
        let t = simulate(x0, &s, &PerturbationSpec::zero(), StoppingRule::None, horizon, 0).unwrap();
        prop_assume!(t.diverged_at.is_none());
        let Some(n) = t.first_small_step_index else { return Ok(()); };
        prop_assume!(t.x_at(n).unwrap() != 0.0);
        match s.summability(horizon) {
            Summability::Summable { total_bound, .. } => {
                if total_bound < 1e3 && s.tail_bound(horizon) < 1e-14 {
                    prop_assert!(matches!(t.classification, LimitClass::ConvergedNonzero(_)), "{:?}", t.classification);
                }
            }
            Summability::NonSummable { partial_sum, .. } => {
                let envelope = 2.0 / (2.0 * (partial_sum - p_sum_before(&s, n))).sqrt();
                prop_assert!(t.terminal().abs() <= envelope.max(t.x_at(n).unwrap().abs()));
            }
        }
    }

    #[test]
    fn regime_is_even_in_x(x in -1e3..1e3f64, h in 1e-6..10.0f64) {
        prop_assert_eq!(regime_classify(x, h), regime_classify(-x, h));
    }

    #[test]
    fn perturbed_bound_reduces_to_unperturbed(x0 in 1.0..50.0f64, n in 0u64..12, k in 1u32..3) {
        let s = Schedule::case1_tower(k).unwrap();
        let y = bound_perturbed(x0, &s, &vec![0.0; n as usize + 2], n).unwrap();
        let b = bound_unperturbed(x0, &s, n + 1).unwrap().log_abs() / 3f64.powi(n as i32 + 1);
        prop_assert!((y.ln() - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn bounded_perturbations_respect_bound(x0 in 20.0..400.0f64, beta in 0.05..0.95f64, idx in 0u64..1000) {
        let s = Schedule::super_exp_plain();
        let p = PerturbationSpec::new(Envelope::Plain { beta }, Noise::BoundedUniform, 11).unwrap();
        let t = simulate(x0, &s, &p, StoppingRule::None, 40, idx).unwrap();
        prop_assert_eq!(verify_bound_along(&t, &s, &t.u), None);
    }

    #[test]
    fn small_plain_envelopes_pass_u_le_h(beta in 0.01..0.58f64) {
        // beta < 1/(e - 1)
        let s = Schedule::super_exp_plain();
        prop_assert_eq!(check_u_le_h(&Envelope::Plain { beta }, &s, 300).unwrap(), None);
    }

    #[test]
    fn iterlog_sandwich(k in 1u32..3, j in 1u64..10, n in 10u64..3000) {
        let direct: f64 = (j..=n).map(|i| iterlog_term(k, i as f64).unwrap()).sum();
        let (lower, upper) = iterlog_sum_bounds(k, j, n).unwrap();
        prop_assert!(lower < direct);
        let full: f64 = (1..=n + 1).map(|i| iterlog_term(k, i as f64).unwrap()).sum();
        prop_assert!(full < upper);
    }
}

fn p_sum_before(s: &Schedule, n: u64) -> f64 {
    (s.origin()..=n).map(|i| s.step(i).unwrap()).sum::<f64>() - s.step(n).unwrap()
}

#[test]
fn freeze_rules_drive_bounded_paths_to_zero() {
    let s = Schedule::shifted_super_exp(1).unwrap();
    for (env, sched) in [
        (Envelope::Plain { beta: 0.5 }, Schedule::super_exp_plain()),
        (Envelope::Case1Tower { k: 1, beta: 0.5 }, Schedule::case1_tower(1).unwrap()),
        (Envelope::CompRho { k: 1, beta: 0.5 }, s),
    ] {
        assert_eq!(check_u_le_h(&env, &sched, 500).unwrap(), None);
        let p = PerturbationSpec::new(env, Noise::BoundedUniform, 21).unwrap();
        for rule in
            [StoppingRule::FreezeWhenSmall, StoppingRule::FreezeAtN4Keep, StoppingRule::FreezeAtN4Reciprocal]
        {
            for idx in 0..20 {
                let t = simulate(2.5, &sched, &p, rule, 20_000, idx).unwrap();
                let Some(f) = t.freeze_index else {
                    assert_eq!(rule, StoppingRule::FreezeWhenSmall);
                    assert!(t.x.iter().all(|v| v.abs() > 1.0));
                    continue;
                };
                let n = (f - t.origin) as usize;
                let h = t.h_applied[n];
                // eventually |x| shrinks like 1 / sqrt(2 hat_h n)
                let mid = t.x[t.x.len() / 2].abs();
                assert!(t.terminal().abs() <= mid, "{rule:?}");
                let slow = 1.0 / (2.0 * h * (t.x.len() / 2) as f64).sqrt();
                assert!(t.terminal().abs() <= slow.max(1e-6), "{rule:?} {}", t.terminal());
            }
        }
    }
}

#[test]
fn identical_inputs_give_identical_paths() {
    let s = Schedule::shifted_super_exp(1).unwrap();
    for noise in [Noise::GaussianStd, Noise::BoundedUniform] {
        let p = PerturbationSpec::new(Envelope::CompRho { k: 1, beta: 3.0 }, noise, 99).unwrap();
        let a = simulate(2.5, &s, &p, StoppingRule::FreezeAtN4Keep, 5000, 12).unwrap();
        let b = simulate(2.5, &s, &p, StoppingRule::FreezeAtN4Keep, 5000, 12).unwrap();
        assert!(a.x.iter().zip(&b.x).all(|(u, v)| u.to_bits() == v.to_bits()));
        assert_eq!(a, b);
    }
}

#[test]
fn streams_are_uncorrelated() {
    let n = 200_000u64;
    let mut a = NoiseStream::new(Noise::GaussianStd, 5, 0);
    let mut b = NoiseStream::new(Noise::GaussianStd, 5, 1);
    let r: f64 = (0..n).map(|i| a.xi(i) * b.xi(i)).sum::<f64>() / n as f64;
    assert!(r.abs() < 0.01, "correlation {r}");
}

#[test]
fn blow_up_stops_at_guard() {
    let s = Schedule::power_law(0.5, 1).unwrap();
    let t = simulate(50.0, &s, &PerturbationSpec::zero(), StoppingRule::None, 100, 0).unwrap();
    assert!(t.diverged_at.is_some());
    assert!(t.x.iter().all(|v| v.abs() <= OVERFLOW_GUARD));
}
