//! Property tests for the geometric and accounting invariants.

use proptest::prelude::*;

use sgld_core::accountant::{rdp_clsi, rdp_general, rdp_recursion, PrivacyParams};
use sgld_core::losses::LossConstants;
use sgld_core::types::{l2_distance, l2_norm, L2Ball, StepSchedule};

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..8)
}

proptest! {
    #[test]
    fn projection_is_idempotent(v in vec_strategy(), radius in 0.1f64..20.0) {
        let ball = L2Ball::new(radius).unwrap();
        let once = ball.project(&v).unwrap();
        let twice = ball.project(&once).unwrap();
        prop_assert!(l2_distance(&once, &twice) <= 1e-12 * radius);
        prop_assert!(l2_norm(&once) <= radius * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_nonexpansive(
        (a, b) in (1usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec(-50.0f64..50.0, d),
                prop::collection::vec(-50.0f64..50.0, d),
            )
        }),
        radius in 0.1f64..20.0,
    ) {
        let ball = L2Ball::new(radius).unwrap();
        let pa = ball.project(&a).unwrap();
        let pb = ball.project(&b).unwrap();
        prop_assert!(l2_distance(&pa, &pb) <= l2_distance(&a, &b) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn decreasing_schedule_decreases_and_sums_monotonically(
        beta in 0.1f64..10.0,
        lambda in 0.01f64..5.0,
        k in 0usize..200,
    ) {
        prop_assume!(lambda <= beta);
        let s = StepSchedule::decreasing(beta, lambda).unwrap();
        prop_assert!(s.eta(k + 1).unwrap() < s.eta(k).unwrap());
        prop_assert!(s.sum(k + 1).unwrap() >= s.sum(k).unwrap());
    }

    #[test]
    fn decreasing_tail_sum_stays_under_its_integral(
        beta in 0.1f64..10.0,
        lambda in 0.01f64..5.0,
        k_count in 1usize..500,
    ) {
        // sum of eta_1..eta_K (a decreasing function sampled at right
        // endpoints) is below the closed-form integral
        let s = StepSchedule::decreasing(beta, lambda).unwrap();
        let tail = s.sum(k_count + 1).unwrap() - s.eta(0).unwrap();
        let integral_form = (1.0 + lambda * k_count as f64 / (4.0 * beta)).ln();
        prop_assert!(
            0.5 * lambda * tail <= integral_form * (1.0 + 1e-12),
            "lhs {} rhs {}",
            0.5 * lambda * tail,
            integral_form
        );
    }

    #[test]
    fn recursion_and_clsi_agree_with_the_closed_form(
        alpha in 1.1f64..32.0,
        lambda in 0.05f64..2.0,
        sigma2 in 0.05f64..4.0,
        n in 10usize..2000,
        k_count in 1usize..300,
        eta_frac in 0.05f64..0.95,
    ) {
        let beta = lambda * 1.5;
        let constants = LossConstants::new(1.0, lambda, beta).unwrap();
        let p = PrivacyParams::new(alpha, constants, n, sigma2, 1).unwrap();
        let eta = eta_frac / beta;
        let s = StepSchedule::constant(eta).unwrap();
        let general = rdp_general(&p, &s, k_count).unwrap();
        let recursion = rdp_recursion(&p, &s, k_count).unwrap();
        prop_assert!((recursion - general).abs() <= 1e-9 * general.max(1e-300));
        let c = lambda / (2.0 * sigma2);
        let clsi = rdp_clsi(alpha, 1.0, c, n, sigma2, &s, k_count).unwrap();
        prop_assert!((clsi - general).abs() <= 1e-12 * general.max(1e-300));
        // and the asymptote caps the bound
        prop_assert!(general <= p.asymptote() * (1.0 + 1e-12));
    }
}
