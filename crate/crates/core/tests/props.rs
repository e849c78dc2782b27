//! Property-based invariants over randomized frameworks, configurations,
//! and jets.

use nalgebra::DVector;
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rigidity_core::fixtures::random_framework;
use rigidity_core::flex::{constraint_coefficient, FlexSequence};
use rigidity_core::order::{classify, fit_order, Classification, ElongationProfile, Measure, OrderEstimate};
use rigidity_core::tol;

fn jets(rng: &mut ChaCha8Rng, len: usize, order: usize) -> Vec<DVector<f64>> {
    (0..order)
        .map(|_| DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Central differences of the elongation map converge to the rigidity
    /// matrix at first order in the step.
    #[test]
    fn rigidity_matrix_is_the_elongation_jacobian(seed in any::<u64>(), dim in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_framework(&mut rng, dim);
        let x = f.rest_configuration();
        let jacobian = f.rigidity_matrix(&x).unwrap();
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for j in 0..f.free_coord_count() {
            let mut step = DVector::zeros(f.free_coord_count());
            step[j] = eps;
            let plus = f.configuration(x.values() + &step).unwrap();
            let minus = f.configuration(x.values() - &step).unwrap();
            let col = (f.squared_elongation(&plus).unwrap()
                - f.squared_elongation(&minus).unwrap())
                / (2.0 * eps);
            for e in 0..f.edges().len() {
                worst = worst.max((jacobian[(e, j)] - col[e]).abs());
            }
        }
        prop_assert!(worst <= 1e-5, "worst finite-difference gap {worst:.3e}");
    }

    /// The squared and linear elongations satisfy D = (|delta| + l) d
    /// exactly (to rounding) at any configuration.
    #[test]
    fn squared_elongation_factors_through_the_linear_one(
        seed in any::<u64>(),
        spread in 0.0f64..0.5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_framework(&mut rng, 2);
        let x = f
            .configuration(
                f.rest_configuration().values()
                    + DVector::from_fn(f.free_coord_count(), |_, _| {
                        rng.random_range(-1.0..1.0) * spread
                    }),
            )
            .unwrap();
        let squared = f.squared_elongation(&x).unwrap();
        let linear = f.linear_elongation(&x).unwrap();
        let full = f.embed(&x);
        let d = f.dimension();
        for (ei, e) in f.edges().iter().enumerate() {
            let delta = full.rows(e.u * d, d) - full.rows(e.v * d, d);
            let factored = (delta.norm() + e.rest_length) * linear[ei];
            let scale = squared[ei].abs().max(1.0);
            prop_assert!((squared[ei] - factored).abs() <= 1e-12 * scale);
        }
    }

    /// Embedding free coordinates and restricting back is the identity.
    #[test]
    fn embed_restrict_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_framework(&mut rng, 3);
        let x = f
            .configuration(DVector::from_fn(f.free_coord_count(), |_, _| {
                rng.random_range(-2.0..2.0)
            }))
            .unwrap();
        let back = f.restrict(&f.embed(&x));
        prop_assert_eq!(x.values(), back.values());
    }

    /// Reparameterizing t -> lambda t scales X^(k) by lambda^k and hence
    /// the level-k constraint coefficient by lambda^k.
    #[test]
    fn constraint_coefficients_are_reparameterization_equivariant(
        seed in any::<u64>(),
        lambda in 0.5f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_framework(&mut rng, 2);
        let x0 = f.rest_configuration();
        let order = 5;
        let base = jets(&mut rng, f.free_coord_count(), order);
        let scaled: Vec<DVector<f64>> = base
            .iter()
            .enumerate()
            .map(|(i, d)| d * lambda.powi(i as i32 + 1))
            .collect();
        let flex = FlexSequence::new(0, base).unwrap();
        let flex_scaled = FlexSequence::new(0, scaled).unwrap();
        for k in 1..=order {
            let c = constraint_coefficient(&f, &x0, &flex, k).unwrap();
            let cs = constraint_coefficient(&f, &x0, &flex_scaled, k).unwrap();
            let expected = c * lambda.powi(k as i32);
            let err = (&cs - &expected).amax();
            let scale = expected.amax().max(1e-9);
            prop_assert!(err <= 1e-9 * scale, "level {k}: equivariance gap {err:.3e}");
        }
    }

    /// Witnessing order n implies witnessing every lower order: the
    /// classification threshold is monotone in n.
    #[test]
    fn classification_is_monotone_in_the_claimed_order(
        slope in 0.0f64..10.0,
        floor_hit in any::<bool>(),
        n in 2usize..=8,
    ) {
        let estimate = OrderEstimate {
            slope: if floor_hit { None } else { Some(slope) },
            fit_window: None,
            r_squared: None,
            floor_hit,
            per_edge: vec![],
            usable_points: if floor_hit { 0 } else { 20 },
        };
        let at_n = classify(&estimate, n).unwrap();
        if at_n == Classification::WitnessesFlexibility {
            for lower in 1..n {
                prop_assert_eq!(
                    classify(&estimate, lower).unwrap(),
                    Classification::WitnessesFlexibility
                );
            }
        }
    }

    /// The log-log fitter recovers exact power laws to high accuracy for
    /// any exponent in the practical range.
    #[test]
    fn fitter_recovers_synthetic_exponents(alpha in 0.5f64..5.0) {
        let s: Vec<f64> = (0..30)
            .map(|i| 10f64.powf(-2.5 + 2.0 * i as f64 / 29.0))
            .collect();
        let profile = ElongationProfile::synthetic(alpha, &s).unwrap();
        let estimate = fit_order(&profile, Measure::Squared).unwrap();
        prop_assert!(!estimate.floor_hit);
        let got = estimate.slope.unwrap();
        prop_assert!((got - alpha).abs() <= 1e-6, "alpha {alpha}, fitted {got}");
    }

    /// Sampled arclength is stable under refinement of the chord
    /// subdivision.
    #[test]
    fn arclength_is_refinement_stable(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_framework(&mut rng, 2);
        let x0 = f.rest_configuration();
        let flex = FlexSequence::new(0, jets(&mut rng, f.free_coord_count(), 2)).unwrap();
        let ts = [0.0, 0.05, 0.1, 0.15, 0.2];
        let coarse = rigidity_core::path::sample_polynomial(&f, &x0, &flex, &ts, 8).unwrap();
        let fine = rigidity_core::path::sample_polynomial(&f, &x0, &flex, &ts, 64).unwrap();
        let a = coarse.total_arclength();
        let b = fine.total_arclength();
        prop_assert!((a - b).abs() <= 1e-3 * b.max(1e-12), "coarse {a}, fine {b}");
    }
}

/// Noise floors are respected: profiles entirely below the floor refuse to
/// fit and witness instead, at every claimed order.
#[test]
fn floor_profiles_witness_every_order() {
    let s: Vec<f64> = (0..20).map(|i| 1e-3 * (i + 1) as f64).collect();
    let profile = ElongationProfile::synthetic(25.0, &s).unwrap();
    let estimate = fit_order(&profile, Measure::Squared).unwrap();
    assert!(estimate.floor_hit);
    for n in 1..=8 {
        assert_eq!(
            classify(&estimate, n).unwrap(),
            Classification::WitnessesFlexibility
        );
    }
    let _ = tol::NOISE_FLOOR_REL;
}
