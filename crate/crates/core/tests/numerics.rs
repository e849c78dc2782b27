//! Numerical oracle tests: every computed quantity is checked against an
//! independent way of obtaining it (direct geometric evaluation, finite
//! differences, closed-form limits), not against the code that produced it.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rigidity_core::cusp::{
    make_double_watt, solve_cusp_flexes, verify_watt_relations, Branch,
};
use rigidity_core::fixtures::{make_fourbar, make_triangle, random_framework};
use rigidity_core::flex::{constraint_coefficient, first_order_flex_basis, FlexSequence};
use rigidity_core::framework::Framework;
use rigidity_core::path::{arclength, polynomial_path, sample_polynomial, trace_mechanism};
use rigidity_core::tol;

fn random_jets(rng: &mut ChaCha8Rng, len: usize, order: usize) -> Vec<DVector<f64>> {
    (0..order)
        .map(|_| DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

/// A polynomial path of degree n has squared elongations that are honest
/// polynomials of degree 2n, so the Taylor coefficients computed by
/// constraint_coefficient must reproduce the directly evaluated elongation
/// exactly, at any parameter value, once all 2n levels are summed.
#[test]
fn constraint_coefficients_reconstruct_the_exact_elongation_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dimension in [2, 3] {
        let f = random_framework(&mut rng, dimension);
        let x0 = f.rest_configuration();
        let n = 6;
        let mut jets = random_jets(&mut rng, f.free_coord_count(), n);
        // Pad with zeros so every level of the degree-2n polynomial exists.
        jets.extend((n..2 * n).map(|_| DVector::zeros(f.free_coord_count())));
        let flex = FlexSequence::new(0, jets).unwrap();
        let path = polynomial_path(&x0, &flex).unwrap();

        for &t in &[0.37, -1.3, 2.0] {
            let config = f.configuration(path.eval(t)).unwrap();
            let direct = f.squared_elongation(&config).unwrap();

            let mut series = f.squared_elongation(&x0).unwrap();
            let mut factorial = 1.0;
            for k in 1..=2 * n {
                factorial *= k as f64;
                let coeff = constraint_coefficient(&f, &x0, &flex, k).unwrap();
                series += coeff * t.powi(k as i32) / factorial;
            }
            let err = (&direct - &series).amax();
            let scale = direct.amax().max(1.0);
            assert!(
                err <= 1e-9 * scale,
                "dimension {dimension}, t = {t}: series error {err:.3e}"
            );
        }
    }
}

/// For a motion with zero velocity the odd cross terms drop out of the
/// constraint coefficients, leaving the grouped forms with halved counts:
///   C4/2 = d0.d4 + 3 d2.d2
///   C5/2 = d0.d5 + 10 d2.d3
///   C6/2 = d0.d6 + 15 d2.d4 + 10 d3.d3
/// (dj is the per-edge difference of the order-j jets). Checked against the
/// general machinery on random jets.
#[test]
fn degenerate_coefficients_reduce_to_grouped_dot_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let f = random_framework(&mut rng, 2);
    let x0 = f.rest_configuration();
    let len = f.free_coord_count();
    let mut jets = vec![DVector::zeros(len)];
    jets.extend(random_jets(&mut rng, len, 5));
    let flex = FlexSequence::new(1, jets).unwrap();

    let d = f.dimension();
    let full: Vec<DVector<f64>> = (0..=6)
        .map(|k| {
            if k == 0 {
                f.embed(&x0)
            } else {
                f.embed_derivative(flex.derivative(k))
            }
        })
        .collect();
    let pair = |a: usize, b: usize| -> DVector<f64> {
        DVector::from_fn(f.edges().len(), |ei, _| {
            let e = &f.edges()[ei];
            let da = full[a].rows(e.u * d, d) - full[a].rows(e.v * d, d);
            let db = full[b].rows(e.u * d, d) - full[b].rows(e.v * d, d);
            da.dot(&db)
        })
    };

    let cases: Vec<(usize, DVector<f64>)> = vec![
        (2, pair(0, 2)),
        (3, pair(0, 3)),
        (4, pair(0, 4) + pair(2, 2) * 3.0),
        (5, pair(0, 5) + pair(2, 3) * 10.0),
        (6, pair(0, 6) + pair(2, 4) * 15.0 + pair(3, 3) * 10.0),
    ];
    for (k, grouped) in cases {
        let coeff = constraint_coefficient(&f, &x0, &flex, k).unwrap();
        let err = (coeff / 2.0 - grouped).amax();
        assert!(err <= 1e-12, "level {k}: grouped-form error {err:.3e}");
    }
}

/// The rigidity matrix is the Jacobian of the squared elongation map;
/// central finite differences must reproduce it entry by entry.
#[test]
fn rigidity_matrix_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for dimension in [2, 3] {
        for _ in 0..5 {
            let f = random_framework(&mut rng, dimension);
            // Differentiate at a generic nearby point, not just at rest.
            let x = f
                .configuration(
                    f.rest_configuration().values()
                        + DVector::from_fn(f.free_coord_count(), |_, _| {
                            rng.random_range(-0.01..0.01)
                        }),
                )
                .unwrap();
            let jacobian = f.rigidity_matrix(&x).unwrap();
            let eps = 1e-6;
            for j in 0..f.free_coord_count() {
                let mut step = DVector::zeros(f.free_coord_count());
                step[j] = eps;
                let plus = f.configuration(x.values() + &step).unwrap();
                let minus = f.configuration(x.values() - &step).unwrap();
                let column = (f.squared_elongation(&plus).unwrap()
                    - f.squared_elongation(&minus).unwrap())
                    / (2.0 * eps);
                for e in 0..f.edges().len() {
                    let got = jacobian[(e, j)];
                    let want = column[e];
                    assert!(
                        (got - want).abs() <= 1e-6 * (1.0 + want.abs()),
                        "entry ({e}, {j}): jacobian {got}, differences {want}"
                    );
                }
            }
        }
    }
}

/// Chordal arclength of a finely sampled quarter circle converges to pi/2.
#[test]
fn quarter_circle_arclength_converges() {
    let count = 1000;
    let points: Vec<DVector<f64>> = (0..count)
        .map(|i| {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / (count - 1) as f64;
            DVector::from_vec(vec![theta.cos(), theta.sin()])
        })
        .collect();
    let s = arclength(&points).unwrap();
    let total = *s.last().unwrap();
    assert!(
        (total - std::f64::consts::FRAC_PI_2).abs() <= 1e-5,
        "got {total}"
    );
}

/// Near t = 0 the sampled arclength of a polynomial path follows its leading
/// jet: s(t)/t tends to |X^(1)| for an ordinary flex, and s(t)/t^2 tends to
/// |X^(2)|/2 for a degenerate one.
#[test]
fn arclength_reflects_the_leading_jet() {
    let f = make_fourbar();
    let x0 = f.rest_configuration();
    let velocity = first_order_flex_basis(&f, &x0).unwrap().remove(0);
    let speed = velocity.norm();
    let flex = FlexSequence::first_order(velocity).unwrap();
    for (t, rel) in [(1e-3, 1e-2), (1e-4, 1e-3)] {
        let samples = sample_polynomial(&f, &x0, &flex, &[0.0, t], 32).unwrap();
        let ratio = samples.records[1].s / t;
        assert!(
            (ratio - speed).abs() <= rel * speed,
            "t = {t}: s/t = {ratio}, speed = {speed}"
        );
    }

    let watt = make_double_watt();
    let w0 = watt.rest_configuration();
    let solution = solve_cusp_flexes(&watt, -0.5, Branch::Plus).unwrap();
    let leading = solution.flex.derivative(2).norm();
    for (t, rel) in [(1e-3, 1e-2), (1e-4, 1e-3)] {
        let samples = sample_polynomial(&watt, &w0, &solution.flex, &[0.0, t], 32).unwrap();
        let ratio = samples.records[1].s / (t * t);
        assert!(
            (ratio - leading / 2.0).abs() <= rel * leading,
            "t = {t}: s/t^2 = {ratio}, |X2|/2 = {}",
            leading / 2.0
        );
    }
}

/// Tracing the four-bar for 100 unit-speed steps covers close to unit
/// arclength with elongations at rounding level throughout.
#[test]
fn fourbar_trace_keeps_contract_over_long_runs() {
    let f = make_fourbar();
    let x0 = f.rest_configuration();
    let direction = first_order_flex_basis(&f, &x0).unwrap().remove(0);
    let samples = trace_mechanism(&f, &x0, &direction, 0.01, 100).unwrap();
    assert!(!samples.truncated);
    assert_eq!(samples.records.len(), 101);
    let total = samples.total_arclength();
    assert!((total - 1.0).abs() <= 0.05, "s_final = {total}");
    assert!(samples.max_abs_elongation() <= tol::TRACE_RESIDUAL_REL * f.configuration_scale());
}

/// The triangle admits no flex direction at all, so tracing any direction
/// must be rejected, while the four-bar accepts its nullspace direction and
/// rejects a made-up one.
#[test]
fn direction_gate_distinguishes_flexes_from_arbitrary_vectors() {
    let triangle = make_triangle();
    let t0 = triangle.rest_configuration();
    let any = DVector::from_vec(vec![0.7, -0.2]);
    assert!(trace_mechanism(&triangle, &t0, &any, 0.01, 3).is_err());

    let f = make_fourbar();
    let x0 = f.rest_configuration();
    let good = first_order_flex_basis(&f, &x0).unwrap().remove(0);
    assert!(trace_mechanism(&f, &x0, &good, 0.01, 3).is_ok());
    let mut bad = good.clone();
    bad[0] += 0.5;
    assert!(trace_mechanism(&f, &x0, &bad, 0.01, 3).is_err());
}

fn perturb_flex(
    f: &Framework,
    flex: &FlexSequence,
    id: &str,
    order: usize,
    axis: usize,
    amount: f64,
) -> FlexSequence {
    let slot = f.free_slot(f.vertex_index(id).unwrap()).unwrap();
    let mut derivatives = flex.derivatives().to_vec();
    derivatives[order - 1][2 * slot + axis] += amount;
    FlexSequence::new(flex.degeneracy(), derivatives).unwrap()
}

/// Perturbing the mirror jerk shifts exactly the relations that contain it,
/// by the predicted first-order amount.
#[test]
fn relation_report_localizes_a_jerk_perturbation() {
    let f = make_double_watt();
    let solution = solve_cusp_flexes(&f, -0.5, Branch::Plus).unwrap();
    let eps = 1e-3;
    let mut flex = solution.flex.clone();
    for id in ["p1m", "p2m", "qm"] {
        flex = perturb_flex(&f, &flex, id, 3, 1, eps);
    }
    let report = verify_watt_relations(&f, &flex).unwrap();
    assert!(!report.flex_ok, "perturbed flex must fail verification");

    let b_gap = solution.b_bar - solution.b;
    let find = |needle: &str| -> f64 {
        report
            .relations
            .iter()
            .find(|(name, _)| name.contains(needle))
            .map(|(_, r)| *r)
            .unwrap()
    };
    // d/db_bar [9 L a^3 + (b_bar - b)^2] = 2 (b_bar - b).
    let expected = 2.0 * b_gap * eps;
    let got = find("9 L a^3");
    assert!(
        (got - expected).abs() <= 0.1 * expected,
        "connector residual {got:.3e}, expected about {expected:.3e}"
    );
    // The mirror coupler still has matching jerks, so its level-3 relation
    // stays clean while the left side is untouched by construction.
    assert!(find("mirror coupler level 3") <= 1e-12);
    assert!(find("left coupler level 3") <= 1e-12);
}

/// Desynchronizing the left coupler accelerations breaks the level-2
/// relation by exactly the injected amount and fails flex verification at
/// level 2.
#[test]
fn relation_report_catches_desynchronized_accelerations() {
    let f = make_double_watt();
    let solution = solve_cusp_flexes(&f, -0.5, Branch::Minus).unwrap();
    let eps = 1e-3;
    let flex = perturb_flex(&f, &solution.flex, "p1", 2, 1, eps);
    let report = verify_watt_relations(&f, &flex).unwrap();
    let level2 = report
        .relations
        .iter()
        .find(|(name, _)| name.contains("left coupler level 2"))
        .map(|(_, r)| *r)
        .unwrap();
    assert!((level2 - eps).abs() <= 1e-12);
    assert!(!report.flex_ok);
    assert!(report.flex_residuals[1] > tol::VERIFY_REL * f.configuration_scale());
}

/// Projection pulls slightly off-manifold four-bar configurations back and
/// the resulting point stays within the predicted distance of the guess.
#[test]
fn projection_moves_roughly_normally_to_the_manifold() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let f = make_fourbar();
    let x0 = f.rest_configuration();
    for _ in 0..20 {
        let offset = DVector::from_fn(f.free_coord_count(), |_, _| {
            rng.random_range(-1e-3..1e-3)
        });
        let guess = f.configuration(x0.values() + &offset).unwrap();
        let (projected, _) =
            rigidity_core::path::project_to_manifold(&f, &guess).unwrap();
        let residual = f.squared_elongation(&projected).unwrap().amax();
        assert!(residual <= tol::PROJECTION_REL * f.configuration_scale());
        // The correction cannot exceed the offset scale by much.
        let moved = (projected.values() - guess.values()).norm();
        assert!(moved <= 10.0 * offset.norm(), "moved {moved:.3e}");
    }
}
