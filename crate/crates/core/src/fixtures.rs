//! Small reference frameworks used across tests, examples, and demos.
//!
//! Every builder returns a validated [`Framework`]; construction failures
//! are programming errors and panic. Bar lengths are left implicit so they
//! default to the rest distances, which keeps the rest configuration exactly
//! on the constraint manifold.

use nalgebra::DVector;
use rand::Rng;

use crate::framework::{EdgeSpec, Framework, FrameworkSpec, VertexSpec};

fn build(
    dimension: usize,
    vertices: &[(&str, &[f64], bool)],
    edges: &[(&str, &str)],
) -> Framework {
    let spec = FrameworkSpec {
        dimension,
        vertices: vertices
            .iter()
            .map(|(id, coords, pinned)| VertexSpec {
                id: (*id).into(),
                coords: coords.to_vec(),
                pinned: *pinned,
            })
            .collect(),
        edges: edges
            .iter()
            .map(|(u, v)| EdgeSpec {
                u: (*u).into(),
                v: (*v).into(),
                length: None,
            })
            .collect(),
    };
    let (framework, warnings) = Framework::from_spec(&spec).expect("fixture must validate");
    assert!(warnings.is_empty(), "fixture raised warnings: {warnings:?}");
    framework
}

/// Pinned triangle: apex held by two bars, no first-order motion at all.
pub fn make_triangle() -> Framework {
    let h = 3f64.sqrt() / 2.0;
    build(
        2,
        &[
            ("A", &[0.0, 0.0], true),
            ("B", &[1.0, 0.0], true),
            ("C", &[0.5, h], false),
        ],
        &[("A", "C"), ("B", "C")],
    )
}

/// Two collinear unit bars between pinned endpoints: the middle vertex has a
/// transverse first-order flex that no actual motion extends.
pub fn make_collinear_chain() -> Framework {
    build(
        2,
        &[
            ("A", &[0.0, 0.0], true),
            ("B", &[2.0, 0.0], true),
            ("C", &[1.0, 0.0], false),
        ],
        &[("A", "C"), ("C", "B")],
    )
}

/// Generic four-bar linkage: one degree of freedom, flexible to every order.
pub fn make_fourbar() -> Framework {
    build(
        2,
        &[
            ("O1", &[0.0, 0.0], true),
            ("O2", &[3.0, 0.0], true),
            ("J1", &[0.0, 1.0], false),
            ("J2", &[2.0, 1.5], false),
        ],
        &[("O1", "J1"), ("J1", "J2"), ("J2", "O2")],
    )
}

/// Unit square on two pinned base corners with both diagonals: rigid and
/// carrying a one-dimensional space of self-stresses.
pub fn make_square_with_diagonals() -> Framework {
    build(
        2,
        &[
            ("A", &[0.0, 0.0], true),
            ("B", &[1.0, 0.0], true),
            ("C", &[1.0, 1.0], false),
            ("D", &[0.0, 1.0], false),
        ],
        &[("B", "C"), ("C", "D"), ("D", "A"), ("A", "C"), ("B", "D")],
    )
}

/// Random generic framework for differential tests.
///
/// Places five to eight vertices uniformly in the unit box, pins the first
/// `dimension` of them (generic pin positions remove every rigid motion),
/// and connects a random graph that always includes at least one edge.
/// Degenerate draws (near-coincident vertices or a validation failure) are
/// redrawn.
pub fn random_framework<R: Rng + ?Sized>(rng: &mut R, dimension: usize) -> Framework {
    assert!(dimension == 2 || dimension == 3);
    'attempts: for _ in 0..64 {
        let count = rng.random_range(5..=8);
        let mut coords: Vec<DVector<f64>> = Vec::with_capacity(count);
        for _ in 0..count {
            coords.push(DVector::from_fn(dimension, |_, _| {
                rng.random_range(-1.0..1.0)
            }));
        }
        for i in 0..count {
            for j in (i + 1)..count {
                if (&coords[i] - &coords[j]).norm() < 0.1 {
                    continue 'attempts;
                }
            }
        }
        let mut edges: Vec<EdgeSpec> = Vec::new();
        for i in 0..count {
            for j in (i + 1)..count {
                if rng.random_range(0.0..1.0) < 0.6 {
                    edges.push(EdgeSpec {
                        u: format!("v{i}"),
                        v: format!("v{j}"),
                        length: None,
                    });
                }
            }
        }
        if edges.is_empty() {
            edges.push(EdgeSpec {
                u: "v0".into(),
                v: "v1".into(),
                length: None,
            });
        }
        let spec = FrameworkSpec {
            dimension,
            vertices: coords
                .iter()
                .enumerate()
                .map(|(i, c)| VertexSpec {
                    id: format!("v{i}"),
                    coords: c.iter().copied().collect(),
                    pinned: i < dimension,
                })
                .collect(),
            edges,
        };
        if let Ok((framework, _)) = Framework::from_spec(&spec) {
            return framework;
        }
    }
    panic!("failed to draw a valid random framework");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flex::{first_order_flex_basis, stress_basis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle_has_no_first_order_flex() {
        let f = make_triangle();
        let x0 = f.rest_configuration();
        assert!(first_order_flex_basis(&f, &x0).unwrap().is_empty());
    }

    #[test]
    fn chain_has_one_flex_and_one_stress() {
        let f = make_collinear_chain();
        let x0 = f.rest_configuration();
        assert_eq!(first_order_flex_basis(&f, &x0).unwrap().len(), 1);
        assert_eq!(stress_basis(&f, &x0).unwrap().len(), 1);
    }

    #[test]
    fn fourbar_has_one_flex_and_no_stress() {
        let f = make_fourbar();
        let x0 = f.rest_configuration();
        assert_eq!(first_order_flex_basis(&f, &x0).unwrap().len(), 1);
        assert!(stress_basis(&f, &x0).unwrap().is_empty());
    }

    #[test]
    fn braced_square_is_rigid_with_a_stress() {
        let f = make_square_with_diagonals();
        let x0 = f.rest_configuration();
        assert!(first_order_flex_basis(&f, &x0).unwrap().is_empty());
        assert_eq!(stress_basis(&f, &x0).unwrap().len(), 1);
    }

    #[test]
    fn random_frameworks_validate_in_both_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dimension in [2, 3] {
            for _ in 0..10 {
                let f = random_framework(&mut rng, dimension);
                assert_eq!(f.dimension(), dimension);
                assert!(f.free_coord_count() > 0);
                assert!(!f.edges().is_empty());
            }
        }
    }
}
