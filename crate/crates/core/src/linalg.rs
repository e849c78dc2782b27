//! Dense linear algebra helpers built on SVD.
//!
//! Everything rank-related in this crate funnels through these functions so
//! the singular-value cutoff is applied consistently. One wrinkle worth
//! documenting: nalgebra computes a thin SVD, so for a wide matrix the
//! returned `v_t` has too few rows to span the right nullspace, and for a
//! tall matrix `u` has too few columns to span the left one. Padding the
//! matrix with zero rows (or transposing first) makes the factor square
//! without disturbing the singular vectors that matter, which is how the
//! nullspace routines below recover full bases.

use nalgebra::{DMatrix, DVector};

use crate::tol;

/// Largest singular value, or zero for an empty matrix.
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().max()
}

/// Numerical rank with the shared relative cutoff, together with sigma_max.
pub fn rank_with_sigma(m: &DMatrix<f64>) -> (usize, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0, 0.0);
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return (0, 0.0);
    }
    let rank = sv.iter().filter(|s| **s > tol::RANK_REL * smax).count();
    (rank, smax)
}

/// Orthonormal basis of the right nullspace (vectors x with M x = 0).
pub fn right_nullspace(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Vec::new();
    }
    // Pad with zero rows so v_t comes back square even for wide input.
    let work = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = work.svd(false, true);
    let v_t = svd
        .v_t
        .expect("svd was requested with right singular vectors");
    let smax = svd.singular_values.max();
    let rank = if smax > 0.0 {
        svd.singular_values
            .iter()
            .filter(|s| **s > tol::RANK_REL * smax)
            .count()
    } else {
        0
    };
    (rank..cols).map(|i| v_t.row(i).transpose()).collect()
}

/// Orthonormal basis of the left nullspace (vectors w with w^T M = 0).
pub fn left_nullspace(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    right_nullspace(&m.transpose())
}

/// Minimum-norm least-squares solution of M x = b via the pseudoinverse,
/// with the shared rank cutoff. Returns zeros for an empty system.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    assert_eq!(rows, b.len(), "right-hand side length must match row count");
    if rows == 0 || cols == 0 {
        return DVector::zeros(cols);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return DVector::zeros(cols);
    }
    svd.solve(b, tol::RANK_REL * smax)
        .expect("svd solve with both factors computed")
}

/// Least-squares solve plus the achieved residual norm ||M x - b||.
pub fn least_squares_residual(m: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let x = min_norm_solve(m, b);
    let residual = if m.ncols() == 0 {
        b.norm()
    } else {
        (m * &x - b).norm()
    };
    (x, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn nullspace_of_known_wide_matrix() {
        // Two dependent rows acting on two coordinates: the layout produced
        // by a straight two-bar chain with one free joint.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, -2.0, 0.0]);
        let (rank, _) = rank_with_sigma(&m);
        assert_eq!(rank, 1);

        let null = right_nullspace(&m);
        assert_eq!(null.len(), 1);
        assert!((null[0][0]).abs() < 1e-14);
        assert!((null[0][1].abs() - 1.0).abs() < 1e-14);

        let left = left_nullspace(&m);
        assert_eq!(left.len(), 1);
        let w = &left[0];
        // Up to sign this is (1, 1)/sqrt(2).
        assert!((w[0] - w[1]).abs() < 1e-14);
        assert!((w.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nullspace_properties_on_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(rows, cols) in &[(3usize, 7usize), (7, 3), (5, 5), (1, 4), (4, 1)] {
            let m = random_matrix(&mut rng, rows, cols);
            let (rank, _) = rank_with_sigma(&m);
            let null = right_nullspace(&m);
            assert_eq!(null.len(), cols - rank);
            for v in &null {
                assert!((m.clone() * v).norm() < 1e-10);
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            let left = left_nullspace(&m);
            assert_eq!(left.len(), rows - rank);
            for w in &left {
                assert!((m.transpose() * w).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn min_norm_solve_is_pseudoinverse_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 3, 6);
        let b = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let x = min_norm_solve(&m, &b);
        // Consistent wide system: exact solve.
        assert!((&m * &x - &b).norm() < 1e-10);
        // Minimum norm means orthogonal to the nullspace.
        for v in right_nullspace(&m) {
            assert!(x.dot(&v).abs() < 1e-10);
        }
    }

    #[test]
    fn least_squares_reports_residual_for_inconsistent_system() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, -1.0]);
        let (x, residual) = least_squares_residual(&m, &b);
        assert!(x[0].abs() < 1e-14);
        assert!((residual - (2.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_and_empty_matrices_are_handled() {
        let z = DMatrix::<f64>::zeros(3, 2);
        let (rank, smax) = rank_with_sigma(&z);
        assert_eq!(rank, 0);
        assert_eq!(smax, 0.0);
        assert_eq!(right_nullspace(&z).len(), 2);
        assert_eq!(left_nullspace(&z).len(), 3);

        let e = DMatrix::<f64>::zeros(0, 3);
        assert_eq!(right_nullspace(&e).len(), 3);
        let x = min_norm_solve(&e, &DVector::zeros(0));
        assert_eq!(x.len(), 3);
        assert!(x.norm() == 0.0);
    }
}
