//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for pseudoinverses of member base matrices.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Relative singular-value cutoff used for ranks and nullspaces of constraint
/// Jacobians and statics coefficient matrices.
pub const RANK_TOL: f64 = 1e-10;

/// `a ⊗ I_m`.
pub fn kron_identity(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() * m, a.ncols() * m);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let v = a[(i, j)];
            if v != 0.0 {
                for k in 0..m {
                    out[(i * m + k, j * m + k)] = v;
                }
            }
        }
    }
    out
}

/// Thin SVD of `a`, padded with zero rows when `a` is wide so that the right
/// singular vectors span the full column space.
fn full_right_svd(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (r, c) = a.shape();
    let padded;
    let src = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        padded = p;
        &padded
    } else {
        a
    };
    let svd = src.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    (svd.singular_values, vt.transpose())
}

fn cutoff(values: &DVector<f64>, rel: f64) -> f64 {
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    max * rel
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
pub fn pinv(a: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let tol = cutoff(&svd.singular_values, rel_cutoff);
    svd.pseudo_inverse(tol.max(f64::MIN_POSITIVE))
        .expect("u and v_t were computed")
}

/// Numerical rank with the default relative tolerance.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let tol = cutoff(&sv, RANK_TOL);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of the nullspace of `a` and the rank of `a`.
///
/// With no rows the basis is the identity.
pub fn nullspace(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let c = a.ncols();
    if a.nrows() == 0 || c == 0 {
        return (DMatrix::identity(c, c), 0);
    }
    let (sv, v) = full_right_svd(a);
    let tol = cutoff(&sv, RANK_TOL);
    let mut idx: Vec<usize> = Vec::new();
    let mut rank = 0;
    for i in 0..c {
        let s = if i < sv.len() { sv[i] } else { 0.0 };
        if s > tol {
            rank += 1;
        } else {
            idx.push(i);
        }
    }
    let basis = DMatrix::from_fn(c, idx.len(), |r, k| v[(r, idx[k])]);
    (basis, rank)
}

/// Minimum-norm least-squares solution of `a x = b`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    pub rank: usize,
    /// `‖a x − b‖₂` at the solution.
    pub residual: f64,
}

pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    if a.ncols() == 0 {
        return LeastSquares {
            solution: DVector::zeros(0),
            rank: 0,
            residual: b.norm(),
        };
    }
    let svd = a.clone().svd(true, true);
    let tol = cutoff(&svd.singular_values, RANK_TOL);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let solution = svd
        .solve(b, tol.max(f64::MIN_POSITIVE))
        .expect("u and v_t were computed");
    let residual = (a * &solution - b).norm();
    LeastSquares {
        solution,
        rank,
        residual,
    }
}

/// `max_ij |a_ij|`.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_with_identity_places_scalars_on_block_diagonals() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
        let k = kron_identity(&a, 2);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                -1.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0,
            ],
        );
        assert_eq!(k, expected);
    }

    #[test]
    fn nullspace_of_single_row() {
        let a = DMatrix::from_row_slice(1, 6, &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let (n, rank) = nullspace(&a);
        assert_eq!(rank, 1);
        assert_eq!(n.ncols(), 5);
        assert!((&a * &n).norm() < 1e-14);
        let gram = n.transpose() * &n;
        assert!((gram - DMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn nullspace_of_empty_rows_is_identity() {
        let a = DMatrix::<f64>::zeros(0, 3);
        let (n, rank) = nullspace(&a);
        assert_eq!(rank, 0);
        assert_eq!(n, DMatrix::identity(3, 3));
    }

    #[test]
    fn pinv_of_bar_base_column() {
        let x = DMatrix::from_column_slice(3, 1, &[2.0, 0.0, 0.0]);
        let p = pinv(&x, PINV_CUTOFF);
        assert!((p - DMatrix::from_row_slice(1, 3, &[0.5, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn least_squares_reports_rank_and_residual() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 2.0]);
        let ls = least_squares(&a, &b);
        assert_eq!(ls.rank, 2);
        assert!(ls.residual < 1e-12);
        assert!((ls.solution - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
    }
}
