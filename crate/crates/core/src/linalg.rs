//! Small dense linear-algebra helpers shared by the field and controller code.

use crate::{Error, Matrix, Result, Vector};

/// Norm below which a vector is treated as having no direction.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

/// Builds an orthonormal basis whose first column is `first / ‖first‖`.
///
/// The remaining columns come from Gram–Schmidt over the coordinate axes,
/// visited from the least to the most aligned with `first` (ties broken by
/// axis index), so the result is a pure function of the input bits.
pub fn orthonormal_completion(first: &Vector) -> Result<Matrix> {
    let norm = first.norm();
    if !(norm >= MIN_DIRECTION_NORM) {
        return Err(Error::ZeroVector(norm));
    }
    Ok(complete_basis(&[first / norm], first))
}

/// Completes the orthonormal columns `leading` to a full basis.
///
/// `alignment` decides the axis visiting order (least aligned first); pass
/// the vector the basis should be "seeded" from.
pub(crate) fn complete_basis(leading: &[Vector], alignment: &Vector) -> Matrix {
    let dim = alignment.len();
    let mut columns: Vec<Vector> = leading.to_vec();

    let mut axes: Vec<usize> = (0..dim).collect();
    axes.sort_by(|&a, &b| {
        alignment[a]
            .abs()
            .partial_cmp(&alignment[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    for axis in axes {
        if columns.len() == dim {
            break;
        }
        let mut candidate = Vector::zeros(dim);
        candidate[axis] = 1.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for column in &columns {
                let projection = column.dot(&candidate);
                candidate.axpy(-projection, column, 1.0);
            }
        }
        let residual = candidate.norm();
        if residual > 1e-8 {
            columns.push(candidate / residual);
        }
    }

    Matrix::from_columns(&columns)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(matrix: &Matrix) -> Vec<f64> {
    let mut values: Vec<f64> = matrix
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: &Matrix) -> f64 {
    symmetric_eigenvalues(matrix)
        .first()
        .copied()
        .unwrap_or(f64::NAN)
}

/// 2-norm condition number from the singular values.
pub fn condition_number(matrix: &Matrix) -> f64 {
    let singular = matrix.clone().singular_values();
    let max = singular.max();
    let min = singular.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Returns an error unless `matrix` is square, symmetric and positive definite.
pub fn check_spd(matrix: &Matrix, what: &str) -> Result<()> {
    if !matrix.is_square() {
        return Err(Error::config(format!("{what} must be square")));
    }
    let asymmetry = (matrix - matrix.transpose()).amax();
    let scale = matrix.amax().max(1.0);
    if asymmetry > 1e-12 * scale {
        return Err(Error::config(format!("{what} must be symmetric")));
    }
    if matrix.clone().cholesky().is_none() {
        return Err(Error::config(format!("{what} must be positive definite")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_completion() {
        let q = orthonormal_completion(&Vector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(q, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn completion_is_orthonormal_in_3d() {
        let v = Vector::from_vec(vec![0.3, -0.8, 0.52]);
        let q = orthonormal_completion(&v).unwrap();
        let err = (&q * q.transpose() - Matrix::identity(3, 3)).amax();
        assert!(err < 1e-12, "{err}");
        let first = q.column(0).into_owned();
        assert!((first - &v / v.norm()).amax() < 1e-15);
    }

    #[test]
    fn completion_is_bitwise_deterministic() {
        let v = Vector::from_vec(vec![0.1234, 0.9, -0.4]);
        let a = orthonormal_completion(&v).unwrap();
        let b = orthonormal_completion(&v.clone()).unwrap();
        let bits = |m: &Matrix| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zero_vector_is_rejected() {
        let err = orthonormal_completion(&Vector::from_vec(vec![0.0, 1e-13])).unwrap_err();
        assert!(matches!(err, Error::ZeroVector(_)));
    }

    #[test]
    fn spd_check() {
        assert!(check_spd(&Matrix::identity(2, 2), "mass").is_ok());
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(check_spd(&bad, "mass").is_err());
    }
}
