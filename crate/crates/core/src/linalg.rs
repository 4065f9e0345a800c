use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Solution of `A c = θ B c` for symmetric `A` and symmetric positive
/// semidefinite `B`, restricted to the range of `B`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors in the original coordinates, `B`-orthonormal; column `j`
    /// belongs to `values[j]`.
    pub vectors: DMatrix<f64>,
    /// Number of `B`-null directions removed before solving.
    pub pruned: usize,
}

/// Solves the generalized symmetric eigenproblem, dropping directions whose
/// `B` eigenvalue falls below `rel_tol · max eig(B)`.
pub fn generalized_symmetric_eigen(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::InvalidParameter(
            "generalized eigenproblem needs square matrices of equal size".into(),
        ));
    }
    if n == 0 {
        return Ok(GeneralizedEigen {
            values: vec![],
            vectors: DMatrix::zeros(0, 0),
            pruned: 0,
        });
    }
    let b_sym = (b + b.transpose()) * 0.5;
    let a_sym = (a + a.transpose()) * 0.5;
    let eb = SymmetricEigen::new(b_sym);
    let max_b = eb.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if !(max_b > 0.0) {
        return Err(Error::Numeric("mass matrix has no positive eigenvalue".into()));
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eb.eigenvalues[i] > rel_tol * max_b)
        .collect();
    let k = keep.len();
    let mut t = DMatrix::zeros(n, k);
    for (col, &i) in keep.iter().enumerate() {
        let scale = 1.0 / eb.eigenvalues[i].sqrt();
        t.set_column(col, &(eb.eigenvectors.column(i) * scale));
    }
    let reduced = t.transpose() * &a_sym * &t;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let er = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| er.eigenvalues[i].total_cmp(&er.eigenvalues[j]));
    let values = order.iter().map(|&i| er.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &(&t * er.eigenvectors.column(i)));
    }
    Ok(GeneralizedEigen {
        values,
        vectors,
        pruned: n - k,
    })
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive semidefinite system whose
/// right-hand side lies in the range of the operator. Starting from zero the
/// iterates stay in that range, so the kernel never needs explicit handling
/// beyond keeping `b` consistent.
pub fn conjugate_gradient(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for it in 0..max_iter {
        let rel = rr.sqrt() / b_norm;
        if rel <= rel_tol {
            return Ok(CgSolution {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        let ap = a * &p;
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let step = rr / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rr_new = r.dot(&r);
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    let rel = (b - a * &x).norm() / b_norm;
    if rel <= rel_tol {
        Ok(CgSolution {
            x,
            iterations: max_iter,
            relative_residual: rel,
        })
    } else {
        Err(Error::SolverDiverged {
            iterations: max_iter,
            residual: rel,
        })
    }
}

/// Smallest singular value of a (possibly rectangular) matrix.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let e = SymmetricEigen::new(gram);
    e.eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_matches_diagonal_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, -2.0, 9.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 3.0]));
        let ge = generalized_symmetric_eigen(&a, &b, 1e-12).unwrap();
        assert_eq!(ge.pruned, 0);
        let expect = [-2.0, 2.0, 3.0];
        for (v, e) in ge.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }
        let c = ge.vectors.column(0);
        let resid = &a * c - &b * c * ge.values[0];
        assert!(resid.norm() < 1e-12);
    }

    #[test]
    fn dependent_basis_is_pruned() {
        // third basis vector duplicates the first
        let raw = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let b = &raw * raw.transpose();
        let a = &raw * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0])) * raw.transpose();
        let ge = generalized_symmetric_eigen(&a, &b, 1e-10).unwrap();
        assert_eq!(ge.pruned, 1);
        assert!((ge.values[0] - 1.0).abs() < 1e-12);
        assert!((ge.values[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cg_solves_singular_consistent_system() {
        // 1-D periodic Laplacian, kernel = constants
        let n = 8;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0;
            a[(i, (i + 1) % n)] = -1.0;
            a[(i, (i + n - 1) % n)] = -1.0;
        }
        let mut b = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin());
        let mean = b.mean();
        b.add_scalar_mut(-mean);
        let sol = conjugate_gradient(&a, &b, 1e-12, 100).unwrap();
        assert!((&a * &sol.x - &b).norm() < 1e-10);
    }
}
