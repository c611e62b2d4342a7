//! Small dense symmetric eigenvalue helpers.
//!
//! Eigenvalues are computed by cyclic Jacobi rotations. For the matrix sizes
//! this crate deals with (n <= 10) the method converges in a handful of
//! sweeps and delivers close to machine accuracy.

use nalgebra::DMatrix;

/// Relative off-diagonal threshold for Jacobi convergence.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, sorted ascending.
///
/// The input is not checked for symmetry; callers validate with
/// [`max_asymmetry`] where it matters.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let mut a = m.clone();
    let norm = a.norm().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * norm {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues must be finite"));
    eigs
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(m).last().expect("non-empty matrix")
}

/// Largest absolute difference between `m` and its transpose.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + m') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation annihilating `a[(p, q)]`.
fn rotate(a: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    // Smaller root of t^2 + 2*theta*t - 1 = 0; stable form for large |theta|.
    let t = if theta.abs() < 1e150 {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        1.0 / (2.0 * theta)
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for i in 0..n {
        if i != p && i != q {
            let aip = a[(i, p)];
            let aiq = a[(i, q)];
            a[(i, p)] = c * aip - s * aiq;
            a[(p, i)] = a[(i, p)];
            a[(i, q)] = s * aip + c * aiq;
            a[(q, i)] = a[(i, q)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_eigenvalues() {
        let m = DMatrix::<f64>::identity(3, 3);
        assert_eq!(sym_eigenvalues(&m), vec![1.0, 1.0, 1.0]);
        assert_eq!(lambda_min(&m), 1.0);
    }

    #[test]
    fn diagonal_eigenvalues() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0, 0.3]));
        let eigs = sym_eigenvalues(&m);
        assert_relative_eq!(eigs[0], 0.3, max_relative = 1e-14);
        assert_relative_eq!(eigs[2], 5.0, max_relative = 1e-14);
    }

    #[test]
    fn rayleigh_quotient_bounds_lambda_min() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 4;
            let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
            let q = symmetrize(&raw);
            let lmin = lambda_min(&q);
            for _ in 0..100 {
                let v = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let denom = v.dot(&v);
                if denom < 1e-12 {
                    continue;
                }
                let rq = v.dot(&(&q * &v)) / denom;
                assert!(lmin <= rq + 1e-10, "lambda_min {lmin} > Rayleigh {rq}");
            }
        }
    }

    #[test]
    fn known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eigs = sym_eigenvalues(&m);
        assert_relative_eq!(eigs[0], 1.0, max_relative = 1e-13);
        assert_relative_eq!(eigs[1], 3.0, max_relative = 1e-13);
    }

    #[test]
    fn trace_and_det_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let raw = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
            let m = symmetrize(&raw);
            let eigs = sym_eigenvalues(&m);
            let trace: f64 = eigs.iter().sum();
            assert_relative_eq!(trace, m.trace(), epsilon = 1e-10);
            let det: f64 = eigs.iter().product();
            assert_relative_eq!(det, m.determinant(), epsilon = 1e-9, max_relative = 1e-9);
        }
    }
}
