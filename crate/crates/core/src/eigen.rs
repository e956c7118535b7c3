//! Dense complex Hermitian eigensolver (cyclic Jacobi).
//!
//! The spectra handled here never exceed a few hundred rows, so a cyclic
//! Jacobi iteration is both simple and fully accurate: each sweep applies a
//! unitary two-sided rotation to every off-diagonal pair until the
//! off-diagonal Frobenius norm falls below 1e-12 of the matrix norm.

use ndarray::Array2;
use num_complex::Complex64;

use crate::{Error, Result};

/// Relative Hermiticity tolerance on the input.
const HERMITICITY_TOL: f64 = 1e-10;
/// Off-diagonal Frobenius target relative to the matrix norm.
const OFFDIAG_TOL: f64 = 1e-12;
/// Hard sweep limit before giving up.
const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and the unitary matrix of eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Array2<Complex64>,
}

fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn offdiag_frobenius(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Diagonalize a Hermitian matrix. Rejects matrices that are not Hermitian
/// within 1e-10 relative; fails with a numeric error if 100 sweeps do not
/// reach the off-diagonal target.
pub fn eigensolve_hermitian(h: &Array2<Complex64>) -> Result<EigenDecomposition> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::invalid("matrix must be square"));
    }
    let norm = frobenius(h);
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let asym = (h[(i, j)] - h[(j, i)].conj()).norm();
            max_asym = max_asym.max(asym);
        }
    }
    if max_asym > HERMITICITY_TOL * norm.max(1.0) {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian: asymmetry {max_asym:.3e} vs norm {norm:.3e}"
        )));
    }

    // Work on the Hermitian average so roundoff asymmetry cannot accumulate.
    let mut a = h.clone();
    for i in 0..n {
        for j in 0..n {
            let sym = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            a[(i, j)] = sym;
        }
    }

    let mut v = Array2::<Complex64>::eye(n);
    if n <= 1 || norm == 0.0 {
        return Ok(finish(a, v));
    }

    let target = OFFDIAG_TOL * norm;
    for _sweep in 0..MAX_SWEEPS {
        if offdiag_frobenius(&a) <= target {
            return Ok(finish(a, v));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.norm() <= target / (n as f64) {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if offdiag_frobenius(&a) <= target {
        return Ok(finish(a, v));
    }
    Err(Error::numeric(format!(
        "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps (off-diagonal {:.3e}, target {:.3e})",
        offdiag_frobenius(&a),
        target
    )))
}

/// Apply the unitary U = diag(1, e^{-i phi}) R(theta) on the (p, q) plane,
/// chosen to zero A[p][q].
fn rotate(a: &mut Array2<Complex64>, v: &mut Array2<Complex64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let alpha = apq.norm();
    let phi = apq.arg();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;

    let theta = 0.5 * (2.0 * alpha).atan2(app - aqq);
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, -phi);

    let n = a.nrows();
    // Columns p and q, rows k outside the pivot plane.
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_p = akp * c + akq * (e * s);
        let new_q = -akp * s + akq * (e * c);
        a[(k, p)] = new_p;
        a[(k, q)] = new_q;
        a[(p, k)] = new_p.conj();
        a[(q, k)] = new_q.conj();
    }
    // Pivot block.
    let two_acs = 2.0 * alpha * c * s;
    let new_pp = app * c * c + aqq * s * s + two_acs;
    let new_qq = app * s * s + aqq * c * c - two_acs;
    a[(p, p)] = Complex64::new(new_pp, 0.0);
    a[(q, q)] = Complex64::new(new_qq, 0.0);
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);

    // Accumulate V <- V U.
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c + vkq * (e * s);
        v[(k, q)] = -vkp * s + vkq * (e * c);
    }
}

/// Sort eigenpairs ascending by eigenvalue.
fn finish(a: Array2<Complex64>, v: Array2<Complex64>) -> EigenDecomposition {
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = Array2::<Complex64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    EigenDecomposition { values, vectors }
}

/// Largest deviation of V^dagger V from the identity.
pub fn unitarity_defect(v: &Array2<Complex64>) -> f64 {
    let n = v.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for k in 0..n {
                dot += v[(k, i)].conj() * v[(k, j)];
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - Complex64::new(expect, 0.0)).norm());
        }
    }
    worst
}
