use crate::error::{Error, Result};
use crate::numeric::mat::Mat;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns the eigenvalues in ascending order and the matrix whose columns
/// are the matching orthonormal eigenvectors. Sweeps stop once the
/// off-diagonal Frobenius norm drops below 1e-10 relative to the input norm.
pub fn symmetric_eig<F: Real>(a: &Mat<F>) -> Result<(Vec<F>, Mat<F>)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a
        .as_slice()
        .iter()
        .fold(F::zero(), |m, &v| m.max(v.abs()))
        .max(F::one());
    let sym_tol = F::of(1e-10) * scale;
    for r in 0..n {
        for c in (r + 1)..n {
            if (a.get(r, c) - a.get(c, r)).abs() > sym_tol {
                return Err(Error::Numeric(format!(
                    "matrix is not symmetric at ({r},{c})"
                )));
            }
        }
    }
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }

    let mut work = a.clone();
    // Eigenvectors accumulated with vectors as ROWS so each rotation touches
    // two contiguous slices; transposed back before returning.
    let mut vt = Mat::identity(n);
    let norm = a.frobenius_norm();
    let tol = F::of(1e-10) * norm;

    let mut converged = norm == F::zero();
    for _ in 0..MAX_SWEEPS {
        if converged || off_diag_norm(&work) <= tol {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = work.get(p, q);
                if apq == F::zero() {
                    continue;
                }
                let (c, s) = rotation(work.get(p, p), work.get(q, q), apq);
                apply_rotation(&mut work, p, q, c, s);
                let (vp, vq) = vt.two_rows_mut(p, q);
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let xp = c * *x - s * *y;
                    let yq = s * *x + c * *y;
                    *x = xp;
                    *y = yq;
                }
            }
        }
    }
    if !converged && off_diag_norm(&work) > tol {
        return Err(Error::Numeric(format!(
            "jacobi sweep limit ({MAX_SWEEPS}) reached before convergence"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        work.get(i, i)
            .partial_cmp(&work.get(j, j))
            .expect("eigenvalues are finite")
    });
    let values: Vec<F> = order.iter().map(|&i| work.get(i, i)).collect();
    let vectors = Mat::from_fn(n, n, |r, c| vt.get(order[c], r));
    Ok((values, vectors))
}

fn off_diag_norm<F: Real>(m: &Mat<F>) -> F {
    let n = m.rows();
    let mut sum = F::zero();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = m.get(r, c);
            sum += v * v;
        }
    }
    (sum + sum).sqrt()
}

/// Jacobi rotation (c, s) annihilating the (p,q) entry, following the
/// standard stable formulation via t = s/c.
fn rotation<F: Real>(app: F, aqq: F, apq: F) -> (F, F) {
    let theta = (aqq - app) / (F::of(2.0) * apq);
    let t = {
        let denom = theta.abs() + (F::one() + theta * theta).sqrt();
        let t = F::one() / denom;
        if theta < F::zero() {
            -t
        } else {
            t
        }
    };
    let c = F::one() / (F::one() + t * t).sqrt();
    (c, t * c)
}

/// Apply the symmetric similarity transform J^T A J for the (p,q) rotation.
fn apply_rotation<F: Real>(a: &mut Mat<F>, p: usize, q: usize, c: F, s: F) {
    let n = a.rows();
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let apq = a.get(p, q);
    let cc = c * c;
    let ss = s * s;
    let cs = c * s;
    let two = F::of(2.0);
    a.set(p, p, cc * app - two * cs * apq + ss * aqq);
    a.set(q, q, ss * app + two * cs * apq + cc * aqq);
    a.set(p, q, F::zero());
    a.set(q, p, F::zero());
    for j in 0..n {
        if j == p || j == q {
            continue;
        }
        let ajp = a.get(j, p);
        let ajq = a.get(j, q);
        let np = c * ajp - s * ajq;
        let nq = s * ajp + c * ajq;
        a.set(j, p, np);
        a.set(p, j, np);
        a.set(j, q, nq);
        a.set(q, j, nq);
    }
}
