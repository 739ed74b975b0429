//! Hermitian eigensolvers. nalgebra's QR iteration (complex and real)
//! returns NaN on some small structured matrices; those fall back to cyclic
//! Jacobi on the real embedding.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Real symmetric form [[A, -B], [B, A]] of H = A + iB. Its spectrum is that
/// of H with every eigenvalue doubled.
fn embed(h: &DMatrix<C64>) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = h[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub(crate) fn hermitian_eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let e = h.clone().symmetric_eigenvalues();
    if finite(&e) {
        return e.iter().copied().collect();
    }
    let mut e = jacobi(embed(h)).0;
    e.sort_by(|a, b| a.total_cmp(b));
    e.into_iter().step_by(2).collect()
}

/// Eigenvalues and orthonormal eigenvectors (as columns).
pub(crate) fn hermitian_eigen(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let e = h.clone().symmetric_eigen();
    if finite(&e.eigenvalues) && e.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return (e.eigenvalues.iter().copied().collect(), e.eigenvectors);
    }
    eigen_by_embedding(h)
}

fn eigen_by_embedding(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = h.nrows();
    let (rv, rw) = jacobi(embed(h));
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| rv[a].total_cmp(&rv[b]));
    // each pair [u; v], [-v; u] spans one complex vector u + iv; keep one
    // per pair by Gram-Schmidt against those already taken
    let mut vals = Vec::with_capacity(n);
    let mut vecs: Vec<DVector<C64>> = Vec::with_capacity(n);
    for k in order {
        if vecs.len() == n {
            break;
        }
        let col = rw.column(k);
        let mut v = DVector::from_fn(n, |i, _| C64::new(col[i], col[n + i]));
        for u in &vecs {
            let p = u.dotc(&v);
            v -= u * p;
        }
        let norm = v.norm();
        if norm > 0.5 {
            vecs.push(v / C64::from(norm));
            vals.push(rv[k]);
        }
    }
    (vals, DMatrix::from_columns(&vecs))
}

/// Cyclic Jacobi rotations for a real symmetric matrix; eigenvectors are
/// the columns of the second value.
fn jacobi(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = (t * t + 1.0).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let (mut e, v) = jacobi(a.clone());
        let r = &a * &v - &v * DMatrix::from_diagonal(&DVector::from_vec(e.clone()));
        assert!(r.norm() < 1e-12);
        e.sort_by(|x, y| x.total_cmp(y));
        let s = 2f64.sqrt();
        for (x, y) in e.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_recovers_complex_eigenvectors() {
        let (one, i) = (C64::from(1.0), C64::new(0.0, 1.0));
        let h = DMatrix::from_row_slice(3, 3, &[one * 2.0, i, one * 0.5, -i, one, i * 0.3, one * 0.5, -i * 0.3, one * 3.0]);
        let (vals, vecs) = eigen_by_embedding(&h);
        assert_eq!(vals.len(), 3);
        let gram = vecs.adjoint() * &vecs;
        assert!((gram - DMatrix::<C64>::identity(3, 3)).norm() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(3, vals.iter().map(|&x| C64::from(x))));
        assert!((&h * &vecs - &vecs * d).norm() < 1e-12);
        let tr: f64 = vals.iter().sum();
        assert!((tr - 6.0).abs() < 1e-12);
    }
}
