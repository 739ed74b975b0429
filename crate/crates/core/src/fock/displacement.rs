use nalgebra::DMatrix;

/// Matrix elements <m|D(r)|n> of the displacement operator for real `r`,
/// m < rows, n < cols. Exact (no truncation of D itself).
///
/// Uses the associated-Laguerre closed form with the prefactor evaluated in
/// log space.
pub fn displacement_real(r: f64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::zeros(rows, cols);
    if r == 0.0 {
        for i in 0..rows.min(cols) {
            d[(i, i)] = 1.0;
        }
        return d;
    }
    let x = r * r;
    let lr = r.abs().ln();
    let nmax = rows.max(cols);
    let mut lfact = vec![0.0f64; nmax + 1];
    for k in 1..=nmax {
        lfact[k] = lfact[k - 1] + (k as f64).ln();
    }
    // alpha = |m - n|; L_k^(alpha)(x) for k = min(m, n)
    for alpha in 0..nmax {
        let kmax = (rows.min(cols)).min(nmax - alpha);
        let mut lag = Vec::with_capacity(kmax);
        let a = alpha as f64;
        let (mut l0, mut l1) = (1.0, 1.0 + a - x);
        for k in 0..kmax {
            if k == 0 {
                lag.push(l0);
            } else if k == 1 {
                lag.push(l1);
            } else {
                let kk = (k - 1) as f64;
                let l2 = ((2.0 * kk + 1.0 + a - x) * l1 - (kk + a) * l0) / (kk + 1.0);
                l0 = l1;
                l1 = l2;
                lag.push(l2);
            }
        }
        for (k, &lk) in lag.iter().enumerate() {
            let (small, big) = (k, k + alpha);
            let pref = (0.5 * (lfact[small] - lfact[big]) + a * lr - x / 2.0).exp();
            // m >= n: sqrt(n!/m!) r^(m-n) e^{-x/2} L_n^(m-n)(x)
            if big < rows && small < cols {
                d[(big, small)] = pref * lk * if r < 0.0 && alpha % 2 == 1 { -1.0 } else { 1.0 };
            }
            // m < n: sqrt(m!/n!) (-r)^(n-m) e^{-x/2} L_m^(n-m)(x)
            if alpha > 0 && small < rows && big < cols {
                let sign = if r > 0.0 && alpha % 2 == 1 { -1.0 } else { 1.0 };
                d[(small, big)] = pref * lk * sign;
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_column_is_coherent_state() {
        let r = 1.3;
        let d = displacement_real(r, 20, 1);
        let mut amp = (-r * r / 2.0f64).exp();
        for m in 0..20 {
            if m > 0 {
                amp *= r / (m as f64).sqrt();
            }
            assert!((d[(m, 0)] - amp).abs() < 1e-14, "m={m}");
        }
    }

    #[test]
    fn first_row_matches_closed_form() {
        // <0|D(r)|n> = e^{-r^2/2} (-r)^n / sqrt(n!)
        let r = 0.7;
        let d = displacement_real(r, 1, 12);
        let mut v = (-r * r / 2.0f64).exp();
        for n in 0..12 {
            if n > 0 {
                v *= -r / (n as f64).sqrt();
            }
            assert!((d[(0, n)] - v).abs() < 1e-14);
        }
    }

    #[test]
    fn unitary_on_leading_block() {
        for &r in &[0.3, 2.0, 5.5, -1.7] {
            let d = displacement_real(r, 220, 30);
            let g = d.transpose() * &d;
            for i in 0..30 {
                for j in 0..30 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - e).abs() < 1e-10, "r={r} ({i},{j}) {}", g[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn inverse_is_negated_argument() {
        let r = 1.1;
        let d = displacement_real(r, 40, 40);
        let di = displacement_real(-r, 40, 40);
        let dt = d.transpose();
        assert!((&di - &dt).amax() < 1e-13);
    }
}
