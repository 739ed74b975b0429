use super::{binomial_table, FockDensity};
use crate::error::{arg, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Fock representation of the phase-insensitive Gaussian state
/// [[a I, c Z], [c Z, b I]] restricted to n_A <= cutoff_a, n_B <= cutoff_b.
///
/// Built as a TMSV matching `a`, followed on mode B by loss then a
/// quantum-limited amplifier. The returned state is renormalized;
/// `norm_retained` holds the probability mass inside the cutoffs.
pub fn phase_insensitive_gaussian(a: f64, b: f64, c: f64, cutoff_a: usize, cutoff_b: usize) -> Result<FockDensity> {
    if !(a >= 1.0 - 1e-12 && b >= 1.0 - 1e-12) {
        return arg(format!("variances must be >= 1, got a={a}, b={b}"));
    }
    let flip = c < 0.0;
    let c = c.abs();
    let a = a.max(1.0);
    let lam2 = (a - 1.0) / (a + 1.0);
    let lam = lam2.sqrt();
    let c_lam = 2.0 * lam / (1.0 - lam2);
    let tau = if c == 0.0 { 0.0 } else { (c / c_lam).powi(2) };
    if c > 0.0 && lam == 0.0 {
        return arg("correlations require a > 1");
    }
    let gain = (b - tau * a + tau + 1.0) / 2.0;
    if gain < 1.0 - 1e-9 {
        return arg(format!("covariance is not a physical phase-insensitive state (amplifier gain {gain})"));
    }
    let gain = gain.max(1.0);
    let tp = tau / gain;
    if tp > 1.0 + 1e-9 {
        return arg(format!("covariance needs loss transmittance {tp} > 1"));
    }
    let tp = tp.min(1.0);

    let (ca, cb) = (cutoff_a, cutoff_b);
    let binom = binomial_table(ca.max(cb) * 2 + 2);
    let psi: Vec<f64> = (0..=ca).map(|n| (1.0 - lam2).sqrt() * lam.powi(n as i32)).collect();
    let (se, sl) = (tp.sqrt(), (1.0 - tp).sqrt());
    let loss = |k: usize, n: usize| binom[n][k].sqrt() * se.powi((n - k) as i32) * sl.powi(k as i32);
    let (gi, gq) = (gain.sqrt().recip(), (1.0 - 1.0 / gain).sqrt());
    let amp = |j: usize, q: usize| binom[q + j][j].sqrt() * gi.powi(q as i32 + 1) * gq.powi(j as i32);

    let db = cb + 1;
    let dim = (ca + 1) * db;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for n in 0..=ca {
        for np in 0..=ca {
            let amp_nn = psi[n] * psi[np];
            if amp_nn == 0.0 {
                continue;
            }
            for k in 0..=n.min(np) {
                let (q, qp) = (n - k, np - k);
                let lk = loss(k, n) * loss(k, np);
                if lk == 0.0 || q.max(qp) > cb {
                    continue;
                }
                for j in 0..=(cb - q.max(qp)) {
                    let (mo, mpo) = (q + j, qp + j);
                    let mut v = amp_nn * lk * amp(j, q) * amp(j, qp);
                    if flip && (mo + mpo) % 2 == 1 {
                        v = -v;
                    }
                    m[(n * db + mo, np * db + mpo)] += C64::from(v);
                }
            }
        }
    }
    let kept = m.trace().re;
    Ok(FockDensity::from_matrix(vec![ca, cb], m)?.with_norm_retained(kept))
}
