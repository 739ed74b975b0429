//! Exact Fock-space CV teleportation (ideal homodyne Bell measurement plus
//! displacement feed-forward), integrated over outcomes by quadrature.
//!
//! Per outcome beta the Kraus map on the teleported mode is
//! K = D(g beta) Xi^T D(beta)^dagger, where Xi holds the resource
//! amplitudes <k, n|xi>. For phase-covariant inputs and resources the
//! angular integral reduces to keeping charge-diagonal blocks, so only the
//! radial integral in u = |beta|^2 is done numerically.

use super::{displacement_real, FockDensity};
use crate::error::{arg, Error, Result};
use crate::linalg::hermitian_eigen;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy)]
pub struct FockTeleportSettings {
    pub gain: f64,
    /// Cutoff of the output mode.
    pub out_cutoff: usize,
    /// Radial integration stops once a panel adds less than this much trace.
    pub tol: f64,
}

impl Default for FockTeleportSettings {
    fn default() -> Self {
        Self { gain: 1.0, out_cutoff: 30, tol: 1e-15 }
    }
}

/// Teleports `input_mode` of a two-mode state through a two-mode
/// `resource` (mode 0 measured, mode 1 output). The output takes the place
/// of `input_mode`.
pub fn cv_teleport_fock(input: &FockDensity, input_mode: usize, resource: &FockDensity, s: FockTeleportSettings) -> Result<FockDensity> {
    if input.num_modes() != 2 || resource.num_modes() != 2 {
        return arg("Fock teleportation expects two-mode input and resource");
    }
    if input_mode > 1 {
        return arg("input_mode must be 0 or 1");
    }
    let rho = if input_mode == 1 { input.clone() } else { input.permute(&[1, 0])? };
    for (name, st) in [("input", &rho), ("resource", resource)] {
        if !phase_covariant(st) {
            return Err(Error::Domain(format!("{name} is not phase covariant; Fock teleportation needs n0 - n1 conserving states")));
        }
    }
    let (ck, cin) = (rho.cutoffs()[0], rho.cutoffs()[1]);
    let (dk, din) = (ck + 1, cin + 1);
    let (dr0, dr1) = (resource.cutoffs()[0] + 1, resource.cutoffs()[1] + 1);
    let dout = s.out_cutoff + 1;

    let inputs: Vec<(f64, DMatrix<C64>)> = sector_eigen(&rho)
        .into_iter()
        .map(|(w, v)| (w, DMatrix::from_row_slice(dk, din, v.as_slice())))
        .collect();
    // Xi^T as (dr1 x dr0)
    let res: Vec<(f64, DMatrix<C64>)> = sector_eigen(resource)
        .into_iter()
        .map(|(w, v)| (w, DMatrix::from_row_slice(dr0, dr1, v.as_slice()).transpose()))
        .collect();

    // output sectors by charge n_kept - n_out
    let mut sectors: Vec<(i64, Vec<usize>)> = Vec::new();
    for i in 0..dk * dout {
        let q = (i / dout) as i64 - (i % dout) as i64;
        match sectors.iter_mut().find(|(c, _)| *c == q) {
            Some((_, v)) => v.push(i),
            None => sectors.push((q, vec![i])),
        }
    }
    let mut acc: Vec<DMatrix<C64>> = sectors.iter().map(|(_, v)| DMatrix::zeros(v.len(), v.len())).collect();

    let n_in = input.mean_photon_number(input_mode)?;
    let n_r0 = resource.mean_photon_number(0)?;
    let scale = 1.0 + n_in + n_r0 + s.gain * s.gain * (1.0 + n_in);
    let h = (scale / 4.0).max(0.05);
    let (gx, gw) = gauss_legendre(16);

    let mut total = 0.0;
    let mut u0 = 0.0;
    let mut quiet = 0;
    for _panel in 0..100_000 {
        let mut panel = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            let u = u0 + 0.5 * h * (x + 1.0);
            let wu = 0.5 * h * w;
            let r = u.sqrt();
            let dm = displacement_real(-r, dr0, din);
            let dg = displacement_real(s.gain * r, dout, dr1);
            let dm = dm.map(C64::from);
            let dg = dg.map(C64::from);
            for (wr, xi_t) in &res {
                let k = &dg * xi_t * &dm;
                let kt = k.transpose();
                for (wv, v) in &inputs {
                    let out = v * &kt;
                    let wt = wu * wr * wv;
                    for (si, (_, idx)) in sectors.iter().enumerate() {
                        let vec: Vec<C64> = idx.iter().map(|&i| out[(i / dout, i % dout)]).collect();
                        let a = &mut acc[si];
                        for (cj, vj) in vec.iter().enumerate() {
                            let cv = vj.conj() * wt;
                            if cv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for (ri, vi) in vec.iter().enumerate() {
                                a[(ri, cj)] += vi * cv;
                            }
                        }
                        for vi in &vec {
                            panel += vi.norm_sqr() * wt;
                        }
                    }
                }
            }
        }
        total += panel;
        u0 += h;
        if panel < s.tol && u0 > 2.0 * scale {
            quiet += 1;
            if quiet >= 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let mut m = DMatrix::<C64>::zeros(dk * dout, dk * dout);
    for ((_, idx), a) in sectors.iter().zip(&acc) {
        for (cj, &j) in idx.iter().enumerate() {
            for (ri, &i) in idx.iter().enumerate() {
                m[(i, j)] = a[(ri, cj)];
            }
        }
    }
    if !(total > 0.0) {
        return Err(Error::Truncation("teleported state has no weight inside the output cutoff".into()));
    }
    let out = FockDensity::from_matrix(vec![ck, s.out_cutoff], m)?
        .with_weight(input.weight() * resource.weight())
        .with_norm_retained(input.norm_retained() * resource.norm_retained() * total);
    if input_mode == 1 { Ok(out) } else { out.permute(&[1, 0]) }
}

fn phase_covariant(st: &FockDensity) -> bool {
    let d1 = st.cutoffs()[1] + 1;
    let m = st.coeffs();
    let scale = m.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    for c in 0..m.ncols() {
        let qc = (c / d1) as i64 - (c % d1) as i64;
        for r in 0..m.nrows() {
            let qr = (r / d1) as i64 - (r % d1) as i64;
            if qr != qc && m[(r, c)].norm() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Eigen-decomposition done per charge sector so each vector has definite
/// n0 - n1. Returns (eigenvalue, full-length vector) for eigenvalues above
/// 1e-16 of the largest.
fn sector_eigen(st: &FockDensity) -> Vec<(f64, nalgebra::DVector<C64>)> {
    let d1 = st.cutoffs()[1] + 1;
    let dim = st.dim();
    let mut sectors: Vec<(i64, Vec<usize>)> = Vec::new();
    for i in 0..dim {
        let q = (i / d1) as i64 - (i % d1) as i64;
        match sectors.iter_mut().find(|(c, _)| *c == q) {
            Some((_, v)) => v.push(i),
            None => sectors.push((q, vec![i])),
        }
    }
    let m = st.coeffs();
    let mut out = Vec::new();
    for (_, idx) in &sectors {
        let n = idx.len();
        let block = DMatrix::from_fn(n, n, |r, c| m[(idx[r], idx[c])]);
        let block = (&block + block.adjoint()) * C64::from(0.5);
        let (vals, vecs) = hermitian_eigen(&block);
        for (k, &w) in vals.iter().enumerate() {
            if w > 1e-16 {
                let mut v = nalgebra::DVector::<C64>::zeros(dim);
                for (r, &i) in idx.iter().enumerate() {
                    v[i] = vecs[(r, k)];
                }
                out.push((w, v));
            }
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
