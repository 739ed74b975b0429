//! Two-mode Gaussian states in the vacuum-variance-1 convention.
//!
//! Quadrature order is (x1, p1, x2, p2).

use crate::error::{arg, Result};
use crate::fock::TmsvParam;
use nalgebra::{Matrix2, Matrix4, SMatrix, Vector4};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoModeCovariance {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

/// Standard-form invariants (a, b, c1, c2) with c1 >= |c2|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardForm {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

impl TwoModeCovariance {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn vacuum() -> Self {
        Self::new(Vector4::zeros(), Matrix4::identity())
    }

    /// Phase-insensitive state [[a I, c Z], [c Z, b I]].
    pub fn phase_insensitive(a: f64, b: f64, c: f64) -> Self {
        let mut cov = Matrix4::zeros();
        cov[(0, 0)] = a;
        cov[(1, 1)] = a;
        cov[(2, 2)] = b;
        cov[(3, 3)] = b;
        cov[(0, 2)] = c;
        cov[(2, 0)] = c;
        cov[(1, 3)] = -c;
        cov[(3, 1)] = -c;
        Self::new(Vector4::zeros(), cov)
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(2 * i, 2 * j).into()
    }

    /// Swaps the two modes.
    pub fn swapped(&self) -> Self {
        let p = [2, 3, 0, 1];
        let cov = Matrix4::from_fn(|r, c| self.cov[(p[r], p[c])]);
        let mean = Vector4::from_fn(|r, _| self.mean[p[r]]);
        Self::new(mean, cov)
    }

    /// Symplectic eigenvalues (nu_minus, nu_plus).
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let (da, db, dc) = (self.block(0, 0).determinant(), self.block(1, 1).determinant(), self.block(0, 1).determinant());
        nu_pair(da + db + 2.0 * dc, self.cov.determinant())
    }

    /// Symplectic eigenvalues of the partial transpose (mode 2 mirrored).
    pub fn pt_symplectic_eigenvalues(&self) -> (f64, f64) {
        let (da, db, dc) = (self.block(0, 0).determinant(), self.block(1, 1).determinant(), self.block(0, 1).determinant());
        nu_pair(da + db - 2.0 * dc, self.cov.determinant())
    }

    /// Bona fide check: V + iΩ >= 0 via symplectic eigenvalues.
    pub fn is_physical(&self, tol: f64) -> bool {
        let sym = (self.cov - self.cov.transpose()).amax() <= tol.max(1e-12) * self.cov.amax().max(1.0);
        let (nm, _) = self.symplectic_eigenvalues();
        sym && nm >= 1.0 - tol && self.block(0, 0).determinant() > 0.0
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.block(0, 0) - self.block(1, 1)).amax() <= tol
    }

    /// Local invariants in standard form.
    pub fn standard_form(&self) -> StandardForm {
        let a = self.block(0, 0).determinant().max(0.0).sqrt();
        let b = self.block(1, 1).determinant().max(0.0).sqrt();
        let i3 = self.block(0, 1).determinant();
        let i4 = self.cov.determinant();
        let ab = a * b;
        // (ab - c1^2)(ab - c2^2) = det V, c1 c2 = det C
        let sum = if ab > 0.0 { ((ab * ab) + i3 * i3 - i4) / ab } else { 0.0 };
        let disc = (sum * sum - 4.0 * i3 * i3).max(0.0).sqrt();
        let u = ((sum + disc) / 2.0).max(0.0);
        let c1 = u.sqrt();
        let c2 = if c1 > 0.0 { i3 / c1 } else { 0.0 };
        StandardForm { a, b, c1, c2 }
    }

    /// Minimal EPR variance [V(x1 - x2) + V(p1 + p2)]/4 over local
    /// squeezings of the standard form.
    ///
    /// Equals the smaller partial-transpose symplectic eigenvalue for
    /// symmetric states.
    pub fn min_epr_variance(&self) -> f64 {
        let sf = self.standard_form();
        let (a, b, c1, c2) = (sf.a, sf.b, sf.c1, sf.c2);
        // s = e^u, t = e^v; pairs (x1 - x2, p1 + p2) commute
        let f = |u: f64, v: f64| -> f64 {
            let (s2, t2) = ((2.0 * u).exp(), (2.0 * v).exp());
            let st = (u + v).exp();
            (s2 * a + t2 * b - 2.0 * st * c1 + a / s2 + b / t2 + 2.0 * c2 / st) / 4.0
        };
        let m = 0.5 * (a + b);
        let u0 = 0.25 * ((m + c2).max(1e-300) / (m - c1).max(1e-300)).ln();
        let shift = 0.25 * (b / a).ln();
        let (mut u, mut v) = (u0 - shift, u0 + shift);
        let mut best = f(u, v);
        for _ in 0..200 {
            u = golden(|x| f(x, v), u - 2.0, u + 2.0);
            v = golden(|y| f(u, y), v - 2.0, v + 2.0);
            let now = f(u, v);
            if (best - now).abs() < 1e-15 * best.abs().max(1.0) {
                best = now;
                break;
            }
            best = now;
        }
        best
    }

    /// Mean photon number of mode `i`.
    pub fn mean_photon_number(&self, i: usize) -> f64 {
        let k = 2 * i;
        (self.cov[(k, k)] + self.cov[(k + 1, k + 1)] + self.mean[k].powi(2) + self.mean[k + 1].powi(2) - 2.0) / 4.0
    }

    pub fn max_abs_diff(&self, other: &TwoModeCovariance) -> f64 {
        (self.cov - other.cov).amax().max((self.mean - other.mean).amax())
    }
}

fn nu_pair(delta: f64, det: f64) -> (f64, f64) {
    let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
    let lo = ((delta - disc) / 2.0).max(0.0).sqrt();
    let hi = ((delta + disc) / 2.0).max(0.0).sqrt();
    (lo, hi)
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// TMSV covariance: a = (1+chi²)/(1-chi²), c = 2chi/(1-chi²).
pub fn tmsv_covariance(chi: TmsvParam) -> TwoModeCovariance {
    let c2 = chi.chi() * chi.chi();
    let a = (1.0 + c2) / (1.0 - c2);
    let c = 2.0 * chi.chi() / (1.0 - c2);
    TwoModeCovariance::phase_insensitive(a, a, c)
}

/// Pure loss on `arm`.
pub fn loss_map(state: &TwoModeCovariance, arm: usize, eta: f64) -> Result<TwoModeCovariance> {
    if arm > 1 {
        return arg(format!("arm must be 0 or 1, got {arm}"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return arg(format!("eta must lie in [0,1], got {eta}"));
    }
    let mut x = Matrix4::identity();
    let k = 2 * arm;
    x[(k, k)] = eta.sqrt();
    x[(k + 1, k + 1)] = eta.sqrt();
    let mut y = Matrix4::zeros();
    y[(k, k)] = 1.0 - eta;
    y[(k + 1, k + 1)] = 1.0 - eta;
    Ok(TwoModeCovariance::new(x * state.mean, x * state.cov * x.transpose() + y))
}

/// Unity-gain CV teleportation of `input_arm` through `resource`
/// (resource mode 0 is measured with the input, mode 1 carries the output).
pub fn cv_teleport(input: &TwoModeCovariance, input_arm: usize, resource: &TwoModeCovariance) -> Result<TwoModeCovariance> {
    cv_teleport_gain(input, input_arm, resource, 1.0)
}

/// CV teleportation with classical gain `gain`:
/// x_out = x_R1 + g (x_in − x_R0), p_out = p_R1 + g (p_in + p_R0).
///
/// The untouched input arm keeps its position; the output replaces
/// `input_arm`.
pub fn cv_teleport_gain(input: &TwoModeCovariance, input_arm: usize, resource: &TwoModeCovariance, gain: f64) -> Result<TwoModeCovariance> {
    if input_arm > 1 {
        return arg(format!("input_arm must be 0 or 1, got {input_arm}"));
    }
    if !(gain.is_finite() && gain >= 0.0) {
        return arg("teleport gain must be finite and >= 0");
    }
    let other = 1 - input_arm;
    // joint vector (kept x,p, in x,p, r0 x,p, r1 x,p)
    let mut joint = SMatrix::<f64, 8, 8>::zeros();
    let mut mean = SMatrix::<f64, 8, 1>::zeros();
    let order = [2 * other, 2 * other + 1, 2 * input_arm, 2 * input_arm + 1];
    for r in 0..4 {
        mean[r] = input.mean[order[r]];
        mean[4 + r] = resource.mean[r];
        for c in 0..4 {
            joint[(r, c)] = input.cov[(order[r], order[c])];
            joint[(4 + r, 4 + c)] = resource.cov[(r, c)];
        }
    }
    let mut l = SMatrix::<f64, 4, 8>::zeros();
    l[(0, 0)] = 1.0;
    l[(1, 1)] = 1.0;
    // x_out
    l[(2, 6)] = 1.0;
    l[(2, 2)] = gain;
    l[(2, 4)] = -gain;
    // p_out
    l[(3, 7)] = 1.0;
    l[(3, 3)] = gain;
    l[(3, 5)] = gain;
    let out_cov = l * joint * l.transpose();
    let out_mean = l * mean;
    let res = TwoModeCovariance::new(Vector4::from_column_slice(out_mean.as_slice()), out_cov);
    Ok(if input_arm == 0 { res.swapped() } else { res })
}

/// Entanglement swap at a middle node holding arm 1 of both links: arm 1 of
/// `left` is teleported through `right` (its arm 1 measured, arm 0 output).
pub fn entanglement_swap(left: &TwoModeCovariance, right: &TwoModeCovariance, gain: f64) -> Result<TwoModeCovariance> {
    cv_teleport_gain(left, 1, &right.swapped(), gain)
}
