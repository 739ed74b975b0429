//! Entanglement of formation and logarithmic negativity.

use crate::error::{arg, Error, Result};
use crate::fock::FockDensity;
use crate::gaussian::TwoModeCovariance;
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EofMethod {
    TwoQubitWootters,
    GaussianSymmetric,
    /// EPR-variance bound at the state's first and second moments; exact for
    /// symmetric Gaussian states, a lower bound otherwise.
    GaussianApprox,
    PureStateEntropy,
}

impl EofMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            EofMethod::TwoQubitWootters => "two-qubit-wootters",
            EofMethod::GaussianSymmetric => "gaussian-symmetric",
            EofMethod::GaussianApprox => "gaussian-approx",
            EofMethod::PureStateEntropy => "pure-state-entropy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub eof: f64,
    pub log_negativity: f64,
    pub method: EofMethod,
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 { 0.0 } else { x * x.log2() }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    -xlog2x(p) - xlog2x(1.0 - p)
}

/// EoF of a two-qubit state from its concurrence.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt()))
}

/// EoF of a symmetric Gaussian state with minimal EPR variance `delta`.
pub fn gaussian_eof_from_epr(delta: f64) -> f64 {
    if !(delta < 1.0) {
        return 0.0;
    }
    let (s, r) = (delta.sqrt(), delta.sqrt().recip());
    let cp = (r + s).powi(2) / 4.0;
    let cm = (r - s).powi(2) / 4.0;
    xlog2x(cp) - xlog2x(cm)
}

/// Wootters concurrence of a 4x4 density matrix in the basis
/// |00>, |01>, |10>, |11>.
pub fn concurrence(rho: &DMatrix<C64>) -> Result<f64> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return arg("concurrence needs a 4x4 matrix");
    }
    // sigma_y ⊗ sigma_y is real: antidiagonal (-1, 1, 1, -1)
    let mut yy = DMatrix::<C64>::zeros(4, 4);
    for (i, s) in [-1.0, 1.0, 1.0, -1.0].iter().enumerate() {
        yy[(i, 3 - i)] = C64::from(*s);
    }
    let herm = (rho + rho.adjoint()) * C64::from(0.5);
    let tilde = &yy * herm.conjugate() * &yy;
    let (vals, vecs) = hermitian_eigen(&herm);
    let sqrt_rho = &vecs
        * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, vals.iter().map(|l| C64::from(l.max(0.0).sqrt()))))
        * vecs.adjoint();
    let m = &sqrt_rho * tilde * &sqrt_rho;
    let m = (&m + m.adjoint()) * C64::from(0.5);
    let mut lam: Vec<f64> = hermitian_eigenvalues(&m).iter().map(|l| l.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// Wootters EoF of a two-mode Fock state confined to photon numbers {0,1}.
pub fn eof_two_qubit(rho: &FockDensity) -> Result<EntanglementReport> {
    let m = qubit_block(rho)?;
    eof_two_qubit_matrix(&m)
}

/// Wootters EoF of an explicit 4x4 two-qubit density matrix.
pub fn eof_two_qubit_matrix(m: &DMatrix<C64>) -> Result<EntanglementReport> {
    let c = concurrence(m)?;
    Ok(EntanglementReport {
        eof: eof_from_concurrence(c),
        log_negativity: log_negativity_matrix(m, 2, 2),
        method: EofMethod::TwoQubitWootters,
    })
}

fn qubit_block(rho: &FockDensity) -> Result<DMatrix<C64>> {
    if rho.num_modes() != 2 {
        return arg("two-qubit EoF needs a two-mode state");
    }
    let (d0, d1) = (rho.cutoffs()[0] + 1, rho.cutoffs()[1] + 1);
    let idx = |a: usize, b: usize| a * d1 + b;
    let keep = [idx(0, 0), idx(0, 1), idx(1, 0), idx(1, 1)];
    if d0 < 2 || d1 < 2 {
        return arg("both modes need cutoff >= 1");
    }
    let inside: f64 = keep.iter().map(|&i| rho.coeffs()[(i, i)].re).sum();
    if 1.0 - inside > 1e-9 {
        return Err(Error::Domain(format!(
            "population {:.3e} above one photon; not a two-qubit state",
            1.0 - inside
        )));
    }
    Ok(DMatrix::from_fn(4, 4, |r, c| rho.coeffs()[(keep[r], keep[c])]))
}

/// Closed-form EoF of a symmetric two-mode Gaussian state.
pub fn eof_gaussian_symmetric(state: &TwoModeCovariance) -> Result<EntanglementReport> {
    if !state.is_symmetric(1e-8) {
        return Err(Error::Domain(
            "state is not symmetric; symmetrize it or use eof_gaussian_approx".into(),
        ));
    }
    let (nu, _) = state.pt_symplectic_eigenvalues();
    Ok(EntanglementReport {
        eof: gaussian_eof_from_epr(nu),
        log_negativity: log_negativity_gaussian(state),
        method: EofMethod::GaussianSymmetric,
    })
}

/// EoF estimate from first and second moments only, via the minimal EPR
/// variance over local squeezings. Tagged `gaussian-approx`.
pub fn eof_gaussian_approx(state: &TwoModeCovariance) -> EntanglementReport {
    EntanglementReport {
        eof: gaussian_eof_from_epr(state.min_epr_variance()),
        log_negativity: log_negativity_gaussian(state),
        method: EofMethod::GaussianApprox,
    }
}

/// Entropy of entanglement of a pure bipartite state (modes 0 | 1).
pub fn eof_pure_state(rho: &FockDensity) -> Result<EntanglementReport> {
    if rho.num_modes() != 2 {
        return arg("pure-state entropy needs a two-mode state");
    }
    let red = rho.partial_trace(&[0])?;
    let eig = hermitian_eigenvalues(red.coeffs());
    let s: f64 = eig.iter().map(|&l| -xlog2x(l.max(0.0))).sum();
    // Schmidt form: ‖rho^{T_B}‖₁ = (Σ √λ)²
    let root: f64 = eig.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok(EntanglementReport {
        eof: s,
        log_negativity: (2.0 * root.log2()).max(0.0),
        method: EofMethod::PureStateEntropy,
    })
}

/// log2 ‖rho^{T_B}‖₁ for a two-mode Fock state (bipartition 0 | 1).
pub fn log_negativity_fock(rho: &FockDensity) -> Result<f64> {
    if rho.num_modes() != 2 {
        return arg("log negativity needs a two-mode state");
    }
    let (d0, d1) = (rho.cutoffs()[0] + 1, rho.cutoffs()[1] + 1);
    Ok(log_negativity_matrix(rho.coeffs(), d0, d1))
}

fn log_negativity_matrix(m: &DMatrix<C64>, d0: usize, d1: usize) -> f64 {
    let pt = DMatrix::from_fn(d0 * d1, d0 * d1, |r, c| {
        let (a, b) = (r / d1, r % d1);
        let (ap, bp) = (c / d1, c % d1);
        m[(a * d1 + bp, ap * d1 + b)]
    });
    let pt = (&pt + pt.adjoint()) * C64::from(0.5);
    let norm: f64 = hermitian_eigenvalues(&pt).iter().map(|x| x.abs()).sum();
    norm.log2().max(0.0)
}

/// −log2 of the smaller partial-transpose symplectic eigenvalue, floored at 0.
pub fn log_negativity_gaussian(state: &TwoModeCovariance) -> f64 {
    let (nu, _) = state.pt_symplectic_eigenvalues();
    if nu < 1.0 { -nu.log2() } else { 0.0 }
}

/// Werner two-qubit matrix (4F−1)/3 |Φ+><Φ+| + (1−F)/3 I in the
/// |00>,|01>,|10>,|11> basis.
pub fn werner_matrix(f: f64) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::identity(4, 4) * C64::from((1.0 - f) / 3.0);
    let p = (4.0 * f - 1.0) / 3.0;
    for &i in &[0usize, 3] {
        for &j in &[0usize, 3] {
            m[(i, j)] += C64::from(p / 2.0);
        }
    }
    m
}
