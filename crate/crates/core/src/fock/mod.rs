//! Truncated Fock-space density operators.
//!
//! Basis ordering is row-major over modes: mode 0 is the most significant
//! digit. Each mode carries its own cutoff (max photon number, inclusive).

mod displacement;
mod gaussian_state;
mod teleport;

pub use displacement::displacement_real;
pub use gaussian_state::phase_insensitive_gaussian;
pub use teleport::{cv_teleport_fock, FockTeleportSettings};

use crate::error::{arg, Error, Result};
use crate::gaussian::TwoModeCovariance;
use crate::linalg::hermitian_eigenvalues;
use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use serde::Serialize;

/// Projections below this probability are treated as impossible branches.
pub const HERALD_FLOOR: f64 = 1e-14;

/// Norm that a truncated state must keep before we attach a warning.
pub const NORM_WARNING: f64 = 1.0 - 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Squeezing parameter of the two-mode squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TmsvParam {
    chi: f64,
}

impl TmsvParam {
    pub fn new(chi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&chi) {
            return arg(format!("chi must lie in [0,1), got {chi}"));
        }
        Ok(Self { chi })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Mean photon number of one arm, chi²/(1−chi²).
    pub fn mean_photon_number(&self) -> f64 {
        let c2 = self.chi * self.chi;
        c2 / (1.0 - c2)
    }

    /// Smallest cutoff keeping at least `1 - tol` of the untruncated norm.
    pub fn cutoff_for(&self, tol: f64) -> usize {
        if self.chi == 0.0 {
            return 1;
        }
        // retained norm is 1 - chi^(2(N+1))
        let n = (tol.ln() / (2.0 * self.chi.ln())).ceil() - 1.0;
        (n.max(1.0)) as usize
    }

    /// Default cutoff table: 15 up to chi=0.5, otherwise enough for 1e-6.
    pub fn default_cutoff(&self) -> usize {
        if self.chi <= 0.5 {
            15
        } else {
            self.cutoff_for(1e-7).max(15)
        }
    }
}

/// An optical fiber span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSpec {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub light_speed_km_per_s: f64,
    /// Floor on the signalling time, e.g. a source repetition period.
    pub min_delay_s: f64,
}

impl ChannelSpec {
    pub fn new(length_km: f64) -> Self {
        Self {
            length_km,
            attenuation_db_per_km: 0.2,
            light_speed_km_per_s: 2.0e5,
            min_delay_s: 0.0,
        }
    }

    pub fn with_attenuation(mut self, db_per_km: f64) -> Self {
        self.attenuation_db_per_km = db_per_km;
        self
    }

    pub fn with_light_speed(mut self, km_per_s: f64) -> Self {
        self.light_speed_km_per_s = km_per_s;
        self
    }

    pub fn with_min_delay(mut self, seconds: f64) -> Self {
        self.min_delay_s = seconds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_delay_s >= 0.0 && self.min_delay_s.is_finite()) {
            return arg("min_delay_s must be finite and >= 0");
        }
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return arg(format!("length_km must be >= 0, got {}", self.length_km));
        }
        if !(self.attenuation_db_per_km > 0.0 && self.attenuation_db_per_km.is_finite()) {
            return arg("attenuation_db_per_km must be positive");
        }
        if !(self.light_speed_km_per_s > 0.0 && self.light_speed_km_per_s.is_finite()) {
            return arg("light_speed_km_per_s must be positive");
        }
        Ok(())
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.length_km / 10.0)
    }

    /// One-way signalling time over the span, at least `min_delay_s`.
    pub fn delay_s(&self) -> f64 {
        (self.length_km / self.light_speed_km_per_s).max(self.min_delay_s)
    }

    /// The same fiber cut into `n` equal spans.
    pub fn split(&self, n: usize) -> Self {
        Self {
            length_km: self.length_km / n as f64,
            ..*self
        }
    }
}

/// Truncation bookkeeping exported next to results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    pub cutoffs: Vec<usize>,
    pub norm_retained: f64,
}

/// Multimode density operator in a truncated photon-number basis.
#[derive(Debug, Clone)]
pub struct FockDensity {
    cutoffs: Vec<usize>,
    coeffs: DMatrix<C64>,
    weight: f64,
    norm_retained: f64,
}

fn dims_of(cutoffs: &[usize]) -> Vec<usize> {
    cutoffs.iter().map(|c| c + 1).collect()
}

fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        t[i][0] = 1.0;
        for k in 1..=i {
            t[i][k] = t[i - 1][k - 1] + if k < i { t[i - 1][k] } else { 0.0 };
        }
    }
    t
}

impl FockDensity {
    /// Wraps a matrix, renormalizing to unit trace.
    pub fn from_matrix(cutoffs: Vec<usize>, coeffs: DMatrix<C64>) -> Result<Self> {
        let dim: usize = dims_of(&cutoffs).iter().product();
        if cutoffs.is_empty() || coeffs.nrows() != dim || coeffs.ncols() != dim {
            return arg(format!(
                "matrix shape {}x{} does not match cutoffs {cutoffs:?}",
                coeffs.nrows(),
                coeffs.ncols()
            ));
        }
        let tr = coeffs.trace().re;
        if !(tr > 0.0 && tr.is_finite()) {
            return arg(format!("matrix trace must be positive, got {tr}"));
        }
        Ok(Self {
            cutoffs,
            coeffs: coeffs / C64::from(tr),
            weight: 1.0,
            norm_retained: 1.0,
        })
    }

    /// Pure state from amplitudes in the basis ordering.
    pub fn from_pure(cutoffs: Vec<usize>, amps: &[C64]) -> Result<Self> {
        let dim: usize = dims_of(&cutoffs).iter().product();
        if amps.len() != dim {
            return arg(format!("expected {dim} amplitudes, got {}", amps.len()));
        }
        let v = nalgebra::DVector::from_column_slice(amps);
        Self::from_matrix(cutoffs, &v * v.adjoint())
    }

    pub fn vacuum(cutoffs: Vec<usize>) -> Self {
        let dim: usize = dims_of(&cutoffs).iter().product();
        let mut m = DMatrix::zeros(dim, dim);
        m[(0, 0)] = C64::new(1.0, 0.0);
        Self {
            cutoffs,
            coeffs: m,
            weight: 1.0,
            norm_retained: 1.0,
        }
    }

    /// Product of number states.
    pub fn number_state(cutoffs: Vec<usize>, ns: &[usize]) -> Result<Self> {
        if ns.len() != cutoffs.len() || ns.iter().zip(&cutoffs).any(|(n, c)| n > c) {
            return arg(format!("photon numbers {ns:?} do not fit cutoffs {cutoffs:?}"));
        }
        let strides = strides_of(&dims_of(&cutoffs));
        let idx: usize = ns.iter().zip(&strides).map(|(n, s)| n * s).sum();
        let mut s = Self::vacuum(cutoffs);
        s.coeffs[(0, 0)] = ZERO;
        s.coeffs[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Single-mode coherent state.
    pub fn coherent(alpha: C64, cutoff: usize) -> Self {
        let mut amps = Vec::with_capacity(cutoff + 1);
        let mut a = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..=cutoff {
            if n > 0 {
                a *= alpha / (n as f64).sqrt();
            }
            amps.push(a);
        }
        let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let mut s = Self::from_pure(vec![cutoff], &amps).expect("coherent amplitudes");
        s.norm_retained = kept;
        s
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    /// Largest per-mode cutoff.
    pub fn cutoff(&self) -> usize {
        self.cutoffs.iter().copied().max().unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &DMatrix<C64> {
        &self.coeffs
    }

    /// Accumulated probability of every herald applied so far.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn norm_retained(&self) -> f64 {
        self.norm_retained
    }

    pub fn truncation(&self) -> Truncation {
        Truncation {
            cutoffs: self.cutoffs.clone(),
            norm_retained: self.norm_retained,
        }
    }

    /// Set when truncation dropped more than 1e-6 of the norm.
    pub fn truncation_warning(&self) -> Option<String> {
        (self.norm_retained < NORM_WARNING).then(|| {
            format!(
                "cutoffs {:?} keep only {:.9} of the norm",
                self.cutoffs, self.norm_retained
            )
        })
    }

    pub fn trace(&self) -> f64 {
        self.coeffs.trace().re
    }

    pub(crate) fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub(crate) fn with_norm_retained(mut self, n: f64) -> Self {
        self.norm_retained = n;
        self
    }

    fn replaced(&self, coeffs: DMatrix<C64>) -> Self {
        Self {
            cutoffs: self.cutoffs.clone(),
            coeffs,
            weight: self.weight,
            norm_retained: self.norm_retained,
        }
    }

    fn dims(&self) -> Vec<usize> {
        dims_of(&self.cutoffs)
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims())
    }

    /// Photon numbers of each mode for a basis index.
    pub fn digits(&self, idx: usize) -> Vec<usize> {
        let dims = self.dims();
        let strides = self.strides();
        (0..dims.len()).map(|m| (idx / strides[m]) % dims[m]).collect()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return arg(format!("mode {mode} out of range for {} modes", self.num_modes()));
        }
        Ok(())
    }

    /// Renormalize after a heralded step; the trace becomes the herald probability.
    fn herald(mut self, floor: f64) -> Result<Self> {
        let p = self.trace();
        if !(p >= floor) || !p.is_finite() || p <= 0.0 {
            return Err(Error::ZeroProbability { prob: p, floor });
        }
        self.coeffs /= C64::from(p);
        self.weight *= p;
        Ok(self)
    }

    /// Renormalize after a channel whose only trace loss is truncation leakage.
    fn absorb_leak(mut self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::Truncation("channel output left no norm inside the cutoff".into()));
        }
        self.coeffs /= C64::from(tr);
        self.norm_retained *= tr;
        Ok(self)
    }

    /// Photon-number preserving Kraus family K_k|n> = f(k,n)|n + dir·k>.
    fn shift_channel(
        &self,
        mode: usize,
        raise: bool,
        coef: impl Fn(usize, usize) -> f64,
    ) -> DMatrix<C64> {
        let d = self.dims()[mode];
        let s = self.strides()[mode];
        let dim = self.dim();
        let digit: Vec<usize> = (0..dim).map(|i| (i / s) % d).collect();
        let mut out = DMatrix::<C64>::zeros(dim, dim);
        for k in 0..d {
            let shift = k * s;
            let table: Vec<f64> = (0..d)
                .map(|m| {
                    if raise {
                        if m >= k { coef(k, m - k) } else { 0.0 }
                    } else if m + k < d {
                        coef(k, m + k)
                    } else {
                        0.0
                    }
                })
                .collect();
            for c in 0..dim {
                let mc = digit[c];
                let fc = table[mc];
                if fc == 0.0 {
                    continue;
                }
                let src_c = if raise { c - shift } else { c + shift };
                let src = self.coeffs.column(src_c);
                let mut dst = out.column_mut(c);
                for r in 0..dim {
                    let fr = table[digit[r]];
                    if fr != 0.0 {
                        let src_r = if raise { r - shift } else { r + shift };
                        dst[r] += src[src_r] * (fr * fc);
                    }
                }
            }
        }
        out
    }

    /// Pure-loss channel with transmittance `eta` on `mode`.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&eta) {
            return arg(format!("eta must lie in [0,1], got {eta}"));
        }
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let d = self.dims()[mode];
        let binom = binomial_table(d);
        let (se, sl) = (eta.sqrt(), (1.0 - eta).sqrt());
        // <n-k|A_k|n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k)
        let coeffs = self.shift_channel(mode, false, |k, n| {
            binom[n][k].sqrt() * se.powi((n - k) as i32) * sl.powi(k as i32)
        });
        Ok(self.replaced(coeffs))
    }

    /// Phase-insensitive quantum-limited amplifier of gain `gain >= 1`.
    ///
    /// Population pushed above the cutoff is dropped and recorded in
    /// `norm_retained`.
    pub fn apply_amplifier(&self, mode: usize, gain: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(gain >= 1.0) || !gain.is_finite() {
            return arg(format!("amplifier gain must be >= 1, got {gain}"));
        }
        if gain == 1.0 {
            return Ok(self.clone());
        }
        let d = self.dims()[mode];
        let binom = binomial_table(2 * d);
        let g = gain.sqrt().recip();
        let q = (1.0 - 1.0 / gain).sqrt();
        // <n+k|B_k|n> = sqrt(C(n+k,k)) G^(-(n+1)/2) (1-1/G)^(k/2)
        let coeffs = self.shift_channel(mode, true, |k, n| {
            binom[n + k][k].sqrt() * g.powi(n as i32 + 1) * q.powi(k as i32)
        });
        self.replaced(coeffs).absorb_leak()
    }

    /// Heralded noiseless linear amplifier: success operator
    /// gain^(n - nla_cutoff) on n <= nla_cutoff, zero above.
    pub fn apply_nla(&self, mode: usize, gain: f64, nla_cutoff: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if !(gain >= 1.0) || !gain.is_finite() {
            return arg(format!("NLA gain must be >= 1, got {gain}"));
        }
        if nla_cutoff == 0 || nla_cutoff > self.cutoffs[mode] {
            return arg(format!(
                "nla_cutoff {nla_cutoff} must lie in [1, {}]",
                self.cutoffs[mode]
            ));
        }
        if gain == 1.0 {
            return Ok(self.clone());
        }
        let filter: Vec<f64> = (0..=nla_cutoff)
            .map(|n| gain.powi(n as i32 - nla_cutoff as i32))
            .collect();
        let op = DMatrix::from_fn(nla_cutoff + 1, self.cutoffs[mode] + 1, |r, c| {
            if r == c { C64::from(filter[r]) } else { ZERO }
        });
        let mut out_cut = self.cutoffs.clone();
        out_cut[mode] = nla_cutoff;
        let s = self.sandwich(&[mode], &op, out_cut)?;
        let p = s.trace();
        if !(p > 0.0) {
            return Err(Error::ZeroProbability { prob: p, floor: 0.0 });
        }
        s.herald(0.0)
    }

    /// Heralds on `mode` holding at most `max_n` photons; the mode's cutoff
    /// shrinks to `max_n`.
    pub fn project_photon_subspace(&self, mode: usize, max_n: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if max_n >= self.cutoffs[mode] {
            return Ok(self.clone());
        }
        let op = DMatrix::from_fn(max_n + 1, self.cutoffs[mode] + 1, |r, c| {
            if r == c { C64::from(1.0) } else { ZERO }
        });
        let mut out_cut = self.cutoffs.clone();
        out_cut[mode] = max_n;
        self.sandwich(&[mode], &op, out_cut)?.herald(HERALD_FLOOR)
    }

    /// Drops the top levels of `mode` that carry exactly zero population.
    pub fn trim(&self, mode: usize) -> Self {
        let dims = self.dims();
        let s = self.strides()[mode];
        let mut top = 0;
        for i in 0..self.dim() {
            let n = (i / s) % dims[mode];
            if n > top && self.coeffs[(i, i)].re > 0.0 {
                top = n;
            }
        }
        if top >= self.cutoffs[mode] {
            return self.clone();
        }
        let op = DMatrix::from_fn(top + 1, dims[mode], |r, c| {
            if r == c { C64::from(1.0) } else { ZERO }
        });
        let mut out_cut = self.cutoffs.clone();
        out_cut[mode] = top;
        self.sandwich(&[mode], &op, out_cut).expect("mode checked")
    }

    /// Heralded projection of `mode` onto |n>; the mode is removed.
    pub fn project_fock(&self, mode: usize, n: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if n > self.cutoffs[mode] {
            return arg(format!("n={n} exceeds cutoff {}", self.cutoffs[mode]));
        }
        if self.num_modes() == 1 {
            return arg("cannot remove the only mode");
        }
        let mut v = vec![ZERO; self.cutoffs[mode] + 1];
        v[n] = C64::from(1.0);
        self.project_onto(&[mode], &v)
    }

    /// Heralded projection of `modes` onto the pure vector `v` (their joint
    /// basis, in the order given); those modes are removed.
    pub fn project_onto(&self, modes: &[usize], v: &[C64]) -> Result<Self> {
        let dt: usize = modes.iter().map(|&m| self.cutoffs[m] + 1).product();
        if v.len() != dt {
            return arg(format!("projector length {} does not match {dt}", v.len()));
        }
        if modes.len() >= self.num_modes() {
            return arg("projection must leave at least one mode");
        }
        let op = DMatrix::from_fn(1, dt, |_, c| v[c].conj());
        let out_cut: Vec<usize> = (0..self.num_modes())
            .filter(|m| !modes.contains(m))
            .map(|m| self.cutoffs[m])
            .collect();
        self.sandwich_remove(modes, &op, out_cut)?.herald(HERALD_FLOOR)
    }

    /// rho -> U rho U^dagger for an operator acting on `modes` (joint basis
    /// in the given order). Dimensions must match.
    pub fn apply_operator(&self, modes: &[usize], op: &DMatrix<C64>) -> Result<Self> {
        let dt: usize = modes.iter().map(|&m| self.cutoffs[m] + 1).product();
        if op.nrows() != dt || op.ncols() != dt {
            return arg("operator dimension mismatch");
        }
        self.sandwich(modes, op, self.cutoffs.clone())
    }

    /// Unitary beam splitter, real transmission sqrt(T), imaginary reflection:
    /// a† -> t a† + i r b†.
    pub fn apply_beamsplitter(&self, mode_a: usize, mode_b: usize, transmissivity: f64) -> Result<Self> {
        self.beamsplitter(mode_a, mode_b, transmissivity, 1.0)
    }

    /// Inverse of [`apply_beamsplitter`](Self::apply_beamsplitter).
    pub fn apply_beamsplitter_adjoint(&self, mode_a: usize, mode_b: usize, transmissivity: f64) -> Result<Self> {
        self.beamsplitter(mode_a, mode_b, transmissivity, -1.0)
    }

    fn beamsplitter(&self, a: usize, b: usize, transmissivity: f64, sign: f64) -> Result<Self> {
        self.check_mode(a)?;
        self.check_mode(b)?;
        if a == b {
            return arg("beam splitter modes must differ");
        }
        if !(0.0..=1.0).contains(&transmissivity) {
            return arg(format!("transmissivity must lie in [0,1], got {transmissivity}"));
        }
        if transmissivity == 1.0 {
            return Ok(self.clone());
        }
        let (ca, cb) = (self.cutoffs[a], self.cutoffs[b]);
        let op = beamsplitter_matrix(ca, cb, transmissivity.sqrt(), sign * (1.0 - transmissivity).sqrt());
        self.sandwich(&[a, b], &op, self.cutoffs.clone())?.absorb_leak()
    }

    /// Reduced state on `keep` (in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return arg("partial_trace needs at least one mode to keep");
        }
        for (i, &m) in keep.iter().enumerate() {
            self.check_mode(m)?;
            if keep[..i].contains(&m) {
                return arg(format!("mode {m} listed twice"));
            }
        }
        let dims = self.dims();
        let strides = self.strides();
        let traced: Vec<usize> = (0..self.num_modes()).filter(|m| !keep.contains(m)).collect();
        let out_cut: Vec<usize> = keep.iter().map(|&m| self.cutoffs[m]).collect();
        let out_dims = dims_of(&out_cut);
        let out_dim: usize = out_dims.iter().product();
        let keep_off = offsets(keep, &dims, &strides);
        let tr_off = offsets(&traced, &dims, &strides);
        let mut out = DMatrix::<C64>::zeros(out_dim, out_dim);
        for (c, &kc) in keep_off.iter().enumerate() {
            for (r, &kr) in keep_off.iter().enumerate() {
                let mut acc = ZERO;
                for &t in &tr_off {
                    acc += self.coeffs[(kr + t, kc + t)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(Self {
            cutoffs: out_cut,
            coeffs: out,
            weight: self.weight,
            norm_retained: self.norm_retained,
        })
    }

    /// Reorders modes: new mode i is old mode `order[i]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.num_modes()).collect::<Vec<_>>() {
            return arg(format!("{order:?} is not a permutation"));
        }
        let dims = self.dims();
        let strides = self.strides();
        let map = offsets(order, &dims, &strides);
        let dim = self.dim();
        let coeffs = DMatrix::from_fn(dim, dim, |r, c| self.coeffs[(map[r], map[c])]);
        Ok(Self {
            cutoffs: order.iter().map(|&m| self.cutoffs[m]).collect(),
            coeffs,
            weight: self.weight,
            norm_retained: self.norm_retained,
        })
    }

    /// Tensor product, `other`'s modes appended after ours. Weights multiply.
    pub fn tensor(&self, other: &FockDensity) -> Self {
        let coeffs = self.coeffs.kronecker(&other.coeffs);
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend_from_slice(&other.cutoffs);
        Self {
            cutoffs,
            coeffs,
            weight: self.weight * other.weight,
            norm_retained: self.norm_retained * other.norm_retained,
        }
    }

    /// Appends a vacuum mode with the given cutoff.
    pub fn append_vacuum(&self, cutoff: usize) -> Self {
        self.tensor(&Self::vacuum(vec![cutoff]))
    }

    /// Raises a mode's cutoff, padding with zeros.
    pub fn pad_mode(&self, mode: usize, cutoff: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if cutoff < self.cutoffs[mode] {
            return arg("pad_mode cannot lower a cutoff; use project_photon_subspace");
        }
        if cutoff == self.cutoffs[mode] {
            return Ok(self.clone());
        }
        let mut out_cut = self.cutoffs.clone();
        out_cut[mode] = cutoff;
        let op = DMatrix::from_fn(cutoff + 1, self.cutoffs[mode] + 1, |r, c| {
            if r == c { C64::from(1.0) } else { ZERO }
        });
        self.sandwich(&[mode], &op, out_cut)
    }

    /// Convex mixture of states with identical cutoffs. Weights are the
    /// mixing probabilities (not renormalized); result weight is their sum.
    pub fn mix(parts: &[(f64, FockDensity)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Argument("empty mixture".into()))?;
        let mut acc = DMatrix::<C64>::zeros(first.1.dim(), first.1.dim());
        let mut total = 0.0;
        let mut norm = 0.0;
        for (w, s) in parts {
            if s.cutoffs != first.1.cutoffs {
                return arg("mixture components must share cutoffs");
            }
            acc += &s.coeffs * C64::from(*w);
            total += w;
            norm += w * s.norm_retained;
        }
        if !(total > 0.0) {
            return Err(Error::ZeroProbability { prob: total, floor: 0.0 });
        }
        Ok(Self {
            cutoffs: first.1.cutoffs.clone(),
            coeffs: acc / C64::from(total),
            weight: total,
            norm_retained: norm / total,
        })
    }

    /// Expectation of the normal-ordered monomial prod_m (a_m†)^dag (a_m)^ann.
    ///
    /// Evaluated from matrix elements, so no truncation artifacts from
    /// products of truncated ladder matrices.
    pub fn expect_normal(&self, terms: &[(usize, u32, u32)]) -> Result<C64> {
        for &(m, _, _) in terms {
            self.check_mode(m)?;
        }
        let dims = self.dims();
        let strides = self.strides();
        let mut acc = ZERO;
        'basis: for idx in 0..self.dim() {
            let mut coef = 1.0;
            let mut target = idx;
            for &(m, dag, ann) in terms {
                let n = (idx / strides[m]) % dims[m];
                let (dag, ann) = (dag as usize, ann as usize);
                if ann > n || n - ann + dag >= dims[m] {
                    continue 'basis;
                }
                let lo = n - ann;
                let hi = lo + dag;
                coef *= (falling(n, ann) * falling(hi, dag)).sqrt();
                target = target - n * strides[m] + hi * strides[m];
            }
            // Tr(rho O) = sum_idx c(idx) rho[idx, O(idx)]
            acc += self.coeffs[(idx, target)] * coef;
        }
        Ok(acc)
    }

    pub fn mean_photon_number(&self, mode: usize) -> Result<f64> {
        Ok(self.expect_normal(&[(mode, 1, 1)])?.re)
    }

    /// Photon-number distribution of one mode.
    pub fn photon_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        let r = self.partial_trace(&[mode])?;
        Ok((0..r.dim()).map(|i| r.coeffs[(i, i)].re).collect())
    }

    /// First and second quadrature moments of a two-mode state
    /// (x = a + a†, p = -i(a - a†), vacuum variance 1).
    pub fn moments(&self) -> Result<TwoModeCovariance> {
        if self.num_modes() != 2 {
            return arg("moments() needs exactly two modes");
        }
        let a = [self.expect_normal(&[(0, 0, 1)])?, self.expect_normal(&[(1, 0, 1)])?];
        let aa = [self.expect_normal(&[(0, 0, 2)])?, self.expect_normal(&[(1, 0, 2)])?];
        let n = [self.mean_photon_number(0)?, self.mean_photon_number(1)?];
        let u = self.expect_normal(&[(0, 0, 1), (1, 0, 1)])?;
        let v = self.expect_normal(&[(0, 1, 0), (1, 0, 1)])?;
        let mean = Vector4::new(2.0 * a[0].re, 2.0 * a[0].im, 2.0 * a[1].re, 2.0 * a[1].im);
        let mut second = Matrix4::zeros();
        for m in 0..2 {
            let (s, k) = (aa[m], 2 * m);
            second[(k, k)] = 2.0 * s.re + 2.0 * n[m] + 1.0;
            second[(k + 1, k + 1)] = -2.0 * s.re + 2.0 * n[m] + 1.0;
            second[(k, k + 1)] = 2.0 * s.im;
            second[(k + 1, k)] = 2.0 * s.im;
        }
        let block = [
            [2.0 * (u.re + v.re), 2.0 * (u.im + v.im)],
            [2.0 * (u.im - v.im), 2.0 * (v.re - u.re)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                second[(i, 2 + j)] = block[i][j];
                second[(2 + j, i)] = block[i][j];
            }
        }
        let cov = second - mean * mean.transpose();
        Ok(TwoModeCovariance::new(mean, cov))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.coeffs + self.coeffs.adjoint()) * C64::from(0.5);
        hermitian_eigenvalues(&h).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Largest |rho - rho†| entry.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.coeffs - self.coeffs.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Trace distance ½‖rho − sigma‖₁. Cutoffs may differ; the smaller
    /// state is zero-padded.
    pub fn trace_distance(&self, other: &FockDensity) -> Result<f64> {
        if self.num_modes() != other.num_modes() {
            return arg("trace distance needs equal mode counts");
        }
        let mut a = self.clone();
        let mut b = other.clone();
        for m in 0..self.num_modes() {
            let c = a.cutoffs[m].max(b.cutoffs[m]);
            a = a.pad_mode(m, c)?;
            b = b.pad_mode(m, c)?;
        }
        let d = &a.coeffs - &b.coeffs;
        let h = (&d + d.adjoint()) * C64::from(0.5);
        Ok(0.5 * hermitian_eigenvalues(&h).iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Fidelity ⟨psi|rho|psi⟩ with a pure state given as amplitudes.
    pub fn overlap_with_pure(&self, amps: &[C64]) -> Result<f64> {
        if amps.len() != self.dim() {
            return arg("amplitude length mismatch");
        }
        let v = nalgebra::DVector::from_column_slice(amps);
        Ok((v.adjoint() * &self.coeffs * &v)[(0, 0)].re)
    }

    fn sandwich(&self, modes: &[usize], op: &DMatrix<C64>, out_cut: Vec<usize>) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let layout = Layout::new(&self.cutoffs, modes, &out_cut, false);
        Ok(self.apply_layout(&layout, op, out_cut))
    }

    fn sandwich_remove(&self, modes: &[usize], op: &DMatrix<C64>, out_cut: Vec<usize>) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let layout = Layout::new(&self.cutoffs, modes, &out_cut, true);
        Ok(self.apply_layout(&layout, op, out_cut))
    }

    fn apply_layout(&self, layout: &Layout, op: &DMatrix<C64>, out_cut: Vec<usize>) -> Self {
        let x = layout.left(&self.coeffs, op);
        let y = layout.left(&x.adjoint(), op).adjoint();
        Self {
            cutoffs: out_cut,
            coeffs: y,
            weight: self.weight,
            norm_retained: self.norm_retained,
        }
    }
}

fn falling(n: usize, k: usize) -> f64 {
    ((n + 1 - k)..=n).map(|x| x as f64).product()
}

/// Basis offsets for every configuration of `modes` (row-major in that order).
fn offsets(modes: &[usize], dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &m in modes {
        let mut next = Vec::with_capacity(out.len() * dims[m]);
        for &o in &out {
            for n in 0..dims[m] {
                next.push(o + n * strides[m]);
            }
        }
        out = next;
    }
    out
}

/// Index bookkeeping for applying an operator on a subset of modes.
struct Layout {
    rest_in: Vec<usize>,
    rest_out: Vec<usize>,
    tgt_in: Vec<usize>,
    tgt_out: Vec<usize>,
    out_dim: usize,
}

impl Layout {
    fn new(cut_in: &[usize], modes: &[usize], out_cut: &[usize], remove: bool) -> Self {
        let dims_in = dims_of(cut_in);
        let str_in = strides_of(&dims_in);
        let dims_out = dims_of(out_cut);
        let str_out = strides_of(&dims_out);
        let rest: Vec<usize> = (0..cut_in.len()).filter(|m| !modes.contains(m)).collect();
        // position of each retained mode in the output
        let out_pos = |m: usize| -> usize {
            if remove {
                rest.iter().position(|&r| r == m).unwrap()
            } else {
                m
            }
        };
        let rest_out_modes: Vec<usize> = rest.iter().map(|&m| out_pos(m)).collect();
        let rest_in = offsets(&rest, &dims_in, &str_in);
        let rest_out = offsets(&rest_out_modes, &dims_out, &str_out);
        let tgt_in = offsets(modes, &dims_in, &str_in);
        let tgt_out = if remove {
            vec![0]
        } else {
            offsets(modes, &dims_out, &str_out)
        };
        Self {
            rest_in,
            rest_out,
            tgt_in,
            tgt_out,
            out_dim: dims_out.iter().product(),
        }
    }

    /// Applies `op` to the row index of `m`.
    fn left(&self, m: &DMatrix<C64>, op: &DMatrix<C64>) -> DMatrix<C64> {
        let ncols = m.ncols();
        let mut out = DMatrix::<C64>::zeros(self.out_dim, ncols);
        let nt = self.tgt_in.len();
        let mut gathered = DMatrix::<C64>::zeros(nt, ncols);
        for (ri, &r_in) in self.rest_in.iter().enumerate() {
            let r_out = self.rest_out[ri];
            for c in 0..ncols {
                let col = m.column(c);
                for (t, &off) in self.tgt_in.iter().enumerate() {
                    gathered[(t, c)] = col[r_in + off];
                }
            }
            let res = op * &gathered;
            for c in 0..ncols {
                for (t, &off) in self.tgt_out.iter().enumerate() {
                    out[(r_out + off, c)] = res[(t, c)];
                }
            }
        }
        out
    }
}

/// Two-mode beam-splitter matrix on the truncated basis |n_a, n_b>.
fn beamsplitter_matrix(ca: usize, cb: usize, t: f64, r: f64) -> DMatrix<C64> {
    let (da, db) = (ca + 1, cb + 1);
    let nmax = ca + cb;
    let binom = binomial_table(nmax);
    let fact: Vec<f64> = (0..=nmax)
        .scan(1.0, |f, k| {
            if k > 0 {
                *f *= k as f64;
            }
            Some(*f)
        })
        .collect();
    let ir = C64::new(0.0, r);
    let mut u = DMatrix::<C64>::zeros(da * db, da * db);
    for n in 0..da {
        for m in 0..db {
            let col = n * db + m;
            let norm = (fact[n] * fact[m]).sqrt();
            // (t a† + i r b†)^n (i r a† + t b†)^m |0>
            for j in 0..=n {
                for l in 0..=m {
                    let p = j + l;
                    let q = n + m - p;
                    if p >= da || q >= db {
                        continue;
                    }
                    let amp = ir.powu((n - j + l) as u32)
                        * (binom[n][j] * binom[m][l] * t.powi((j + m - l) as i32));
                    u[(p * db + q, col)] += amp * ((fact[p] * fact[q]).sqrt() / norm);
                }
            }
        }
    }
    u
}

/// Two-mode squeezed vacuum truncated at `cutoff` on both arms.
pub fn make_tmsv(chi: TmsvParam, cutoff: usize) -> Result<FockDensity> {
    if cutoff < 1 {
        return arg("cutoff must be >= 1");
    }
    let c = chi.chi();
    let d = cutoff + 1;
    let mut amps = vec![ZERO; d * d];
    let base = (1.0 - c * c).sqrt();
    let mut kept = 0.0;
    for n in 0..d {
        let a = base * c.powi(n as i32);
        amps[n * d + n] = C64::from(a);
        kept += a * a;
    }
    Ok(FockDensity::from_pure(vec![cutoff, cutoff], &amps)?.with_norm_retained(kept))
}
