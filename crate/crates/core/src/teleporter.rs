//! CV-over-DV teleporter: split one optical mode over N modes with a
//! balanced beam-splitter tree, teleport each mode's {0,1} photon subspace
//! through a Werner pair, recombine, and post-select the spare ports on
//! vacuum.

use crate::dv::{werner_from_fock, WernerPair};
use crate::error::{arg, Result};
use crate::fock::{FockDensity, TmsvParam};
use crate::oracle::bell_states;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TeleporterConfig {
    pub num_modes: usize,
    pub bsm_success_prob: f64,
    pub werner_fidelity: f64,
}

impl TeleporterConfig {
    pub fn new(num_modes: usize, bsm_success_prob: f64, werner_fidelity: f64) -> Result<Self> {
        let c = Self { num_modes, bsm_success_prob, werner_fidelity };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4, 8].contains(&self.num_modes) {
            return arg(format!("num_modes must be 1, 2, 4 or 8, got {}", self.num_modes));
        }
        if !(self.bsm_success_prob > 0.0 && self.bsm_success_prob <= 1.0) {
            return arg(format!("bsm_success_prob must lie in (0,1], got {}", self.bsm_success_prob));
        }
        WernerPair::new(self.werner_fidelity)?;
        Ok(())
    }
}

/// Default photons-per-mode threshold for choosing N.
pub const MODE_THRESHOLD: f64 = 1.1;

/// Smallest N in {1, 2, 4, 8} with mean photon number / N <= threshold
/// (8 if none qualifies).
pub fn choose_mode_count(chi: TmsvParam, threshold: f64) -> usize {
    let nbar = chi.mean_photon_number();
    [1, 2, 4, 8]
        .into_iter()
        .find(|&n| nbar / n as f64 <= threshold)
        .unwrap_or(8)
}

#[derive(Debug, Clone)]
pub struct TeleportOutcome {
    /// Joint state: the other input modes in their original order, the
    /// teleported output at `input_mode`'s position.
    pub state: FockDensity,
    /// herald × recombination × bsm^N.
    pub success_prob: f64,
    /// Probability the input held at most N photons and every split mode
    /// at most one.
    pub herald_prob: f64,
    /// Probability all spare recombination ports read vacuum.
    pub recombination_prob: f64,
    pub bsm_factor: f64,
    /// Per-stage herald probabilities in pipeline order.
    pub stages: Vec<(String, f64)>,
}

fn pauli_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(1.0), C64::from(1.0), C64::from(0.0)])
}

fn pauli_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::from(-1.0)])
}

/// Input with the teleported mode moved last and projected onto at most N
/// photons, ready for [`teleport_prepared`]. Reusable across resource
/// fidelities.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    state: FockDensity,
    order: Vec<usize>,
    num_modes: usize,
    herald: f64,
}

impl PreparedInput {
    pub fn new(input: &FockDensity, input_mode: usize, num_modes: usize) -> Result<Self> {
        let nm = input.num_modes();
        if input_mode >= nm {
            return arg(format!("input_mode {input_mode} out of range"));
        }
        if input.cutoffs()[input_mode] < 1 {
            return arg("teleported mode needs cutoff >= 1");
        }
        let mut order: Vec<usize> = (0..nm).filter(|&m| m != input_mode).collect();
        order.push(input_mode);
        let rho = input.permute(&order)?;
        let before = rho.weight();
        let mut rho = rho.project_photon_subspace(nm - 1, num_modes)?;
        for m in 0..nm - 1 {
            rho = rho.trim(m);
        }
        let herald = rho.weight() / before;
        Ok(Self { state: rho.with_weight(1.0), order, num_modes, herald })
    }

    /// Probability that the input carried at most N photons.
    pub fn herald(&self) -> f64 {
        self.herald
    }
}

/// Teleports one mode through the N-mode teleporter.
pub fn teleport_cv_state(input: &FockDensity, input_mode: usize, cfg: &TeleporterConfig) -> Result<TeleportOutcome> {
    cfg.validate()?;
    let prep = PreparedInput::new(input, input_mode, cfg.num_modes)?;
    let mut out = teleport_prepared(&prep, cfg)?;
    let w = input.weight() * prep.herald * out.state.weight();
    out.state = out.state.with_weight(w);
    Ok(out)
}

/// Runs the teleporter on an already prepared input.
pub fn teleport_prepared(prep: &PreparedInput, cfg: &TeleporterConfig) -> Result<TeleportOutcome> {
    cfg.validate()?;
    if prep.num_modes != cfg.num_modes {
        return arg("input was prepared for a different mode count");
    }
    let n = cfg.num_modes;
    let nm = prep.order.len();
    let t = nm - 1;
    let order = &prep.order;
    let mut rho = prep.state.clone();
    let before = rho.weight();
    let mut stages = vec![("input photon number <= N".to_string(), prep.herald)];

    // balanced splitter tree, breadth first
    let mut splits: Vec<(usize, usize, usize)> = Vec::new();
    let mut queue = vec![(t, n)];
    while let Some((m, leaves)) = queue.pop() {
        if leaves == 1 {
            rho = rho.project_photon_subspace(m, 1)?;
            continue;
        }
        let k = rho.num_modes();
        rho = rho.append_vacuum(rho.cutoffs()[m]);
        rho = rho.apply_beamsplitter(m, k, 0.5)?;
        rho = rho.project_photon_subspace(m, leaves / 2)?;
        rho = rho.project_photon_subspace(k, leaves / 2)?;
        splits.push((m, k, leaves));
        queue.push((k, leaves / 2));
        queue.push((m, leaves / 2));
    }
    let herald = prep.herald * rho.weight() / before;
    stages.push(("split herald (<= 1 photon per mode)".to_string(), rho.weight() / before));

    // per-mode single-rail teleportation
    let leaves: Vec<usize> = {
        let mut v = vec![t];
        v.extend(splits.iter().map(|s| s.1));
        v
    };
    let resource = werner_from_fock(WernerPair::new(cfg.werner_fidelity)?);
    let bells = bell_states();
    let corrections: [Vec<DMatrix<C64>>; 4] = [vec![], vec![pauli_z()], vec![pauli_x()], vec![pauli_x(), pauli_z()]];
    for &leaf in &leaves {
        let m = rho.num_modes();
        let joint = rho.tensor(&resource);
        let r1 = m;
        let mut branches = Vec::with_capacity(4);
        for (b, corr) in bells.iter().zip(&corrections) {
            let mut br = joint.project_onto(&[leaf, r1], b)?;
            let out = br.num_modes() - 1;
            for g in corr {
                br = br.apply_operator(&[out], g)?;
            }
            // restore the layout: teleported qubit back at `leaf`
            let mut perm: Vec<usize> = (0..out).collect();
            perm.insert(leaf, out);
            let br = br.permute(&perm)?;
            branches.push((br.weight(), br.with_weight(1.0)));
        }
        rho = FockDensity::mix(&branches)?;
    }

    // inverse tree
    let before = rho.weight();
    for &(m, k, leaves) in splits.iter().rev() {
        rho = rho.pad_mode(m, leaves)?.pad_mode(k, leaves)?;
        rho = rho.apply_beamsplitter_adjoint(m, k, 0.5)?;
        rho = rho.project_fock(k, 0)?;
    }
    let recombination = rho.weight() / before;
    stages.push(("vacuum recombination".to_string(), recombination));

    // output back to input_mode's slot
    let mut inv = vec![0usize; nm];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    let state = rho.permute(&inv)?;
    let bsm = cfg.bsm_success_prob.powi(n as i32);
    stages.push(("bell measurements".to_string(), bsm));
    Ok(TeleportOutcome {
        success_prob: herald * recombination * bsm,
        herald_prob: herald,
        recombination_prob: recombination,
        bsm_factor: bsm,
        stages,
        state,
    })
}
