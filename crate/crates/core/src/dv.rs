//! Werner-pair algebra: swapping, purification, round scheduling.

use crate::error::{arg, Error, Result};
use crate::fock::FockDensity;
use crate::measures::werner_matrix;
use serde::{Deserialize, Serialize};

/// A DV pair described only by its fidelity to |Φ+>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WernerPair {
    fidelity: f64,
}

impl WernerPair {
    pub fn new(fidelity: f64) -> Result<Self> {
        check_range(fidelity)?;
        Ok(Self { fidelity })
    }

    pub fn fidelity(&self) -> f64 {
        self.fidelity
    }
}

fn check_range(f: f64) -> Result<()> {
    if !(0.25..=1.0).contains(&f) {
        return arg(format!("fidelity must lie in [0.25, 1], got {f}"));
    }
    Ok(())
}

/// Which purification recurrence to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurificationFormula {
    /// Matches the two-copy bilateral-CNOT circuit:
    /// P = F² + 2F(1−F)/3 + 5(1−F)²/9.
    #[default]
    Oracle,
    /// Middle term (2/3)(1−F) instead of (2/3)F(1−F). Kept for sensitivity
    /// runs only; it does not fix F = 1/4.
    AsPrinted,
}

impl std::str::FromStr for PurificationFormula {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "as-printed" => Ok(Self::AsPrinted),
            other => Err(Error::Config(format!(
                "purification_formula must be oracle or as-printed, got {other:?}"
            ))),
        }
    }
}

impl PurificationFormula {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::AsPrinted => "as-printed",
        }
    }
}

/// Fidelity after swapping two Werner pairs of fidelity `f`.
pub fn swap_fidelity(f: f64) -> Result<f64> {
    check_range(f)?;
    Ok(f * f + (1.0 - f).powi(2) / 3.0)
}

/// One purification step with the default (oracle-matching) recurrence.
pub fn purify(f: f64) -> Result<(f64, f64)> {
    purify_with(f, PurificationFormula::Oracle)
}

/// One two-copy purification step: (f_out, p_success).
pub fn purify_with(f: f64, formula: PurificationFormula) -> Result<(f64, f64)> {
    check_range(f)?;
    let e = 1.0 - f;
    let mid = match formula {
        PurificationFormula::Oracle => 2.0 * f * e / 3.0,
        PurificationFormula::AsPrinted => 2.0 * e / 3.0,
    };
    let p = f * f + mid + 5.0 * e * e / 9.0;
    let fo = (f * f + e * e / 9.0) / p;
    Ok((fo.min(1.0), p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurificationSchedule {
    pub rounds: u32,
    pub initial_pairs_per_link: u64,
    /// Fidelity before round 1, after round 1, ..., after the last round.
    pub fidelity_trajectory: Vec<f64>,
    /// Success probability of each round.
    pub success_probs: Vec<f64>,
    pub num_links: u32,
    pub final_fidelity_after_swap: f64,
    pub formula: PurificationFormula,
}

impl PurificationSchedule {
    pub fn fidelity_after_purification(&self) -> f64 {
        *self.fidelity_trajectory.last().unwrap()
    }
}

/// Why a schedule could not be built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Infeasible {
    /// Where the recurrence settles from this start, then swapped.
    pub asymptotic_fidelity: f64,
    pub asymptotic_after_swap: f64,
    pub reason: String,
}

/// Default cap on purification rounds per link.
pub const MAX_ROUNDS: u32 = 40;

/// Minimal symmetric round count so the swapped fidelity reaches
/// `f_required` across `num_links` (a power of two) links.
pub fn solve_schedule(f_initial: f64, f_required: f64, num_links: u32) -> Result<PurificationSchedule> {
    solve_schedule_with(f_initial, f_required, num_links, PurificationFormula::Oracle, MAX_ROUNDS)
}

pub fn solve_schedule_with(
    f_initial: f64,
    f_required: f64,
    num_links: u32,
    formula: PurificationFormula,
    max_rounds: u32,
) -> Result<PurificationSchedule> {
    if !(f_initial > 0.5 && f_initial <= 1.0) {
        return arg(format!("f_initial must lie in (0.5, 1], got {f_initial}"));
    }
    if !(0.25..=1.0).contains(&f_required) {
        return arg(format!("f_required must lie in [0.25, 1], got {f_required}"));
    }
    if num_links == 0 || !num_links.is_power_of_two() {
        return arg(format!("num_links must be a power of two, got {num_links}"));
    }
    let levels = num_links.trailing_zeros();
    let swap_chain = |f: f64| -> Result<f64> {
        let mut g = f;
        for _ in 0..levels {
            g = swap_fidelity(g)?;
        }
        Ok(g)
    };
    let mut traj = vec![f_initial];
    let mut probs = Vec::new();
    let mut f = f_initial;
    for r in 0..=max_rounds {
        let end = swap_chain(f)?;
        if end >= f_required - 1e-15 {
            return Ok(PurificationSchedule {
                rounds: r,
                initial_pairs_per_link: 1u64 << r,
                fidelity_trajectory: traj,
                success_probs: probs,
                num_links,
                final_fidelity_after_swap: end,
                formula,
            });
        }
        if r == max_rounds {
            break;
        }
        let (fo, p) = purify_with(f, formula)?;
        if fo <= f {
            // the recurrence stalls or decays from here
            let fp = fixed_point(f_initial, formula)?;
            return Err(infeasible(fp, swap_chain(fp)?, f_required, "purification does not raise the fidelity from this start"));
        }
        f = fo;
        traj.push(f);
        probs.push(p);
    }
    let fp = fixed_point(f_initial, formula)?;
    Err(infeasible(fp, swap_chain(fp)?, f_required, &format!("not reached within {max_rounds} rounds")))
}

fn infeasible(fp: f64, end: f64, req: f64, why: &str) -> Error {
    Error::Infeasible(format!(
        "f_required={req} unreachable: {why}; recurrence settles at F={fp:.6} (after swap {end:.6})"
    ))
}

/// Limit of repeated purification from `f`.
pub fn fixed_point(f: f64, formula: PurificationFormula) -> Result<f64> {
    let mut x = f;
    for _ in 0..100_000 {
        let (y, _) = purify_with(x, formula)?;
        if (y - x).abs() < 1e-15 {
            return Ok(y);
        }
        x = y;
    }
    Ok(x)
}

/// Structured infeasibility for callers that want the numbers.
pub fn schedule_infeasibility(f_initial: f64, f_required: f64, num_links: u32, formula: PurificationFormula) -> Result<Infeasible> {
    let fp = fixed_point(f_initial, formula)?;
    let mut end = fp;
    for _ in 0..num_links.trailing_zeros() {
        end = swap_fidelity(end)?;
    }
    Ok(Infeasible {
        asymptotic_fidelity: fp,
        asymptotic_after_swap: end,
        reason: format!("swap of the recurrence limit is {end:.6} vs required {f_required}"),
    })
}

/// Single-rail embedding: qubit |0>,|1> as 0 or 1 photons in each of two
/// modes, so |Φ+> = (|0,0> + |1,1>)/√2.
pub fn werner_from_fock(pair: WernerPair) -> FockDensity {
    FockDensity::from_matrix(vec![1, 1], werner_matrix(pair.fidelity())).expect("Werner matrix has unit trace")
}
