//! Two-link CV repeater: lossy TMSV links distilled by an NLA, joined by a
//! homodyne entanglement swap, then a second NLA on the far arm.

use crate::error::{arg, Error, Result};
use crate::fock::{make_tmsv, phase_insensitive_gaussian, ChannelSpec, FockDensity, TmsvParam};
use crate::gaussian::{entanglement_swap, TwoModeCovariance};
use crate::measures::{eof_gaussian_approx, EntanglementReport};
use crate::rate::{cv_repeater_rate, RateBreakdown};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvLinkConfig {
    pub chi: TmsvParam,
    /// One link (half the total distance).
    pub link: ChannelSpec,
    pub gain: f64,
    pub nla_cutoff: usize,
    /// Cutoff of the TMSV each link starts from.
    pub fock_cutoff: usize,
    /// Gain of the second-level NLA; `None` reuses `gain`.
    pub top_gain: Option<f64>,
    /// Classical gain of the swap's displacement feed-forward.
    pub teleport_gain: f64,
}

/// Default NLA cutoff: 3 up to chi = 0.5, 8 above.
pub fn default_nla_cutoff(chi: TmsvParam) -> usize {
    if chi.chi() <= 0.5 { 3 } else { 8 }
}

impl CvLinkConfig {
    pub fn new(chi: TmsvParam, link: ChannelSpec, gain: f64) -> Self {
        Self {
            chi,
            link,
            gain,
            nla_cutoff: default_nla_cutoff(chi),
            fock_cutoff: chi.default_cutoff(),
            top_gain: None,
            teleport_gain: 1.0,
        }
    }

    pub fn top(&self) -> f64 {
        self.top_gain.unwrap_or(self.gain)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        for g in [self.gain, self.top()] {
            if !(g >= 1.0 && g.is_finite()) {
                return arg(format!("NLA gain must be >= 1, got {g}"));
            }
        }
        if self.nla_cutoff == 0 || self.nla_cutoff > self.fock_cutoff {
            return arg(format!("nla_cutoff must lie in [1, {}], got {}", self.fock_cutoff, self.nla_cutoff));
        }
        if !(self.teleport_gain > 0.0 && self.teleport_gain.is_finite()) {
            return arg("teleport_gain must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CvRepeaterOutput {
    /// Fock state after the second NLA; `None` when that NLA is the
    /// identity (top gain 1) and the Gaussian swap output is final.
    pub joint_state: Option<FockDensity>,
    pub covariance: TwoModeCovariance,
    pub p_link: f64,
    pub p_top: f64,
    pub eof: EntanglementReport,
    /// Diagnostics: one distilled link and the state right after the swap.
    pub link_eof: EntanglementReport,
    pub swapped: TwoModeCovariance,
}

/// TMSV with arm 1 sent through the link's loss.
pub fn lossy_link_state(cfg: &CvLinkConfig) -> Result<FockDensity> {
    cfg.validate()?;
    make_tmsv(cfg.chi, cfg.fock_cutoff)?.apply_loss(1, cfg.link.transmittance())
}

/// One error-corrected link: TMSV, loss on arm 1, NLA on arm 1.
pub fn run_ec_link(cfg: &CvLinkConfig) -> Result<(FockDensity, f64)> {
    let lossy = lossy_link_state(cfg)?;
    distill(&lossy, cfg)
}

fn distill(lossy: &FockDensity, cfg: &CvLinkConfig) -> Result<(FockDensity, f64)> {
    let out = lossy.apply_nla(1, cfg.gain, cfg.nla_cutoff)?;
    let p = out.weight() / lossy.weight();
    Ok((out, p))
}

/// Two links over `total` (each covering half) joined at the middle node,
/// followed by the second-level NLA. `cfg.link` is replaced by
/// `total.split(2)`.
pub fn run_two_link_repeater(cfg: &CvLinkConfig, total: &ChannelSpec) -> Result<CvRepeaterOutput> {
    let mut cfg = *cfg;
    cfg.link = total.split(2);
    let lossy = lossy_link_state(&cfg)?;
    repeater_from_lossy(&lossy, &cfg)
}

fn repeater_from_lossy(lossy: &FockDensity, cfg: &CvLinkConfig) -> Result<CvRepeaterOutput> {
    let (link, p_link) = distill(lossy, cfg)?;
    let v = link.moments()?;
    let link_eof = eof_gaussian_approx(&v);
    // middle node holds arm 1 of both links
    let swapped = entanglement_swap(&v, &v, cfg.teleport_gain)?;
    let top = cfg.top();
    if top == 1.0 {
        return Ok(CvRepeaterOutput {
            joint_state: None,
            covariance: swapped,
            p_link,
            p_top: 1.0,
            eof: eof_gaussian_approx(&swapped),
            link_eof,
            swapped,
        });
    }
    let (rho, captured) = realize(&swapped, cfg.nla_cutoff)?;
    let out = rho.apply_nla(1, top, cfg.nla_cutoff)?;
    let p_top = captured * out.weight();
    let cov = out.moments()?;
    Ok(CvRepeaterOutput {
        eof: eof_gaussian_approx(&cov),
        joint_state: Some(out.with_weight(1.0)),
        covariance: cov,
        p_link,
        p_top,
        link_eof,
        swapped,
    })
}

/// Largest arm-0 cutoff used when realizing the swap output in Fock space.
pub const MAX_REALIZE_CUTOFF: usize = 400;

/// Fock realization of a phase-insensitive swap output with arm 1 kept to
/// at most `cutoff_b` photons. Returns the normalized state and the
/// probability mass inside that window.
fn realize(v: &TwoModeCovariance, cutoff_b: usize) -> Result<(FockDensity, f64)> {
    let (a, b, c) = (v.cov[(0, 0)], v.cov[(2, 2)], v.cov[(0, 2)]);
    let expect = TwoModeCovariance::phase_insensitive(a, b, c);
    if v.max_abs_diff(&expect) > 1e-9 * a.max(b) {
        return Err(Error::Domain("swap output is not phase insensitive".into()));
    }
    // arm 0 cutoff from its thermal tail
    let lam2 = (a - 1.0) / (a + 1.0);
    let ca = if lam2 <= 0.0 {
        1
    } else {
        ((1e-11f64.ln() / lam2.ln()).ceil() as usize).max(cutoff_b + 1)
    };
    if ca > MAX_REALIZE_CUTOFF {
        return Err(Error::Truncation(format!(
            "swap output too noisy to realize (arm 0 needs cutoff {ca} > {MAX_REALIZE_CUTOFF})"
        )));
    }
    let tail = lam2.powi(ca as i32 + 1);
    let rho = phase_insensitive_gaussian(a, b, c, ca, cutoff_b)?;
    let captured = rho.norm_retained() / (1.0 - tail);
    Ok((rho.with_norm_retained(1.0), captured.min(1.0)))
}

/// How the optimizer treats the second-level NLA gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainMode {
    /// Top gain equals link gain.
    #[default]
    Symmetric,
    /// Link and top gains searched independently.
    Independent,
}

impl std::str::FromStr for GainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "independent" => Ok(Self::Independent),
            o => Err(Error::Config(format!("cv_gain_mode must be symmetric or independent, got {o:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSearch {
    pub mode: GainMode,
    /// Grid points per gain axis (log-spaced from 1).
    pub points: usize,
    /// Upper end of the scan; `None` picks g²·η = 50.
    pub max_gain: Option<f64>,
}

impl Default for GainSearch {
    fn default() -> Self {
        Self { mode: GainMode::Symmetric, points: 48, max_gain: None }
    }
}

#[derive(Debug, Clone)]
pub struct CvOperatingPoint {
    pub gain: f64,
    pub top_gain: f64,
    pub output: CvRepeaterOutput,
    pub rate: RateBreakdown,
}

#[derive(Debug, Clone)]
pub enum GainOutcome {
    Feasible(CvOperatingPoint),
    /// No scanned gain reached the target.
    Infeasible { max_eof: f64, at_gain: f64, at_top_gain: f64 },
}

struct Eval {
    gain: f64,
    top: f64,
    eof: f64,
    rate: f64,
}

/// Maximizes the CV repeater rate subject to output EoF >= `eof_target`.
///
/// `base` supplies chi, cutoffs and teleport gain; its gains are ignored.
pub fn optimize_gain(base: &CvLinkConfig, total: &ChannelSpec, eof_target: f64, search: GainSearch) -> Result<GainOutcome> {
    let mut cfg = *base;
    cfg.link = total.split(2);
    cfg.gain = 1.0;
    cfg.top_gain = None;
    let lossy = lossy_link_state(&cfg)?;
    let eta = cfg.link.transmittance();
    let g_max = search.max_gain.unwrap_or_else(|| (50.0 / eta).sqrt().max(2.0));
    if !(g_max > 1.0) {
        return arg("max_gain must exceed 1");
    }
    let n = search.points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| g_max.powf(i as f64 / (n - 1) as f64)).collect();
    let pairs: Vec<(f64, f64)> = match search.mode {
        GainMode::Symmetric => grid.iter().map(|&g| (g, g)).collect(),
        GainMode::Independent => grid.iter().flat_map(|&g| grid.iter().map(move |&t| (g, t))).collect(),
    };
    let evaluate = |g: f64, t: f64| -> Result<Eval> {
        let mut c = cfg;
        c.gain = g;
        c.top_gain = Some(t);
        let out = repeater_from_lossy(&lossy, &c)?;
        let rate = cv_repeater_rate(&out, &c.link)?.pairs_per_second;
        Ok(Eval { gain: g, top: t, eof: out.eof.eof, rate })
    };
    let evals: Vec<Eval> = pairs
        .par_iter()
        .map(|&(g, t)| evaluate(g, t))
        .collect::<Vec<_>>()
        .into_iter()
        .filter_map(|r| r.ok())
        .collect();
    if evals.is_empty() {
        return Err(Error::Truncation("no gain on the grid produced a valid state".into()));
    }
    let feasible = |e: &Eval| e.eof >= eof_target;
    let best = evals
        .iter()
        .enumerate()
        .filter(|(_, e)| feasible(e))
        .max_by(|a, b| a.1.rate.partial_cmp(&b.1.rate).unwrap());
    let Some((bi, best)) = best else {
        let top = evals.iter().fold(&evals[0], |m, e| if e.eof > m.eof { e } else { m });
        return Ok(GainOutcome::Infeasible { max_eof: top.eof, at_gain: top.gain, at_top_gain: top.top });
    };
    // refine along the link gain toward the feasibility edge below
    let (mut g, t) = (best.gain, best.top);
    if search.mode == GainMode::Symmetric && bi > 0 && !feasible(&evals[bi - 1]) && evals[bi - 1].gain < g {
        let (mut lo, mut hi) = (evals[bi - 1].gain.ln(), g.ln());
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            match evaluate(mid.exp(), mid.exp()) {
                Ok(e) if feasible(&e) => hi = mid,
                _ => lo = mid,
            }
        }
        let cand = evaluate(hi.exp(), hi.exp())?;
        if cand.rate >= best.rate {
            g = hi.exp();
        }
    }
    let top = if search.mode == GainMode::Symmetric && g != best.gain { g } else { t };
    let mut c = cfg;
    c.gain = g;
    c.top_gain = Some(top);
    let output = repeater_from_lossy(&lossy, &c)?;
    let rate = cv_repeater_rate(&output, &c.link)?;
    Ok(GainOutcome::Feasible(CvOperatingPoint { gain: g, top_gain: top, output, rate }))
}
