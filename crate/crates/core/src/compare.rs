//! DV vs CV sweep over initial fidelity at matched entanglement.

use crate::cv::{default_nla_cutoff, optimize_gain, CvLinkConfig, GainMode, GainOutcome, GainSearch};
use crate::dv::{solve_schedule_with, PurificationFormula, PurificationSchedule};
use crate::error::{Error, Result};
use crate::fock::{make_tmsv, ChannelSpec, FockDensity, TmsvParam, Truncation};
use crate::measures::{eof_gaussian_approx, eof_two_qubit, EofMethod};
use crate::rate::{cv_retry_structure, dv_repeater_rate, dv_retry_structure, monte_carlo_wait, McEstimate, RateBreakdown};
use crate::teleporter::{choose_mode_count, teleport_prepared, PreparedInput, TeleporterConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// A number or the word "auto".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Auto(AutoWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

impl<T: Copy> AutoOr<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Auto(_) => None,
        }
    }
}

const AUTO: AutoWord = AutoWord::Auto;

/// Either "start:stop:step" (inclusive) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(String),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Range(s) => {
                let parts: Vec<f64> = s
                    .split(':')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("grid {s:?} is not start:stop:step")))?;
                let [a, b, step] = parts[..] else {
                    return Err(Error::Config(format!("grid {s:?} is not start:stop:step")));
                };
                if !(step > 0.0) || b < a {
                    return Err(Error::Config(format!("grid {s:?} needs step > 0 and stop >= start")));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize + 1;
                // keep grid points on short decimals
                Ok((0..n).map(|i| ((a + i as f64 * step) * 1e10).round() / 1e10).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparisonConfig {
    pub chi: f64,
    pub total_length_km: f64,
    pub attenuation_db_per_km: f64,
    pub light_speed_km_per_s: f64,
    /// Floor on every signalling delay; needed for a zero-length run.
    pub min_delay_s: f64,
    /// Elementary DV links (power of two).
    pub num_links: u32,
    pub f_initial_grid: Grid,
    pub f_required: AutoOr<f64>,
    /// CV target and, when f_required is auto and the CV target is
    /// unreachable, the EoF the DV side is matched to.
    pub eof_target: f64,
    pub purification_formula: PurificationFormula,
    pub max_rounds: u32,
    pub bsm_success_prob: f64,
    pub num_modes: AutoOr<usize>,
    pub mode_threshold: f64,
    pub fock_cutoff: AutoOr<usize>,
    pub nla_cutoff: AutoOr<usize>,
    pub cv_gain_mode: GainMode,
    pub cv_gain_points: usize,
    pub cv_max_gain: AutoOr<f64>,
    pub cv_teleport_gain: f64,
    pub seed: u64,
    /// Monte Carlo trials for the rate cross-check; 0 skips it.
    pub mc_trials: u64,
    pub output: String,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            chi: 0.5,
            total_length_km: 400.0,
            attenuation_db_per_km: 0.2,
            light_speed_km_per_s: 2.0e5,
            min_delay_s: 0.0,
            num_links: 2,
            f_initial_grid: Grid::Range("0.60:1.00:0.01".into()),
            f_required: AutoOr::Auto(AUTO),
            eof_target: 0.14,
            purification_formula: PurificationFormula::Oracle,
            max_rounds: crate::dv::MAX_ROUNDS,
            bsm_success_prob: 0.5,
            num_modes: AutoOr::Auto(AUTO),
            mode_threshold: crate::teleporter::MODE_THRESHOLD,
            fock_cutoff: AutoOr::Auto(AUTO),
            nla_cutoff: AutoOr::Auto(AUTO),
            cv_gain_mode: GainMode::Symmetric,
            cv_gain_points: 48,
            cv_max_gain: AutoOr::Auto(AUTO),
            cv_teleport_gain: 1.0,
            seed: 2024,
            mc_trials: 100_000,
            output: "comparison.csv".into(),
        }
    }
}

/// Parses a flag value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl ComparisonConfig {
    /// Config file text (TOML key = value) overlaid with `key, value` flag
    /// overrides. Keys may use '-' or '_'.
    pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match text {
            Some(t) => t.parse::<toml::Table>().map_err(|e| Error::Config(format!("config file: {e}")))?,
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            table.insert(k.replace('-', "_"), parse_value(v));
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        TmsvParam::new(self.chi).map_err(|e| Error::Config(e.to_string()))?;
        self.channel().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.total_length_km == 0.0 && self.min_delay_s == 0.0 {
            return bad("total_length_km = 0 gives zero signalling time; set min_delay_s > 0".into());
        }
        let grid = self.f_initial_grid.values()?;
        if grid.is_empty() {
            return bad("f_initial_grid is empty".into());
        }
        if let Some(f) = grid.iter().find(|f| !(**f > 0.5 && **f <= 1.0)) {
            return bad(format!("f_initial_grid value {f} outside (0.5, 1]"));
        }
        if let Some(f) = self.f_required.value() {
            if !(0.25..=1.0).contains(&f) {
                return bad(format!("f_required {f} outside [0.25, 1]"));
            }
        }
        if !(self.eof_target >= 0.0 && self.eof_target.is_finite()) {
            return bad("eof_target must be >= 0".into());
        }
        if self.num_links == 0 || !self.num_links.is_power_of_two() {
            return bad(format!("num_links must be a power of two, got {}", self.num_links));
        }
        if !(self.bsm_success_prob > 0.0 && self.bsm_success_prob <= 1.0) {
            return bad(format!("bsm_success_prob {} outside (0, 1]", self.bsm_success_prob));
        }
        if let Some(n) = self.num_modes.value() {
            if ![1, 2, 4, 8].contains(&n) {
                return bad(format!("num_modes must be 1, 2, 4 or 8, got {n}"));
            }
        }
        if !(self.mode_threshold > 0.0) {
            return bad("mode_threshold must be positive".into());
        }
        if self.fock_cutoff.value() == Some(0) || self.nla_cutoff.value() == Some(0) {
            return bad("cutoffs must be >= 1".into());
        }
        if self.cv_gain_points < 2 {
            return bad("cv_gain_points must be >= 2".into());
        }
        if let Some(g) = self.cv_max_gain.value() {
            if !(g > 1.0) {
                return bad("cv_max_gain must exceed 1".into());
            }
        }
        if !(self.cv_teleport_gain > 0.0) {
            return bad("cv_teleport_gain must be positive".into());
        }
        if self.mc_trials != 0 && self.mc_trials < 10_000 {
            return bad("mc_trials must be 0 or >= 10000".into());
        }
        if self.f_required.value().is_none() && self.modes() > 1 {
            return bad(format!(
                "f_required = \"auto\" needs a single-mode teleporter (got {} modes): the multimode output has no exact EoF to match; give f_required explicitly",
                self.modes()
            ));
        }
        Ok(())
    }

    pub fn tmsv(&self) -> TmsvParam {
        TmsvParam::new(self.chi).expect("validated")
    }

    pub fn channel(&self) -> ChannelSpec {
        ChannelSpec::new(self.total_length_km)
            .with_attenuation(self.attenuation_db_per_km)
            .with_light_speed(self.light_speed_km_per_s)
            .with_min_delay(self.min_delay_s)
    }

    pub fn dv_link(&self) -> ChannelSpec {
        self.channel().split(self.num_links as usize)
    }

    pub fn modes(&self) -> usize {
        self.num_modes.value().unwrap_or_else(|| choose_mode_count(self.tmsv(), self.mode_threshold))
    }

    pub fn cutoff(&self) -> usize {
        self.fock_cutoff.value().unwrap_or_else(|| self.tmsv().default_cutoff())
    }

    fn cv_config(&self) -> CvLinkConfig {
        let mut c = CvLinkConfig::new(self.tmsv(), self.channel().split(2), 1.0);
        c.fock_cutoff = self.cutoff();
        c.nla_cutoff = self.nla_cutoff.value().unwrap_or_else(|| default_nla_cutoff(self.tmsv()));
        c.teleport_gain = self.cv_teleport_gain;
        c
    }

    fn gain_search(&self) -> GainSearch {
        GainSearch {
            mode: self.cv_gain_mode,
            points: self.cv_gain_points,
            max_gain: self.cv_max_gain.value(),
        }
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub f_initial: f64,
    /// `None` when the schedule is infeasible.
    pub rounds: Option<u32>,
    pub f_after_purification: Option<f64>,
    pub f_after_swap: Option<f64>,
    pub dv_eof: Option<f64>,
    pub dv_eof_method: Option<EofMethod>,
    pub dv_rate_hz: f64,
    pub cv_gain: Option<f64>,
    pub cv_eof: f64,
    pub cv_rate_hz: f64,
    pub crossover_flag: bool,
    pub dv: Option<RateBreakdown>,
    pub p_teleport: Option<f64>,
    pub cv: Option<RateBreakdown>,
    #[serde(skip)]
    pub schedule: Option<PurificationSchedule>,
}

/// CV side of a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CvResult {
    pub feasible: bool,
    pub gain: Option<f64>,
    pub top_gain: Option<f64>,
    pub eof: f64,
    pub eof_method: EofMethod,
    pub p_link: Option<f64>,
    pub p_top: Option<f64>,
    pub rate: Option<RateBreakdown>,
    pub rate_hz: f64,
    /// For an infeasible target: the best EoF seen and where.
    pub max_eof: Option<f64>,
    pub max_eof_gain: Option<f64>,
    pub nla_cutoff: usize,
    pub link_truncation: Truncation,
    #[serde(skip)]
    pub mc_structure: Option<crate::rate::RetryStructure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// First grid point where the DV rate is positive and >= the CV rate.
    pub crossover: Option<f64>,
    /// First grid point needing no purification.
    pub plateau_onset: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McCheck {
    pub label: String,
    pub analytic_s: f64,
    pub estimate: McEstimate,
    pub within_3_sigma: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonResult {
    pub config: ComparisonConfig,
    pub num_modes: usize,
    pub f_required: f64,
    /// How f_required was chosen.
    pub f_required_source: String,
    pub cv: CvResult,
    pub rows: Vec<Row>,
    pub summary: Summary,
    pub input_truncation: Truncation,
    pub mc_checks: Vec<McCheck>,
    pub warnings: Vec<String>,
}

/// Crossover and plateau onset from the rows alone.
pub fn summarize(rows: &[Row]) -> Summary {
    Summary {
        crossover: rows.iter().find(|r| r.crossover_flag).map(|r| r.f_initial),
        plateau_onset: rows.iter().find(|r| r.rounds == Some(0)).map(|r| r.f_initial),
    }
}

/// EoF of the single-mode DV teleporter's output, with resource fidelity `f`.
pub fn dv_output_eof(input: &PreparedInput, f: f64, bsm: f64) -> Result<f64> {
    let out = teleport_prepared(input, &TeleporterConfig::new(1, bsm, f)?)?;
    Ok(eof_two_qubit(&out.state)?.eof)
}

/// Smallest resource fidelity whose single-mode teleporter output has EoF
/// >= `target` (bisection, EoF to within 1e-6).
pub fn solve_f_required(chi: TmsvParam, target: f64, cutoff: usize) -> Result<f64> {
    let input = make_tmsv(chi, cutoff)?;
    let prep = PreparedInput::new(&input, 1, 1)?;
    let eof = |f: f64| dv_output_eof(&prep, f, 1.0);
    if eof(0.5)? >= target {
        return Ok(0.5);
    }
    let ceiling = eof(1.0)?;
    if ceiling < target - 1e-3 {
        return Err(Error::Infeasible(format!(
            "EoF target {target} exceeds the perfect-resource ceiling {ceiling:.6}"
        )));
    }
    if ceiling < target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eof(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// CV operating point search.
pub fn run_cv(cfg: &ComparisonConfig) -> Result<CvResult> {
    cfg.validate()?;
    let base = cfg.cv_config();
    let link_trunc = make_tmsv(cfg.tmsv(), base.fock_cutoff)?.truncation();
    let outcome = optimize_gain(&base, &cfg.channel(), cfg.eof_target, cfg.gain_search())?;
    Ok(match outcome {
        GainOutcome::Feasible(p) => CvResult {
            feasible: true,
            gain: Some(p.gain),
            top_gain: Some(p.top_gain),
            eof: p.output.eof.eof,
            eof_method: p.output.eof.method,
            p_link: Some(p.output.p_link),
            p_top: Some(p.output.p_top),
            rate_hz: p.rate.pairs_per_second,
            mc_structure: Some(cv_retry_structure(&p.output, &cfg.channel().split(2))?),
            rate: Some(p.rate),
            max_eof: None,
            max_eof_gain: None,
            nla_cutoff: base.nla_cutoff,
            link_truncation: link_trunc,
        },
        GainOutcome::Infeasible { max_eof, at_gain, .. } => CvResult {
            feasible: false,
            gain: None,
            top_gain: None,
            eof: max_eof,
            eof_method: EofMethod::GaussianApprox,
            p_link: None,
            p_top: None,
            rate: None,
            rate_hz: 0.0,
            max_eof: Some(max_eof),
            max_eof_gain: Some(at_gain),
            nla_cutoff: base.nla_cutoff,
            link_truncation: link_trunc,
            mc_structure: None,
        },
    })
}

struct DvSide {
    rows: Vec<Row>,
    input_truncation: Truncation,
}

/// The teleporter runs on a resource of exactly `f_required`: any fidelity
/// the schedule delivers above that is not credited, so every row shares
/// one teleporter outcome and the comparison stays at matched entanglement.
fn run_dv(cfg: &ComparisonConfig, f_required: f64) -> Result<DvSide> {
    let n = cfg.modes();
    let input = make_tmsv(cfg.tmsv(), cfg.cutoff())?;
    let prep = PreparedInput::new(&input, 1, n)?;
    let out = teleport_prepared(&prep, &TeleporterConfig::new(n, cfg.bsm_success_prob, f_required)?)?;
    let p_tel = out.success_prob;
    let (eof, method) = dv_eof(&out.state)?;
    let link = cfg.dv_link();
    let grid = cfg.f_initial_grid.values()?;
    let rows: Vec<Result<Row>> = grid
        .par_iter()
        .map(|&fi| -> Result<Row> {
            let mut row = Row {
                f_initial: fi,
                rounds: None,
                f_after_purification: None,
                f_after_swap: None,
                dv_eof: None,
                dv_eof_method: None,
                dv_rate_hz: 0.0,
                cv_gain: None,
                cv_eof: 0.0,
                cv_rate_hz: 0.0,
                crossover_flag: false,
                dv: None,
                p_teleport: None,
                cv: None,
                schedule: None,
            };
            let sched = match solve_schedule_with(fi, f_required, cfg.num_links, cfg.purification_formula, cfg.max_rounds) {
                Ok(s) => s,
                Err(Error::Infeasible(_)) => return Ok(row),
                Err(e) => return Err(e),
            };
            let rate = dv_repeater_rate(&sched, &link, n, p_tel)?;
            row.rounds = Some(sched.rounds);
            row.f_after_purification = Some(sched.fidelity_after_purification());
            row.f_after_swap = Some(sched.final_fidelity_after_swap);
            row.dv_eof = Some(eof);
            row.dv_eof_method = Some(method);
            row.dv_rate_hz = rate.pairs_per_second;
            row.dv = Some(rate);
            row.p_teleport = Some(p_tel);
            row.schedule = Some(sched);
            Ok(row)
        })
        .collect();
    Ok(DvSide {
        rows: rows.into_iter().collect::<Result<_>>()?,
        input_truncation: input.truncation(),
    })
}

/// Two-qubit EoF when the output lives in {0,1}², else the moment-based
/// Gaussian estimate.
fn dv_eof(state: &FockDensity) -> Result<(f64, EofMethod)> {
    if state.cutoffs() == [1, 1] {
        let r = eof_two_qubit(state)?;
        return Ok((r.eof, r.method));
    }
    let r = eof_gaussian_approx(&state.moments()?);
    Ok((r.eof, r.method))
}

/// DV side only, with an explicit or solved F_req.
pub fn run_dv_only(cfg: &ComparisonConfig) -> Result<(f64, Vec<Row>)> {
    cfg.validate()?;
    let f_req = match cfg.f_required.value() {
        Some(f) => f,
        None => solve_f_required(cfg.tmsv(), cfg.eof_target, cfg.cutoff())?,
    };
    let dv = run_dv(cfg, f_req)?;
    if dv.rows.iter().all(|r| r.rounds.is_none()) {
        return Err(infeasible_everywhere(cfg, f_req));
    }
    Ok((f_req, dv.rows))
}

fn infeasible_everywhere(cfg: &ComparisonConfig, f_req: f64) -> Error {
    let top = cfg.f_initial_grid.values().ok().and_then(|g| g.into_iter().reduce(f64::max)).unwrap_or(1.0);
    let diag = crate::dv::schedule_infeasibility(top, f_req, cfg.num_links, cfg.purification_formula)
        .map(|i| i.reason)
        .unwrap_or_default();
    Error::Infeasible(format!(
        "f_required = {f_req:.6} is unreachable from every grid point ({} formula); best start {top}: {diag}",
        cfg.purification_formula.tag()
    ))
}

/// Full DV vs CV sweep.
pub fn run_comparison(cfg: &ComparisonConfig) -> Result<ComparisonResult> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let cv = run_cv(cfg)?;
    if !cv.feasible {
        warnings.push(format!(
            "CV EoF target {} unreachable: best EoF {:.6} at gain {:.4}; CV rate set to 0",
            cfg.eof_target,
            cv.max_eof.unwrap_or(0.0),
            cv.max_eof_gain.unwrap_or(1.0)
        ));
    }
    let (f_req, source) = match cfg.f_required.value() {
        Some(f) => (f, "config".to_string()),
        None => {
            let (target, why) = if cv.feasible {
                (cv.eof, "matched to the CV operating-point EoF")
            } else {
                (cfg.eof_target, "matched to eof_target (CV target unreachable)")
            };
            (solve_f_required(cfg.tmsv(), target, cfg.cutoff())?, format!("auto: {why} {target:.6}"))
        }
    };
    let dv = run_dv(cfg, f_req)?;
    if dv.rows.iter().all(|r| r.rounds.is_none()) {
        return Err(infeasible_everywhere(cfg, f_req));
    }
    let mut rows = dv.rows;
    for r in &mut rows {
        r.cv_gain = cv.gain;
        r.cv_eof = cv.eof;
        r.cv_rate_hz = cv.rate_hz;
        r.cv = cv.rate.clone();
        r.crossover_flag = r.dv_rate_hz > 0.0 && r.dv_rate_hz >= r.cv_rate_hz;
    }
    for w in [&dv.input_truncation, &cv.link_truncation] {
        if w.norm_retained < crate::fock::NORM_WARNING {
            warnings.push(format!("input cutoffs {:?} keep only {:.9} of the norm", w.cutoffs, w.norm_retained));
        }
    }
    let mc_checks = if cfg.mc_trials > 0 { mc_checks(cfg, &rows, &cv, &mut warnings)? } else { Vec::new() };
    Ok(ComparisonResult {
        summary: summarize(&rows),
        config: cfg.clone(),
        num_modes: cfg.modes(),
        f_required: f_req,
        f_required_source: source,
        cv,
        rows,
        input_truncation: dv.input_truncation,
        mc_checks,
        warnings,
    })
}

/// Cap on random draws spent per Monte Carlo cross-check.
pub const MC_DRAW_BUDGET: f64 = 1e8;

/// Monte Carlo cross-check of the CV rate and of one DV row per round count.
fn mc_checks(cfg: &ComparisonConfig, rows: &[Row], cv: &CvResult, warnings: &mut Vec<String>) -> Result<Vec<McCheck>> {
    let mut out = Vec::new();
    let mut check = |label: String, spec: &crate::rate::RetryStructure| -> Result<()> {
        let draws = spec.expected_draws() * cfg.mc_trials as f64;
        if draws > MC_DRAW_BUDGET {
            warnings.push(format!("monte carlo check {label} skipped: about {draws:.1e} draws needed"));
            return Ok(());
        }
        let analytic = spec.expected();
        let est = monte_carlo_wait(spec, cfg.mc_trials, cfg.seed)?;
        out.push(McCheck {
            label,
            analytic_s: analytic,
            within_3_sigma: (est.mean_s - analytic).abs() <= 3.0 * est.stderr_s.max(1e-300),
            estimate: est,
        });
        Ok(())
    };
    if let Some(s) = &cv.mc_structure {
        check("cv".into(), s)?;
    }
    let link = cfg.dv_link();
    let mut seen = std::collections::BTreeSet::new();
    for r in rows {
        let (Some(sched), Some(p_tel)) = (&r.schedule, r.p_teleport) else { continue };
        if r.dv_rate_hz <= 0.0 {
            continue;
        }
        let rounds = sched.rounds;
        if !seen.insert(rounds) {
            continue;
        }
        let spec = dv_retry_structure(sched, &link, cfg.modes(), p_tel)?;
        check(format!("dv f_initial={} rounds={rounds}", r.f_initial), &spec)?;
    }
    Ok(out)
}

/// Column set of the main CSV.
pub const CSV_COLUMNS: [&str; 10] = [
    "f_initial",
    "rounds",
    "f_after_purification",
    "f_after_swap",
    "dv_eof",
    "dv_rate_hz",
    "cv_gain",
    "cv_eof",
    "cv_rate_hz",
    "crossover_flag",
];

/// Shortest round-trip decimal, with an exponent for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[Row], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
    wr.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        wr.write_record([
            num(r.f_initial),
            r.rounds.map(|x| x.to_string()).unwrap_or_default(),
            opt(r.f_after_purification),
            opt(r.f_after_swap),
            opt(r.dv_eof),
            num(r.dv_rate_hz),
            opt(r.cv_gain),
            num(r.cv_eof),
            num(r.cv_rate_hz),
            r.crossover_flag.to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    Ok(())
}

const BREAKDOWN_COLUMNS: [&str; 19] = [
    "f_initial",
    "dv_attempt_time_s",
    "dv_p_elementary",
    "dv_expected_attempts",
    "dv_cc_delay_s",
    "dv_t_generation_s",
    "dv_t_purification_cc_s",
    "dv_t_end_to_end_cc_s",
    "dv_p_teleport",
    "dv_eof_method",
    "cv_attempt_time_s",
    "cv_p_link",
    "cv_expected_attempts",
    "cv_cc_delay_s",
    "cv_t_generation_s",
    "cv_t_link_cc_s",
    "cv_t_end_to_end_cc_s",
    "cv_p_top",
    "cv_top_gain",
];

/// Per-row rate provenance, keyed by f_initial.
pub fn write_breakdown_csv<W: Write>(res: &ComparisonResult, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
    wr.write_record(BREAKDOWN_COLUMNS).map_err(io)?;
    for r in &res.rows {
        let d = r.dv.as_ref();
        let c = r.cv.as_ref();
        let comp = |b: Option<&RateBreakdown>, k: &str| opt(b.and_then(|b| b.component(k)));
        wr.write_record([
            num(r.f_initial),
            opt(d.map(|b| b.attempt_time_s)),
            opt(d.map(|b| b.p_elementary)),
            opt(d.map(|b| b.expected_attempts)),
            opt(d.map(|b| b.cc_delay_s)),
            comp(d, "generation"),
            comp(d, "purification_cc"),
            comp(d, "end_to_end_cc"),
            opt(r.p_teleport),
            r.dv_eof_method.map(|m| m.tag().to_string()).unwrap_or_default(),
            opt(c.map(|b| b.attempt_time_s)),
            opt(c.map(|b| b.p_elementary)),
            opt(c.map(|b| b.expected_attempts)),
            opt(c.map(|b| b.cc_delay_s)),
            comp(c, "generation"),
            comp(c, "link_cc"),
            comp(c, "end_to_end_cc"),
            opt(res.cv.p_top),
            opt(res.cv.top_gain),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Run metadata as pretty JSON.
pub fn metadata_json(res: &ComparisonResult) -> Result<String> {
    #[derive(Serialize)]
    struct Meta<'a> {
        version: &'a str,
        config: &'a ComparisonConfig,
        num_modes: usize,
        f_required: f64,
        f_required_source: &'a str,
        cv: &'a CvResult,
        summary: &'a Summary,
        input_truncation: &'a Truncation,
        mc_checks: &'a [McCheck],
        warnings: &'a [String],
    }
    serde_json::to_string_pretty(&Meta {
        version: env!("CARGO_PKG_VERSION"),
        config: &res.config,
        num_modes: res.num_modes,
        f_required: res.f_required,
        f_required_source: &res.f_required_source,
        cv: &res.cv,
        summary: &res.summary,
        input_truncation: &res.input_truncation,
        mc_checks: &res.mc_checks,
        warnings: &res.warnings,
    })
    .map_err(|e| Error::Config(format!("serializing metadata: {e}")))
}

/// Human-readable summary.
pub fn summary_text(res: &ComparisonResult) -> String {
    let mut s = String::new();
    let c = &res.config;
    s += &format!(
        "chi={} length={} km modes={} f_required={:.4} ({})\n",
        c.chi, c.total_length_km, res.num_modes, res.f_required, res.f_required_source
    );
    if res.cv.feasible {
        s += &format!(
            "CV: gain={:.4} top_gain={:.4} eof={:.4} rate={:.6e} Hz\n",
            res.cv.gain.unwrap_or(1.0),
            res.cv.top_gain.unwrap_or(1.0),
            res.cv.eof,
            res.cv.rate_hz
        );
    } else {
        s += &format!(
            "CV: target eof {} infeasible (max {:.6} at gain {:.4}); rate 0\n",
            c.eof_target,
            res.cv.max_eof.unwrap_or(0.0),
            res.cv.max_eof_gain.unwrap_or(1.0)
        );
    }
    s += &match res.summary.crossover {
        Some(f) => format!("crossover: F_i = {f}\n"),
        None => "crossover: no crossover\n".to_string(),
    };
    s += &match res.summary.plateau_onset {
        Some(f) => format!("plateau onset: F_i = {f}\n"),
        None => "plateau onset: none on grid\n".to_string(),
    };
    for m in &res.mc_checks {
        s += &format!(
            "monte carlo {}: analytic {:.6e} s, estimate {:.6e} ± {:.2e} s ({})\n",
            m.label,
            m.analytic_s,
            m.estimate.mean_s,
            m.estimate.stderr_s,
            if m.within_3_sigma { "ok" } else { "outside 3 sigma" }
        );
    }
    for w in &res.warnings {
        s += &format!("warning: {w}\n");
    }
    s
}

/// Output paths derived from the main CSV path.
pub fn sidecar_paths(csv: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "comparison".into());
    let dir = csv.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    (dir.join(format!("{stem}.breakdown.csv")), dir.join(format!("{stem}.meta.json")))
}
