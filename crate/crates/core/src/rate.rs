//! Waiting-time and rate models, with a Monte Carlo cross-check.
//!
//! Every model is a [`RetryStructure`]; the analytic rate is its
//! `expected()` value and the Monte Carlo estimate samples the same tree.

use crate::cv::CvRepeaterOutput;
use crate::dv::PurificationSchedule;
use crate::error::{arg, Result};
use crate::fock::ChannelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBreakdown {
    /// Duration of one elementary attempt slot.
    pub attempt_time_s: f64,
    pub p_elementary: f64,
    /// Expected elementary attempt slots per delivered pair.
    pub expected_attempts: f64,
    /// Expected classical-communication waiting per delivered pair.
    pub cc_delay_s: f64,
    /// Expected time per delivered pair.
    pub total_time_s: f64,
    pub pairs_per_second: f64,
    /// Named time contributions; they sum to `total_time_s`.
    pub components: Vec<(String, f64)>,
}

impl RateBreakdown {
    fn from_components(attempt_time_s: f64, p_elementary: f64, expected_attempts: f64, cc_delay_s: f64, components: Vec<(String, f64)>) -> Self {
        let total: f64 = components.iter().map(|c| c.1).sum();
        let rate = if total.is_finite() && total > 0.0 { 1.0 / total } else { 0.0 };
        Self {
            attempt_time_s,
            p_elementary,
            expected_attempts,
            cc_delay_s,
            total_time_s: total,
            pairs_per_second: rate,
            components,
        }
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.0 == name).map(|c| c.1)
    }
}

/// Transmission of one link, 10^(−αL/10).
pub fn elementary_success_prob(link: &ChannelSpec) -> f64 {
    link.transmittance()
}

/// E[max of n iid geometric(p)] × attempt_time: the wait until `n`
/// independent links, retried in lockstep, have all succeeded.
pub fn expected_parallel_wait(p: f64, n: u64, attempt_time: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if p >= 1.0 {
        return attempt_time;
    }
    if !(p > 0.0) {
        return f64::INFINITY;
    }
    let ln_q = (-p).ln_1p();
    if n <= 12 {
        // inclusion-exclusion; cancellation grows with n
        let mut binom = 1.0;
        let mut s = 0.0;
        for j in 1..=n {
            binom = binom * (n - j + 1) as f64 / j as f64;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * binom / -(j as f64 * ln_q).exp_m1();
        }
        return attempt_time * s;
    }
    // sum over t >= 0 of P(max > t) = 1 − (1 − q^t)^n
    let a = -ln_q;
    if a < 0.1 {
        // Euler-Maclaurin: the integral is H_n / a, the boundary term 1/2,
        // and the derivative corrections vanish below order n; what is
        // left is of order exp(-pi² / a)
        return attempt_time * (harmonic(n) / a + 0.5);
    }
    let mut s = 0.0;
    let mut t = 0u64;
    loop {
        let qt = (t as f64 * ln_q).exp();
        let term = -(n as f64 * (-qt).ln_1p()).exp_m1();
        s += term;
        t += 1;
        if term < 1e-16 * s || t > 100_000_000 {
            break;
        }
    }
    attempt_time * s
}

fn harmonic(n: u64) -> f64 {
    if n <= 1_000_000 {
        return (1..=n).rev().map(|k| 1.0 / k as f64).sum();
    }
    let x = n as f64;
    x.ln() + 0.577_215_664_901_532_9 + 0.5 / x - 1.0 / (12.0 * x * x)
}

/// Retry structure of a protocol; times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RetryStructure {
    Fixed(f64),
    /// `n` independent attempts of success probability `p` repeated in slots
    /// of `attempt_time` until all have succeeded.
    Parallel { p: f64, n: u64, attempt_time: f64 },
    Sequence(Vec<RetryStructure>),
    /// Run `body`, then succeed with `p_success` or start over.
    Restart { body: Box<RetryStructure>, p_success: f64 },
}

impl RetryStructure {
    pub fn expected(&self) -> f64 {
        match self {
            Self::Fixed(t) => *t,
            Self::Parallel { p, n, attempt_time } => expected_parallel_wait(*p, *n, *attempt_time),
            Self::Sequence(v) => v.iter().map(|s| s.expected()).sum(),
            Self::Restart { body, p_success } => body.expected() / p_success,
        }
    }

    /// Mean number of random draws one Monte Carlo sample consumes.
    pub fn expected_draws(&self) -> f64 {
        match self {
            Self::Fixed(_) => 0.0,
            Self::Parallel { n, .. } => *n as f64,
            Self::Sequence(v) => v.iter().map(|s| s.expected_draws()).sum(),
            Self::Restart { body, p_success } => (body.expected_draws() + 1.0) / p_success,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Fixed(t) => *t,
            Self::Parallel { p, n, attempt_time } => {
                if *p >= 1.0 {
                    return *attempt_time;
                }
                let ln_q = (-p).ln_1p();
                let mut worst = 1.0f64;
                for _ in 0..*n {
                    let u: f64 = 1.0 - rng.gen::<f64>();
                    worst = worst.max((u.ln() / ln_q).ceil().max(1.0));
                }
                worst * attempt_time
            }
            Self::Sequence(v) => v.iter().map(|s| s.sample(rng)).sum(),
            Self::Restart { body, p_success } => {
                let mut t = 0.0;
                loop {
                    t += body.sample(rng);
                    if rng.gen::<f64>() < *p_success {
                        return t;
                    }
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Self::Fixed(t) if !(*t >= 0.0 && t.is_finite()) => arg("fixed time must be finite and >= 0"),
            Self::Parallel { p, .. } if !(*p > 0.0 && *p <= 1.0) => arg(format!("attempt probability {p} outside (0,1]")),
            Self::Sequence(v) => v.iter().try_for_each(|s| s.check()),
            Self::Restart { body, p_success } => {
                if !(*p_success > 0.0 && *p_success <= 1.0) {
                    return arg(format!("restart probability {p_success} outside (0,1]"));
                }
                body.check()
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean_s: f64,
    pub stderr_s: f64,
    pub trials: u64,
}

const CHUNK: u64 = 4096;

/// Monte Carlo mean waiting time. Chunk `i` of trials draws from ChaCha8
/// stream `i` of `seed`, so the result is independent of thread count.
pub fn monte_carlo_wait(spec: &RetryStructure, trials: u64, seed: u64) -> Result<McEstimate> {
    spec.check()?;
    if trials < 2 {
        return arg("need at least two trials");
    }
    let chunks = trials.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let n = CHUNK.min(trials - i * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let x = spec.sample(&mut rng);
                s += x;
                s2 += x * x;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean_s: mean,
        stderr_s: (var / n).sqrt(),
        trials,
    })
}

/// Retry structure of the DV repeater.
///
/// All N × links × 2^rounds elementary pairs are generated in lockstep
/// (`Parallel`), then `rounds` purification rounds each cost one link
/// signalling delay. Any purification failure restarts the whole batch.
/// The end-to-end Bell measurements and the teleporter herald cost one
/// end-to-end delay; their failure restarts everything.
pub fn dv_retry_structure(schedule: &PurificationSchedule, link: &ChannelSpec, num_modes: usize, p_teleport: f64) -> Result<RetryStructure> {
    link.validate()?;
    if !(p_teleport > 0.0 && p_teleport <= 1.0) {
        return arg(format!("teleporter success probability {p_teleport} outside (0,1]"));
    }
    let (t_att, t_cc) = (link.delay_s(), link.delay_s());
    let t_end = link.delay_s() * schedule.num_links as f64;
    let pairs = num_modes as u64 * schedule.num_links as u64 * schedule.initial_pairs_per_link;
    let q = batch_purification_prob(schedule, num_modes);
    if !(q > 0.0) {
        return arg("purification success probability underflows");
    }
    let body = RetryStructure::Sequence(vec![
        RetryStructure::Parallel { p: elementary_success_prob(link), n: pairs, attempt_time: t_att },
        RetryStructure::Fixed(schedule.rounds as f64 * t_cc),
    ]);
    Ok(RetryStructure::Restart {
        body: Box::new(RetryStructure::Sequence(vec![
            RetryStructure::Restart { body: Box::new(body), p_success: q },
            RetryStructure::Fixed(t_end),
        ])),
        p_success: p_teleport,
    })
}

/// Probability that every purification in one batch succeeds:
/// prod_j P_j^(2^(r−j) · links · N).
pub fn batch_purification_prob(schedule: &PurificationSchedule, num_modes: usize) -> f64 {
    let r = schedule.rounds as i32;
    let mut ln_q = 0.0;
    for (j, p) in schedule.success_probs.iter().enumerate() {
        let count = 2f64.powi(r - 1 - j as i32) * schedule.num_links as f64 * num_modes as f64;
        ln_q += count * p.ln();
    }
    ln_q.exp()
}

/// Delivered-pair rate of the DV repeater. `p_teleport` is the full
/// teleporter success probability (herald, recombination and Bell
/// measurements). A batch probability that underflows gives rate 0.
pub fn dv_repeater_rate(schedule: &PurificationSchedule, link: &ChannelSpec, num_modes: usize, p_teleport: f64) -> Result<RateBreakdown> {
    link.validate()?;
    if !(p_teleport > 0.0 && p_teleport <= 1.0) {
        return arg(format!("teleporter success probability {p_teleport} outside (0,1]"));
    }
    let p0 = elementary_success_prob(link);
    let t_att = link.delay_s();
    let t_cc = link.delay_s();
    let t_end = link.delay_s() * schedule.num_links as f64;
    let pairs = num_modes as u64 * schedule.num_links as u64 * schedule.initial_pairs_per_link;
    let q = batch_purification_prob(schedule, num_modes);
    let w = expected_parallel_wait(p0, pairs, t_att);
    let pur = schedule.rounds as f64 * t_cc;
    let (gen, cc) = if q > 0.0 { (w / (q * p_teleport), pur / (q * p_teleport)) } else { (f64::INFINITY, f64::INFINITY) };
    let swap = t_end / p_teleport;
    Ok(RateBreakdown::from_components(
        t_att,
        p0,
        gen / t_att,
        cc + swap,
        vec![
            ("generation".into(), gen),
            ("purification_cc".into(), cc),
            ("end_to_end_cc".into(), swap),
        ],
    ))
}

/// Retry structure of the two-link CV repeater: both links retried in
/// lockstep until their NLAs herald, one signalling delay, then the top
/// NLA; its failure restarts the links. End-to-end delay once at the end.
pub fn cv_retry_structure(out: &CvRepeaterOutput, link: &ChannelSpec) -> Result<RetryStructure> {
    link.validate()?;
    let body = RetryStructure::Sequence(vec![
        RetryStructure::Parallel { p: out.p_link, n: 2, attempt_time: link.delay_s() },
        RetryStructure::Fixed(link.delay_s()),
    ]);
    Ok(RetryStructure::Sequence(vec![
        RetryStructure::Restart { body: Box::new(body), p_success: out.p_top },
        RetryStructure::Fixed(2.0 * link.delay_s()),
    ]))
}

/// Delivered-pair rate of the two-link CV repeater.
pub fn cv_repeater_rate(out: &CvRepeaterOutput, link: &ChannelSpec) -> Result<RateBreakdown> {
    link.validate()?;
    let t = link.delay_s();
    let valid = |p: f64| p > 0.0 && p <= 1.0;
    if !valid(out.p_link) || !valid(out.p_top) {
        return arg(format!("herald probabilities ({}, {}) outside (0,1]", out.p_link, out.p_top));
    }
    let w = expected_parallel_wait(out.p_link, 2, t);
    let gen = w / out.p_top;
    let cc = t / out.p_top;
    let end = 2.0 * t;
    Ok(RateBreakdown::from_components(
        t,
        out.p_link,
        gen / t,
        cc + end,
        vec![
            ("generation".into(), gen),
            ("link_cc".into(), cc),
            ("end_to_end_cc".into(), end),
        ],
    ))
}
