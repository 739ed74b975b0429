//! Oracle suites: each pits an implementation against an independent
//! computation and reports the worst discrepancy.

use crate::dv::{purify_with, swap_fidelity, werner_from_fock, PurificationFormula, WernerPair};
use crate::error::Result;
use crate::fock::{cv_teleport_fock, make_tmsv, FockTeleportSettings, TmsvParam};
use crate::gaussian::{cv_teleport, loss_map, tmsv_covariance};
use crate::measures::{eof_two_qubit, eof_two_qubit_matrix};
use crate::oracle::{depolarize_second, purify_circuit, swap_circuit};
use crate::rate::{expected_parallel_wait, monte_carlo_wait, RetryStructure};
use crate::teleporter::{teleport_cv_state, TeleporterConfig};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, err: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        passed: err <= tol,
        detail: format!("max error {err:.3e} (tolerance {tol:.0e})"),
    }
}

/// Closed-form swap and purification against the gate-level circuits.
pub fn recurrence_suite() -> Result<Vec<Check>> {
    let grid: Vec<f64> = (0..50).map(|i| 0.25 + 0.75 * i as f64 / 49.0).collect();
    let mut es: f64 = 0.0;
    let mut ep: f64 = 0.0;
    for &f in &grid {
        es = es.max((swap_fidelity(f)? - swap_circuit(f)).abs());
        let (fo, p) = purify_with(f, PurificationFormula::Oracle)?;
        let (fc, pc) = purify_circuit(f);
        ep = ep.max((fo - fc).abs()).max((p - pc).abs());
    }
    let fixed = [1.0, 0.25]
        .iter()
        .map(|&f| purify_with(f, PurificationFormula::Oracle).map(|r| (r.0 - f).abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let (printed, _) = purify_with(0.25, PurificationFormula::AsPrinted)?;
    Ok(vec![
        check("swap recurrence vs circuit", es, 1e-12),
        check("purification recurrence vs circuit", ep, 1e-12),
        check("purification fixed points 1 and 1/4", fixed, 0.0),
        Check {
            name: "printed purification variant differs from circuit".into(),
            passed: (printed - 0.25).abs() > 1e-3,
            detail: format!("printed form maps F=0.25 to {printed:.6}; the circuit keeps 0.25"),
        },
    ])
}

/// Fock-space loss and teleportation against Gaussian moment maps.
pub fn gaussian_fock_suite(cutoff: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for chi in [0.3, 0.5] {
        let p = TmsvParam::new(chi)?;
        let st = make_tmsv(p, cutoff)?;
        for eta in [0.1, 0.5, 0.9] {
            let f = st.apply_loss(1, eta)?.moments()?;
            let g = loss_map(&tmsv_covariance(p), 1, eta)?;
            worst = worst.max(f.max_abs_diff(&g));
        }
    }
    out.push(check("loss: Fock moments vs Gaussian map", worst, 1e-6));

    let p = TmsvParam::new(0.5)?;
    let st = make_tmsv(p, 12)?;
    let res = make_tmsv(p, 12)?;
    let s = FockTeleportSettings { out_cutoff: 24, ..Default::default() };
    let f = cv_teleport_fock(&st, 1, &res, s)?.moments()?;
    let g = cv_teleport(&tmsv_covariance(p), 1, &tmsv_covariance(p))?;
    out.push(check("teleportation: Fock moments vs Gaussian map", f.max_abs_diff(&g), 1e-6));
    Ok(out)
}

/// Single-mode teleporter against a depolarizing channel on the qubit
/// truncation of the input.
pub fn teleporter_suite() -> Result<Vec<Check>> {
    let p = TmsvParam::new(0.5)?;
    let st = make_tmsv(p, 15)?;
    let mut worst: f64 = 0.0;
    let mut eof_err: f64 = 0.0;
    let c = p.chi();
    let n = 1.0 / (1.0 + c * c);
    let mut qubit = DMatrix::<C64>::zeros(4, 4);
    for (i, a) in [(0usize, 1.0), (3, c)] {
        for (j, b) in [(0usize, 1.0), (3, c)] {
            qubit[(i, j)] = C64::from(a * b * n);
        }
    }
    for f in [1.0, 0.9, 0.67, 0.5] {
        let out = teleport_cv_state(&st, 1, &TeleporterConfig::new(1, 1.0, f)?)?;
        let expect = depolarize_second(&qubit, f);
        worst = worst.max((out.state.coeffs() - &expect).iter().map(|z| z.norm()).fold(0.0, f64::max));
        eof_err = eof_err.max((eof_two_qubit(&out.state)?.eof - eof_two_qubit_matrix(&expect)?.eof).abs());
    }
    let res = werner_from_fock(WernerPair::new(0.8)?);
    let pair = eof_two_qubit(&res)?;
    Ok(vec![
        check("teleporter vs depolarizing oracle (state)", worst, 1e-12),
        check("teleporter vs depolarizing oracle (EoF)", eof_err, 1e-7),
        Check {
            name: "Werner pair in Fock embedding keeps EoF".into(),
            passed: pair.eof > 0.0,
            detail: format!("F=0.8 EoF {:.6}", pair.eof),
        },
    ])
}

/// Analytic waiting times against Monte Carlo.
pub fn waiting_time_suite(trials: u64, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut add = |name: String, spec: RetryStructure| -> Result<()> {
        let a = spec.expected();
        let m = monte_carlo_wait(&spec, trials, seed)?;
        let dev = (m.mean_s - a).abs();
        out.push(Check {
            passed: dev <= 3.0 * m.stderr_s || dev <= 1e-12 * a,
            detail: format!("analytic {a:.6}, monte carlo {:.6} ± {:.2e}", m.mean_s, m.stderr_s),
            name,
        });
        Ok(())
    };
    for p in [0.1, 0.5, 1.0] {
        let closed = (3.0 - 2.0 * p) / (p * (2.0 - p));
        debug_assert!((expected_parallel_wait(p, 2, 1.0) - closed).abs() < 1e-9);
        add(format!("two-link wait p={p}"), RetryStructure::Parallel { p, n: 2, attempt_time: 1.0 })?;
    }
    add(
        "nested restart (p_link=0.1, p_top=0.5)".into(),
        RetryStructure::Sequence(vec![
            RetryStructure::Restart {
                body: Box::new(RetryStructure::Sequence(vec![
                    RetryStructure::Parallel { p: 0.1, n: 2, attempt_time: 1.0 },
                    RetryStructure::Fixed(1.0),
                ])),
                p_success: 0.5,
            },
            RetryStructure::Fixed(2.0),
        ]),
    )?;
    add("64-way parallel wait p=0.05".into(), RetryStructure::Parallel { p: 0.05, n: 64, attempt_time: 1.0 })?;
    Ok(out)
}

/// Every suite.
pub fn run_all(trials: u64, seed: u64) -> Result<Vec<Check>> {
    let mut v = recurrence_suite()?;
    v.extend(gaussian_fock_suite(30)?);
    v.extend(teleporter_suite()?);
    v.extend(waiting_time_suite(trials, seed)?);
    Ok(v)
}
