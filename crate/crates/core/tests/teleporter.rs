use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use repcomp::measures::eof_two_qubit;
use repcomp::oracle::depolarize_second;
use repcomp::teleporter::{choose_mode_count, teleport_cv_state, TeleporterConfig, MODE_THRESHOLD};
use repcomp::{make_tmsv, FockDensity, TmsvParam};

fn chi(x: f64) -> TmsvParam {
    TmsvParam::new(x).unwrap()
}

#[test]
fn mode_count_choice() {
    assert_eq!(choose_mode_count(chi(0.5), MODE_THRESHOLD), 1);
    assert_eq!(choose_mode_count(chi(0.9), MODE_THRESHOLD), 4);
    assert_eq!(choose_mode_count(chi(0.0), MODE_THRESHOLD), 1);
    assert_eq!(choose_mode_count(chi(0.99), MODE_THRESHOLD), 8);
    assert!(TeleporterConfig::new(3, 0.5, 0.9).is_err());
    assert!(TeleporterConfig::new(2, 0.0, 0.9).is_err());
    assert!(TeleporterConfig::new(2, 0.5, 0.1).is_err());
}

#[test]
fn perfect_single_mode_is_projection() {
    let c: f64 = 0.5;
    let st = make_tmsv(chi(c), 15).unwrap();
    let out = teleport_cv_state(&st, 1, &TeleporterConfig::new(1, 0.5, 1.0).unwrap()).unwrap();
    // (|00> + chi |11>) / sqrt(1 + chi²) on the qubit block
    let n = 1.0 / (1.0 + c * c);
    let want = [(0, 0, n), (0, 3, c * n), (3, 0, c * n), (3, 3, c * c * n)];
    let m = out.state.coeffs();
    assert_eq!(out.state.cutoffs(), &[1, 1]);
    for (i, j, v) in want {
        assert!((m[(i, j)].re - v).abs() < 1e-12);
    }
    let herald = 1.0 - c.powi(4);
    assert!((out.herald_prob - herald).abs() < 1e-9);
    assert!((out.success_prob - herald * 0.5).abs() < 1e-9);
    assert_eq!(out.bsm_factor, 0.5);
}

#[test]
fn two_modes_carry_a_single_photon_unchanged() {
    let input = FockDensity::number_state(vec![1, 1], &[0, 1]).unwrap();
    let out = teleport_cv_state(&input, 1, &TeleporterConfig::new(2, 0.5, 1.0).unwrap()).unwrap();
    assert!((out.recombination_prob - 1.0).abs() < 1e-12);
    assert!((out.success_prob - 0.25).abs() < 1e-12);
    let target = FockDensity::number_state(out.state.cutoffs().to_vec(), &[0, 1]).unwrap();
    assert!(out.state.trace_distance(&target).unwrap() < 1e-12);
}

#[test]
fn two_photons_over_two_modes() {
    // a 50:50 split leaves |1,1> with probability 1/2; the inverse splitter
    // bunches it (Hong-Ou-Mandel), so the spare port is empty half the time
    let input = FockDensity::number_state(vec![0, 2], &[0, 2]).unwrap();
    let out = teleport_cv_state(&input, 1, &TeleporterConfig::new(2, 1.0, 1.0).unwrap()).unwrap();
    assert!((out.herald_prob - 0.5).abs() < 1e-12);
    assert!((out.recombination_prob - 0.5).abs() < 1e-12);
    assert!((out.success_prob - 0.25).abs() < 1e-12);
    let target = FockDensity::number_state(out.state.cutoffs().to_vec(), &[0, 2]).unwrap();
    assert!(out.state.trace_distance(&target).unwrap() < 1e-12);
}

#[test]
fn coherent_fidelity_improves_with_modes() {
    let alpha = C64::from(0.6);
    let cutoff = 12;
    let input = FockDensity::coherent(alpha, cutoff).tensor(&FockDensity::vacuum(vec![0]));
    let amps: Vec<C64> = {
        let mut a = vec![C64::from((-0.18f64).exp())];
        for n in 1..=cutoff {
            let prev = a[n - 1];
            a.push(prev * alpha / (n as f64).sqrt());
        }
        a
    };
    let mut last = 0.0;
    for n in [1, 2, 4] {
        let out = teleport_cv_state(&input, 0, &TeleporterConfig::new(n, 1.0, 1.0).unwrap()).unwrap();
        let single = out.state.partial_trace(&[0]).unwrap();
        let fid = single.overlap_with_pure(&amps[..single.dim()]).unwrap();
        assert!(fid > last, "N={n}: {fid} after {last}");
        last = fid;
    }
    assert!(last > 0.99, "{last}");
}

#[test]
fn stages_multiply_to_success() {
    let st = make_tmsv(chi(0.7), 20).unwrap();
    for n in [1, 2, 4] {
        let out = teleport_cv_state(&st, 1, &TeleporterConfig::new(n, 0.5, 0.9).unwrap()).unwrap();
        let prod: f64 = out.stages.iter().map(|(_, p)| p).product();
        assert!((prod - out.success_prob).abs() < 1e-12 * out.success_prob.max(1e-300));
        assert!((out.bsm_factor - 0.5f64.powi(n as i32)).abs() < 1e-15);
        assert!((out.state.trace() - 1.0).abs() < 1e-10);
        assert!(out.state.min_eigenvalue() > -1e-10);
    }
}

fn qubit_block(c: f64) -> DMatrix<C64> {
    let n = 1.0 / (1.0 + c * c);
    let mut q = DMatrix::<C64>::zeros(4, 4);
    for (i, a) in [(0usize, 1.0), (3, c)] {
        for (j, b) in [(0usize, 1.0), (3, c)] {
            q[(i, j)] = C64::from(a * b * n);
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_mode_is_depolarizing(c in 0.05..0.9f64, f in 0.25..=1.0f64) {
        let st = make_tmsv(chi(c), 10).unwrap();
        let out = teleport_cv_state(&st, 1, &TeleporterConfig::new(1, 1.0, f).unwrap()).unwrap();
        let want = depolarize_second(&qubit_block(c), f);
        let err = (out.state.coeffs() - want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn eof_grows_with_resource_fidelity(c in 0.1..0.9f64, f in 0.5..0.99f64, df in 0.001..0.01f64) {
        let st = make_tmsv(chi(c), 10).unwrap();
        let run = |f: f64| {
            let out = teleport_cv_state(&st, 1, &TeleporterConfig::new(1, 0.5, f).unwrap()).unwrap();
            eof_two_qubit(&out.state).unwrap().eof
        };
        prop_assert!(run(f + df) >= run(f) - 1e-12);
    }

    #[test]
    fn success_is_independent_of_resource_fidelity(f in 0.25..=1.0f64, n in prop::sample::select(vec![1usize, 2])) {
        let st = make_tmsv(chi(0.6), 10).unwrap();
        let a = teleport_cv_state(&st, 1, &TeleporterConfig::new(n, 0.5, f).unwrap()).unwrap();
        let b = teleport_cv_state(&st, 1, &TeleporterConfig::new(n, 0.5, 1.0).unwrap()).unwrap();
        prop_assert!((a.herald_prob - b.herald_prob).abs() < 1e-12);
        if n == 1 {
            prop_assert!((a.success_prob - b.success_prob).abs() < 1e-12);
        }
    }
}
