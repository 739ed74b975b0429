use proptest::prelude::*;
use repcomp::cv::CvRepeaterOutput;
use repcomp::dv::{purify, solve_schedule, swap_fidelity};
use repcomp::measures::{EntanglementReport, EofMethod};
use repcomp::rate::{
    batch_purification_prob, cv_repeater_rate, cv_retry_structure, dv_repeater_rate, dv_retry_structure,
    elementary_success_prob, expected_parallel_wait, monte_carlo_wait, RetryStructure,
};
use repcomp::{ChannelSpec, TwoModeCovariance};

/// sum over t >= 0 of P(max > t), by brute force
fn wait_by_series(p: f64, n: u64) -> f64 {
    let q = 1.0 - p;
    let mut s = 0.0;
    let mut qt: f64 = 1.0;
    for _ in 0..2_000_000 {
        let term = 1.0 - (1.0 - qt).powi(n as i32);
        s += term;
        if term < 1e-18 {
            break;
        }
        qt *= q;
    }
    s
}

fn cv_output(p_link: f64, p_top: f64) -> CvRepeaterOutput {
    let rep = EntanglementReport { eof: 0.2, log_negativity: 0.3, method: EofMethod::GaussianApprox };
    let v = TwoModeCovariance::vacuum();
    CvRepeaterOutput { joint_state: None, covariance: v, p_link, p_top, eof: rep, link_eof: rep, swapped: v }
}

#[test]
fn elementary_probabilities() {
    assert_eq!(elementary_success_prob(&ChannelSpec::new(0.0)), 1.0);
    assert!((elementary_success_prob(&ChannelSpec::new(200.0)) - 1e-4).abs() < 1e-18);
    assert!((elementary_success_prob(&ChannelSpec::new(100.0)) - 1e-2).abs() < 1e-16);
}

#[test]
fn parallel_wait_values() {
    let exact = 2.0 / 0.1 - 1.0 / (1.0 - 0.81);
    assert!((expected_parallel_wait(0.1, 2, 1.0) - exact).abs() < 1e-12);
    assert!((expected_parallel_wait(0.1, 2, 1.0) - 14.737).abs() < 1e-3);
    assert!((expected_parallel_wait(0.1, 2, 3e-4) - 3e-4 * exact).abs() < 1e-15);
    assert_eq!(expected_parallel_wait(0.3, 0, 1.0), 0.0);
    for (p, n) in [(0.5, 3), (0.01, 7), (0.3, 30), (0.2, 64), (0.09, 31), (1e-3, 200), (1e-4, 5000)] {
        let a = expected_parallel_wait(p, n, 1.0);
        let b = wait_by_series(p, n);
        assert!((a - b).abs() < 1e-9 * b, "p {p} n {n}: {a} vs {b}");
    }
}

#[test]
fn perfect_dv_chain() {
    // no purification, perfect teleporter: parallel wait on 2 links plus
    // one end-to-end signalling delay
    let link = ChannelSpec::new(200.0);
    let s = solve_schedule(1.0, 0.9, 2).unwrap();
    let r = dv_repeater_rate(&s, &link, 1, 1.0).unwrap();
    let t = 200.0 / 2e5;
    let want = expected_parallel_wait(1e-4, 2, t) + 2.0 * t;
    assert!((r.total_time_s - want).abs() < 1e-12 * want);
    assert!((r.pairs_per_second - 1.0 / want).abs() < 1e-12 / want);
    assert_eq!(r.component("purification_cc"), Some(0.0));
}

#[test]
fn cv_composition() {
    let link = ChannelSpec::new(100.0);
    let t = 100.0 / 2e5;
    let r = cv_repeater_rate(&cv_output(0.1, 0.5), &link).unwrap();
    let want = (14.736_842_105_263_158 * t + t) / 0.5 + 2.0 * t;
    assert!((r.total_time_s - want).abs() < 1e-12 * want);
    assert!(cv_repeater_rate(&cv_output(0.0, 0.5), &link).is_err());
    assert!(cv_repeater_rate(&cv_output(0.1, 1.5), &link).is_err());
}

#[test]
fn batch_probability_counts_every_purification() {
    // two rounds over two links with two modes: 2·2·2 first-round and
    // 1·2·2 second-round purifications
    let two = purify(purify(0.8).unwrap().0).unwrap().0;
    let s = solve_schedule(0.8, swap_fidelity(two).unwrap(), 2).unwrap();
    assert_eq!(s.rounds, 2);
    let (p1, p2) = (s.success_probs[0], s.success_probs[1]);
    let q = batch_purification_prob(&s, 2);
    assert!((q - p1.powi(8) * p2.powi(4)).abs() < 1e-15);
}

#[test]
fn components_sum_to_total() {
    let s = solve_schedule(0.8, 0.9, 2).unwrap();
    let r = dv_repeater_rate(&s, &ChannelSpec::new(50.0), 2, 0.3).unwrap();
    let sum: f64 = r.components.iter().map(|c| c.1).sum();
    assert!((sum - r.total_time_s).abs() < 1e-15 * sum);
    assert!(dv_repeater_rate(&s, &ChannelSpec::new(50.0), 2, 0.0).is_err());
}

#[test]
fn analytic_waits_agree_with_monte_carlo() {
    let t = 1e-3;
    let mut cases = vec![
        RetryStructure::Parallel { p: 0.5, n: 2, attempt_time: t },
        RetryStructure::Parallel { p: 0.05, n: 8, attempt_time: t },
        RetryStructure::Restart {
            body: Box::new(RetryStructure::Sequence(vec![
                RetryStructure::Parallel { p: 0.2, n: 3, attempt_time: t },
                RetryStructure::Fixed(2.0 * t),
            ])),
            p_success: 0.3,
        },
    ];
    let link = ChannelSpec::new(10.0);
    let s = solve_schedule(0.9, 0.9, 2).unwrap();
    cases.push(dv_retry_structure(&s, &link, 1, 0.5).unwrap());
    cases.push(cv_retry_structure(&cv_output(0.2, 0.4), &link).unwrap());
    for (i, c) in cases.iter().enumerate() {
        let mc = monte_carlo_wait(c, 100_000, 100 + i as u64).unwrap();
        let z = (mc.mean_s - c.expected()).abs() / mc.stderr_s;
        assert!(z < 3.0, "case {i}: {} vs {} ({z:.2} sigma)", mc.mean_s, c.expected());
    }
}

#[test]
fn rate_structures_agree_with_breakdowns() {
    let link = ChannelSpec::new(30.0);
    let s = solve_schedule(0.8, 0.85, 4).unwrap();
    let st = dv_retry_structure(&s, &link, 2, 0.4).unwrap();
    let r = dv_repeater_rate(&s, &link, 2, 0.4).unwrap();
    assert!((st.expected() - r.total_time_s).abs() < 1e-12 * r.total_time_s);
    let out = cv_output(0.05, 0.6);
    let st = cv_retry_structure(&out, &link).unwrap();
    let r = cv_repeater_rate(&out, &link).unwrap();
    assert!((st.expected() - r.total_time_s).abs() < 1e-12 * r.total_time_s);
}

#[test]
fn monte_carlo_rejects_bad_input() {
    let s = RetryStructure::Parallel { p: 0.5, n: 2, attempt_time: 1.0 };
    assert!(monte_carlo_wait(&s, 1, 0).is_err());
    let bad = RetryStructure::Restart { body: Box::new(s), p_success: 0.0 };
    assert!(monte_carlo_wait(&bad, 100, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rescaling_time_rescales_rates(k in 0.1..10.0f64, km in 1.0..400.0f64, fi in 0.6..1.0f64) {
        let a = ChannelSpec::new(km);
        let b = ChannelSpec::new(km).with_light_speed(2e5 * k);
        let s = solve_schedule(fi, 0.8, 2).unwrap();
        let ra = dv_repeater_rate(&s, &a, 1, 0.5).unwrap().pairs_per_second;
        let rb = dv_repeater_rate(&s, &b, 1, 0.5).unwrap().pairs_per_second;
        prop_assert!((rb - k * ra).abs() < 1e-9 * rb.abs().max(1e-300));
        let out = cv_output(0.3, 0.7);
        let ca = cv_repeater_rate(&out, &a).unwrap().pairs_per_second;
        let cb = cv_repeater_rate(&out, &b).unwrap().pairs_per_second;
        prop_assert!((cb - k * ca).abs() < 1e-12 * cb);
    }

    #[test]
    fn waits_are_monotone(p in 0.01..0.99f64, dp in 0.001..0.01f64, n in 1u64..50) {
        let w = expected_parallel_wait(p, n, 1.0);
        prop_assert!(expected_parallel_wait((p + dp).min(1.0), n, 1.0) < w);
        prop_assert!(expected_parallel_wait(p, n + 1, 1.0) > w);
        prop_assert!(w >= 1.0 / p - 1e-9);
    }

    #[test]
    fn rate_falls_with_distance(km in 1.0..300.0f64, dkm in 1.0..100.0f64, fi in 0.6..1.0f64) {
        let s = solve_schedule(fi, 0.8, 2).unwrap();
        let a = dv_repeater_rate(&s, &ChannelSpec::new(km), 1, 0.5).unwrap().pairs_per_second;
        let b = dv_repeater_rate(&s, &ChannelSpec::new(km + dkm), 1, 0.5).unwrap().pairs_per_second;
        prop_assert!(b <= a);
        if a > 0.0 {
            prop_assert!(b < a);
        }
    }
}
