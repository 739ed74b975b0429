use proptest::prelude::*;
use repcomp::gaussian::{cv_teleport, cv_teleport_gain, entanglement_swap, loss_map, tmsv_covariance};
use repcomp::{make_tmsv, TmsvParam, TwoModeCovariance};

fn tmsv(chi: f64) -> TwoModeCovariance {
    tmsv_covariance(TmsvParam::new(chi).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn tmsv_blocks() {
    let s = tmsv(0.5);
    assert!(close(s.cov[(0, 0)], 5.0 / 3.0, 1e-14));
    assert!(close(s.cov[(2, 2)], 5.0 / 3.0, 1e-14));
    assert!(close(s.cov[(0, 2)], 4.0 / 3.0, 1e-14));
    assert!(close(s.cov[(1, 3)], -4.0 / 3.0, 1e-14));
    let s = tmsv(0.9);
    assert!(close(s.cov[(0, 0)], 1.81 / 0.19, 1e-12));
    assert!(close(s.cov[(0, 0)], 9.5263, 1e-4));
    assert!(close(s.cov[(0, 2)], 9.4737, 1e-4));
    assert_eq!(tmsv(0.0).cov, TwoModeCovariance::vacuum().cov);
    // pure: both symplectic eigenvalues are 1
    let (lo, hi) = tmsv(0.7).symplectic_eigenvalues();
    assert!(close(lo, 1.0, 1e-10) && close(hi, 1.0, 1e-10));
}

#[test]
fn lossy_arm() {
    let s = loss_map(&tmsv(0.5), 1, 0.5).unwrap();
    assert!(close(s.cov[(2, 2)], 4.0 / 3.0, 1e-14));
    assert!(close(s.cov[(0, 0)], 5.0 / 3.0, 1e-14));
    assert!(close(s.cov[(0, 2)], 4.0 / 3.0 * 0.5f64.sqrt(), 1e-14));
    let gone = loss_map(&tmsv(0.5), 1, 0.0).unwrap();
    assert!(close(gone.cov[(2, 2)], 1.0, 1e-15) && gone.cov[(0, 2)] == 0.0);
    assert!(loss_map(&tmsv(0.5), 2, 0.5).is_err());
    assert!(loss_map(&tmsv(0.5), 0, -0.1).is_err());
}

#[test]
fn teleporting_vacuum() {
    let vac = TwoModeCovariance::vacuum();
    // a vacuum resource adds two vacuum units
    let out = cv_teleport(&vac, 1, &vac).unwrap();
    assert!(close(out.cov[(2, 2)], 3.0, 1e-14) && close(out.cov[(3, 3)], 3.0, 1e-14));
    for chi in [0.3, 0.9, 0.999] {
        let out = cv_teleport(&vac, 1, &tmsv(chi)).unwrap();
        let want = 1.0 + 2.0 * (1.0 - chi) / (1.0 + chi);
        assert!(close(out.cov[(2, 2)], want, 1e-10), "chi {chi}: {} vs {want}", out.cov[(2, 2)]);
    }
}

#[test]
fn teleport_output_replaces_the_sent_arm() {
    let s = loss_map(&tmsv(0.6), 0, 0.3).unwrap();
    let r = tmsv(0.8);
    let a = cv_teleport(&s, 0, &r).unwrap();
    let b = cv_teleport(&s.swapped(), 1, &r).unwrap().swapped();
    assert!(a.max_abs_diff(&b) < 1e-13);
    // the kept arm is untouched
    assert!(close(a.cov[(2, 2)], s.cov[(2, 2)], 1e-14));
}

#[test]
fn zero_gain_discards_the_input() {
    let r = tmsv(0.5);
    let out = cv_teleport_gain(&tmsv(0.9), 1, &r, 0.0).unwrap();
    assert!(close(out.cov[(2, 2)], r.cov[(2, 2)], 1e-14));
    assert!(out.cov[(0, 2)].abs() < 1e-15);
}

#[test]
fn swap_of_pure_links() {
    // x_out = x_C + x_B1 - x_B2 with Cov(x_C, x_B2) = c, likewise for p
    let s = tmsv(0.5);
    let (a, c) = (s.cov[(0, 0)], s.cov[(0, 2)]);
    let out = entanglement_swap(&s, &s, 1.0).unwrap();
    let b = 3.0 * a - 2.0 * c;
    assert!(close(out.cov[(0, 0)], a, 1e-14));
    assert!(close(out.cov[(2, 2)], b, 1e-12), "{} vs {b}", out.cov[(2, 2)]);
    assert!(close(out.cov[(0, 2)].abs(), c, 1e-12));
    assert!(out.is_physical(1e-10));
}

#[test]
fn fock_moments_match() {
    for chi in [0.2, 0.5, 0.7] {
        let p = TmsvParam::new(chi).unwrap();
        let f = make_tmsv(p, 60).unwrap().apply_loss(1, 0.4).unwrap().moments().unwrap();
        let g = loss_map(&tmsv(chi), 1, 0.4).unwrap();
        assert!(f.max_abs_diff(&g) < 1e-8, "chi {chi}: {}", f.max_abs_diff(&g));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn maps_keep_physical_states(chi in 0.0..0.99f64, r in 0.0..0.99f64, e0 in 0.0..=1.0f64, e1 in 0.0..=1.0f64, g in 0.0..3.0f64) {
        let s = loss_map(&loss_map(&tmsv(chi), 0, e0).unwrap(), 1, e1).unwrap();
        prop_assert!(s.is_physical(1e-9));
        let (lo, _) = s.symplectic_eigenvalues();
        prop_assert!(lo >= 1.0 - 1e-9);
        let t = cv_teleport_gain(&s, 1, &tmsv(r), g).unwrap();
        prop_assert!(t.is_physical(1e-9));
        let w = entanglement_swap(&s, &s, g).unwrap();
        prop_assert!(w.is_physical(1e-9));
    }

    #[test]
    fn loss_composes(chi in 0.0..0.99f64, a in 0.0..=1.0f64, b in 0.0..=1.0f64, arm in 0usize..2) {
        let s = tmsv(chi);
        let twice = loss_map(&loss_map(&s, arm, a).unwrap(), arm, b).unwrap();
        let once = loss_map(&s, arm, a * b).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-12 * s.cov[(0, 0)].max(1.0));
    }

    #[test]
    fn better_resources_teleport_better(chi in 0.0..0.98f64, dr in 0.001..0.01f64) {
        let vac = TwoModeCovariance::vacuum();
        let lo = cv_teleport(&vac, 1, &tmsv(chi)).unwrap().cov[(2, 2)];
        let hi = cv_teleport(&vac, 1, &tmsv(chi + dr)).unwrap().cov[(2, 2)];
        prop_assert!(hi < lo);
        prop_assert!(hi > 1.0);
    }
}
