use classe_core::classe::*;
use classe_core::netlist::{single_stage_template, DesignConstants};
use classe_core::rf::{db, s_params_at};
use classe_core::Complex64;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #[test]
    fn window_ratio_follows_capacitor_ratio(c1 in 0.1e-12..20e-12f64, c2 in 0.1e-12..20e-12f64, l in 0.1e-9..20e-9f64) {
        let (r1, r2) = trap_window(c1, c2, l).unwrap();
        prop_assert!(r1 < r2);
        prop_assert!(rel(r2 / r1, (1.0 + c1 / c2).sqrt()) < 1e-9);
    }

    #[test]
    fn parallel_cap_is_symmetric_and_smaller(a in 1e-15..1e-9f64, b in 1e-15..1e-9f64) {
        let ab = parallel_cap(a, b).unwrap();
        prop_assert_eq!(ab, parallel_cap(b, a).unwrap());
        prop_assert!(ab < a && ab < b);
    }

    #[test]
    fn designed_traps_straddle_the_fundamental(l in 0.5e-9..5e-9f64, h in 2u32..=3) {
        let t = design_harmonic_trap(2.4e9, h, l).unwrap();
        prop_assert!(t.r1 < 2.4e9 && 2.4e9 < t.r2);
        prop_assert!(t.window_holds());
        prop_assert!(rel(t.r2, 2.4e9 * f64::from(h)) < 1e-12);
    }

    #[test]
    fn load_network_scaling(vcc in 1.0..12.0f64, f0 in 0.5e9..6e9f64, p in 0.1..5.0f64, q in 3.0..20.0f64, k in 1.1..3.0f64) {
        let d = design_load_network(vcc, f0, p, q).unwrap();
        let dv = design_load_network(vcc * k, f0, p, q).unwrap();
        prop_assert!(rel(dv.r_load, d.r_load * k * k) < 1e-12);
        // at fixed r_load the shunt capacitor goes as 1/f0
        let df = design_load_network(vcc, f0 * k, p, q).unwrap();
        prop_assert!(rel(df.r_load, d.r_load) < 1e-12);
        prop_assert!(rel(df.c_shunt, d.c_shunt / k) < 1e-12);
        prop_assert!(rel(d.series_reactance(), 1.1525 * d.r_load) < 1e-9);
        prop_assert!(d.l_choke >= 20.0 * d.l_series * (1.0 - 1e-12));
    }

    #[test]
    fn l_sections_present_the_conjugate(
        ra in 1.0..200.0f64, xa in -200.0..200.0f64,
        rb in 1.0..200.0f64, xb in -200.0..200.0f64,
    ) {
        let (from, to) = (Complex64::new(ra, xa), Complex64::new(rb, xb));
        let f0 = 2.4e9;
        for s in l_section_solutions(from, to, f0).unwrap() {
            let z = s.input_impedance(from, f0);
            prop_assert!((z - to.conj()).norm() < 1e-6 * (1.0 + to.norm()), "{z} vs {}", to.conj());
        }
    }
}

#[test]
fn worked_trap_point() {
    let (r1, r2) = trap_window(2.2e-12, 2.2e-12, 2.2e-9).unwrap();
    assert!(rel(r1, 2.2876e9) < 1e-4);
    assert!(rel(r2, 3.2354e9) < 1e-4);
}

#[test]
fn nominal_load_network() {
    let d = design_load_network(4.2, 2.4e9, 1.0, 7.0).unwrap();
    assert!(rel(d.r_load, 10.175) < 1e-3);
    assert!(rel(d.c_shunt, 1.197e-12) < 1e-3);
    assert!(rel(d.predicted_peak_voltage(), 14.96) < 1e-3);
    let half = design_load_network(4.2, 2.4e9, 2.0, 7.0).unwrap();
    assert_eq!(half.r_load, d.r_load / 2.0);
}

#[test]
fn invalid_designs_are_rejected() {
    assert!(design_load_network(-1.0, 2.4e9, 1.0, 7.0).is_err());
    assert!(design_load_network(4.2, 2.4e9, 1.0, 2.9).is_err());
    assert!(trap_window(1e-12, 1e-12, 0.0).is_err());
    assert!(design_harmonic_trap(2.4e9, 4, 1e-9).is_err());
}

#[test]
fn every_trap_notches_its_harmonic_in_the_amplifier() {
    let c = DesignConstants::default();
    let d = design_load_network(c.vcc, c.f0, 1.0, 7.0).unwrap();
    let bare = single_stage_template(c, &d, &[]).unwrap();
    for l in [0.5e-9, 1e-9, 2.2e-9, 5e-9] {
        let traps = [design_harmonic_trap(c.f0, 2, l).unwrap(), design_harmonic_trap(c.f0, 3, l).unwrap()];
        let trapped = single_stage_template(c, &d, &traps).unwrap();
        for h in [2.0, 3.0] {
            let f = h * c.f0;
            let with = db(s_params_at(&trapped, &[f]).unwrap().points[0].s21);
            let without = db(s_params_at(&bare, &[f]).unwrap().points[0].s21);
            assert!(with <= without - 20.0, "l = {l}, h = {h}: {with} vs {without}");
        }
    }
}
