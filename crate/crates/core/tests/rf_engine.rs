use classe_core::netlist::{Component, DesignConstants, Element, Netlist};
use classe_core::rf::*;
use classe_core::Complex64;
use proptest::prelude::*;

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![
        (1.0..500.0f64).prop_map(Branch::R),
        (0.1e-9..50e-9f64).prop_map(Branch::L),
        (0.1e-12..20e-12f64).prop_map(Branch::C),
        (0.1e-9..20e-9f64, 0.1e-12..20e-12f64).prop_map(|(l, c)| Branch::SeriesLc(l, c)),
    ]
}

fn element(c: DesignConstants) -> impl Strategy<Value = LadderElement> {
    prop_oneof![
        3 => branch().prop_map(LadderElement::Series),
        3 => branch().prop_map(LadderElement::Shunt),
        1 => (0.3e-3..5e-3f64, 1e-3..30e-3f64).prop_map(move |(width, length)| {
            LadderElement::Microstrip(MicrostripGeometry { width, length, eps_r: c.substrate_eps_r, h: c.substrate_h })
        }),
    ]
}

fn ladder() -> impl Strategy<Value = Vec<LadderElement>> {
    prop::collection::vec(element(DesignConstants::default()), 1..8)
}

fn abcd_s(chain: &[LadderElement], f: f64, z0: f64) -> SPoint {
    let ms: Vec<TwoPortAbcd> = chain.iter().map(|e| abcd_of(e, f).unwrap()).collect();
    abcd_to_s(&cascade(&ms).unwrap(), z0).unwrap()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn nodal_and_cascade_engines_agree(chain in ladder(), f in 0.1e9..10e9f64) {
        let c = DesignConstants::default();
        let n = ladder_netlist(&chain, c).unwrap();
        let m = s_params_at(&n, &[f]).unwrap().points[0];
        let a = abcd_s(&chain, f, c.z0);
        for (x, y) in [(m.s11, a.s11), (m.s12, a.s12), (m.s21, a.s21), (m.s22, a.s22)] {
            prop_assert!(close(x, y, 1e-6), "{x} vs {y}");
        }
    }

    #[test]
    fn passive_ladders_are_reciprocal_and_passive(chain in ladder(), f in 0.1e9..10e9f64) {
        let n = ladder_netlist(&chain, DesignConstants::default()).unwrap();
        let p = s_params_at(&n, &[f]).unwrap().points[0];
        prop_assert!(close(p.s12, p.s21, 1e-9));
        prop_assert!(p.max_singular_value() <= 1.0 + 1e-9, "{}", p.max_singular_value());
    }

    #[test]
    fn reciprocal_cascades_have_unit_determinant(chain in ladder(), f in 0.1e9..10e9f64) {
        let ms: Vec<TwoPortAbcd> = chain.iter().map(|e| abcd_of(e, f).unwrap()).collect();
        for m in &ms {
            prop_assert!((m.det() - 1.0).norm() < 1e-9 * (1.0 + (m.a * m.d).norm()));
        }
        let all = cascade(&ms).unwrap();
        prop_assert!((all.det() - 1.0).norm() < 1e-9 * (1.0 + (all.a * all.d).norm()));
    }

    #[test]
    fn grid_points_are_independent(chain in ladder(), mut fs in prop::collection::vec(0.1e9..10e9f64, 2..6)) {
        let n = ladder_netlist(&chain, DesignConstants::default()).unwrap();
        let fwd = s_params_at(&n, &fs).unwrap();
        fs.reverse();
        let rev = s_params_at(&n, &fs).unwrap();
        let mut back = rev.points.clone();
        back.reverse();
        prop_assert_eq!(fwd.points, back);
    }

    #[test]
    fn s_and_abcd_round_trip(chain in ladder(), f in 0.1e9..10e9f64) {
        let ms: Vec<TwoPortAbcd> = chain.iter().map(|e| abcd_of(e, f).unwrap()).collect();
        let m = cascade(&ms).unwrap();
        let s = abcd_to_s(&m, 50.0).unwrap();
        if s.s21.norm() > 1e-6 {
            let back = abcd_to_s(&s_to_abcd(&s, 50.0).unwrap(), 50.0).unwrap();
            prop_assert!(close(back.s11, s.s11, 1e-9) && close(back.s21, s.s21, 1e-9));
        }
    }

    #[test]
    fn touchstone_round_trip(chain in ladder()) {
        let n = ladder_netlist(&chain, DesignConstants::default()).unwrap();
        let s = s_params(&n, &FrequencyGrid::new(1e9, 4e9, 7).unwrap()).unwrap();
        let text = write_touchstone(&s, &["round trip"]).unwrap();
        let back = read_touchstone(&text).unwrap();
        prop_assert_eq!(back.z_ref, s.z_ref);
        for (a, b) in back.points.iter().zip(&s.points) {
            prop_assert!((a.freq - b.freq).abs() <= 1e-8 * b.freq);
            prop_assert!(close(a.s21, b.s21, 1e-8) && close(a.s11, b.s11, 1e-8));
        }
        prop_assert_eq!(write_touchstone(&back, &["round trip"]).unwrap(), text);
    }
}

#[test]
fn analytic_series_and_shunt_two_ports() {
    let c = DesignConstants::default();
    let z0 = c.z0;
    for f in [0.5e9, 2.4e9, 7.2e9] {
        for b in [Branch::R(33.0), Branch::L(4.7e-9), Branch::C(1.5e-12), Branch::SeriesLc(2e-9, 3e-12)] {
            let z = b.impedance(f);
            let series = s_params_at(&ladder_netlist(&[LadderElement::Series(b)], c).unwrap(), &[f]).unwrap().points[0];
            let den = z + 2.0 * z0;
            assert!(close(series.s11, z / den, 1e-9));
            assert!(close(series.s21, Complex64::new(2.0 * z0, 0.0) / den, 1e-9));
            let y = z.inv();
            let shunt = s_params_at(&ladder_netlist(&[LadderElement::Shunt(b)], c).unwrap(), &[f]).unwrap().points[0];
            let den = 2.0 + y * z0;
            assert!(close(shunt.s11, -y * z0 / den, 1e-9));
            assert!(close(shunt.s21, Complex64::new(2.0, 0.0) / den, 1e-9));
        }
    }
}

#[test]
fn matched_line_is_a_pure_delay() {
    let c = DesignConstants::default();
    let width = microstrip_synthesize(50.0, c.substrate_eps_r, c.substrate_h).unwrap();
    let g = MicrostripGeometry { width, length: 10e-3, eps_r: c.substrate_eps_r, h: c.substrate_h };
    let p = s_params_at(&ladder_netlist(&[LadderElement::Microstrip(g)], c).unwrap(), &[2.4e9]).unwrap().points[0];
    assert!(p.s11.norm() < 1e-6);
    assert!((p.s21.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn transistor_breaks_reciprocity() {
    use classe_core::classe::{default_traps, design_load_network};
    use classe_core::netlist::single_stage_template;
    let c = DesignConstants::default();
    let d = design_load_network(c.vcc, c.f0, 1.0, 7.0).unwrap();
    let n = single_stage_template(c, &d, &default_traps(c.f0).unwrap()).unwrap();
    let p = s_params_at(&n, &[c.f0]).unwrap().points[0];
    assert!(p.s21.norm() > 10.0 * p.s12.norm());
}

#[test]
fn floating_node_is_reported() {
    let mut n = Netlist::new(DesignConstants::default());
    n.push(Component::new("P1", Element::AcPort { index: 1, impedance: 50.0 }, &["a", "0"]));
    n.push(Component::new("P2", Element::AcPort { index: 2, impedance: 50.0 }, &["b", "0"]));
    n.push(Component::new("C1", Element::capacitor(1e-12), &["a", "b"]));
    n.push(Component::new("C2", Element::capacitor(1e-12), &["x", "y"]));
    n.push(Component::new("R1", Element::resistor(1.0), &["x", "y"]));
    assert!(matches!(s_params_at(&n, &[1e9]), Err(RfError::Unreachable { .. })));
}
