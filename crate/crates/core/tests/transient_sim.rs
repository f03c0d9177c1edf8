use classe_core::classe::{default_traps, design_load_network};
use classe_core::netlist::*;
use classe_core::transient::*;
use proptest::prelude::*;

fn ideal(constants: DesignConstants) -> Netlist {
    let d = design_load_network(constants.vcc, constants.f0, 1.0, 7.0).unwrap();
    classe_core_netlist(constants, &d)
}

fn square(steps: usize) -> SimConfig {
    SimConfig {
        steps_per_period: steps,
        drive: Drive::square(BehavioralFet::ideal_switch().vth),
        ..SimConfig::default()
    }
}

fn amplifier() -> Netlist {
    let c = DesignConstants::default();
    let d = design_load_network(c.vcc, c.f0, 1.0, 7.0).unwrap();
    single_stage_template(c, &d, &default_traps(c.f0).unwrap()).unwrap()
}

fn sine(p_in: f64) -> SimConfig {
    SimConfig { drive: Drive::from_available_power(p_in), ..SimConfig::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn ideal_switch_runs_near_lossless() {
    let n = ideal(DesignConstants::default());
    let (w, r) = simulate_report(&n, &square(2048)).unwrap();
    assert_eq!(w.len(), 2048);
    assert!(r.drain_efficiency >= 0.98, "{}", r.drain_efficiency);
    assert!(r.zvs_residual <= 0.01, "{}", r.zvs_residual);
    assert!(r.overlap_power < 0.02 * r.p_dc, "{} of {}", r.overlap_power, r.p_dc);
    assert!(r.p_dc >= r.p_out * (1.0 - 1e-9));
}

#[test]
fn halving_the_step_barely_moves_the_result() {
    let n = ideal(DesignConstants::default());
    let (_, a) = simulate_report(&n, &square(2048)).unwrap();
    let (_, b) = simulate_report(&n, &square(4096)).unwrap();
    assert!(rel(a.p_out, b.p_out) < 2e-3, "{} vs {}", a.p_out, b.p_out);
    assert!(rel(a.p_dc, b.p_dc) < 2e-3, "{} vs {}", a.p_dc, b.p_dc);
    assert!(rel(a.drain_efficiency, b.drain_efficiency) < 2e-3);
}

#[test]
fn steady_state_is_periodic() {
    let (w, _) = simulate_report(&ideal(DesignConstants::default()), &square(2048)).unwrap();
    let first = [w.v_drain[0], w.i_drain[0], w.v_load[0], w.i_choke[0]];
    let peaks = [&w.v_drain, &w.i_drain, &w.v_load, &w.i_choke].map(|x| x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for k in 0..4 {
        assert!((w.closing[k] - first[k]).abs() <= 1e-3 * peaks[k], "signal {k}: {} vs {}", w.closing[k], first[k]);
    }
    assert!(w.delta <= SimConfig::default().convergence_tol);
    let dt = w.time[1] - w.time[0];
    assert!(rel(dt * w.len() as f64, 1.0 / w.f0) < 1e-12);
}

#[test]
fn lossy_switch_costs_efficiency() {
    let n = ideal(DesignConstants::default());
    let (_, good) = simulate_report(&n, &square(2048)).unwrap();
    let lossy = n.with_fet("Q1", BehavioralFet { ron: 1.0, ..BehavioralFet::ideal_switch() }).unwrap();
    let (_, bad) = simulate_report(&lossy, &square(2048)).unwrap();
    assert!(bad.drain_efficiency < good.drain_efficiency, "{} vs {}", bad.drain_efficiency, good.drain_efficiency);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn supply_scaling_scales_power_quadratically(k in 0.5..2.0f64) {
        let c = DesignConstants::default();
        let base = ideal(c);
        let mut scaled = base.clone();
        scaled.constants.vcc = c.vcc * k;
        for comp in &mut scaled.components {
            if let Element::DcSource { voltage } = &mut comp.element {
                *voltage *= k;
            }
        }
        let (_, a) = simulate_report(&base, &square(1024)).unwrap();
        let (_, b) = simulate_report(&scaled, &square(1024)).unwrap();
        prop_assert!(rel(b.p_out, a.p_out * k * k) < 1e-6, "{} vs {}", b.p_out, a.p_out * k * k);
        prop_assert!(rel(b.p_dc, a.p_dc * k * k) < 1e-6);
    }

    #[test]
    fn amplifier_never_creates_energy(pin_dbm in -10.0..20.0f64) {
        let p_in = 1e-3 * 10f64.powf(pin_dbm / 10.0);
        let (_, r) = simulate_report(&amplifier(), &sine(p_in)).unwrap();
        prop_assert!(r.p_dc * 1.01 >= r.p_out - p_in, "p_dc {} p_out {} p_in {}", r.p_dc, r.p_out, p_in);
        prop_assert!(r.p_out > 0.0);
    }
}

#[test]
fn undriven_amplifier_delivers_nothing() {
    let (_, r) = simulate_report(&amplifier(), &sine(0.0)).unwrap();
    assert!(r.p_out < 1e-12, "{}", r.p_out);
    assert!(r.p_dc > 0.0);
}

#[test]
fn warm_started_runs_match_cold_runs() {
    let n = amplifier();
    let amps: Vec<f64> = [0.0, 10.0].iter().map(|d: &f64| Drive::from_available_power(1e-3 * 10f64.powf(d / 10.0)).amplitude).collect();
    let warm = simulate_amplitudes(&n, &SimConfig::default(), &amps).unwrap();
    let cold = simulate(&n, &SimConfig { drive: Drive { amplitude: amps[1], ..Drive::default() }, ..SimConfig::default() }).unwrap();
    let a = steady_state_report(warm[1].as_ref().unwrap(), n.constants.vcc);
    let b = steady_state_report(&cold, n.constants.vcc);
    assert!(rel(a.p_out, b.p_out) < 1e-4, "{} vs {}", a.p_out, b.p_out);
}

#[test]
fn configuration_is_checked() {
    let n = ideal(DesignConstants::default());
    let bad = SimConfig { steps_per_period: 16, ..square(2048) };
    assert!(matches!(simulate(&n, &bad), Err(SimError::Config(_))));
    let bad = SimConfig { drive: Drive { amplitude: -1.0, ..Drive::default() }, ..SimConfig::default() };
    assert!(matches!(simulate(&n, &bad), Err(SimError::Config(_))));
    let bad = SimConfig { max_periods: 2, convergence_tol: 1e-15, ..square(512) };
    assert!(matches!(simulate(&n, &bad), Err(SimError::NotConverged { .. })));
}

#[test]
fn square_drive_needs_a_single_switch() {
    let c = DesignConstants::default();
    let d = design_load_network(c.vcc, c.f0, 1.0, 7.0).unwrap();
    let t = default_traps(c.f0).unwrap();
    let n = two_stage_template(c, &d, &d, &t, &t).unwrap();
    assert!(matches!(simulate(&n, &square(512)), Err(SimError::Unsupported(_))));
}

#[test]
fn waveform_csv_has_one_row_per_sample() {
    let (w, _) = simulate_report(&ideal(DesignConstants::default()), &square(512)).unwrap();
    let csv = waveform_csv(&w);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(WAVEFORM_CSV_HEADER));
    assert_eq!(lines.count(), 512);
    assert_eq!(csv, waveform_csv(&w));
}
