use haptica::actuator::*;
use proptest::prelude::*;

const DT: f64 = 1e-5;

fn run(p: &ActuatorParams, mode: ActuatorMode, s0: ActuatorState, cmd: f64, ext: f64, n: usize) -> Vec<ActuatorState> {
    let mut s = s0;
    let mut out = vec![s];
    for _ in 0..n {
        s = step(&s, cmd, ext, DT, p, mode).unwrap().0;
        out.push(s);
    }
    out
}

#[test]
fn motor_constant_times_current() {
    let p = ActuatorParams::default();
    let m = motor_force(10.0, &p);
    assert!((m.force - 32.5).abs() < 1e-12 && !m.saturated);
    let m = motor_force(40.0, &p);
    assert_eq!(m.force, 100.0);
    assert!(m.saturated);
}

#[test]
fn driver_lag_is_exact_under_held_command() {
    let p = ActuatorParams::default();
    let mut i = 0.0;
    for _ in 0..1000 {
        i = driver_update(i, 2.0, &p, DT);
    }
    let once = driver_update(0.0, 2.0, &p, 1000.0 * DT);
    let exact = 2.0 * (1.0 - (-std::f64::consts::TAU * DEFAULT_DRIVER_POLE_HZ * 0.01).exp());
    assert!((i - once).abs() < 1e-12);
    assert!((i - exact).abs() < 1e-12);
}

#[test]
fn stiction_holds_below_breakaway() {
    let p = ActuatorParams::default();
    for mode in [ActuatorMode::Lumped, ActuatorMode::TwoMass] {
        let tr = run(&p, mode, ActuatorState::default(), 0.0, 4.0, 20_000);
        let last = tr.last().unwrap();
        assert_eq!(last.rod_velocity, 0.0, "{mode:?}");
        assert!(last.rod_position.abs() < 1e-6, "{mode:?}: {}", last.rod_position);
    }
}

#[test]
fn breakaway_above_static_friction() {
    let p = ActuatorParams::default();
    let tr = run(&p, ActuatorMode::Lumped, ActuatorState::default(), 0.0, -8.0, 10_000);
    // First-order approach to (F - F_s)/c with time constant m/c.
    let v = tr.last().unwrap().rod_velocity;
    let vinf = (8.0 - 5.26) / p.viscous_coeff;
    let exact = vinf * (1.0 - (-0.1 * p.viscous_coeff / p.lumped_mass()).exp());
    assert!((v - exact).abs() < 1e-3 * exact, "{v} vs {exact}");
}

#[test]
fn constant_force_velocity_is_exact_without_friction() {
    let p = ActuatorParams::default().frictionless();
    let tr = run(&p, ActuatorMode::Lumped, ActuatorState::default(), 0.0, -3.0, 10_000);
    let v = tr.last().unwrap().rod_velocity;
    assert!((v - 3.0 * 0.1 / p.lumped_mass()).abs() < 1e-9);
}

#[test]
fn frictionless_two_mass_conserves_energy() {
    let p = ActuatorParams { driver_pole_hz: None, ..ActuatorParams::default().frictionless() };
    let s0 = ActuatorState { rotor_position: 1e-3, ..Default::default() };
    let e0 = s0.mechanical_energy(&p, ActuatorMode::TwoMass);
    let tr = run(&p, ActuatorMode::TwoMass, s0, 0.0, 0.0, 100_000);
    for s in &tr {
        let e = s.mechanical_energy(&p, ActuatorMode::TwoMass);
        assert!((e - e0).abs() < 0.01 * e0, "{e} vs {e0}");
    }
    // Momentum is conserved exactly by the symmetric belt force.
    let last = tr.last().unwrap();
    let mom = p.rotor_mass * last.rotor_velocity + p.rod_mass * last.rod_velocity;
    assert!(mom.abs() < 1e-12);
}

#[test]
fn friction_only_dissipates_lumped() {
    let p = ActuatorParams::default();
    let s0 = ActuatorState { rod_velocity: 0.5, rotor_velocity: 0.5, ..Default::default() };
    let tr = run(&p, ActuatorMode::Lumped, s0, 0.0, 0.0, 50_000);
    for w in tr.windows(2) {
        assert!(w[1].mechanical_energy(&p, ActuatorMode::Lumped) <= w[0].mechanical_energy(&p, ActuatorMode::Lumped));
    }
    assert_eq!(tr.last().unwrap().rod_velocity, 0.0);
}

#[test]
fn friction_only_dissipates_two_mass() {
    let p = ActuatorParams::default();
    let s0 = ActuatorState { rod_velocity: 0.5, rotor_velocity: 0.5, rotor_position: 2e-4, ..Default::default() };
    let tr = run(&p, ActuatorMode::TwoMass, s0, 0.0, 0.0, 100_000);
    let e: Vec<f64> = tr.iter().map(|s| s.mechanical_energy(&p, ActuatorMode::TwoMass)).collect();
    // Semi-implicit Euler wiggles within a belt period; compare 1 ms blocks.
    let blocks: Vec<f64> = e.chunks(100).map(|c| c.iter().cloned().fold(f64::MIN, f64::max)).collect();
    for w in blocks.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-3) + 1e-12, "{} > {}", w[1], w[0]);
    }
    assert!(e.last().unwrap() < &(0.01 * e[0]));
}

#[test]
fn stiff_belt_two_mass_matches_lumped() {
    let mut p = ActuatorParams::default();
    p.belt_stiffness = 1e5;
    p.coulomb_on = Body::Rod;
    p.viscous_on = Body::Rod;
    let s = SimSettings::default();
    let ctl = |t: f64, _: &ActuatorState| if t >= 0.01 { 3.0 } else { 0.0 };
    let a = simulate(&p, ActuatorMode::Lumped, s, 0.2, ActuatorState::default(), ctl, |_, _| 0.0).unwrap();
    let b = simulate(&p, ActuatorMode::TwoMass, s, 0.2, ActuatorState::default(), ctl, |_, _| 0.0).unwrap();
    let xa = a.last().unwrap().x;
    let xb = b.last().unwrap().x;
    assert!((xa - xb).abs() < 1e-3 * xa.abs(), "{xa} vs {xb}");
}

#[test]
fn trace_rows_at_control_rate() {
    let p = ActuatorParams::default();
    let rows = simulate(&p, ActuatorMode::TwoMass, SimSettings::default(), 0.05, ActuatorState::default(), |_, _| 1.0, |_, _| 0.0)
        .unwrap();
    assert_eq!(rows.len(), 51);
    assert!((rows[50].t - 0.05).abs() < 1e-12);
    assert_eq!(rows[0].current, 0.0);
    assert!(rows[50].current > 0.0 && rows[50].current < 1.0);
}

#[test]
fn bad_time_step_rejected() {
    let p = ActuatorParams::default();
    assert!(step(&ActuatorState::default(), 0.0, 0.0, 0.0, &p, ActuatorMode::Lumped).is_err());
    assert!(step(&ActuatorState::default(), 0.0, 0.0, 0.1, &p, ActuatorMode::Lumped).is_err());
}

#[test]
fn invalid_params_rejected() {
    let p = ActuatorParams { rotor_mass: -1.0, ..ActuatorParams::default() };
    assert!(p.validate().is_err());
    let p = ActuatorParams::default();
    assert!(frequency_response(&p, ActuatorMode::TwoMass, 0.0, &[10.0], &FrequencyResponseSettings::default()).is_err());
    assert!(frequency_response(&p, ActuatorMode::TwoMass, 10.0, &[-1.0], &FrequencyResponseSettings::default()).is_err());
}

#[test]
fn simulated_clamped_response_matches_analytic() {
    let p = ActuatorParams::default();
    let st = FrequencyResponseSettings::default();
    for f in [10.0, 40.0, 90.0, 150.0] {
        let pt = clamped_response_at(&p, ActuatorMode::TwoMass, 10.0, f, &st).unwrap();
        let oracle = 20.0 * clamped_two_mass_gain(&p, f).log10();
        assert!((pt.gain_db - oracle).abs() < 0.5, "{f} Hz: {} vs {oracle}", pt.gain_db);
    }
}

#[test]
fn analytic_peak_near_rotor_resonance() {
    let p = ActuatorParams::default();
    let fr = (p.belt_k() / p.rotor_mass).sqrt() / std::f64::consts::TAU;
    let peak = (500..1500)
        .map(|i| i as f64 * 0.1)
        .max_by(|a, b| clamped_two_mass_gain(&p, *a).total_cmp(&clamped_two_mass_gain(&p, *b)))
        .unwrap();
    assert!((peak - fr).abs() < 2.0, "{peak} vs {fr}");
}

#[test]
fn calibrated_pole_reproduces_default() {
    let p = ActuatorParams::default();
    let pole = calibrate_driver_pole(&p, 30.0).unwrap();
    assert!((pole - DEFAULT_DRIVER_POLE_HZ).abs() < 0.05, "{pole}");
}

#[test]
fn sinusoid_fit_recovers_known_signal() {
    let t: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-3).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.0 * (10.0 * t + 0.4).sin() + 0.5).collect();
    let (a, ph, rel) = fit_sinusoid(&t, &y, 10.0).unwrap();
    assert!((a - 3.0).abs() < 1e-9 && (ph - 0.4).abs() < 1e-9 && rel < 1e-9);
}

#[test]
fn helpers_on_frequency_lists() {
    let f = log_frequencies(5.0, 300.0, 60);
    assert_eq!(f.len(), 60);
    assert!((f[0] - 5.0).abs() < 1e-12 && (f[59] - 300.0).abs() < 1e-9);
    let pts: Vec<FrequencyPoint> = [(10.0, 0.0), (20.0, -2.0), (40.0, -4.0)]
        .iter()
        .map(|&(f, g)| FrequencyPoint { frequency_hz: f, gain_db: g, phase_deg: 0.0 })
        .collect();
    let x = minus_3db_crossing(&pts).unwrap();
    assert!((x - 20.0 * 2f64.sqrt()).abs() < 1e-9);
    assert_eq!(resonance_peak(&pts).unwrap().frequency_hz, 10.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// With the motor off and no friction, the work done by a held external
    /// force equals the gain in mechanical energy (to integrator accuracy).
    #[test]
    fn work_energy_balance(f in -20.0f64..20.0, two in any::<bool>()) {
        let p = ActuatorParams { driver_pole_hz: None, ..ActuatorParams::default().frictionless() };
        let mode = if two { ActuatorMode::TwoMass } else { ActuatorMode::Lumped };
        let tr = run(&p, mode, ActuatorState::default(), 0.0, -f, 20_000);
        let last = tr.last().unwrap();
        let work = f * last.rod_position;
        let e = last.mechanical_energy(&p, mode);
        prop_assert!((e - work).abs() <= 1e-3 * work.abs() + 1e-9, "{e} vs {work}");
    }

    #[test]
    fn friction_never_reverses_motion(v0 in -1.0f64..1.0) {
        let p = ActuatorParams::default();
        let s0 = ActuatorState { rod_velocity: v0, rotor_velocity: v0, ..Default::default() };
        let tr = run(&p, ActuatorMode::Lumped, s0, 0.0, 0.0, 30_000);
        prop_assert!(tr.iter().all(|s| s.rod_velocity * v0 >= 0.0));
    }
}
