use haptica::actuator::{ActuatorMode, ActuatorParams};
use haptica::mechanisms::{Mat2, ParallelLinear, Vec2};
use haptica::rendering::*;
use proptest::prelude::*;

fn wall(k: f64) -> VirtualFixture {
    VirtualFixture { shape: FixtureShape::Wall1D { position: 0.0, sign: 1.0 }, stiffness: k, clamps: ForceClamps::default() }
}

fn boxed() -> VirtualFixture {
    VirtualFixture {
        shape: FixtureShape::Box2D { center: Vec2::new(0.0, 0.45), half_extents: Vec2::new(0.15, 0.15), corner_radius: 0.02 },
        stiffness: 2.0,
        clamps: ForceClamps::default(),
    }
}

#[test]
fn twelve_bit_resolution() {
    let d = encoder_resolution(0.028245, 12);
    assert!((d - std::f64::consts::TAU * 0.028245 / 4096.0).abs() < 1e-15);
    assert!((d - 43.33e-6).abs() < 0.01e-6);
}

#[test]
fn wall_force_only_inside() {
    let w = wall(2.0);
    assert_eq!(fixture_force(Vec2::new(-0.01, 0.0), &w), Vec2::zeros());
    let f = fixture_force(Vec2::new(0.0125, 0.0), &w);
    assert!((f.x + 25.0).abs() < 1e-9 && f.y == 0.0);
}

#[test]
fn box_edges_push_outward() {
    let b = boxed();
    // 12.5 mm below the top edge.
    let f = fixture_force(Vec2::new(0.05, 0.5875), &b);
    assert!((f - Vec2::new(0.0, 25.0)).norm() < 1e-9, "{f}");
    let f = fixture_force(Vec2::new(-0.14, 0.45), &b);
    assert!((f - Vec2::new(-20.0, 0.0)).norm() < 1e-9, "{f}");
    assert_eq!(fixture_force(Vec2::new(0.0, 0.61), &b), Vec2::zeros());
    // Outside the rounded corner but inside the sharp one.
    assert_eq!(fixture_force(Vec2::new(0.148, 0.598), &b), Vec2::zeros());
}

#[test]
fn feedforward_without_clamping_is_transpose() {
    let j = Mat2::new(0.8, -0.3, 0.4, 0.9);
    let f = Vec2::new(10.0, -5.0);
    let c = feedforward_torque(&j, f, &ForceClamps::default()).unwrap();
    assert!((c.tau - j.transpose() * f).norm() < 1e-12);
    assert!(!c.clamped());
}

#[test]
fn singular_jacobian_rejected() {
    let j = Mat2::new(1.0, 2.0, 2.0, 4.0);
    assert!(matches!(feedforward_torque(&j, Vec2::x(), &ForceClamps::default()), Err(RenderError::Singular(_))));
}

#[test]
fn invalid_fixtures_rejected() {
    let mut b = boxed();
    b.stiffness = -1.0;
    assert!(b.validate().is_err());
    let b = VirtualFixture {
        shape: FixtureShape::Box2D { center: Vec2::zeros(), half_extents: Vec2::new(0.1, 0.1), corner_radius: 0.2 },
        ..boxed()
    };
    assert!(b.validate().is_err());
    let w = VirtualFixture { shape: FixtureShape::Wall1D { position: 0.0, sign: 0.5 }, ..wall(1.0) };
    assert!(w.validate().is_err());
}

#[test]
fn classifier_ignores_drift_and_flags_sustained_oscillation() {
    let rate = 1000.0;
    let c = OscillationClassifier::default();
    let thr = 2.0 * encoder_resolution(0.028245, 12);
    let ramp: Vec<f64> = (0..1500).map(|i| 0.3 * i as f64 / rate).collect();
    let (a, span) = c.measure(&ramp, rate, thr);
    assert!(a < 1e-12 && span == 0.0);
    let osc = |amp: f64, dur: f64| -> Vec<f64> {
        (0..1500)
            .map(|i| {
                let t = i as f64 / rate;
                if t < dur { amp * (std::f64::consts::TAU * 40.0 * t).sin() } else { 0.0 }
            })
            .collect()
    };
    let (_, span) = c.measure(&osc(3.0 * thr, 1.0), rate, thr);
    assert!(span >= c.min_span, "{span}");
    let (_, span) = c.measure(&osc(3.0 * thr, 0.1), rate, thr);
    assert!(span < c.min_span, "short burst: {span}");
    let (_, span) = c.measure(&osc(0.5 * thr, 1.0), rate, thr);
    assert_eq!(span, 0.0);
}

#[test]
fn soft_wall_is_stable() {
    let op = OperatorModel::new(vec![(0.0, Vec2::zeros())]);
    let p = classify_stiffness(&ActuatorParams::default(), &wall(1.0), &op, 2.0, &LimitSettings::default()).unwrap();
    assert!(!p.unstable, "{p:?}");
}

#[test]
fn press_release_reaches_scheduled_force() {
    let op = OperatorModel::new(vec![(0.0, Vec2::zeros())]);
    let prof = PressRelease::default();
    let k = 20.0;
    let o = prof.operator(&op, 0.0, k);
    let settings = RenderSettings { quantize: false, ..RenderSettings::default() };
    let tr = simulate_wall_interaction(&ActuatorParams::default(), ActuatorMode::TwoMass, &wall(k), &o, prof.duration(), &settings)
        .unwrap();
    let i = ((prof.approach + 0.4) * 1000.0) as usize;
    // Friction holds some of the press; the wall carries the rest.
    assert!((-tr[i].desired - prof.peak_force).abs() < 8.0, "{}", tr[i].desired);
}

#[test]
fn sampled_wall_energy_is_covered_by_dissipation() {
    // Energy the delayed, sampled wall puts into the rod must not exceed
    // what friction takes out over the same run.
    let act = ActuatorParams::default();
    let op = OperatorModel::new(vec![(0.0, Vec2::zeros())]);
    let prof = PressRelease::default();
    for k in [2.0, 10.0] {
        let o = prof.operator(&op, 0.0, k);
        let settings = RenderSettings { quantize: false, ..RenderSettings::default() };
        let tr = simulate_wall_interaction(&act, ActuatorMode::Lumped, &wall(k), &o, prof.duration(), &settings).unwrap();
        let (mut wall_work, mut friction) = (0.0, 0.0);
        for w in tr.windows(3) {
            let dx = w[2].x - w[1].x;
            // One tick of delay: the command from tick k-1 acts over [k, k+1).
            wall_work += w[0].command * dx;
            friction += act.static_friction * dx.abs() + act.viscous_coeff * dx * dx * 1000.0;
        }
        // Energy still stored in the wall spring at the end of the run.
        let spring_end = 0.5 * k * 1000.0 * tr.last().unwrap().x.max(0.0).powi(2);
        let generated = wall_work + spring_end;
        assert!(generated < friction, "k={k}: generated {generated} J vs dissipated {friction} J");
    }
}

#[test]
fn motor_off_commands_nothing() {
    let mech = ParallelLinear::with_pivots(Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0));
    let op = OperatorModel::new(vec![(0.0, Vec2::new(0.0, 0.7)), (1.0, Vec2::new(0.0, 0.58))]);
    let s = RenderSettings { motor_enabled: false, ..RenderSettings::default() };
    let tr = simulate_interaction(&mech, &ActuatorParams::default(), &boxed(), &op, 2.0, &s).unwrap();
    // Commands are still computed but the rod goes where the hand takes it.
    let last = tr.ticks.last().unwrap();
    assert!(last.x.y < 0.6);
    assert!(last.desired.y > 0.0);
}

#[test]
fn sweep_must_increase() {
    let op = OperatorModel::new(vec![(0.0, Vec2::zeros())]);
    let s = LimitSettings::default();
    let act = ActuatorParams::default();
    assert!(stiffness_render_limit(&act, &wall(1.0), &op, &[], &s).is_err());
    assert!(stiffness_render_limit(&act, &wall(1.0), &op, &[10.0, 5.0], &s).is_err());
}

#[test]
fn linear_sweep_endpoints() {
    let s = linear_sweep(10.0, 300.0, 30);
    assert_eq!(s.len(), 30);
    assert_eq!(s[0], 10.0);
    assert!((s[29] - 300.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn quantization_error_within_half_step(x in -1.0f64..1.0, bits in 8u32..16) {
        let d = encoder_resolution(0.028245, bits);
        let q = quantize(x, 0.028245, bits);
        prop_assert!((q - x).abs() <= 0.5 * d * (1.0 + 1e-9));
        prop_assert_eq!(quantize(q, 0.028245, bits), q);
    }

    #[test]
    fn clamps_bound_and_preserve_direction(fx in -400.0f64..400.0, fy in -400.0f64..400.0,
                                           a in 0.3f64..1.0, b in -0.6f64..0.6) {
        let j = Mat2::new(a, b, -b, a);
        let f = Vec2::new(fx, fy);
        prop_assume!(f.norm() > 1e-6);
        let cl = ForceClamps::default();
        let c = feedforward_torque(&j, f, &cl).unwrap();
        prop_assert!(c.task_force.norm() <= cl.task * (1.0 + 1e-12));
        prop_assert!(c.tau.amax() <= cl.actuator * (1.0 + 1e-12));
        let cross = c.task_force.x * f.y - c.task_force.y * f.x;
        prop_assert!(cross.abs() <= 1e-9 * f.norm() * c.task_force.norm().max(1e-12));
        prop_assert!(c.task_force.dot(&f) >= 0.0);
        prop_assert!((c.tau - j.transpose() * c.task_force).norm() < 1e-9);
    }

    #[test]
    fn box_force_is_continuous(x in -0.2f64..0.2, y in 0.25f64..0.65, dx in -1e-6f64..1e-6, dy in -1e-6f64..1e-6) {
        // Within the contact band (depth < 15 mm, below the 20 mm corner
        // radius) the field is Lipschitz with constant at most 4K.
        let b = boxed();
        let f0 = fixture_force(Vec2::new(x, y), &b);
        prop_assume!(f0.norm() < 30.0);
        let d = f0 - fixture_force(Vec2::new(x + dx, y + dy), &b);
        prop_assert!(d.norm() <= 4.0 * 2000.0 * dx.hypot(dy) + 1e-9);
    }

    #[test]
    fn box_force_points_out_of_the_box(x in -0.149f64..0.149, y in 0.301f64..0.599) {
        let b = boxed();
        let f = fixture_force(Vec2::new(x, y), &b);
        let r = Vec2::new(x, y) - Vec2::new(0.0, 0.45);
        prop_assert!(f.dot(&r) >= 0.0);
    }
}
