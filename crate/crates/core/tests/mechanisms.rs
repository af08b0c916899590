use haptica::mechanisms::*;
use haptica::metrics::force_capability;
use proptest::prelude::*;

fn linear() -> MechanismModel {
    MechanismModel::ParallelLinear(ParallelLinear::with_pivots(Vec2::new(-0.22, 0.0), Vec2::new(0.38, 0.0)))
}

fn serial() -> MechanismModel {
    MechanismModel::SerialRotational(SerialRotational {
        base_point: Vec2::zeros(),
        link_lengths: [0.6, 0.6],
        drive: RotaryDrive::nominal(21.0),
        link_linear_density: ROD_LINEAR_DENSITY,
        carried_motor_mass: 1.15,
        elbow: Elbow::Up,
    })
}

fn parallel() -> MechanismModel {
    MechanismModel::ParallelRotational(ParallelRotational {
        base_point: Vec2::zeros(),
        link_lengths: [0.6, 0.6],
        drive: RotaryDrive::nominal(18.0),
        link_linear_density: ROD_LINEAR_DENSITY,
        elbow: Elbow::Up,
    })
}

fn all() -> [MechanismModel; 3] {
    [linear(), serial(), parallel()]
}

/// Central differences of forward kinematics.
fn fd_jacobian(m: &MechanismModel, q: &JointState) -> Mat2 {
    let h = 1e-6;
    let mut j = Mat2::zeros();
    for c in 0..2 {
        let mut qp = *q;
        let mut qm = *q;
        qp.q[c] += h;
        qm.q[c] -= h;
        let d = (forward_kinematics(m, &qp).unwrap().x - forward_kinematics(m, &qm).unwrap().x) / (2.0 * h);
        j.set_column(c, &d);
    }
    j
}

#[test]
fn force_from_nominal_torque() {
    let f = actuator_force_from_torque(NOMINAL_TORQUE, PULLEY_RADIUS);
    assert!((f - 100.0).abs() < 0.1, "{f}");
}

#[test]
fn home_angle_and_position() {
    let MechanismModel::ParallelLinear(m) = linear() else { unreachable!() };
    let home = symmetric_point_for_angle(&m, 56.1f64.to_radians());
    assert!((home.x - 0.08).abs() < 1e-12);
    assert!((home.y - 0.563).abs() < 1e-3, "{home}");
    assert!((inter_rod_angle(&m, home).to_degrees() - 56.1).abs() < 1e-9);
}

#[test]
fn linear_capability_is_sine_of_rod_angle() {
    // Two unit rods at angle γ: the weakest direction is along a rod's
    // normal, where the other rod carries everything at sin γ leverage.
    let MechanismModel::ParallelLinear(m) = linear() else { unreachable!() };
    let model = linear();
    for deg in [40.0f64, 56.1, 75.0, 90.0] {
        let g = deg.to_radians();
        let x = symmetric_point_for_angle(&m, g);
        let q = inverse_kinematics(&model, &Pose { x, xdot: None }).unwrap();
        let min = (0..3600)
            .map(|i| force_capability(&model, &q, i as f64 * std::f64::consts::TAU / 3600.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        let expect = m.actuator_force_max * g.sin();
        assert!((min - expect).abs() < 1e-3 * expect, "γ={deg}: {min} vs {expect}");
    }
}

#[test]
fn jacobian_matches_finite_differences_on_a_grid() {
    for m in all() {
        for i in 0..9 {
            for k in 0..9 {
                let p = Vec2::new(0.15 + 0.065 * i as f64, 0.15 + 0.065 * k as f64);
                let Ok(q) = inverse_kinematics(&m, &Pose { x: p, xdot: None }) else { continue };
                let j = jacobian(&m, &q).unwrap();
                let fd = fd_jacobian(&m, &q);
                assert!((j - fd).abs().max() < 1e-6, "{} at {p}: {j} vs {fd}", m.kind_name());
            }
        }
    }
}

#[test]
fn inverse_jacobian_inverts() {
    for m in all() {
        let q = inverse_kinematics(&m, &Pose::at(0.3, 0.5)).unwrap();
        let prod = jacobian(&m, &q).unwrap() * inverse_jacobian(&m, &q).unwrap();
        assert!((prod - Mat2::identity()).abs().max() < 1e-10);
    }
}

#[test]
fn inertia_is_symmetric_positive_definite() {
    for m in all() {
        let q = inverse_kinematics(&m, &Pose::at(0.4, 0.4)).unwrap();
        let mm = inertia_matrix(&m, &q).unwrap();
        assert!((mm - mm.transpose()).abs().max() < 1e-14);
        assert!(mm.symmetric_eigen().eigenvalues.min() > 0.0);
    }
}

#[test]
fn unreachable_points_are_errors() {
    for m in [serial(), parallel()] {
        assert!(matches!(inverse_kinematics(&m, &Pose::at(2.0, 2.0)), Err(MechanismError::Unreachable(..))));
    }
    assert!(matches!(inverse_kinematics(&linear(), &Pose::at(0.0, 3.0)), Err(MechanismError::Unreachable(..))));
    assert!(matches!(inverse_kinematics(&linear(), &Pose::at(0.0, -0.5)), Err(MechanismError::Unreachable(..))));
    assert!(forward_kinematics(&linear(), &JointState::at(0.1, 0.1)).is_err());
}

#[test]
fn stretched_arm_is_singular() {
    let q = JointState::at(0.3, 0.0);
    assert!(matches!(inverse_jacobian(&serial(), &q), Err(MechanismError::Singular(_))));
}

#[test]
fn validation_rejects_bad_parameters() {
    let MechanismModel::SerialRotational(mut s) = serial() else { unreachable!() };
    s.link_lengths[1] = -0.1;
    assert!(MechanismModel::SerialRotational(s).validate().is_err());
    let MechanismModel::ParallelLinear(mut l) = linear() else { unreachable!() };
    l.rod_travel = [0.5, 0.4];
    assert!(MechanismModel::ParallelLinear(l).validate().is_err());
}

#[test]
fn effort_scaling_scales_capability() {
    let m = linear();
    let q = inverse_kinematics(&m, &Pose::at(0.08, 0.563)).unwrap();
    let a = force_capability(&m, &q, 0.7).unwrap();
    let b = force_capability(&m.with_effort_scaled(2.0), &q, 0.7).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-9);
}

proptest! {
    #[test]
    fn ik_fk_round_trip(x in 0.12f64..0.72, y in 0.12f64..0.72, which in 0usize..3) {
        let m = &all()[which];
        let q = inverse_kinematics(m, &Pose::at(x, y)).unwrap();
        let p = forward_kinematics(m, &q).unwrap().x;
        prop_assert!((p - Vec2::new(x, y)).norm() < 1e-10);
    }

    #[test]
    fn fk_ik_round_trip_linear(l0 in 0.4f64..1.1, l1 in 0.4f64..1.1) {
        // Rods must be able to meet across the 0.6 m pivot spacing.
        prop_assume!((l0 - l1).abs() < 0.55 && l0 + l1 > 0.65);
        let m = linear();
        let p = forward_kinematics(&m, &JointState::at(l0, l1)).unwrap();
        let q = inverse_kinematics(&m, &p).unwrap();
        prop_assert!((q.q - Vec2::new(l0, l1)).norm() < 1e-9);
    }

    #[test]
    fn translation_commutes_with_kinematics(dx in -0.3f64..0.3, dy in -0.3f64..0.3, which in 0usize..3) {
        let m = &all()[which];
        let t = Vec2::new(dx, dy);
        let q = inverse_kinematics(m, &Pose::at(0.4, 0.45)).unwrap();
        let q2 = inverse_kinematics(&m.translated(t), &Pose::at(0.4 + dx, 0.45 + dy)).unwrap();
        prop_assert!((q.q - q2.q).norm() < 1e-9);
    }

    #[test]
    fn velocity_maps_through_jacobian(x in 0.2f64..0.65, y in 0.2f64..0.65, a in 0.0..std::f64::consts::TAU) {
        for m in all() {
            let q = inverse_kinematics(&m, &Pose::at(x, y)).unwrap();
            let j = jacobian(&m, &q).unwrap();
            let xd = Vec2::new(a.cos(), a.sin());
            let qd = inverse_jacobian(&m, &q).unwrap() * xd;
            prop_assert!((j * qd - xd).norm() < 1e-9);
        }
    }
}
