//! Scenario configuration: a TOML document with one table per experiment.
//! Every table is optional and falls back to the library defaults; unknown
//! keys are rejected so a misspelt constant cannot silently vanish.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuator::{ActuatorMode, ActuatorParams, FrequencyResponseSettings, SimSettings};
use crate::mechanisms::{
    actuator_force_from_torque, default_rotor_inertia, Elbow, MechanismModel, ParallelLinear, ParallelRotational,
    RotaryDrive, SerialRotational, Vec2, NOMINAL_TORQUE, PULLEY_RADIUS, ROD_LINEAR_DENSITY, ROD_LINEAR_INERTIA,
    ROTOR_LINEAR_INERTIA,
};
use crate::metrics::{DirectionSweep, WorkspaceGrid};
use crate::rendering::{
    linear_sweep, FixtureShape, ForceClamps, LimitSettings, OperatorModel, OscillationClassifier, PressRelease,
    RenderSettings, VirtualFixture,
};
use crate::stiffness::{BeltParams, RodSection, StiffnessParams};
use crate::sysid::{ChirpProfile, DiffOptions, ExperimentSettings, IdentifyOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    ParallelLinear(ParallelLinearSpec),
    SerialRotational(SerialRotationalSpec),
    ParallelRotational(ParallelRotationalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParallelLinearSpec {
    pub base_pivots: [[f64; 2]; 2],
    pub rod_travel: [f64; 2],
    /// Continuous force per actuator, N; defaults to torque / pulley radius.
    pub actuator_force_max: Option<f64>,
    pub moving_linear_inertia: f64,
    pub rotor_linear_inertia: f64,
    pub elbow: Elbow,
}

impl Default for ParallelLinearSpec {
    fn default() -> Self {
        ParallelLinearSpec {
            base_pivots: [[-0.22, 0.0], [0.38, 0.0]],
            rod_travel: [0.1, 1.2],
            actuator_force_max: None,
            moving_linear_inertia: ROD_LINEAR_INERTIA,
            rotor_linear_inertia: ROTOR_LINEAR_INERTIA,
            elbow: Elbow::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SerialRotationalSpec {
    pub base_point: [f64; 2],
    pub link_lengths: [f64; 2],
    pub gear_ratio: [f64; 2],
    /// kg·m² at the motor shaft.
    pub rotor_inertia: Option<f64>,
    pub motor_torque_max: f64,
    pub link_linear_density: f64,
    pub carried_motor_mass: f64,
    pub elbow: Elbow,
}

impl Default for SerialRotationalSpec {
    fn default() -> Self {
        SerialRotationalSpec {
            base_point: [0.0, 0.0],
            link_lengths: [0.6, 0.6],
            gear_ratio: [21.0, 21.0],
            rotor_inertia: None,
            motor_torque_max: NOMINAL_TORQUE,
            link_linear_density: ROD_LINEAR_DENSITY,
            carried_motor_mass: 0.8,
            elbow: Elbow::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParallelRotationalSpec {
    pub base_point: [f64; 2],
    pub link_lengths: [f64; 2],
    pub gear_ratio: [f64; 2],
    pub rotor_inertia: Option<f64>,
    pub motor_torque_max: f64,
    pub link_linear_density: f64,
    pub elbow: Elbow,
}

impl Default for ParallelRotationalSpec {
    fn default() -> Self {
        ParallelRotationalSpec {
            base_point: [0.0, 0.0],
            link_lengths: [0.6, 0.6],
            gear_ratio: [18.0, 18.0],
            rotor_inertia: None,
            motor_torque_max: NOMINAL_TORQUE,
            link_linear_density: ROD_LINEAR_DENSITY,
            elbow: Elbow::Up,
        }
    }
}

impl MechanismSpec {
    pub fn build(&self) -> MechanismModel {
        match self {
            MechanismSpec::ParallelLinear(s) => MechanismModel::ParallelLinear(ParallelLinear {
                base_pivots: [v2(s.base_pivots[0]), v2(s.base_pivots[1])],
                rod_travel: s.rod_travel,
                actuator_force_max: s
                    .actuator_force_max
                    .unwrap_or_else(|| actuator_force_from_torque(NOMINAL_TORQUE, PULLEY_RADIUS)),
                moving_linear_inertia: s.moving_linear_inertia,
                rotor_linear_inertia: s.rotor_linear_inertia,
                elbow: s.elbow,
            }),
            MechanismSpec::SerialRotational(s) => MechanismModel::SerialRotational(SerialRotational {
                base_point: v2(s.base_point),
                link_lengths: s.link_lengths,
                drive: RotaryDrive {
                    gear_ratio: s.gear_ratio,
                    rotor_inertia: s.rotor_inertia.unwrap_or_else(default_rotor_inertia),
                    motor_torque_max: s.motor_torque_max,
                },
                link_linear_density: s.link_linear_density,
                carried_motor_mass: s.carried_motor_mass,
                elbow: s.elbow,
            }),
            MechanismSpec::ParallelRotational(s) => MechanismModel::ParallelRotational(ParallelRotational {
                base_point: v2(s.base_point),
                link_lengths: s.link_lengths,
                drive: RotaryDrive {
                    gear_ratio: s.gear_ratio,
                    rotor_inertia: s.rotor_inertia.unwrap_or_else(default_rotor_inertia),
                    motor_torque_max: s.motor_torque_max,
                },
                link_linear_density: s.link_linear_density,
                elbow: s.elbow,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_range: [0.12, 0.72], y_range: [0.12, 0.72], resolution: 60 }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<WorkspaceGrid, ConfigError> {
        WorkspaceGrid::new(self.x_range, self.y_range, self.resolution).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub directions: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { directions: 360 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureSpec {
    /// Cap on any principal stiffness of the bending model, N/mm.
    pub axial_ceiling: f64,
}

impl Default for StructureSpec {
    fn default() -> Self {
        StructureSpec { axial_ceiling: StiffnessParams::default().axial_ceiling }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepResponseSpec {
    pub mode: ActuatorMode,
    /// Commanded force step, N.
    pub force: f64,
    pub step_time: f64,
    pub duration: f64,
}

impl Default for StepResponseSpec {
    fn default() -> Self {
        StepResponseSpec { mode: ActuatorMode::TwoMass, force: 10.0, step_time: 0.01, duration: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqResponseSpec {
    pub mode: ActuatorMode,
    /// Commanded force amplitude, N.
    pub amplitude: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub min_cycles: f64,
    pub min_duration: f64,
}

impl Default for FreqResponseSpec {
    fn default() -> Self {
        let d = FrequencyResponseSettings::default();
        FreqResponseSpec {
            mode: ActuatorMode::TwoMass,
            amplitude: 10.0,
            f_min: 5.0,
            f_max: 300.0,
            points: 60,
            min_cycles: d.min_cycles,
            min_duration: d.min_duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SysidSpec {
    pub chirp: ChirpProfile,
    pub mode: ActuatorMode,
    /// Load-cell noise, N.
    pub noise_sigma: f64,
    /// Virtual spring during the motor-constant run, N/m.
    pub virtual_spring: f64,
    /// Zero-phase low-pass before differentiation, Hz; absent = none.
    pub lowpass_hz: Option<f64>,
    pub stiction_velocity: f64,
    pub condition_limit: f64,
    /// Identification trace for `fit`; defaults to the generated one.
    pub trace: Option<PathBuf>,
    /// Held-out trace for `validate`; defaults to the generated motor run.
    pub validation_trace: Option<PathBuf>,
}

impl Default for SysidSpec {
    fn default() -> Self {
        let e = ExperimentSettings::default();
        let o = IdentifyOptions::default();
        SysidSpec {
            chirp: ChirpProfile::default(),
            mode: e.mode,
            noise_sigma: e.noise_sigma,
            virtual_spring: e.virtual_spring,
            lowpass_hz: None,
            stiction_velocity: o.stiction_velocity,
            condition_limit: o.condition_limit,
            trace: None,
            validation_trace: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSpec {
    pub hand_mass: f64,
    pub grip_stiffness: f64,
    pub grip_damping: f64,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        let o = OperatorModel::new(Vec::new());
        OperatorSpec { hand_mass: o.hand_mass, grip_stiffness: o.grip_stiffness, grip_damping: o.grip_damping }
    }
}

impl OperatorSpec {
    pub fn build(&self, trajectory: Vec<(f64, Vec2)>) -> OperatorModel {
        OperatorModel {
            hand_mass: self.hand_mass,
            grip_stiffness: self.grip_stiffness,
            grip_damping: self.grip_damping,
            ..OperatorModel::new(trajectory)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    pub base_pivots: [[f64; 2]; 2],
    pub box_center: [f64; 2],
    pub box_half_extents: [f64; 2],
    pub corner_radius: f64,
    /// N/mm.
    pub stiffness: f64,
    pub clamps: ForceClamps,
    pub operator: OperatorSpec,
    /// Operator intent waypoints `[t, x, y]`.
    pub waypoints: Vec<[f64; 3]>,
    pub duration: f64,
    /// Interval over which contact force is averaged, s.
    pub measure_window: [f64; 2],
    /// Interval in which no force may be commanded, s.
    pub free_window: [f64; 2],
    pub quantize: bool,
    pub delay_ticks: usize,
    pub friction_smoothing: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        let r = RenderSettings::default();
        RenderSpec {
            base_pivots: [[-0.3, 0.0], [0.3, 0.0]],
            box_center: [0.0, 0.45],
            box_half_extents: [0.15, 0.15],
            corner_radius: 0.02,
            stiffness: 2.0,
            clamps: ForceClamps::default(),
            operator: OperatorSpec::default(),
            waypoints: vec![
                [0.0, -0.1, 0.70],
                [1.0, -0.1, 0.62],
                [2.0, -0.1, 0.5375],
                [2.5, -0.1, 0.5375],
                [6.5, 0.1, 0.5375],
                [7.5, 0.1, 0.70],
            ],
            duration: 8.0,
            measure_window: [3.0, 6.0],
            free_window: [0.0, 0.9],
            quantize: r.quantize,
            delay_ticks: r.delay_ticks,
            friction_smoothing: r.friction_smoothing,
        }
    }
}

impl RenderSpec {
    pub fn mechanism(&self) -> ParallelLinear {
        ParallelLinear::with_pivots(v2(self.base_pivots[0]), v2(self.base_pivots[1]))
    }

    pub fn fixture(&self) -> VirtualFixture {
        VirtualFixture {
            shape: FixtureShape::Box2D {
                center: v2(self.box_center),
                half_extents: v2(self.box_half_extents),
                corner_radius: self.corner_radius,
            },
            stiffness: self.stiffness,
            clamps: self.clamps,
        }
    }

    pub fn operator(&self) -> OperatorModel {
        self.operator.build(self.waypoints.iter().map(|w| (w[0], Vec2::new(w[1], w[2]))).collect())
    }

    pub fn settings(&self, sim: SimSettings) -> RenderSettings {
        RenderSettings {
            sim,
            quantize: self.quantize,
            delay_ticks: self.delay_ticks,
            friction_smoothing: self.friction_smoothing,
            ..RenderSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StiffnessLimitSpec {
    /// N/mm.
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_points: usize,
    pub encoder_bits: Vec<u32>,
    /// Also run with quantization disabled.
    pub unquantized: bool,
    pub mode: ActuatorMode,
    pub wall_position: f64,
    pub delay_ticks: usize,
    pub operator: OperatorSpec,
    pub profile: PressRelease,
    pub classifier: OscillationClassifier,
    /// Measured hardware limit, N/mm; echoed in the report for comparison.
    pub reference_limit: f64,
}

impl Default for StiffnessLimitSpec {
    fn default() -> Self {
        let l = LimitSettings::default();
        StiffnessLimitSpec {
            sweep_min: 10.0,
            sweep_max: 300.0,
            sweep_points: 30,
            encoder_bits: vec![10, 12, 14],
            unquantized: true,
            mode: l.mode,
            wall_position: 0.0,
            delay_ticks: l.render.delay_ticks,
            operator: OperatorSpec::default(),
            profile: l.profile,
            classifier: l.classifier,
            reference_limit: 70.0,
        }
    }
}

impl StiffnessLimitSpec {
    pub fn sweep(&self) -> Vec<f64> {
        linear_sweep(self.sweep_min, self.sweep_max, self.sweep_points)
    }

    pub fn settings(&self, sim: SimSettings, quantize: bool) -> LimitSettings {
        let d = LimitSettings::default();
        LimitSettings {
            render: RenderSettings { sim, quantize, delay_ticks: self.delay_ticks, ..d.render },
            mode: self.mode,
            profile: self.profile,
            classifier: self.classifier,
        }
    }

    pub fn wall(&self) -> VirtualFixture {
        VirtualFixture {
            shape: FixtureShape::Wall1D { position: self.wall_position, sign: 1.0 },
            stiffness: 1.0,
            clamps: ForceClamps::default(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_mechanisms() -> BTreeMap<String, MechanismSpec> {
    BTreeMap::from([
        ("parallel_linear".to_string(), MechanismSpec::ParallelLinear(ParallelLinearSpec::default())),
        ("serial_rotational".to_string(), MechanismSpec::SerialRotational(SerialRotationalSpec::default())),
        ("parallel_rotational".to_string(), MechanismSpec::ParallelRotational(ParallelRotationalSpec::default())),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub mechanisms: BTreeMap<String, MechanismSpec>,
    pub grid: GridSpec,
    /// Per-mechanism grids, keyed by mechanism name.
    pub grid_overrides: BTreeMap<String, GridSpec>,
    pub sweep: SweepSpec,
    pub sim: SimSettings,
    pub actuator: ActuatorParams,
    pub belt: BeltParams,
    pub rod_section: RodSection,
    pub structure: StructureSpec,
    pub step_response: StepResponseSpec,
    pub freq_response: FreqResponseSpec,
    pub sysid: SysidSpec,
    pub render: RenderSpec,
    pub stiffness_limit: StiffnessLimitSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            output_dir: default_output_dir(),
            mechanisms: default_mechanisms(),
            grid: GridSpec::default(),
            grid_overrides: BTreeMap::new(),
            sweep: SweepSpec::default(),
            sim: SimSettings::default(),
            actuator: ActuatorParams::default(),
            belt: BeltParams::default(),
            rod_section: RodSection::default(),
            structure: StructureSpec::default(),
            step_response: StepResponseSpec::default(),
            freq_response: FreqResponseSpec::default(),
            sysid: SysidSpec::default(),
            render: RenderSpec::default(),
            stiffness_limit: StiffnessLimitSpec::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Named mechanisms in name order, or just `only` when given.
    pub fn mechanisms(&self, only: Option<&str>) -> Result<Vec<(String, MechanismModel)>, ConfigError> {
        match only {
            Some(name) => {
                let spec = self.mechanisms.get(name).ok_or_else(|| {
                    let known: Vec<&str> = self.mechanisms.keys().map(String::as_str).collect();
                    invalid(format!("unknown mechanism '{name}' (known: {})", known.join(", ")))
                })?;
                Ok(vec![(name.to_string(), spec.build())])
            }
            None => Ok(self.mechanisms.iter().map(|(n, s)| (n.clone(), s.build())).collect()),
        }
    }

    pub fn grid_for(&self, name: &str) -> Result<WorkspaceGrid, ConfigError> {
        self.grid_overrides.get(name).unwrap_or(&self.grid).build()
    }

    pub fn direction_sweep(&self) -> Result<DirectionSweep, ConfigError> {
        DirectionSweep::uniform(self.sweep.directions).map_err(|e| invalid(e.to_string()))
    }

    pub fn stiffness_params(&self) -> StiffnessParams {
        StiffnessParams { belt: self.belt, section: self.rod_section, axial_ceiling: self.structure.axial_ceiling }
    }

    pub fn freq_settings(&self) -> FrequencyResponseSettings {
        FrequencyResponseSettings {
            sim: self.sim,
            min_cycles: self.freq_response.min_cycles,
            min_duration: self.freq_response.min_duration,
        }
    }

    pub fn experiment_settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            sim: self.sim,
            mode: self.sysid.mode,
            noise_sigma: self.sysid.noise_sigma,
            virtual_spring: self.sysid.virtual_spring,
        }
    }

    pub fn identify_options(&self) -> IdentifyOptions {
        IdentifyOptions {
            diff: DiffOptions { lowpass_hz: self.sysid.lowpass_hz },
            stiction_velocity: self.sysid.stiction_velocity,
            condition_limit: self.sysid.condition_limit,
        }
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, spec) in &self.mechanisms {
            spec.build().validate().map_err(|e| invalid(format!("mechanism '{name}': {e}")))?;
        }
        for name in self.grid_overrides.keys() {
            if !self.mechanisms.contains_key(name) {
                return Err(invalid(format!("grid_overrides.{name} names no mechanism")));
            }
        }
        self.grid.build()?;
        for g in self.grid_overrides.values() {
            g.build()?;
        }
        self.direction_sweep()?;
        if !(self.sim.dt > 0.0 && self.sim.control_rate > 0.0 && self.sim.dt <= 1.0 / self.sim.control_rate) {
            return Err(invalid("sim: need 0 < dt ≤ 1 / control_rate"));
        }
        self.actuator.validate().map_err(|e| invalid(format!("actuator: {e}")))?;
        self.belt.validate().map_err(|e| invalid(format!("belt: {e}")))?;
        self.rod_section.validate().map_err(|e| invalid(format!("rod_section: {e}")))?;
        if !(self.structure.axial_ceiling > 0.0) {
            return Err(invalid("structure.axial_ceiling must be positive"));
        }
        let s = &self.step_response;
        if !(s.duration > 0.0 && s.step_time >= 0.0 && s.step_time < s.duration && s.force.is_finite()) {
            return Err(invalid("step_response: need 0 ≤ step_time < duration and a finite force"));
        }
        let f = &self.freq_response;
        if !(f.f_min > 0.0 && f.f_max > f.f_min && f.points >= 2 && f.min_cycles > 0.0 && f.min_duration >= 0.0) {
            return Err(invalid("freq_response: need 0 < f_min < f_max, points ≥ 2, min_cycles > 0"));
        }
        if !(f.amplitude > 0.0 && f.amplitude <= self.actuator.force_limit) {
            return Err(invalid("freq_response.amplitude must lie in (0, actuator.force_limit]"));
        }
        self.sysid.chirp.validate().map_err(|e| invalid(format!("sysid.chirp: {e}")))?;
        if !(self.sysid.noise_sigma >= 0.0 && self.sysid.condition_limit > 1.0 && self.sysid.stiction_velocity >= 0.0) {
            return Err(invalid("sysid: need noise_sigma ≥ 0, condition_limit > 1, stiction_velocity ≥ 0"));
        }
        if self.sysid.lowpass_hz.is_some_and(|h| !(h > 0.0 && h < self.sim.control_rate / 2.0)) {
            return Err(invalid("sysid.lowpass_hz must lie below the Nyquist rate"));
        }
        self.validate_render()?;
        self.validate_limit()
    }

    fn validate_render(&self) -> Result<(), ConfigError> {
        let r = &self.render;
        self.render.fixture().validate().map_err(|e| invalid(format!("render: {e}")))?;
        MechanismModel::ParallelLinear(r.mechanism()).validate().map_err(|e| invalid(format!("render: {e}")))?;
        if r.waypoints.is_empty() || r.waypoints.windows(2).any(|w| w[1][0] < w[0][0]) {
            return Err(invalid("render.waypoints must be non-empty and time-sorted"));
        }
        r.operator().validate().map_err(|e| invalid(format!("render.operator: {e}")))?;
        if !(r.duration > 0.0) {
            return Err(invalid("render.duration must be positive"));
        }
        for (n, w) in [("measure_window", r.measure_window), ("free_window", r.free_window)] {
            if !(w[0] >= 0.0 && w[1] > w[0] && w[1] <= r.duration) {
                return Err(invalid(format!("render.{n} must lie inside [0, duration]")));
            }
        }
        if !(r.friction_smoothing > 0.0) {
            return Err(invalid("render.friction_smoothing must be positive"));
        }
        Ok(())
    }

    fn validate_limit(&self) -> Result<(), ConfigError> {
        let l = &self.stiffness_limit;
        if !(l.sweep_min > 0.0 && l.sweep_max > l.sweep_min && l.sweep_points >= 2) {
            return Err(invalid("stiffness_limit: need 0 < sweep_min < sweep_max and sweep_points ≥ 2"));
        }
        if l.encoder_bits.is_empty() && !l.unquantized {
            return Err(invalid("stiffness_limit: nothing to run (no encoder_bits, unquantized = false)"));
        }
        if l.encoder_bits.iter().any(|&b| b == 0 || b > 52) {
            return Err(invalid("stiffness_limit.encoder_bits must be in 1..=52"));
        }
        let p = &l.profile;
        let times = [p.approach, p.hold, p.release, p.settle, p.path_step];
        if times.iter().any(|t| !(*t > 0.0)) || !(p.peak_force > 0.0) || !(p.release_grip > 0.0 && p.release_grip <= 1.0) {
            return Err(invalid("stiffness_limit.profile: times and peak_force must be positive, release_grip in (0, 1]"));
        }
        let c = &l.classifier;
        if !(c.window > 0.0 && c.hop > 0.0 && c.min_span > 0.0 && c.threshold_steps > 0.0) {
            return Err(invalid("stiffness_limit.classifier: all fields must be positive"));
        }
        l.operator.build(vec![(0.0, Vec2::zeros())]).validate().map_err(|e| invalid(format!("stiffness_limit.operator: {e}")))?;
        Ok(())
    }
}
