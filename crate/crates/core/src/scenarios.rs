//! Declarative scenario configurations and the builder that turns them into
//! particles and physics.
//!
//! A configuration is a composition of axis-aligned rectangles (fluid and
//! solid blocks), wall faces, pinned regions and notches. Built-ins are
//! plain functions returning a [`ScenarioConfig`]; every one of them
//! round-trips through TOML unchanged.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fluid::FluidMaterial;
use crate::integrator::{Physics, DEFAULT_CFL};
use crate::particles::{build_lattice, lattice_count, Particle, Phase, Rect};
use crate::probes::{Axis, ProbeKind, ProbeSpec};
use crate::solid::SolidMaterial;
use crate::walls::{layer_count, Outward, WallFace};
use crate::Vec2;

pub const GRAVITY: f64 = 9.81;

/// Relative lattice misfit above which a block triggers a warning.
pub const LATTICE_FIT_TOL: f64 = 0.005;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    #[default]
    Csv,
    Vtk,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    #[serde(default = "default_rho_water")]
    pub rho0: f64,
    pub c0: f64,
    #[serde(default = "default_gamma")]
    pub gamma_eos: f64,
    #[serde(default)]
    pub mu_f: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_fluid_beta1")]
    pub beta1: f64,
    #[serde(default)]
    pub beta2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidConfig {
    pub rho0: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    #[serde(default = "default_gamma_ap")]
    pub gamma_ap: f64,
    #[serde(default)]
    pub eps_f: f64,
    #[serde(default = "one")]
    pub beta1: f64,
    #[serde(default = "one")]
    pub beta2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceCurve {
    /// Ritter front `x/H = 1 + 2 tau`.
    Ritter,
}

/// Scales used for nondimensional plot axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NondimConfig {
    /// Length scale (m).
    pub length: f64,
    /// Time scale (s).
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCurve>,
}

/// First-mode initial velocity of a clamped-free beam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamInitSpec {
    pub v_f: f64,
    pub kl: f64,
    /// Beam length (m).
    pub length: f64,
    /// Clamp position (m); `x` in the mode shape is measured from here.
    #[serde(default)]
    pub x0: f64,
    /// Sound speed (m/s); defaults to the solid's `sqrt(K / rho0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

impl BeamInitSpec {
    pub fn k(&self) -> f64 {
        self.kl / self.length
    }

    /// `M = sin kL + sinh kL`.
    pub fn m(&self) -> f64 {
        self.kl.sin() + self.kl.sinh()
    }

    /// `N = cos kL + cosh kL`.
    pub fn n(&self) -> f64 {
        self.kl.cos() + self.kl.cosh()
    }

    /// `Q = 2 (cos kL sinh kL - sin kL cosh kL)`.
    pub fn q(&self) -> f64 {
        2.0 * (self.kl.cos() * self.kl.sinh() - self.kl.sin() * self.kl.cosh())
    }

    /// Residual of the clamped-free mode condition `cos kL cosh kL = -1`.
    pub fn mode_residual(&self) -> f64 {
        self.kl.cos() * self.kl.cosh() + 1.0
    }
}

/// Transverse velocity of the first clamped-free mode at distance `x` from
/// the clamp:
///
/// ```text
/// v_y = c0 V_f [M (cos kx - cosh kx) - N (sin kx - sinh kx)] / Q
/// ```
pub fn beam_init_velocity(x: f64, spec: &BeamInitSpec, c0: f64) -> f64 {
    let kx = spec.k() * x;
    c0 * spec.v_f * (spec.m() * (kx.cos() - kx.cosh()) - spec.n() * (kx.sin() - kx.sinh())) / spec.q()
}

/// Analytic first-mode period `2 pi / omega`, `omega^2 = E d^2 k^4 / (12 rho (1 - nu^2))`.
pub fn beam_period(youngs_modulus: f64, thickness: f64, k: f64, rho: f64, nu: f64) -> f64 {
    let omega2 = youngs_modulus * thickness * thickness * k.powi(4) / (12.0 * rho * (1.0 - nu * nu));
    2.0 * std::f64::consts::PI / omega2.sqrt()
}

/// Ritter dam-break front `x/H = 1 + 2 tau`.
pub fn ritter_front(tau: f64) -> f64 {
    1.0 + 2.0 * tau
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub phase: Phase,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

/// Removes the solid lattice row whose centres lie in `[y, y + dp)` for
/// `x_min <= x < x_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Notch {
    pub x_min: f64,
    pub x_max: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub dp: f64,
    #[serde(default = "default_h_over_dp")]
    pub h_over_dp: f64,
    pub gravity: [f64; 2],
    pub end_time: f64,
    pub output_every: f64,
    pub probe_every: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub fracture_enabled: bool,
    #[serde(default)]
    pub snapshot_format: SnapshotFormat,
    /// Reserved: the pipeline is deterministic and draws no random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid: Option<SolidConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nondim: Option<NondimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_init: Option<BeamInitSpec>,
    #[serde(default)]
    pub blocks: Vec<Block>,
    #[serde(default)]
    pub walls: Vec<WallFace>,
    /// Solid particles with centres inside these rectangles are held fixed.
    #[serde(default)]
    pub pins: Vec<Rect>,
    #[serde(default)]
    pub notches: Vec<Notch>,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
}

fn default_rho_water() -> f64 {
    1000.0
}
fn default_gamma() -> f64 {
    7.0
}
fn default_delta() -> f64 {
    0.1
}
fn default_fluid_beta1() -> f64 {
    0.1
}
fn default_gamma_ap() -> f64 {
    0.3
}
fn one() -> f64 {
    1.0
}
fn default_h_over_dp() -> f64 {
    1.5
}
fn default_cfl() -> f64 {
    DEFAULT_CFL
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown field") {
                SimError::Config(format!("unknown key: {msg}"))
            } else {
                SimError::Config(msg)
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SimError::Config(m) => SimError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn h(&self) -> f64 {
        self.h_over_dp * self.dp
    }
}

fn fluid_c0(height: f64) -> f64 {
    // 10 x the larger of sqrt(gH) and the expected peak speed 2 sqrt(gH)
    10.0 * 2.0 * (GRAVITY * height).sqrt()
}

fn water(c0: f64, mu_f: f64) -> FluidConfig {
    FluidConfig {
        rho0: 1000.0,
        c0,
        gamma_eos: 7.0,
        mu_f,
        delta: 0.1,
        beta1: 0.1,
        beta2: 0.0,
    }
}

fn block(phase: Phase, min: [f64; 2], max: [f64; 2]) -> Block {
    Block { phase, min, max }
}

fn face(start: [f64; 2], end: [f64; 2], outward: Outward, extend: (bool, bool)) -> WallFace {
    WallFace {
        start,
        end,
        outward,
        extend_start: extend.0,
        extend_end: extend.1,
    }
}

/// Open-top rectangular tank `[0, length] x [0, height]`.
fn tank(length: f64, height: f64) -> Vec<WallFace> {
    vec![
        face([0.0, 0.0], [length, 0.0], Outward::Down, (true, true)),
        face([0.0, 0.0], [0.0, height], Outward::Left, (false, false)),
        face([length, 0.0], [length, height], Outward::Right, (false, false)),
    ]
}

fn point_probe(name: &str, at: [f64; 2], axis: Axis) -> ProbeSpec {
    ProbeSpec {
        name: name.into(),
        kind: ProbeKind::PointDisplacement,
        at: Some(at),
        phase: Some(Phase::Solid),
        axis: Some(axis),
    }
}

fn global_probe(name: &str, kind: ProbeKind) -> ProbeSpec {
    ProbeSpec {
        name: name.into(),
        kind,
        at: None,
        phase: None,
        axis: None,
    }
}

/// Water column `H x H` collapsing in a `4H` long tank.
pub fn scenario_dam_break(dp: f64) -> ScenarioConfig {
    let h = 0.057;
    ScenarioConfig {
        name: "dam_break".into(),
        dp,
        h_over_dp: 1.5,
        gravity: [0.0, -GRAVITY],
        end_time: 0.3,
        output_every: 0.01,
        probe_every: 0.001,
        cfl: DEFAULT_CFL,
        fracture_enabled: false,
        snapshot_format: SnapshotFormat::Csv,
        seed: 0,
        fluid: Some(water(fluid_c0(h), 0.05)),
        solid: None,
        nondim: Some(NondimConfig {
            length: h,
            time: (h / GRAVITY).sqrt(),
            reference: Some(ReferenceCurve::Ritter),
        }),
        beam_init: None,
        blocks: vec![block(Phase::Fluid, [0.0, 0.0], [h, h])],
        walls: tank(4.0 * h, 3.0 * h),
        pins: vec![],
        notches: vec![],
        probes: vec![global_probe("front", ProbeKind::FrontPosition)],
    }
}

/// Cantilever `L = 10, d = 1` set moving in its first bending mode.
pub fn scenario_beam() -> ScenarioConfig {
    let (len, d, dp) = (10.0, 1.0, 0.05);
    let clamp = 3.0 * dp;
    ScenarioConfig {
        name: "beam".into(),
        dp,
        h_over_dp: 1.5,
        gravity: [0.0, 0.0],
        end_time: 0.5,
        output_every: 0.01,
        probe_every: 2e-4,
        cfl: DEFAULT_CFL,
        fracture_enabled: false,
        snapshot_format: SnapshotFormat::Csv,
        seed: 0,
        fluid: None,
        solid: Some(SolidConfig {
            rho0: 7850.0,
            youngs_modulus: 211e9,
            poisson_ratio: 0.3,
            gamma_ap: 0.3,
            eps_f: 0.0,
            beta1: 1.0,
            beta2: 1.0,
        }),
        nondim: None,
        beam_init: Some(BeamInitSpec {
            v_f: 0.05,
            kl: 1.875,
            length: len,
            x0: 0.0,
            c0: None,
        }),
        blocks: vec![block(Phase::Solid, [-clamp, 0.0], [len, d])],
        walls: vec![],
        pins: vec![Rect::new([-clamp - dp, -dp], [0.0, d + dp])],
        notches: vec![],
        probes: vec![point_probe("tip_dy", [len - dp / 2.0, d / 2.0], Axis::Y)],
    }
}

/// Water column held by a rubber gate clamped from above; the water escapes
/// under the gate onto a downstream floor.
pub fn scenario_gate() -> ScenarioConfig {
    let (w, hw) = (0.1, 0.14);
    let (gate_len, gate_t) = (0.079, 0.005);
    let dp = 0.0008;
    let h_over_dp = 1.5;
    let clamp = 2.0 * (2.0 * h_over_dp * dp);
    let top = 1.25 * hw;
    let right = 0.4;
    ScenarioConfig {
        name: "gate".into(),
        dp,
        h_over_dp,
        gravity: [0.0, -GRAVITY],
        end_time: 0.4,
        output_every: 0.01,
        probe_every: 0.001,
        cfl: DEFAULT_CFL,
        fracture_enabled: false,
        snapshot_format: SnapshotFormat::Csv,
        seed: 0,
        fluid: Some(water(fluid_c0(hw), 0.05)),
        solid: Some(SolidConfig {
            rho0: 1100.0,
            youngs_modulus: 12e6,
            poisson_ratio: 0.45,
            gamma_ap: 0.3,
            eps_f: 0.0,
            beta1: 1.0,
            beta2: 1.0,
        }),
        nondim: None,
        beam_init: None,
        blocks: vec![
            block(Phase::Fluid, [0.0, 0.0], [w, hw]),
            block(Phase::Solid, [w, 0.0], [w + gate_t, gate_len]),
        ],
        walls: vec![
            face([0.0, 0.0], [right, 0.0], Outward::Down, (true, true)),
            face([0.0, 0.0], [0.0, top], Outward::Left, (false, false)),
            face([w, gate_len], [w, top], Outward::Right, (false, false)),
            face([right, 0.0], [right, top], Outward::Right, (false, false)),
        ],
        pins: vec![Rect::new([w - dp, gate_len - clamp], [w + gate_t + dp, gate_len + dp])],
        notches: vec![],
        probes: vec![
            point_probe("tip_dx", [w + gate_t / 2.0, dp / 2.0], Axis::X),
            point_probe("tip_dy", [w + gate_t / 2.0, dp / 2.0], Axis::Y),
        ],
    }
}

/// Dam break onto an elastic plate fixed at its base.
pub fn scenario_obstacle() -> ScenarioConfig {
    let (w, hw) = (0.146, 0.292);
    let (a, b) = (0.012, 0.08);
    let dp = 0.0025;
    let base = 3.0 * dp;
    ScenarioConfig {
        name: "obstacle".into(),
        dp,
        h_over_dp: 1.5,
        gravity: [0.0, -GRAVITY],
        end_time: 0.8,
        output_every: 0.01,
        probe_every: 0.001,
        cfl: DEFAULT_CFL,
        fracture_enabled: false,
        snapshot_format: SnapshotFormat::Csv,
        seed: 0,
        fluid: Some(water(fluid_c0(hw), 0.001)),
        solid: Some(SolidConfig {
            rho0: 2500.0,
            youngs_modulus: 1e6,
            poisson_ratio: 0.0,
            gamma_ap: 0.3,
            eps_f: 0.0,
            beta1: 1.0,
            beta2: 1.0,
        }),
        nondim: None,
        beam_init: None,
        blocks: vec![
            block(Phase::Fluid, [0.0, 0.0], [w, hw]),
            block(Phase::Solid, [2.0 * w, -base], [2.0 * w + a, b]),
        ],
        walls: tank(4.0 * w, 3.0 * hw),
        pins: vec![Rect::new([2.0 * w - dp, -base - dp], [2.0 * w + a + dp, 0.0])],
        notches: vec![],
        probes: vec![point_probe("corner_dx", [2.0 * w, b], Axis::X)],
    }
}

/// Dam break onto a notched brittle obstacle. With `fracture_enabled`
/// false this is the undamaged control run.
pub fn scenario_notched(dp: f64, fracture_enabled: bool) -> ScenarioConfig {
    let (w, hw) = (0.15, 0.3);
    let (d, b) = (0.03, 0.09);
    let (crack, l) = (0.008, 0.025);
    let base = 0.0075;
    ScenarioConfig {
        name: if fracture_enabled { "notched" } else { "notched_control" }.into(),
        dp,
        h_over_dp: 1.5,
        gravity: [0.0, -GRAVITY],
        end_time: 0.4,
        output_every: 0.01,
        probe_every: 0.001,
        cfl: DEFAULT_CFL,
        fracture_enabled,
        snapshot_format: SnapshotFormat::Csv,
        seed: 0,
        fluid: Some(water(fluid_c0(hw), 0.001)),
        solid: Some(SolidConfig {
            rho0: 2500.0,
            youngs_modulus: 1e6,
            poisson_ratio: 0.0,
            gamma_ap: 0.3,
            eps_f: 0.05,
            beta1: 1.0,
            beta2: 1.0,
        }),
        nondim: None,
        beam_init: None,
        blocks: vec![
            block(Phase::Fluid, [0.0, 0.0], [w, hw]),
            block(Phase::Solid, [2.0 * w, -base], [2.0 * w + d, b]),
        ],
        walls: tank(4.0 * w, 2.0 * hw),
        pins: vec![Rect::new([2.0 * w - dp, -base - dp], [2.0 * w + d + dp, 0.0])],
        notches: vec![Notch {
            x_min: 2.0 * w,
            x_max: 2.0 * w + crack,
            y: l,
        }],
        probes: vec![
            global_probe("damage", ProbeKind::DamageFraction),
            global_probe("pieces", ProbeKind::ComponentCount),
            point_probe("top_dx", [2.0 * w, b], Axis::X),
        ],
    }
}

/// Still water `0.1 x 0.1` in a closely fitting tank.
pub fn scenario_still_tank() -> ScenarioConfig {
    let h = 0.1;
    ScenarioConfig {
        name: "still_tank".into(),
        dp: 0.0025,
        h_over_dp: 1.5,
        gravity: [0.0, -GRAVITY],
        end_time: 1.0,
        output_every: 0.05,
        probe_every: 0.005,
        cfl: DEFAULT_CFL,
        fracture_enabled: false,
        snapshot_format: SnapshotFormat::Csv,
        seed: 0,
        fluid: Some(water(10.0 * (GRAVITY * h).sqrt(), 0.001)),
        solid: None,
        nondim: None,
        beam_init: None,
        blocks: vec![block(Phase::Fluid, [0.0, 0.0], [h, h])],
        walls: tank(h, 1.5 * h),
        pins: vec![],
        notches: vec![],
        probes: vec![ProbeSpec {
            name: "p_mid".into(),
            kind: ProbeKind::PointPressure,
            at: Some([h / 2.0, h / 2.0]),
            phase: Some(Phase::Fluid),
            axis: None,
        }],
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 7] = [
    "dam_break",
    "beam",
    "gate",
    "obstacle",
    "notched",
    "notched_control",
    "still_tank",
];

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "dam_break" => scenario_dam_break(0.00057),
        "beam" => scenario_beam(),
        "gate" => scenario_gate(),
        "obstacle" => scenario_obstacle(),
        "notched" => scenario_notched(0.0025, true),
        "notched_control" => scenario_notched(0.0025, false),
        "still_tank" => scenario_still_tank(),
        _ => return None,
    })
}

/// Everything the integrator needs, plus construction warnings.
#[derive(Clone, Debug)]
pub struct BuiltScenario {
    pub particles: Vec<Particle>,
    pub physics: Physics,
    pub warnings: Vec<String>,
}

fn lattice_extent(b: &Block, dp: f64) -> Rect {
    let nx = lattice_count(b.max[0] - b.min[0], dp).max(1) as f64;
    let ny = lattice_count(b.max[1] - b.min[1], dp).max(1) as f64;
    Rect::new(b.min, [b.min[0] + nx * dp, b.min[1] + ny * dp])
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} must be positive, got {v}")))
    }
}

/// Builds particles and physics from a configuration.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<BuiltScenario> {
    check_positive("dp", cfg.dp)?;
    check_positive("h_over_dp", cfg.h_over_dp)?;
    check_positive("output_every", cfg.output_every)?;
    check_positive("probe_every", cfg.probe_every)?;
    check_positive("cfl", cfg.cfl)?;
    if !(cfg.end_time >= 0.0) {
        return Err(SimError::Config(format!("end_time must be non-negative, got {}", cfg.end_time)));
    }
    let dp = cfg.dp;
    let h = cfg.h();

    let fluid = cfg
        .fluid
        .as_ref()
        .map(|f| FluidMaterial::new(f.rho0, f.c0, f.gamma_eos, f.mu_f, f.delta, f.beta1, f.beta2))
        .transpose()?;
    let solid = cfg
        .solid
        .as_ref()
        .map(|s| {
            SolidMaterial::new(
                s.rho0,
                s.youngs_modulus,
                s.poisson_ratio,
                s.gamma_ap,
                s.eps_f,
                cfg.fracture_enabled,
                s.beta1,
                s.beta2,
            )
        })
        .transpose()?;

    let mut warnings = Vec::new();
    let mut particles = Vec::new();
    let mut solid_extents = Vec::new();
    for (k, b) in cfg.blocks.iter().enumerate() {
        let rect = Rect::new(b.min, b.max);
        let rho0 = match b.phase {
            Phase::Fluid => fluid.map(|f| f.rho0),
            Phase::Solid => solid.map(|s| s.rho0),
            Phase::Wall => {
                return Err(SimError::Config(format!(
                    "block {k}: walls are declared with [[walls]], not as blocks"
                )))
            }
        }
        .ok_or_else(|| SimError::Config(format!("block {k}: no [{}] material", b.phase.as_str())))?;
        for (side, len) in [("width", rect.width()), ("height", rect.height())] {
            if !(len > 0.0) {
                return Err(SimError::Config(format!("block {k}: {side} must be positive")));
            }
            let n = lattice_count(len, dp).max(1) as f64;
            let misfit = (n * dp - len).abs() / len;
            if misfit > LATTICE_FIT_TOL {
                let msg = format!(
                    "block {k} ({}): {side} {len} is not a multiple of dp {dp} (lattice spans {}, misfit {:.2}%)",
                    b.phase.as_str(),
                    n * dp,
                    100.0 * misfit
                );
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        let mut ps = build_lattice(&rect, dp, b.phase, rho0, h).map_err(|e| SimError::Config(format!("block {k}: {e}")))?;
        if b.phase == Phase::Solid {
            solid_extents.push(lattice_extent(b, dp));
            // half-open windows shifted down by a hair so centres that land
            // exactly on a window edge are counted once
            let eps = 1e-6 * dp;
            ps.retain(|p| {
                !cfg.notches.iter().any(|n| {
                    let (x, y) = (p.x.x + eps, p.x.y + eps);
                    x >= n.x_min && x < n.x_max && y >= n.y && y < n.y + dp
                })
            });
            for p in ps.iter_mut() {
                p.pinned = cfg.pins.iter().any(|r| r.contains(p.x));
            }
        }
        particles.extend(ps);
    }

    if !cfg.walls.is_empty() {
        let f = fluid.ok_or_else(|| SimError::Config("walls need a [fluid] material".into()))?;
        let layers = layer_count(h, dp);
        for (k, wf) in cfg.walls.iter().enumerate() {
            let ps = wf
                .build(dp, layers, f.rho0, h)
                .map_err(|e| SimError::Config(format!("wall {k}: {e}")))?;
            // solids anchored through a wall replace the wall there
            particles.extend(
                ps.into_iter()
                    .filter(|p| !solid_extents.iter().any(|r| r.contains(p.x))),
            );
        }
    }

    if let Some(bi) = &cfg.beam_init {
        let s = solid.ok_or_else(|| SimError::Config("beam_init needs a [solid] material".into()))?;
        if bi.mode_residual().abs() > 1e-3 {
            let msg = format!("beam_init: kL = {} misses cos(kL) cosh(kL) = -1", bi.kl);
            warn!("{msg}");
            warnings.push(msg);
        }
        let c0 = bi.c0.unwrap_or(s.c0);
        for p in particles.iter_mut().filter(|p| p.phase == Phase::Solid && !p.pinned) {
            p.v.y = beam_init_velocity(p.x.x - bi.x0, bi, c0);
        }
    }

    for (id, p) in particles.iter_mut().enumerate() {
        p.id = id;
    }
    if particles.is_empty() {
        return Err(SimError::Config("scenario has no particles".into()));
    }
    Ok(BuiltScenario {
        particles,
        physics: Physics {
            fluid,
            solid,
            gravity: Vec2::new(cfg.gravity[0], cfg.gravity[1]),
            wall_acceleration: Vec2::zeros(),
            dp,
            h,
        },
        warnings,
    })
}
