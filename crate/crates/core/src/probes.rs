//! Scalar time-history probes. Point probes pick their particle once, at
//! `t = 0`, and follow it for the rest of the run.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::integrator::Simulation;
use crate::particles::{ParticleSet, Phase};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Largest fluid x plus half a spacing.
    FrontPosition,
    /// Displacement of one particle along `axis`.
    PointDisplacement,
    PointPressure,
    /// Broken over initial bonds of the whole solid.
    DamageFraction,
    /// Connected pieces of the solid under intact bonds.
    ComponentCount,
}

impl ProbeKind {
    pub fn unit(self) -> &'static str {
        match self {
            ProbeKind::FrontPosition | ProbeKind::PointDisplacement => "m",
            ProbeKind::PointPressure => "Pa",
            ProbeKind::DamageFraction | ProbeKind::ComponentCount => "-",
        }
    }

    fn needs_point(self) -> bool {
        matches!(self, ProbeKind::PointDisplacement | ProbeKind::PointPressure)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub name: String,
    pub kind: ProbeKind,
    /// Point probes: the particle of `phase` nearest to this point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
}

/// A probe with its particle resolved.
#[derive(Clone, Debug)]
pub struct Probe {
    pub spec: ProbeSpec,
    pub target: Option<usize>,
    x0: Vec2,
    dp: f64,
}

/// Index of the particle of `phase` nearest to `point`; ties go to the
/// lower index.
pub fn nearest_particle(set: &ParticleSet, point: Vec2, phase: Phase) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..set.len() {
        if set.phase[i] != phase {
            continue;
        }
        let d2 = (set.x[i] - point).norm_squared();
        if best.map_or(true, |(_, b)| d2 < b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, _)| i)
}

impl Probe {
    pub fn resolve(spec: &ProbeSpec, set: &ParticleSet, dp: f64) -> Result<Self> {
        let bad = |msg: &str| SimError::Config(format!("probe '{}': {msg}", spec.name));
        let mut target = None;
        let mut x0 = Vec2::zeros();
        if spec.kind.needs_point() {
            let at = spec.at.ok_or_else(|| bad("point probes need `at`"))?;
            let phase = spec.phase.unwrap_or(Phase::Solid);
            let i = nearest_particle(set, Vec2::new(at[0], at[1]), phase)
                .ok_or_else(|| bad(&format!("no {} particle to attach to", phase.as_str())))?;
            target = Some(i);
            x0 = set.x[i];
        }
        if spec.kind == ProbeKind::PointDisplacement && spec.axis.is_none() {
            return Err(bad("displacement probes need `axis`"));
        }
        if spec.kind == ProbeKind::FrontPosition && set.count(Phase::Fluid) == 0 {
            return Err(bad("no fluid particles"));
        }
        Ok(Self {
            spec: spec.clone(),
            target,
            x0,
            dp,
        })
    }

    /// Column header, `name [unit]`.
    pub fn header(&self) -> String {
        format!("{} [{}]", self.spec.name, self.spec.kind.unit())
    }

    pub fn sample(&self, sim: &Simulation) -> f64 {
        let set = &sim.set;
        match self.spec.kind {
            ProbeKind::FrontPosition => {
                set.x
                    .iter()
                    .zip(&set.phase)
                    .filter(|(_, &p)| p == Phase::Fluid)
                    .map(|(x, _)| x.x)
                    .fold(f64::NEG_INFINITY, f64::max)
                    + 0.5 * self.dp
            }
            ProbeKind::PointDisplacement => {
                let i = self.target.expect("resolved");
                let d = set.x[i] - self.x0;
                match self.spec.axis.expect("resolved") {
                    Axis::X => d.x,
                    Axis::Y => d.y,
                }
            }
            ProbeKind::PointPressure => set.p[self.target.expect("resolved")],
            ProbeKind::DamageFraction => sim.damage_fraction(),
            ProbeKind::ComponentCount => sim.component_count() as f64,
        }
    }
}

/// Time column plus one column per probe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeSeries {
    pub headers: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl ProbeSeries {
    pub fn new(probes: &[Probe]) -> Self {
        Self {
            headers: probes.iter().map(Probe::header).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: f64, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.headers.len());
        self.times.push(t);
        self.rows.push(values);
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// Column whose header starts with `name [`.
    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        let prefix = format!("{name} [");
        self.headers
            .iter()
            .position(|h| h.starts_with(&prefix))
            .map(|k| self.column(k))
    }
}

/// Times at which `values` changes sign, linearly interpolated.
pub fn zero_crossings(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..times.len().min(values.len()) {
        let (a, b) = (values[k - 1], values[k]);
        if a == 0.0 {
            continue;
        }
        if a * b < 0.0 || (b == 0.0 && k + 1 < values.len() && a * values[k + 1] < 0.0) {
            let s = a / (a - b);
            out.push(times[k - 1] + s * (times[k] - times[k - 1]));
        }
    }
    out
}

/// Oscillation period from successive zero crossings (two crossings per
/// period), averaged over all available half periods.
pub fn period_from_crossings(crossings: &[f64]) -> Option<f64> {
    if crossings.len() < 2 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(2.0 * span / (crossings.len() - 1) as f64)
}
