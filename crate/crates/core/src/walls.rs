//! Fixed dummy-particle walls. Wall particles never move; before each rate
//! evaluation their pressure is extrapolated from the surrounding fluid and
//! their density follows from inverting the fluid equation of state.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fluid::FluidMaterial;
use crate::particles::{Pair, ParticleSet, Particle, Phase};
use crate::Vec2;

/// Lower bound applied to `p_w / p0 + 1` before taking the `1/gamma` root.
pub const WALL_DENSITY_FLOOR: f64 = 1e-3;

/// Number of dummy layers needed to cover a kernel support of `2h`.
pub fn layer_count(h: f64, dp: f64) -> usize {
    ((2.0 * h / dp) - 1e-9).ceil().max(1.0) as usize
}

/// Side of a wall face on which the dummy layers are stacked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outward {
    Left,
    Right,
    Down,
    Up,
}

impl Outward {
    fn normal(self) -> Vec2 {
        match self {
            Outward::Left => Vec2::new(-1.0, 0.0),
            Outward::Right => Vec2::new(1.0, 0.0),
            Outward::Down => Vec2::new(0.0, -1.0),
            Outward::Up => Vec2::new(0.0, 1.0),
        }
    }
}

/// An axis-aligned wall face from `start` to `end`; layers are stacked on
/// the `outward` side. `extend_start` / `extend_end` continue the layers
/// `layers * dp` past that end, which fills tank corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallFace {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub outward: Outward,
    #[serde(default)]
    pub extend_start: bool,
    #[serde(default)]
    pub extend_end: bool,
}

/// A set of fixed wall particles plus the prescribed wall acceleration used
/// in the pressure extrapolation.
#[derive(Clone, Debug, Default)]
pub struct WallLayer {
    pub particles: Vec<Particle>,
    pub acceleration: Vec2,
}

impl WallFace {
    /// Wall particles of this face at spacing `dp` with `layers` layers.
    pub fn build(&self, dp: f64, layers: usize, rho0: f64, h: f64) -> Result<Vec<Particle>> {
        let a = Vec2::new(self.start[0], self.start[1]);
        let b = Vec2::new(self.end[0], self.end[1]);
        let along = b - a;
        let len = along.norm();
        let n = self.outward.normal();
        if len < dp || along.dot(&n).abs() > 1e-12 * len.max(1.0) || (along.x != 0.0 && along.y != 0.0) {
            return Err(SimError::InvalidInput(format!(
                "wall face {:?} -> {:?} must be axis-aligned, at least dp long and perpendicular to its outward side",
                self.start, self.end
            )));
        }
        let t = along / len;
        let count = crate::particles::lattice_count(len, dp).max(1);
        let pre = if self.extend_start { layers } else { 0 };
        let post = if self.extend_end { layers } else { 0 };
        let mass = rho0 * dp * dp;
        let mut out = Vec::with_capacity((count + pre + post) * layers);
        for layer in 0..layers {
            let offset = n * ((layer as f64 + 0.5) * dp);
            for k in 0..count + pre + post {
                let s = (k as f64 - pre as f64 + 0.5) * dp;
                out.push(Particle::new(Phase::Wall, a + t * s + offset, rho0, mass, h));
            }
        }
        Ok(out)
    }
}

/// Extrapolated wall pressure
///
/// ```text
/// p_w = [sum_f p_f W_wf + (g - a_w) . sum_f rho_f x_wf W_wf] / sum_f W_wf
/// ```
///
/// over the fluid neighbors in `pairs` (pairs of `w` with non-fluid partners
/// are ignored). Returns 0 when no fluid particle is within the support.
pub fn wall_pressure(_w: usize, pairs: &[Pair], set: &ParticleSet, gravity: Vec2, wall_acc: Vec2) -> f64 {
    let mut sum_w = 0.0;
    let mut sum_p = 0.0;
    let mut sum_rx = Vec2::zeros();
    for pr in pairs {
        if set.phase[pr.j] != Phase::Fluid || pr.w <= 0.0 {
            continue;
        }
        sum_w += pr.w;
        sum_p += set.p[pr.j] * pr.w;
        // pr.rij = x_w - x_f
        sum_rx += set.rho[pr.j] * pr.rij * pr.w;
    }
    if sum_w <= 0.0 {
        return 0.0;
    }
    (sum_p + (gravity - wall_acc).dot(&sum_rx)) / sum_w
}

/// Wall density `rho_w = rho0 (p_w/p0 + 1)^(1/gamma)`. The second value is
/// true when the argument had to be clamped to [`WALL_DENSITY_FLOOR`].
pub fn wall_density(p_w: f64, mat: &FluidMaterial) -> (f64, bool) {
    let arg = p_w / mat.p0 + 1.0;
    if arg <= WALL_DENSITY_FLOOR {
        return (mat.rho0 * WALL_DENSITY_FLOOR.powf(1.0 / mat.gamma_eos), true);
    }
    (mat.rho0 * arg.powf(1.0 / mat.gamma_eos), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::eos_pressure;
    use crate::kernel::KernelSpec;
    use approx::assert_relative_eq;

    fn mat() -> FluidMaterial {
        FluidMaterial::new(1000.0, 10.0, 7.0, 0.0, 0.1, 0.1, 0.0).unwrap()
    }

    fn pair(set: &ParticleSet, k: &KernelSpec, i: usize, j: usize) -> Pair {
        let rij = set.x[i] - set.x[j];
        let r = rij.norm();
        let (w, grad) = k.value_and_gradient(rij, r);
        Pair { j, rij, r, w, grad }
    }

    #[test]
    fn single_neighbor_pressure_is_copied() {
        let k = KernelSpec::new(0.015).unwrap();
        let mut set = ParticleSet::default();
        set.push(&Particle::new(Phase::Wall, Vec2::zeros(), 1000.0, 0.1, 0.015));
        set.push(&Particle::new(Phase::Fluid, Vec2::new(0.007, 0.003), 1000.0, 0.1, 0.015));
        set.p[1] = 500.0;
        let prs = [pair(&set, &k, 0, 1)];
        assert_relative_eq!(wall_pressure(0, &prs, &set, Vec2::zeros(), Vec2::zeros()), 500.0, max_relative = 1e-14);
        assert_eq!(wall_pressure(0, &[], &set, Vec2::new(0.0, -9.81), Vec2::zeros()), 0.0);
    }

    #[test]
    fn hydrostatic_correction_for_fluid_above() {
        let k = KernelSpec::new(0.015).unwrap();
        let d = 0.01;
        let mut set = ParticleSet::default();
        set.push(&Particle::new(Phase::Wall, Vec2::zeros(), 1000.0, 0.1, 0.015));
        set.push(&Particle::new(Phase::Fluid, Vec2::new(0.0, d), 1002.0, 0.1, 0.015));
        set.p[1] = 120.0;
        let prs = [pair(&set, &k, 0, 1)];
        let pw = wall_pressure(0, &prs, &set, Vec2::new(0.0, -9.81), Vec2::zeros());
        assert_relative_eq!(pw, 120.0 + 1002.0 * 9.81 * d, max_relative = 1e-13);
    }

    #[test]
    fn density_reference_values() {
        let m = mat();
        assert_eq!(wall_density(0.0, &m), (1000.0, false));
        let (rho, clamped) = wall_density(eos_pressure(1010.0, &m), &m);
        assert!(!clamped);
        assert!((rho - 1010.0).abs() < 1e-12 * 1010.0);
        let (rho, _) = wall_density(-0.05 * m.p0, &m);
        assert_relative_eq!(rho, 1000.0 * 0.95f64.powf(1.0 / 7.0), max_relative = 1e-14);
        assert!((rho / 1000.0 - 0.99270).abs() < 1e-5);
        let (rho, clamped) = wall_density(-2.0 * m.p0, &m);
        assert!(clamped && rho.is_finite() && rho > 0.0);
    }

    #[test]
    fn layers_cover_the_support() {
        assert_eq!(layer_count(1.5 * 0.01, 0.01), 3);
        assert_eq!(layer_count(1.0, 1.0), 2);
    }

    #[test]
    fn face_builds_corner_filled_layers() {
        let f = WallFace {
            start: [0.0, 0.0],
            end: [1.0, 0.0],
            outward: Outward::Down,
            extend_start: true,
            extend_end: true,
        };
        let ps = f.build(0.1, 3, 1000.0, 0.15).unwrap();
        assert_eq!(ps.len(), 3 * 16);
        assert!(ps.iter().all(|p| p.x.y < 0.0 && p.phase == Phase::Wall));
        let min_x = ps.iter().map(|p| p.x.x).fold(f64::INFINITY, f64::min);
        assert!((min_x + 0.25).abs() < 1e-12);
        let one_sided = WallFace {
            extend_end: false,
            ..f.clone()
        };
        assert_eq!(one_sided.build(0.1, 3, 1000.0, 0.15).unwrap().len(), 3 * 13);
        let diagonal = WallFace {
            start: [0.0, 0.0],
            end: [1.0, 1.0],
            outward: Outward::Down,
            extend_start: false,
            extend_end: false,
        };
        assert!(diagonal.build(0.1, 3, 1000.0, 0.15).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn eos_round_trip(rho in 900.0f64..1100.0) {
                let m = mat();
                let (back, clamped) = wall_density(eos_pressure(rho, &m), &m);
                prop_assert!(!clamped);
                prop_assert!((back - rho).abs() <= 1e-12 * rho);
            }
        }
    }
}
