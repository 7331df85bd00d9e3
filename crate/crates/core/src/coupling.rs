//! Soft repulsive contact between the fluid and the solid, and between the
//! solid and the rigid walls.
//!
//! Fluid and solid never enter each other's SPH sums; the only coupling is a
//! short-range pair force that switches on below one particle spacing.

use crate::particles::{Pair, ParticleSet, Phase};
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactParams {
    /// Sound-speed scale of the pair (m/s).
    pub c: f64,
    /// Initial particle spacing (m).
    pub dp: f64,
    /// Distance at and beyond which the force vanishes (m), equal to `dp`.
    pub cutoff: f64,
}

impl ContactParams {
    pub fn new(c: f64, dp: f64) -> Self {
        Self { c, dp, cutoff: dp }
    }
}

/// Piecewise contact profile, continuous on `[0, 2]` and zero beyond.
///
/// ```text
/// f = 2/3                 eta <= 2/3
///     2 eta - 1.5 eta^2   2/3 < eta <= 1
///     0.5 (2 - eta)^2     1 < eta < 2
/// ```
pub fn contact_kernel_f(eta: f64) -> f64 {
    if eta <= 2.0 / 3.0 {
        2.0 / 3.0
    } else if eta <= 1.0 {
        2.0 * eta - 1.5 * eta * eta
    } else if eta < 2.0 {
        0.5 * (2.0 - eta) * (2.0 - eta)
    } else {
        0.0
    }
}

/// Contact acceleration on particle `i` for `rij = x_i - x_j`
///
/// ```text
/// F = 0.01 c^2 zeta f(eta) rij / r^2,  zeta = 1 - r/dp,  eta = r / (0.75 h_ij)
/// ```
///
/// Zero for `r >= cutoff`. Coincident particles are pushed along `+x` with
/// `r` clamped to `1e-6 dp`; the second value reports that fallback.
pub fn contact_force(rij: Vec2, h_ij: f64, params: &ContactParams) -> (Vec2, bool) {
    let r = rij.norm();
    if r >= params.cutoff {
        return (Vec2::zeros(), false);
    }
    let (dir, r, flagged) = if r > 0.0 {
        (rij / r, r, false)
    } else {
        (Vec2::new(1.0, 0.0), 1e-6 * params.dp, true)
    };
    let zeta = 1.0 - r / params.dp;
    if zeta <= 0.0 {
        return (Vec2::zeros(), flagged);
    }
    let f = contact_kernel_f(r / (0.75 * h_ij));
    (dir * (0.01 * params.c * params.c * zeta * f / r), flagged)
}

/// Sound-speed scales of the two kinds of contact pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactSpeeds {
    pub fluid_solid: f64,
    pub solid_wall: f64,
}

#[derive(Clone, Debug, Default)]
pub struct FsiForces {
    pub acc: Vec<Vec2>,
    /// Coincident-pair fallbacks taken during assembly.
    pub flagged: usize,
}

/// Contact acceleration of one particle from its pair list.
///
/// Fluid particles are pushed by solid neighbors (pinned or not). Free solid
/// particles get the opposite reaction scaled by `m_f / m_s` plus the push of
/// the walls. Pinned solids and walls receive nothing.
pub fn contact_acceleration(
    i: usize,
    pairs: &[Pair],
    set: &ParticleSet,
    speeds: &ContactSpeeds,
    dp: f64,
) -> (Vec2, usize) {
    let mut acc = Vec2::zeros();
    let mut flagged = 0;
    match set.phase[i] {
        Phase::Fluid => {
            let params = ContactParams::new(speeds.fluid_solid, dp);
            for pr in pairs.iter().filter(|pr| pr.r < dp && set.phase[pr.j] == Phase::Solid) {
                let (f, flag) = contact_force(pr.rij, 0.5 * (set.h[i] + set.h[pr.j]), &params);
                acc += f;
                flagged += flag as usize;
            }
        }
        Phase::Solid if !set.pinned[i] => {
            let fs = ContactParams::new(speeds.fluid_solid, dp);
            let sw = ContactParams::new(speeds.solid_wall, dp);
            for pr in pairs.iter().filter(|pr| pr.r < dp) {
                let j = pr.j;
                let h_ij = 0.5 * (set.h[i] + set.h[j]);
                match set.phase[j] {
                    Phase::Fluid => {
                        // force on the fluid partner, seen from its side
                        let (f, flag) = contact_force(-pr.rij, h_ij, &fs);
                        acc -= f * (set.m[j] / set.m[i]);
                        flagged += flag as usize;
                    }
                    Phase::Wall => {
                        let (f, flag) = contact_force(pr.rij, h_ij, &sw);
                        acc += f;
                        flagged += flag as usize;
                    }
                    Phase::Solid => {}
                }
            }
        }
        _ => {}
    }
    (acc, flagged)
}

/// Contact accelerations of every particle from the per-particle pair lists.
pub fn assemble_fsi_forces(set: &ParticleSet, pairs: &[Vec<Pair>], speeds: &ContactSpeeds, dp: f64) -> FsiForces {
    let mut out = FsiForces {
        acc: vec![Vec2::zeros(); set.len()],
        flagged: 0,
    };
    for i in 0..set.len() {
        let (a, f) = contact_acceleration(i, &pairs[i], set, speeds, dp);
        out.acc[i] = a;
        out.flagged += f;
    }
    out
}
