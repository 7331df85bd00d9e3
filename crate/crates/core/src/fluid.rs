//! Weakly compressible fluid rates: equation of state, delta-SPH continuity,
//! viscous stress, Monaghan artificial viscosity and the momentum equation.
//!
//! Every function reads the current state and the particle's pair list; wall
//! particles appear in the pair lists like fluid particles and carry their
//! extrapolated pressure and density in the same arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::particles::{Pair, ParticleSet};
use crate::{Mat2, Vec2};

/// Fluid constants. `p0 = c0^2 rho0 / gamma_eos` is derived on construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidMaterial {
    pub rho0: f64,
    pub c0: f64,
    pub gamma_eos: f64,
    pub p0: f64,
    pub mu_f: f64,
    pub delta: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl FluidMaterial {
    pub fn new(rho0: f64, c0: f64, gamma_eos: f64, mu_f: f64, delta: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(rho0 > 0.0 && c0 > 0.0 && gamma_eos > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "fluid needs rho0, c0, gamma > 0 (got {rho0}, {c0}, {gamma_eos})"
            )));
        }
        if !(mu_f >= 0.0 && delta >= 0.0 && beta1 >= 0.0 && beta2 >= 0.0) {
            return Err(SimError::InvalidInput(
                "fluid viscosity, delta and artificial-viscosity coefficients must be non-negative".into(),
            ));
        }
        Ok(Self {
            rho0,
            c0,
            gamma_eos,
            p0: c0 * c0 * rho0 / gamma_eos,
            mu_f,
            delta,
            beta1,
            beta2,
        })
    }

    /// Water-like defaults: `gamma = 7`, `delta = 0.1`, `beta1 = 0.1`, `beta2 = 0`.
    pub fn water(c0: f64, mu_f: f64) -> Self {
        Self::new(1000.0, c0, 7.0, mu_f, 0.1, 0.1, 0.0).expect("valid water constants")
    }
}

/// `p = p0 [(rho / rho0)^gamma - 1]`, unclipped.
#[inline]
pub fn eos_pressure(rho: f64, mat: &FluidMaterial) -> f64 {
    mat.p0 * ((rho / mat.rho0).powf(mat.gamma_eos) - 1.0)
}

/// `mu_ij = h v_ij . x_ij / (|x_ij|^2 + 0.01 h^2)`.
#[inline]
pub fn mu_ij(rij: Vec2, vij: Vec2, h: f64) -> f64 {
    h * vij.dot(&rij) / (rij.norm_squared() + 0.01 * h * h)
}

/// Monaghan artificial viscosity `pi_ij`; zero for receding pairs.
#[inline]
pub fn artificial_viscosity(rij: Vec2, vij: Vec2, rho_bar: f64, c_bar: f64, h: f64, beta1: f64, beta2: f64) -> f64 {
    if vij.dot(&rij) > 0.0 {
        return 0.0;
    }
    let mu = mu_ij(rij, vij, h);
    (-beta1 * c_bar * mu + beta2 * mu * mu) / rho_bar
}

/// Continuity rate with delta-SPH diffusion:
///
/// ```text
/// drho_i/dt = sum_j m_j v_ij . gradW_ij
///           + delta h c0 sum_j 2 (m_j / rho_j) (rho_i - rho_j) x_ij . gradW_ij / (|x_ij|^2 + 0.01 h^2)
/// ```
pub fn continuity_rate(i: usize, pairs: &[Pair], set: &ParticleSet, mat: &FluidMaterial, h: f64) -> f64 {
    let vi = set.v[i];
    let rhoi = set.rho[i];
    let eps = 0.01 * h * h;
    let mut conv = 0.0;
    let mut diff = 0.0;
    for pr in pairs {
        let j = pr.j;
        let mj = set.m[j];
        conv += mj * (vi - set.v[j]).dot(&pr.grad);
        diff += 2.0 * (mj / set.rho[j]) * (rhoi - set.rho[j]) * pr.rij.dot(&pr.grad) / (pr.r * pr.r + eps);
    }
    conv + mat.delta * h * mat.c0 * diff
}

/// Uncorrected SPH velocity gradient `l^ab = -sum_j (m_j/rho_j) (v_i - v_j)^a gradW_ij^b`.
pub fn velocity_gradient(i: usize, pairs: &[Pair], set: &ParticleSet) -> Mat2 {
    let vi = set.v[i];
    let mut l = Mat2::zeros();
    for pr in pairs {
        let vol = set.m[pr.j] / set.rho[pr.j];
        l -= vol * (vi - set.v[pr.j]) * pr.grad.transpose();
    }
    l
}

/// Newtonian viscous stress `tau = mu_f (l + l^T)` from a velocity gradient.
#[inline]
pub fn viscous_stress_from_gradient(l: &Mat2, mu_f: f64) -> Mat2 {
    mu_f * (l + l.transpose())
}

/// Viscous stress of particle `i` from its SPH velocity gradient.
pub fn viscous_stress(i: usize, pairs: &[Pair], set: &ParticleSet, mat: &FluidMaterial) -> Mat2 {
    viscous_stress_from_gradient(&velocity_gradient(i, pairs, set), mat.mu_f)
}

/// Fluid acceleration from pressure, viscous stress and artificial viscosity
/// (pairwise antisymmetric), plus gravity.
///
/// ```text
/// dv_i/dt = sum_j m_j (tau_i/rho_i^2 + tau_j/rho_j^2 - pi_ij I) gradW_ij
///         - sum_j m_j (p_i/rho_i^2 + p_j/rho_j^2) gradW_ij + g
/// ```
pub fn momentum_rate(
    i: usize,
    pairs: &[Pair],
    set: &ParticleSet,
    tau: &[Mat2],
    mat: &FluidMaterial,
    h: f64,
    gravity: Vec2,
) -> Vec2 {
    let rhoi = set.rho[i];
    let pi_term = set.p[i] / (rhoi * rhoi);
    let tau_i = tau[i] / (rhoi * rhoi);
    let mut acc = Vec2::zeros();
    for pr in pairs {
        let j = pr.j;
        let rhoj = set.rho[j];
        let inv_rhoj2 = 1.0 / (rhoj * rhoj);
        let vij = set.v[i] - set.v[j];
        let av = artificial_viscosity(pr.rij, vij, 0.5 * (rhoi + rhoj), mat.c0, h, mat.beta1, mat.beta2);
        let scalar = pi_term + set.p[j] * inv_rhoj2 + av;
        let stress = tau_i + tau[j] * inv_rhoj2;
        acc += set.m[j] * (stress * pr.grad - scalar * pr.grad);
    }
    acc + gravity
}
