//! Midpoint predictor–corrector stepping under a CFL-limited time step.
//!
//! Each rate evaluation is a fixed pipeline: neighbor lists, wall
//! extrapolation, fluid stresses, solid corrections and stress rates, then
//! momentum and contact. Every stage writes only its own particle's slot, so
//! parallel runs are bitwise reproducible.

use rayon::prelude::*;

use crate::coupling::{contact_acceleration, ContactSpeeds};
use crate::error::{Result, SimError};
use crate::fluid::{self, FluidMaterial};
use crate::kernel::{CorrectionMatrix, KernelSpec};
use crate::particles::{build_bonds, BondSet, NeighborGrid, Pair, Particle, ParticleSet, Phase};
use crate::solid::{self, BondGeometry, SolidForceParams, SolidMaterial};
use crate::walls;
use crate::{Mat2, Vec2};

pub const DEFAULT_CFL: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub cfl: f64,
    pub dt: f64,
    pub t: f64,
    pub end_time: f64,
}

/// Physical constants of a run.
#[derive(Clone, Debug)]
pub struct Physics {
    pub fluid: Option<FluidMaterial>,
    pub solid: Option<SolidMaterial>,
    pub gravity: Vec2,
    /// Prescribed acceleration of the (fixed) walls, used in the pressure
    /// extrapolation only.
    pub wall_acceleration: Vec2,
    pub dp: f64,
    pub h: f64,
}

impl Physics {
    fn sound_speed(&self, phase: Phase) -> f64 {
        let cf = self.fluid.map(|f| f.c0);
        let cs = self.solid.map(|s| s.c0);
        match phase {
            Phase::Fluid | Phase::Wall => cf.or(cs).unwrap_or(0.0),
            Phase::Solid => cs.or(cf).unwrap_or(0.0),
        }
    }

    fn contact_speeds(&self) -> ContactSpeeds {
        let cf = self.fluid.map(|f| f.c0).unwrap_or(0.0);
        let cs = self.solid.map(|s| s.c0).unwrap_or(0.0);
        ContactSpeeds {
            fluid_solid: if cf > 0.0 { cf } else { cs },
            solid_wall: cf.max(cs),
        }
    }
}

/// `dt = cfl min_i h_i / (c_i + |v_i|)` over all particles.
pub fn cfl_dt(set: &ParticleSet, sound_speed: impl Fn(Phase) -> f64, cfl: f64, t: f64) -> Result<f64> {
    let mut dt = f64::INFINITY;
    for i in 0..set.len() {
        let speed = set.v[i].norm();
        if !speed.is_finite() {
            return Err(SimError::NonFiniteVelocity { particle: i, time: t });
        }
        let signal = sound_speed(set.phase[i]) + speed;
        if signal > 0.0 {
            dt = dt.min(set.h[i] / signal);
        }
    }
    if !dt.is_finite() {
        return Err(SimError::InvalidInput("no signal speed to bound the time step".into()));
    }
    Ok(cfl * dt)
}

/// Counters for the numerical fallbacks taken during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Flags {
    /// Particle evaluations whose correction matrix fell back to identity.
    pub degenerate_corrections: u64,
    /// Wall density evaluations clamped at the density floor.
    pub wall_density_clamps: u64,
    /// Coincident contact pairs pushed along the fallback direction.
    pub contact_fallbacks: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FractureEvent {
    pub t: f64,
    pub bond: usize,
    pub i: usize,
    pub j: usize,
    /// Bond midpoint at the moment of failure.
    pub x: [f64; 2],
}

#[derive(Clone, Debug, Default)]
struct Rates {
    drho: Vec<f64>,
    dv: Vec<Vec2>,
    ds: Vec<Mat2>,
}

impl Rates {
    fn zeros(n: usize) -> Self {
        Self {
            drho: vec![0.0; n],
            dv: vec![Vec2::zeros(); n],
            ds: vec![Mat2::zeros(); n],
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Workspace {
    /// SPH partners: fluid and wall neighbors for fluid and wall particles.
    sph: Vec<Vec<Pair>>,
    /// Contact partners within one spacing (fluid–solid, solid–wall).
    contact: Vec<Vec<Pair>>,
    tau: Vec<Mat2>,
    corr: Vec<CorrectionMatrix>,
    geom: Vec<BondGeometry>,
    rates: Rates,
}

/// Full simulation state.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub set: ParticleSet,
    pub bonds: BondSet,
    pub physics: Physics,
    pub control: StepControl,
    pub flags: Flags,
    pub fracture_log: Vec<FractureEvent>,
    pub steps: u64,
    kernel: KernelSpec,
    solid_params: SolidForceParams,
    fluid_idx: Vec<usize>,
    wall_idx: Vec<usize>,
    solid_idx: Vec<usize>,
    work: Workspace,
}

impl Simulation {
    pub fn new(particles: &[Particle], physics: Physics, cfl: f64, end_time: f64) -> Result<Self> {
        if particles.is_empty() {
            return Err(SimError::InvalidInput("no particles".into()));
        }
        if !(cfl > 0.0) || !(end_time >= 0.0) || !(physics.dp > 0.0) {
            return Err(SimError::InvalidInput("cfl and dp must be positive, end_time non-negative".into()));
        }
        let kernel = KernelSpec::new(physics.h)?;
        let mut set = ParticleSet::from_particles(particles);
        let has = |p: Phase| set.phase.iter().any(|&q| q == p);
        if (has(Phase::Fluid) || has(Phase::Wall)) && physics.fluid.is_none() {
            return Err(SimError::InvalidInput("fluid or wall particles need a fluid material".into()));
        }
        if has(Phase::Solid) && physics.solid.is_none() {
            return Err(SimError::InvalidInput("solid particles need a solid material".into()));
        }
        for i in 0..set.len() {
            if set.phase[i] == Phase::Wall {
                set.v[i] = Vec2::zeros();
            }
            if set.pinned[i] {
                set.v[i] = Vec2::zeros();
            }
        }
        let bonds = if has(Phase::Solid) {
            build_bonds(&set, physics.dp)
        } else {
            BondSet::default()
        };
        let idx = |p: Phase| set.indices_of(p);
        let (fluid_idx, wall_idx, solid_idx) = (idx(Phase::Fluid), idx(Phase::Wall), idx(Phase::Solid));
        let n = set.len();
        let solid_params = SolidForceParams::new(&kernel, physics.dp);
        let mut sim = Self {
            set,
            bonds,
            control: StepControl {
                cfl,
                dt: 0.0,
                t: 0.0,
                end_time,
            },
            physics,
            flags: Flags::default(),
            fracture_log: Vec::new(),
            steps: 0,
            kernel,
            solid_params,
            fluid_idx,
            wall_idx,
            solid_idx,
            work: Workspace {
                sph: vec![Vec::new(); n],
                contact: vec![Vec::new(); n],
                tau: vec![Mat2::zeros(); n],
                corr: vec![CorrectionMatrix::default(); n],
                geom: Vec::new(),
                rates: Rates::zeros(n),
            },
        };
        sim.refresh_eos();
        sim.check_state()?;
        sim.prepare();
        sim.control.dt = sim.next_dt()?;
        Ok(sim)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn time(&self) -> f64 {
        self.control.t
    }

    pub fn is_finished(&self) -> bool {
        self.control.t >= self.control.end_time * (1.0 - 1e-12)
    }

    /// CFL step at the current state, shortened to land on `end_time`.
    fn next_dt(&self) -> Result<f64> {
        let dt = cfl_dt(&self.set, |p| self.physics.sound_speed(p), self.control.cfl, self.control.t)?;
        let left = self.control.end_time - self.control.t;
        Ok(if left > 0.0 { dt.min(left) } else { dt })
    }

    /// Pressure from density for fluid and solid particles.
    fn refresh_eos(&mut self) {
        if let Some(f) = &self.physics.fluid {
            for &i in &self.fluid_idx {
                self.set.p[i] = fluid::eos_pressure(self.set.rho[i], f);
            }
        }
        if let Some(s) = &self.physics.solid {
            for &i in &self.solid_idx {
                self.set.p[i] = solid::solid_eos(self.set.rho[i], s);
            }
        }
    }

    fn check_state(&self) -> Result<()> {
        let t = self.control.t;
        for i in 0..self.set.len() {
            if !(self.set.v[i].x.is_finite() && self.set.v[i].y.is_finite()) {
                return Err(SimError::NonFiniteVelocity { particle: i, time: t });
            }
            let rho = self.set.rho[i];
            if rho.is_nan() || !self.set.x[i].iter().all(|c| c.is_finite()) {
                return Err(SimError::NonFiniteState { particle: i, time: t });
            }
            if rho <= 0.0 {
                return Err(SimError::NonPositiveDensity {
                    particle: i,
                    density: rho,
                    time: t,
                });
            }
        }
        Ok(())
    }

    /// Neighbor lists and wall extrapolation for the current positions.
    ///
    /// Fluid and wall particles get SPH partners among fluid and walls;
    /// contact partners (closer than `dp`) are fluid–solid and solid–wall.
    fn prepare(&mut self) {
        if self.fluid_idx.is_empty() && self.wall_idx.is_empty() {
            return;
        }
        let set = &self.set;
        let kernel = &self.kernel;
        let radius = kernel.support_radius();
        let dp = self.physics.dp;
        let medium = NeighborGrid::build_filtered(&set.x, radius, |i| set.phase[i] != Phase::Solid);
        let solids = (!self.solid_idx.is_empty())
            .then(|| NeighborGrid::build_filtered(&set.x, radius, |i| set.phase[i] == Phase::Solid));
        let contact_pair = |j: usize, rij: Vec2, r2: f64| Pair {
            j,
            rij,
            r: r2.sqrt(),
            w: 0.0,
            grad: Vec2::zeros(),
        };
        self.work
            .sph
            .par_iter_mut()
            .zip(self.work.contact.par_iter_mut())
            .enumerate()
            .for_each(|(i, (sph, contact))| {
                sph.clear();
                contact.clear();
                let xi = set.x[i];
                match set.phase[i] {
                    Phase::Fluid | Phase::Wall => {
                        medium.for_each_within(xi, radius, |j, rij, r2| {
                            if j != i {
                                let r = r2.sqrt();
                                let (w, grad) = kernel.value_and_gradient(rij, r);
                                sph.push(Pair { j, rij, r, w, grad });
                            }
                        });
                        if set.phase[i] == Phase::Fluid {
                            if let Some(g) = &solids {
                                g.for_each_within(xi, dp, |j, rij, r2| contact.push(contact_pair(j, rij, r2)));
                            }
                        }
                    }
                    Phase::Solid if !set.pinned[i] => {
                        medium.for_each_within(xi, dp, |j, rij, r2| contact.push(contact_pair(j, rij, r2)));
                    }
                    Phase::Solid => {}
                }
            });
        self.update_walls();
    }

    fn update_walls(&mut self) {
        let Some(fluid) = self.physics.fluid else {
            return;
        };
        let g = self.physics.gravity;
        let aw = self.physics.wall_acceleration;
        let set = &self.set;
        let sph = &self.work.sph;
        let values: Vec<(f64, f64, bool)> = self
            .wall_idx
            .par_iter()
            .map(|&w| {
                let p = walls::wall_pressure(w, &sph[w], set, g, aw);
                let (rho, clamped) = walls::wall_density(p, &fluid);
                (p, rho, clamped)
            })
            .collect();
        for (&w, (p, rho, clamped)) in self.wall_idx.iter().zip(values) {
            self.set.p[w] = p;
            self.set.rho[w] = rho;
            self.flags.wall_density_clamps += clamped as u64;
        }
    }

    /// Rates at the current (prepared) state into `work.rates`.
    fn evaluate(&mut self) {
        let n = self.set.len();
        let set = &self.set;
        let phys = &self.physics;
        let h = phys.h;
        let g = phys.gravity;
        let work = &mut self.work;

        // fluid and wall viscous stresses
        if let Some(fm) = phys.fluid {
            let sph = &work.sph;
            work.tau.par_iter_mut().enumerate().for_each(|(i, tau)| {
                *tau = match set.phase[i] {
                    Phase::Fluid | Phase::Wall if fm.mu_f > 0.0 => fluid::viscous_stress(i, &sph[i], set, &fm),
                    _ => Mat2::zeros(),
                };
            });
        }

        // solid bond geometry and corrections
        let mut degenerate = 0u64;
        if let Some(sm) = phys.solid {
            solid::bond_geometry_into(&self.bonds, &set.x, &self.kernel, &self.solid_params, &mut work.geom);
            let bonds = &self.bonds;
            let geom = &work.geom;
            let local: Vec<(CorrectionMatrix, f64, Mat2)> = self
                .solid_idx
                .par_iter()
                .map(|&i| {
                    let (c, l, drho) = solid::local_rates(i, bonds, geom, set);
                    let (eps, omega) = solid::strain_spin(&l);
                    (c, drho, solid::jaumann_rate(&set.s[i], &eps, &omega, sm.shear_modulus))
                })
                .collect();
            for (&i, (c, drho, ds)) in self.solid_idx.iter().zip(local) {
                degenerate += (c.degenerate && !bonds.of(i).is_empty()) as u64;
                work.corr[i] = c;
                work.rates.drho[i] = drho;
                work.rates.ds[i] = ds;
            }
        }

        let speeds = phys.contact_speeds();
        let dp = phys.dp;
        let bonds = &self.bonds;
        let solid_params = &self.solid_params;
        let (sph, contact, tau, corr, geom) = (&work.sph, &work.contact, &work.tau, &work.corr, &work.geom);
        let rates: Vec<(f64, Vec2, Mat2, usize)> = (0..n)
            .into_par_iter()
            .map(|i| match set.phase[i] {
                Phase::Wall => (0.0, Vec2::zeros(), Mat2::zeros(), 0),
                Phase::Fluid => {
                    let fm = phys.fluid.as_ref().expect("fluid material");
                    let drho = fluid::continuity_rate(i, &sph[i], set, fm, h);
                    let mut dv = fluid::momentum_rate(i, &sph[i], set, tau, fm, h, g);
                    let (ac, fl) = contact_acceleration(i, &contact[i], set, &speeds, dp);
                    dv += ac;
                    (drho, dv, Mat2::zeros(), fl)
                }
                Phase::Solid => {
                    if set.pinned[i] {
                        return (0.0, Vec2::zeros(), Mat2::zeros(), 0);
                    }
                    let sm = phys.solid.as_ref().expect("solid material");
                    let mut dv = solid::momentum_rate_solid(i, bonds, geom, set, corr, sm, solid_params, g);
                    let (ac, fl) = contact_acceleration(i, &contact[i], set, &speeds, dp);
                    dv += ac;
                    (0.0, dv, Mat2::zeros(), fl)
                }
            })
            .collect();
        let mut fallbacks = 0u64;
        for (i, (drho, dv, ds, fl)) in rates.into_iter().enumerate() {
            if set.phase[i] != Phase::Solid {
                work.rates.drho[i] = drho;
                work.rates.ds[i] = ds;
            }
            work.rates.dv[i] = dv;
            fallbacks += fl as u64;
        }
        self.flags.degenerate_corrections += degenerate;
        self.flags.contact_fallbacks += fallbacks;
    }

    /// `state = base + dt * rates`, positions advanced with `vel`.
    fn apply(&mut self, base: &Saved, vel: &[Vec2], dt: f64) {
        let r = &self.work.rates;
        for i in 0..self.set.len() {
            if self.set.phase[i] == Phase::Wall {
                continue;
            }
            self.set.rho[i] = base.rho[i] + dt * r.drho[i];
            if self.set.phase[i] == Phase::Solid {
                self.set.s[i] = base.s[i] + dt * r.ds[i];
            }
            if self.set.pinned[i] {
                continue;
            }
            self.set.x[i] = base.x[i] + dt * vel[i];
            self.set.v[i] = base.v[i] + dt * r.dv[i];
        }
        self.refresh_eos();
    }

    /// One predictor–corrector step of length `control.dt`, followed by the
    /// fracture update. Returns the bonds broken in this step.
    pub fn step(&mut self) -> Result<Vec<FractureEvent>> {
        let dt = self.control.dt;
        let base = Saved {
            x: self.set.x.clone(),
            v: self.set.v.clone(),
            rho: self.set.rho.clone(),
            s: self.set.s.clone(),
        };
        // predictor: half step with rates at t (lists already prepared)
        self.evaluate();
        self.apply(&base, &base.v, 0.5 * dt);
        self.check_state()?;
        self.prepare();
        // corrector: full step with midpoint rates and velocities
        self.evaluate();
        let v_mid = self.set.v.clone();
        self.apply(&base, &v_mid, dt);
        self.control.t += dt;
        self.steps += 1;
        self.check_state()?;

        let mut events = Vec::new();
        if let Some(sm) = self.physics.solid {
            for k in solid::update_fracture(&mut self.bonds, &self.set.x, &sm) {
                let b = &self.bonds.bonds[k];
                let mid = 0.5 * (self.set.x[b.i] + self.set.x[b.j]);
                events.push(FractureEvent {
                    t: self.control.t,
                    bond: k,
                    i: b.i,
                    j: b.j,
                    x: [mid.x, mid.y],
                });
            }
        }
        self.fracture_log.extend_from_slice(&events);
        self.prepare();
        self.control.dt = self.next_dt()?;
        Ok(events)
    }

    /// Per-particle damage (zero for non-solids and bond-less particles).
    pub fn damage(&self) -> Vec<f64> {
        solid::damage_field(&self.bonds, self.set.len())
    }

    pub fn component_count(&self) -> usize {
        solid::component_count(&self.set, &self.bonds)
    }

    /// Broken over initial bonds of the whole solid (0 without bonds).
    pub fn damage_fraction(&self) -> f64 {
        if self.bonds.is_empty() {
            0.0
        } else {
            self.bonds.broken_count() as f64 / self.bonds.len() as f64
        }
    }

    /// Total momentum of the non-wall particles.
    pub fn momentum(&self) -> Vec2 {
        (0..self.set.len())
            .filter(|&i| self.set.phase[i] != Phase::Wall)
            .fold(Vec2::zeros(), |acc, i| acc + self.set.m[i] * self.set.v[i])
    }

    /// Contact accelerations at the current state (diagnostics).
    pub fn contact_accelerations(&self) -> Vec<Vec2> {
        let speeds = self.physics.contact_speeds();
        (0..self.set.len())
            .map(|i| contact_acceleration(i, &self.work.contact[i], &self.set, &speeds, self.physics.dp).0)
            .collect()
    }
}

struct Saved {
    x: Vec<Vec2>,
    v: Vec<Vec2>,
    rho: Vec<f64>,
    s: Vec<Mat2>,
}
