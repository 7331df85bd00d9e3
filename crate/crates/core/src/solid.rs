//! Pseudo-spring SPH for the elastic solid.
//!
//! Every sum runs over a particle's bonds only, weighted by the bond's
//! interaction factor `f_ij`, with kernel gradients renormalized by the
//! particle's correction matrix. Stress is split into a linear-EOS pressure
//! and a deviatoric part advanced with the Jaumann rate.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fluid::artificial_viscosity;
use crate::kernel::{self, CorrectionMatrix, KernelSpec, StencilTerm};
use crate::particles::{Bond, BondSet, ParticleSet, Phase};
use crate::{Mat2, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidMaterial {
    pub rho0: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Bulk modulus `E / (3 (1 - 2 nu))`.
    pub bulk_modulus: f64,
    /// Shear modulus `E / (2 (1 + nu))`.
    pub shear_modulus: f64,
    /// `sqrt(K / rho0)`.
    pub c0: f64,
    pub gamma_ap: f64,
    pub eps_f: f64,
    pub fracture_enabled: bool,
    pub beta1: f64,
    pub beta2: f64,
}

impl SolidMaterial {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho0: f64,
        youngs_modulus: f64,
        poisson_ratio: f64,
        gamma_ap: f64,
        eps_f: f64,
        fracture_enabled: bool,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self> {
        if !(rho0 > 0.0 && youngs_modulus > 0.0) {
            return Err(SimError::InvalidInput("solid needs rho0 > 0 and E > 0".into()));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(SimError::InvalidInput(format!(
                "Poisson ratio must lie in [0, 0.5), got {poisson_ratio}"
            )));
        }
        if fracture_enabled && !(eps_f > 0.0) {
            return Err(SimError::InvalidInput("fracture strain must be positive".into()));
        }
        if !(gamma_ap >= 0.0 && beta1 >= 0.0 && beta2 >= 0.0) {
            return Err(SimError::InvalidInput(
                "artificial pressure/viscosity coefficients must be non-negative".into(),
            ));
        }
        let bulk = youngs_modulus / (3.0 * (1.0 - 2.0 * poisson_ratio));
        let shear = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
        Ok(Self {
            rho0,
            youngs_modulus,
            poisson_ratio,
            bulk_modulus: bulk,
            shear_modulus: shear,
            c0: (bulk / rho0).sqrt(),
            gamma_ap,
            eps_f,
            fracture_enabled,
            beta1,
            beta2,
        })
    }
}

/// Hydrostatic/deviatoric split of the Cauchy stress.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressState {
    pub s: Mat2,
    pub p: f64,
}

impl StressState {
    /// `sigma = S - p I`.
    #[inline]
    pub fn sigma(&self) -> Mat2 {
        self.s - self.p * Mat2::identity()
    }
}

/// Linear equation of state `p = K (rho / rho0 - 1)`.
#[inline]
pub fn solid_eos(rho: f64, mat: &SolidMaterial) -> f64 {
    mat.bulk_modulus * (rho / mat.rho0 - 1.0)
}

/// Kernel geometry of one bond evaluated at the current positions, stored
/// from the point of view of `bond.i` (`rij = x_i - x_j`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BondGeometry {
    pub rij: Vec2,
    pub r: f64,
    pub w: f64,
    pub grad: Vec2,
    /// Artificial-pressure weight `[W(r) / W(dp)]^n_bar`.
    pub ap: f64,
}

/// Per-bond kernel geometry for the current positions.
pub fn bond_geometry(bonds: &BondSet, x: &[Vec2], kernel: &KernelSpec, params: &SolidForceParams) -> Vec<BondGeometry> {
    let mut out = Vec::new();
    bond_geometry_into(bonds, x, kernel, params, &mut out);
    out
}

/// [`bond_geometry`] into a reused buffer.
pub fn bond_geometry_into(
    bonds: &BondSet,
    x: &[Vec2],
    kernel: &KernelSpec,
    params: &SolidForceParams,
    out: &mut Vec<BondGeometry>,
) {
    out.clear();
    out.extend(bonds.bonds.iter().map(|b| {
        let rij = x[b.i] - x[b.j];
        let r = rij.norm();
        let (w, grad) = kernel.value_and_gradient(rij, r);
        let ap = if b.is_intact() { (w / params.w_dp).powf(params.n_bar) } else { 0.0 };
        BondGeometry { rij, r, w, grad, ap }
    }));
}

/// One bonded neighbor of particle `i` seen from `i`.
#[derive(Clone, Copy, Debug)]
pub struct BondedNeighbor {
    pub j: usize,
    pub f: f64,
    pub rij: Vec2,
    pub r: f64,
    pub w: f64,
    pub grad: Vec2,
    pub ap: f64,
}

/// Iterates the bonds of `i`, flipping the stored geometry where `i` is the
/// second particle of the bond.
#[inline]
pub fn bonded_neighbors<'a>(
    i: usize,
    bonds: &'a BondSet,
    geom: &'a [BondGeometry],
) -> impl Iterator<Item = BondedNeighbor> + 'a {
    bonds.of(i).iter().map(move |br| {
        let b = &bonds.bonds[br.bond];
        let g = &geom[br.bond];
        let sign = if b.i == i { 1.0 } else { -1.0 };
        BondedNeighbor {
            j: br.neighbor,
            f: b.f(),
            rij: g.rij * sign,
            r: g.r,
            w: g.w,
            grad: g.grad * sign,
            ap: g.ap,
        }
    })
}

/// Correction matrix of solid particle `i` assembled over its bonds with
/// `f_ij` weighting, so broken bonds drop out of the moment matrix.
pub fn solid_correction(i: usize, bonds: &BondSet, geom: &[BondGeometry], set: &ParticleSet) -> CorrectionMatrix {
    if intact_bonds(i, bonds) < MIN_CORRECTION_BONDS {
        return CorrectionMatrix::fallback();
    }
    kernel::correction_matrix(bonded_neighbors(i, bonds, geom).map(|n| StencilTerm {
        volume: n.f * set.m[n.j] / set.rho[n.j],
        rij: n.rij,
        grad: n.grad,
    }))
}

/// Fewest intact bonds for which the gradient correction is applied. One or
/// two bonds determine the moment matrix exactly, leaving nothing to average
/// out noise: loose debris then sees wildly amplified gradients.
pub const MIN_CORRECTION_BONDS: usize = 3;

fn intact_bonds(i: usize, bonds: &BondSet) -> usize {
    bonds.of(i).iter().filter(|r| bonds.bonds[r.bond].is_intact()).count()
}

/// `l^ab = -sum_j f_ij (m_j/rho_j) (v_i - v_j)^a What_ij^b` with `What = B_i gradW`.
pub fn velocity_gradient(
    i: usize,
    bonds: &BondSet,
    geom: &[BondGeometry],
    set: &ParticleSet,
    b_i: &CorrectionMatrix,
) -> Mat2 {
    let vi = set.v[i];
    let mut l = Mat2::zeros();
    for n in bonded_neighbors(i, bonds, geom) {
        if n.f == 0.0 {
            continue;
        }
        let vol = n.f * set.m[n.j] / set.rho[n.j];
        l -= vol * (vi - set.v[n.j]) * b_i.correct(n.grad).transpose();
    }
    l
}

/// Strain-rate and spin tensors `((l + l^T)/2, (l - l^T)/2)`.
#[inline]
pub fn strain_spin(l: &Mat2) -> (Mat2, Mat2) {
    let lt = l.transpose();
    (0.5 * (l + lt), 0.5 * (l - lt))
}

/// Jaumann deviatoric stress rate
///
/// ```text
/// dS/dt = 2 mu (eps_dot - tr(eps_dot)/3 I) + S omega^T + omega S
/// ```
#[inline]
pub fn jaumann_rate(s: &Mat2, eps_dot: &Mat2, omega: &Mat2, shear_modulus: f64) -> Mat2 {
    let dev = eps_dot - (eps_dot.trace() / 3.0) * Mat2::identity();
    2.0 * shear_modulus * dev + s * omega.transpose() + omega * s
}

/// `W(0) / W(dp)`, the exponent of the artificial-pressure bracket.
pub fn artificial_pressure_exponent(kernel: &KernelSpec, dp: f64) -> f64 {
    kernel.value_at(0.0) / kernel.value_at(dp)
}

/// Artificial pressure
/// `gamma_ap (|p_i|/rho_i^2 + |p_j|/rho_j^2) [W(d_ij) / W(dp)]^n_bar`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn artificial_pressure(
    p_i: f64,
    rho_i: f64,
    p_j: f64,
    rho_j: f64,
    w_dij: f64,
    w_dp: f64,
    n_bar: f64,
    gamma_ap: f64,
) -> f64 {
    if gamma_ap == 0.0 {
        return 0.0;
    }
    gamma_ap * (p_i.abs() / (rho_i * rho_i) + p_j.abs() / (rho_j * rho_j)) * (w_dij / w_dp).powf(n_bar)
}

/// Solid density rate `sum_j f_ij m_j v_ij . What_ij`.
pub fn continuity_rate_solid(
    i: usize,
    bonds: &BondSet,
    geom: &[BondGeometry],
    set: &ParticleSet,
    b_i: &CorrectionMatrix,
) -> f64 {
    let vi = set.v[i];
    let mut rate = 0.0;
    for n in bonded_neighbors(i, bonds, geom) {
        if n.f == 0.0 {
            continue;
        }
        rate += n.f * set.m[n.j] * (vi - set.v[n.j]).dot(&b_i.correct(n.grad));
    }
    rate
}

/// Correction matrix, velocity gradient and density rate of particle `i`
/// from a single pass over its bonds. Equivalent to [`solid_correction`],
/// [`velocity_gradient`] and [`continuity_rate_solid`] up to rounding.
pub fn local_rates(i: usize, bonds: &BondSet, geom: &[BondGeometry], set: &ParticleSet) -> (CorrectionMatrix, Mat2, f64) {
    let vi = set.v[i];
    let mut a = Mat2::zeros();
    // raw = -sum V v_ij gradW^T and flux = sum m v_ij gradW^T, so that
    // l = raw B^T and drho/dt = B : flux
    let mut raw = Mat2::zeros();
    let mut flux = Mat2::zeros();
    let mut intact = 0;
    for n in bonded_neighbors(i, bonds, geom) {
        if n.f == 0.0 {
            continue;
        }
        intact += 1;
        let mj = set.m[n.j];
        let vol = mj / set.rho[n.j];
        let vg = (vi - set.v[n.j]) * n.grad.transpose();
        a -= vol * n.grad * n.rij.transpose();
        raw -= vol * vg;
        flux += mj * vg;
    }
    let corr = if intact < MIN_CORRECTION_BONDS {
        CorrectionMatrix::fallback()
    } else {
        kernel::correction_from_moment(&a)
    };
    let l = raw * corr.b.transpose();
    let drho = corr.b.component_mul(&flux).sum();
    (corr, l, drho)
}

/// Constants shared by every solid momentum evaluation.
#[derive(Clone, Copy, Debug)]
pub struct SolidForceParams {
    pub h: f64,
    /// `W(dp)`.
    pub w_dp: f64,
    /// `W(0) / W(dp)`.
    pub n_bar: f64,
}

impl SolidForceParams {
    pub fn new(kernel: &KernelSpec, dp: f64) -> Self {
        Self {
            h: kernel.h(),
            w_dp: kernel.value_at(dp),
            n_bar: artificial_pressure_exponent(kernel, dp),
        }
    }
}

/// Solid acceleration from stress divergence, artificial viscosity and
/// artificial pressure over intact bonds, plus `gravity`.
///
/// The pair gradient is `(B_i + B_j)/2 gradW_ij`, which keeps every pair
/// force exactly antisymmetric.
#[allow(clippy::too_many_arguments)]
pub fn momentum_rate_solid(
    i: usize,
    bonds: &BondSet,
    geom: &[BondGeometry],
    set: &ParticleSet,
    corrections: &[CorrectionMatrix],
    mat: &SolidMaterial,
    params: &SolidForceParams,
    gravity: Vec2,
) -> Vec2 {
    let rhoi = set.rho[i];
    let sig_i = (set.s[i] - set.p[i] * Mat2::identity()) / (rhoi * rhoi);
    let mut acc = Vec2::zeros();
    for n in bonded_neighbors(i, bonds, geom) {
        if n.f == 0.0 {
            continue;
        }
        let j = n.j;
        let rhoj = set.rho[j];
        let sig_j = (set.s[j] - set.p[j] * Mat2::identity()) / (rhoj * rhoj);
        let vij = set.v[i] - set.v[j];
        let pi = artificial_viscosity(n.rij, vij, 0.5 * (rhoi + rhoj), mat.c0, params.h, mat.beta1, mat.beta2);
        let pa = mat.gamma_ap * (set.p[i].abs() / (rhoi * rhoi) + set.p[j].abs() / (rhoj * rhoj)) * n.ap;
        let g = 0.5 * (corrections[i].b + corrections[j].b) * n.grad;
        acc += n.f * set.m[j] * ((sig_i + sig_j) * g - (pi + pa) * g);
    }
    acc + gravity
}

/// Engineering strain of a bond, `(|x_j - x_i| - L0) / L0`.
#[inline]
pub fn spring_strain(bond: &Bond, x: &[Vec2]) -> f64 {
    ((x[bond.j] - x[bond.i]).norm() - bond.rest_length) / bond.rest_length
}

/// Breaks every intact bond whose tensile strain exceeds `eps_f`. Returns
/// the indices of the bonds broken by this call.
pub fn update_fracture(bonds: &mut BondSet, x: &[Vec2], mat: &SolidMaterial) -> Vec<usize> {
    if !mat.fracture_enabled {
        return Vec::new();
    }
    let mut broken = Vec::new();
    for (k, b) in bonds.bonds.iter_mut().enumerate() {
        if b.is_intact() && spring_strain(b, x) > mat.eps_f {
            b.break_bond();
            broken.push(k);
        }
    }
    broken
}

/// Damage of particle `i`: broken bonds over initial bonds. A particle that
/// never had a bond reports 0 with the flag set.
pub fn damage(i: usize, bonds: &BondSet) -> (f64, bool) {
    let refs = bonds.of(i);
    if refs.is_empty() {
        return (0.0, true);
    }
    let broken = refs.iter().filter(|r| !bonds.bonds[r.bond].is_intact()).count();
    (broken as f64 / refs.len() as f64, false)
}

/// Damage of every particle (zero for non-solid or bond-less particles).
pub fn damage_field(bonds: &BondSet, n: usize) -> Vec<f64> {
    (0..n).map(|i| damage(i, bonds).0).collect()
}

/// Connected components of the solid phase under intact bonds.
pub fn component_count(set: &ParticleSet, bonds: &BondSet) -> usize {
    let n = set.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for b in bonds.bonds.iter().filter(|b| b.is_intact()) {
        let (ra, rb) = (find(&mut parent, b.i), find(&mut parent, b.j));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n)
        .filter(|&i| set.phase[i] == Phase::Solid && find(&mut parent, i) == i)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{build_bonds, build_lattice, Particle, Rect};
    use approx::assert_relative_eq;

    fn steel() -> SolidMaterial {
        SolidMaterial::new(7850.0, 211e9, 0.3, 0.3, 0.05, true, 1.0, 1.0).unwrap()
    }

    fn block(nx: usize, ny: usize, dp: f64, rho0: f64) -> ParticleSet {
        let ps = build_lattice(
            &Rect::new([0.0, 0.0], [nx as f64 * dp, ny as f64 * dp]),
            dp,
            Phase::Solid,
            rho0,
            1.5 * dp,
        )
        .unwrap();
        ParticleSet::from_particles(&ps)
    }

    struct Patch {
        set: ParticleSet,
        bonds: BondSet,
        kernel: KernelSpec,
        dp: f64,
    }

    impl Patch {
        fn new(nx: usize, ny: usize) -> Self {
            let dp = 0.05;
            let set = block(nx, ny, dp, 1000.0);
            let bonds = build_bonds(&set, dp);
            Self {
                set,
                bonds,
                kernel: KernelSpec::new(1.5 * dp).unwrap(),
                dp,
            }
        }

        fn geom(&self) -> Vec<BondGeometry> {
            bond_geometry(&self.bonds, &self.set.x, &self.kernel, &SolidForceParams::new(&self.kernel, self.dp))
        }

        fn corrections(&self, geom: &[BondGeometry]) -> Vec<CorrectionMatrix> {
            (0..self.set.len())
                .map(|i| solid_correction(i, &self.bonds, geom, &self.set))
                .collect()
        }
    }

    #[test]
    fn material_derived_constants() {
        let m = steel();
        assert_relative_eq!(m.bulk_modulus, 211e9 / 1.2, max_relative = 1e-14);
        assert_relative_eq!(m.shear_modulus, 211e9 / 2.6, max_relative = 1e-14);
        assert_relative_eq!(m.c0, (m.bulk_modulus / 7850.0).sqrt(), max_relative = 1e-14);
        assert!(SolidMaterial::new(1.0, 1.0, 0.5, 0.0, 0.0, false, 0.0, 0.0).is_err());
        assert!(SolidMaterial::new(1.0, 1.0, 0.2, 0.0, 0.0, true, 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_eos_reference_values() {
        let m = SolidMaterial::new(1000.0, 3e9 * (1.0 - 2.0 * 0.25), 0.25, 0.0, 0.0, false, 0.0, 0.0).unwrap();
        // K = E / (3 (1 - 2 nu)) = 1e9
        assert_relative_eq!(m.bulk_modulus, 1e9, max_relative = 1e-14);
        assert_eq!(solid_eos(1000.0, &m), 0.0);
        assert_relative_eq!(solid_eos(1001.0, &m), 1e6, max_relative = 1e-9);
        assert_relative_eq!(solid_eos(999.0, &m), -1e6, max_relative = 1e-9);
        let st = StressState {
            s: Mat2::new(1.0, 2.0, 2.0, -3.0),
            p: 5.0,
        };
        assert_eq!(st.sigma(), Mat2::new(-4.0, 2.0, 2.0, -8.0));
    }

    #[test]
    fn velocity_gradient_cases() {
        let mut patch = Patch::new(5, 5);
        let centre = 12;
        // rigid translation
        for v in patch.set.v.iter_mut() {
            *v = Vec2::new(1.0, -2.0);
        }
        let geom = patch.geom();
        let corr = patch.corrections(&geom);
        let l = velocity_gradient(centre, &patch.bonds, &geom, &patch.set, &corr[centre]);
        assert!(l.norm() < 1e-12);
        // v = (a x, 0): exact on every intact stencil, interior, edge or corner
        let a = 0.7;
        for i in 0..patch.set.len() {
            patch.set.v[i] = Vec2::new(a * patch.set.x[i].x, 0.0);
        }
        for i in 0..patch.set.len() {
            let l = velocity_gradient(i, &patch.bonds, &geom, &patch.set, &corr[i]);
            assert!((l - Mat2::new(a, 0.0, 0.0, 0.0)).norm() < 1e-10, "{i}: {l}");
        }
        // everything broken
        for b in patch.bonds.bonds.iter_mut() {
            b.break_bond();
        }
        let l = velocity_gradient(centre, &patch.bonds, &geom, &patch.set, &corr[centre]);
        assert_eq!(l, Mat2::zeros());
    }

    #[test]
    fn strain_and_spin_split() {
        let (e, w) = strain_spin(&Mat2::identity());
        assert_eq!(e, Mat2::identity());
        assert_eq!(w, Mat2::zeros());
        let rot = Mat2::new(0.0, -2.0, 2.0, 0.0);
        let (e, w) = strain_spin(&rot);
        assert_eq!(e, Mat2::zeros());
        assert_eq!(w, rot);
        let k = 0.4;
        let shear = Mat2::new(0.0, k, 0.0, 0.0);
        let (e, w) = strain_spin(&shear);
        assert_eq!(e[(0, 1)], k / 2.0);
        assert_eq!(e[(1, 0)], k / 2.0);
        assert_eq!(w[(0, 1)], k / 2.0);
        assert_eq!(w[(1, 0)], -k / 2.0);
        assert_eq!(e + w, shear);
    }

    #[test]
    fn jaumann_reference_cases() {
        let s = Mat2::new(3.0, 1.0, 1.0, -2.0);
        assert_eq!(jaumann_rate(&s, &Mat2::zeros(), &Mat2::zeros(), 5.0), Mat2::zeros());
        let mu = 7.0;
        let k = 0.3;
        let (e, w) = strain_spin(&Mat2::new(0.0, k, 0.0, 0.0));
        let ds = jaumann_rate(&Mat2::zeros(), &e, &w, mu);
        assert_relative_eq!(ds[(0, 1)], mu * k, max_relative = 1e-15);
        assert_eq!(ds[(0, 1)], ds[(1, 0)]);
        // pure spin leaves S:S unchanged
        let omega = Mat2::new(0.0, -1.3, 1.3, 0.0);
        let ds = jaumann_rate(&s, &Mat2::zeros(), &omega, mu);
        assert!((s.component_mul(&ds)).sum().abs() < 1e-14);
    }

    #[test]
    fn artificial_pressure_cases() {
        let dp = 0.05;
        let k = KernelSpec::new(1.5 * dp).unwrap();
        let n_bar = artificial_pressure_exponent(&k, dp);
        let q = 2.0 / 3.0;
        let expected = 8.0 / ((q + 0.5) * (2.0f64 - q).powi(4));
        assert_relative_eq!(n_bar, expected, max_relative = 1e-12);
        assert!((n_bar - 2.1696).abs() < 1e-3);
        let w_dp = k.value_at(dp);
        assert_eq!(artificial_pressure(1e5, 1000.0, 2e5, 1000.0, w_dp, w_dp, n_bar, 0.0), 0.0);
        let at_dp = artificial_pressure(-1e5, 1000.0, 2e5, 1100.0, w_dp, w_dp, n_bar, 0.3);
        assert_relative_eq!(at_dp, 0.3 * (1e5 / 1e6 + 2e5 / 1.21e6), max_relative = 1e-14);
    }

    #[test]
    fn continuity_cases() {
        let mut patch = Patch::new(5, 5);
        let centre = 12;
        for v in patch.set.v.iter_mut() {
            *v = Vec2::new(0.5, 0.5);
        }
        let geom = patch.geom();
        let corr = patch.corrections(&geom);
        assert!(continuity_rate_solid(centre, &patch.bonds, &geom, &patch.set, &corr[centre]).abs() < 1e-9);
        let a = 0.01;
        for i in 0..patch.set.len() {
            patch.set.v[i] = a * patch.set.x[i];
        }
        let rate = continuity_rate_solid(centre, &patch.bonds, &geom, &patch.set, &corr[centre]);
        let expected = -1000.0 * 2.0 * a;
        assert!(((rate - expected) / expected).abs() < 0.02, "{rate}");
        for b in patch.bonds.bonds.iter_mut() {
            b.break_bond();
        }
        assert_eq!(continuity_rate_solid(centre, &patch.bonds, &geom, &patch.set, &corr[centre]), 0.0);
    }

    #[test]
    fn momentum_cases() {
        let mat = SolidMaterial::new(1000.0, 1e6, 0.3, 0.3, 0.05, true, 1.0, 1.0).unwrap();
        let mut patch = Patch::new(5, 5);
        let params = SolidForceParams::new(&patch.kernel, patch.dp);
        // uniform stress on the symmetric interior stencil
        for i in 0..patch.set.len() {
            patch.set.s[i] = Mat2::new(2e3, 5e2, 5e2, -1e3);
            patch.set.p[i] = 1e3;
        }
        let geom = patch.geom();
        let corr = patch.corrections(&geom);
        let a = momentum_rate_solid(12, &patch.bonds, &geom, &patch.set, &corr, &mat, &params, Vec2::zeros());
        assert!(a.norm() < 1e-9, "{a}");

        // two bonded particles in pure compression push apart, antisymmetrically
        let ps = vec![
            Particle::new(Phase::Solid, Vec2::new(0.0, 0.0), 1000.0, 2.5, 0.075),
            Particle::new(Phase::Solid, Vec2::new(0.05, 0.0), 1000.0, 2.5, 0.075),
        ];
        let mut set = ParticleSet::from_particles(&ps);
        set.p = vec![1e4, 1e4];
        let mut bonds = build_bonds(&set, 0.05);
        let geom = bond_geometry(&bonds, &set.x, &patch.kernel, &params);
        let corr = vec![CorrectionMatrix::default(); 2];
        let a0 = momentum_rate_solid(0, &bonds, &geom, &set, &corr, &mat, &params, Vec2::zeros());
        let a1 = momentum_rate_solid(1, &bonds, &geom, &set, &corr, &mat, &params, Vec2::zeros());
        assert!(a0.x < 0.0 && a0.y == 0.0);
        assert_eq!(a0, -a1);
        bonds.bonds[0].break_bond();
        let a0 = momentum_rate_solid(0, &bonds, &geom, &set, &corr, &mat, &params, Vec2::zeros());
        assert_eq!(a0, Vec2::zeros());
    }

    #[test]
    fn fused_local_rates_match_the_separate_operators() {
        let mut patch = Patch::new(5, 4);
        for i in 0..patch.set.len() {
            let x = patch.set.x[i];
            patch.set.v[i] = Vec2::new((3.0 * x.y).sin(), x.x * x.x);
            patch.set.rho[i] = 1000.0 + 10.0 * x.x;
            patch.set.x[i] += Vec2::new(0.002 * (7.0 * x.y).cos(), 0.001 * x.x);
        }
        patch.bonds.bonds[3].break_bond();
        let geom = patch.geom();
        for i in 0..patch.set.len() {
            let (c, l, drho) = local_rates(i, &patch.bonds, &geom, &patch.set);
            let c_ref = solid_correction(i, &patch.bonds, &geom, &patch.set);
            let l_ref = velocity_gradient(i, &patch.bonds, &geom, &patch.set, &c_ref);
            let d_ref = continuity_rate_solid(i, &patch.bonds, &geom, &patch.set, &c_ref);
            assert!((c.b - c_ref.b).norm() < 1e-12 * c_ref.b.norm());
            assert!((l - l_ref).norm() <= 1e-12 * (l_ref.norm() + 1.0));
            assert!((drho - d_ref).abs() <= 1e-12 * (d_ref.abs() + 1.0));
        }
    }

    #[test]
    fn correction_needs_three_intact_bonds() {
        // 2x2 square: every particle has exactly three bonds
        let mut patch = Patch::new(2, 2);
        let geom = patch.geom();
        assert!(patch.corrections(&geom).iter().all(|c| !c.degenerate));
        let first = patch.bonds.of(0)[0].bond;
        patch.bonds.bonds[first].break_bond();
        let geom = patch.geom();
        let c = solid_correction(0, &patch.bonds, &geom, &patch.set);
        assert!(c.degenerate);
        assert_eq!(c.b, Mat2::identity());
        let (fused, _, _) = local_rates(0, &patch.bonds, &geom, &patch.set);
        assert_eq!(fused, c);
    }

    #[test]
    fn spring_strain_and_fracture() {
        let x = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        let bond = Bond::new(0, 1, x[0], x[1]);
        assert_eq!(spring_strain(&bond, &x), 0.0);
        let stretched = vec![Vec2::new(0.0, 0.0), Vec2::new(1.06, 0.0)];
        assert_relative_eq!(spring_strain(&bond, &stretched), 0.06, max_relative = 1e-12);
        let squeezed = vec![Vec2::new(0.0, 0.0), Vec2::new(0.9, 0.0)];
        assert_relative_eq!(spring_strain(&bond, &squeezed), -0.1, max_relative = 1e-12);

        let mut mat = SolidMaterial::new(2500.0, 1e6, 0.0, 0.3, 0.05, true, 1.0, 1.0).unwrap();
        let mut set = BondSet::from_bonds(2, vec![bond.clone()]);
        assert!(update_fracture(&mut set, &x, &mat).is_empty());
        assert!(update_fracture(&mut set, &squeezed, &mat).is_empty());
        let just_over = vec![Vec2::new(0.0, 0.0), Vec2::new(1.051, 0.0)];
        assert_eq!(update_fracture(&mut set, &just_over, &mat), vec![0]);
        // back to the rest length: still broken
        assert!(update_fracture(&mut set, &x, &mat).is_empty());
        assert_eq!(set.bonds[0].f(), 0.0);

        mat.fracture_enabled = false;
        let mut set = BondSet::from_bonds(2, vec![bond]);
        let far = vec![Vec2::new(0.0, 0.0), Vec2::new(1.2, 0.0)];
        assert!(update_fracture(&mut set, &far, &mat).is_empty());
        assert_eq!(set.bonds[0].f(), 1.0);
    }

    #[test]
    fn damage_ratios_and_components() {
        let patch = Patch::new(3, 3);
        let mut bonds = patch.bonds.clone();
        assert_eq!(damage(4, &bonds), (0.0, false));
        assert_eq!(component_count(&patch.set, &bonds), 1);
        let centre: Vec<usize> = bonds.of(4).iter().map(|r| r.bond).collect();
        for &b in centre.iter().take(4) {
            bonds.bonds[b].break_bond();
        }
        assert_eq!(damage(4, &bonds).0, 0.5);
        for &b in &centre {
            bonds.bonds[b].break_bond();
        }
        assert_eq!(damage(4, &bonds).0, 1.0);
        assert_eq!(component_count(&patch.set, &bonds), 2);

        let lone = ParticleSet::from_particles(&[Particle::new(Phase::Solid, Vec2::zeros(), 1.0, 1.0, 1.0)]);
        let none = build_bonds(&lone, 1.0);
        assert_eq!(damage(0, &none), (0.0, true));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn jaumann_spin_terms_preserve_s_colon_s(
                sxx in -1e3f64..1e3, sxy in -1e3f64..1e3, syy in -1e3f64..1e3, w in -10.0f64..10.0,
            ) {
                let s = Mat2::new(sxx, sxy, sxy, syy);
                let omega = Mat2::new(0.0, -w, w, 0.0);
                let ds = jaumann_rate(&s, &Mat2::zeros(), &omega, 1e6);
                let scale = s.norm_squared() * w.abs() + 1.0;
                prop_assert!(s.component_mul(&ds).sum().abs() <= 1e-12 * scale);
                prop_assert!((ds - ds.transpose()).norm() <= 1e-12 * (ds.norm() + 1.0));
            }

            #[test]
            fn uniform_strain_rate_is_uniform_over_intact_particles(
                a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0,
            ) {
                let mut patch = Patch::new(6, 4);
                let lin = Mat2::new(a, b, c, d);
                for i in 0..patch.set.len() {
                    patch.set.v[i] = lin * patch.set.x[i];
                }
                let geom = patch.geom();
                let corr = patch.corrections(&geom);
                let (e_ref, _) = strain_spin(&lin);
                for i in 0..patch.set.len() {
                    let l = velocity_gradient(i, &patch.bonds, &geom, &patch.set, &corr[i]);
                    let (e, _) = strain_spin(&l);
                    prop_assert!((e - e_ref).norm() < 1e-8);
                }
            }
        }
    }
}
