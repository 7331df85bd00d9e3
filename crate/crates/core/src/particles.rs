//! Particle storage, lattice generation, cell-list neighbor search and the
//! pseudo-spring bond graph of the solid phase.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::{Mat2, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Fluid,
    Solid,
    Wall,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Fluid => "fluid",
            Phase::Solid => "solid",
            Phase::Wall => "wall",
        }
    }

    /// Integer code used in VTK output.
    pub fn code(&self) -> i32 {
        match self {
            Phase::Fluid => 0,
            Phase::Solid => 1,
            Phase::Wall => 2,
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fluid" => Ok(Phase::Fluid),
            "solid" => Ok(Phase::Solid),
            "wall" => Ok(Phase::Wall),
            other => Err(SimError::InvalidInput(format!("unknown phase '{other}'"))),
        }
    }
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }
}

/// A single particle record.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub id: usize,
    pub phase: Phase,
    pub x: Vec2,
    pub v: Vec2,
    pub rho: f64,
    pub m: f64,
    pub p: f64,
    /// Deviatoric stress, stored symmetric; zero for fluid and wall.
    pub s: Mat2,
    pub h: f64,
    /// Velocity held at zero (clamps).
    pub pinned: bool,
}

impl Particle {
    pub fn new(phase: Phase, x: Vec2, rho: f64, m: f64, h: f64) -> Self {
        Self {
            id: 0,
            phase,
            x,
            v: Vec2::zeros(),
            rho,
            m,
            p: 0.0,
            s: Mat2::zeros(),
            h,
            pinned: false,
        }
    }
}

/// Number of lattice sites that fit along `len` at spacing `dp`.
pub fn lattice_count(len: f64, dp: f64) -> usize {
    (len / dp).round().max(0.0) as usize
}

/// Square lattice filling `rect` at spacing `dp`, cell-centred
/// (`min + (k + 0.5) dp`), with mass `rho0 dp^2` and density `rho0`.
pub fn build_lattice(rect: &Rect, dp: f64, phase: Phase, rho0: f64, h: f64) -> Result<Vec<Particle>> {
    if !(dp > 0.0) {
        return Err(SimError::InvalidInput(format!("lattice spacing must be positive, got {dp}")));
    }
    let (w, hgt) = (rect.width(), rect.height());
    if !(w > 0.0 && hgt > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "rectangle {:?}..{:?} has zero area",
            rect.min, rect.max
        )));
    }
    if w < dp || hgt < dp {
        return Err(SimError::InvalidInput(format!(
            "rectangle {w} x {hgt} is smaller than the spacing {dp}"
        )));
    }
    let nx = lattice_count(w, dp).max(1);
    let ny = lattice_count(hgt, dp).max(1);
    let mass = rho0 * dp * dp;
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = Vec2::new(
                rect.min[0] + (i as f64 + 0.5) * dp,
                rect.min[1] + (j as f64 + 0.5) * dp,
            );
            out.push(Particle::new(phase, x, rho0, mass, h));
        }
    }
    Ok(out)
}

/// Structure-of-arrays particle storage.
#[derive(Clone, Debug, Default)]
pub struct ParticleSet {
    pub phase: Vec<Phase>,
    pub x: Vec<Vec2>,
    pub v: Vec<Vec2>,
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<Mat2>,
    pub h: Vec<f64>,
    pub pinned: Vec<bool>,
}

impl ParticleSet {
    pub fn from_particles(particles: &[Particle]) -> Self {
        let mut set = ParticleSet::default();
        for p in particles {
            set.push(p);
        }
        set
    }

    pub fn push(&mut self, p: &Particle) -> usize {
        self.phase.push(p.phase);
        self.x.push(p.x);
        self.v.push(p.v);
        self.rho.push(p.rho);
        self.m.push(p.m);
        self.p.push(p.p);
        self.s.push(p.s);
        self.h.push(p.h);
        self.pinned.push(p.pinned);
        self.phase.len() - 1
    }

    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn get(&self, i: usize) -> Particle {
        Particle {
            id: i,
            phase: self.phase[i],
            x: self.x[i],
            v: self.v[i],
            rho: self.rho[i],
            m: self.m[i],
            p: self.p[i],
            s: self.s[i],
            h: self.h[i],
            pinned: self.pinned[i],
        }
    }

    pub fn indices_of(&self, phase: Phase) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.phase[i] == phase).collect()
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.phase.iter().filter(|&&p| p == phase).count()
    }

    pub fn max_h(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }
}

/// Kernel interaction record of particle `i` with neighbor `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub j: usize,
    /// `x_i - x_j`.
    pub rij: Vec2,
    pub r: f64,
    pub w: f64,
    /// `grad_i W_ij`.
    pub grad: Vec2,
}

/// Uniform cell list. Each cell is at least as wide as the largest query
/// radius, so a query only scans the surrounding ring of cells.
#[derive(Clone, Debug)]
pub struct NeighborGrid {
    origin: Vec2,
    cell_size: f64,
    nx: usize,
    ny: usize,
    cell_start: Vec<u32>,
    entries: Vec<u32>,
    positions: Vec<Vec2>,
}

impl NeighborGrid {
    /// Grid over all `positions`; `cell_size` is normally `2 h_max`.
    pub fn build(positions: &[Vec2], cell_size: f64) -> Self {
        Self::build_filtered(positions, cell_size, |_| true)
    }

    /// Grid containing only the particles for which `include` holds.
    pub fn build_filtered(positions: &[Vec2], cell_size: f64, include: impl Fn(usize) -> bool) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for (i, p) in positions.iter().enumerate() {
            if include(i) {
                lo = lo.inf(p);
                hi = hi.sup(p);
                any = true;
            }
        }
        if !any {
            lo = Vec2::zeros();
            hi = Vec2::zeros();
        }
        let nx = (((hi.x - lo.x) / cell_size).floor() as usize) + 1;
        let ny = (((hi.y - lo.y) / cell_size).floor() as usize) + 1;
        let mut grid = NeighborGrid {
            origin: lo,
            cell_size,
            nx,
            ny,
            cell_start: vec![0; nx * ny + 1],
            entries: Vec::new(),
            positions: positions.to_vec(),
        };
        let cells: Vec<Option<usize>> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| include(i).then(|| grid.cell_of(*p)))
            .collect();
        for c in cells.iter().flatten() {
            grid.cell_start[c + 1] += 1;
        }
        for c in 0..nx * ny {
            grid.cell_start[c + 1] += grid.cell_start[c];
        }
        let mut fill = grid.cell_start.clone();
        grid.entries = vec![0; *grid.cell_start.last().unwrap() as usize];
        // ascending particle index within each cell
        for (i, c) in cells.iter().enumerate() {
            if let Some(c) = c {
                grid.entries[fill[*c] as usize] = i as u32;
                fill[*c] += 1;
            }
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    fn cell_coords(&self, p: Vec2) -> (isize, isize) {
        (
            ((p.x - self.origin.x) / self.cell_size).floor() as isize,
            ((p.y - self.origin.y) / self.cell_size).floor() as isize,
        )
    }

    fn cell_of(&self, p: Vec2) -> usize {
        let (cx, cy) = self.cell_coords(p);
        let cx = cx.clamp(0, self.nx as isize - 1) as usize;
        let cy = cy.clamp(0, self.ny as isize - 1) as usize;
        cy * self.nx + cx
    }

    /// Calls `f(j, x_p - x_j, |x_p - x_j|^2)` for every indexed particle `j`
    /// with `|x_p - x_j| < radius`, in cell-scan order.
    #[inline]
    pub fn for_each_within(&self, point: Vec2, radius: f64, mut f: impl FnMut(usize, Vec2, f64)) {
        let rings = ((radius / self.cell_size).ceil() as isize).max(1);
        let (cx, cy) = self.cell_coords(point);
        let r2 = radius * radius;
        let x0 = (cx - rings).max(0);
        let x1 = (cx + rings).min(self.nx as isize - 1);
        let y0 = (cy - rings).max(0);
        let y1 = (cy + rings).min(self.ny as isize - 1);
        if x0 > x1 || y0 > y1 {
            return;
        }
        for gy in y0..=y1 {
            let row = gy as usize * self.nx;
            let start = self.cell_start[row + x0 as usize] as usize;
            let end = self.cell_start[row + x1 as usize + 1] as usize;
            for &j in &self.entries[start..end] {
                let j = j as usize;
                let d = point - self.positions[j];
                let d2 = d.norm_squared();
                if d2 < r2 {
                    f(j, d, d2);
                }
            }
        }
    }

    /// Indices `j != i` with `|x_i - x_j| < radius`, sorted ascending.
    pub fn neighbor_query(&self, i: usize, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(self.positions[i], radius, |j, _, _| {
            if j != i {
                out.push(j)
            }
        });
        out.sort_unstable();
        out
    }
}

/// Pseudo-spring between two solid particles.
#[derive(Clone, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    /// `x_j - x_i` in the reference configuration.
    pub rest_vector: Vec2,
    pub rest_length: f64,
    intact: bool,
}

impl Bond {
    pub fn new(i: usize, j: usize, xi: Vec2, xj: Vec2) -> Self {
        let (i, j, xi, xj) = if i < j { (i, j, xi, xj) } else { (j, i, xj, xi) };
        let rest_vector = xj - xi;
        Self {
            i,
            j,
            rest_vector,
            rest_length: rest_vector.norm(),
            intact: true,
        }
    }

    /// Interaction factor `f_ij`: 1 while intact, 0 once broken.
    #[inline]
    pub fn f(&self) -> f64 {
        if self.intact {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn is_intact(&self) -> bool {
        self.intact
    }

    /// Permanently breaks the bond. There is no way back to `f = 1`.
    pub fn break_bond(&mut self) {
        self.intact = false;
    }
}

/// One entry of a particle's bond adjacency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BondRef {
    pub neighbor: usize,
    pub bond: usize,
}

/// Bond list with per-particle adjacency (CSR, sorted by neighbor index).
#[derive(Clone, Debug, Default)]
pub struct BondSet {
    pub bonds: Vec<Bond>,
    offsets: Vec<usize>,
    adjacency: Vec<BondRef>,
}

impl BondSet {
    pub fn from_bonds(n_particles: usize, mut bonds: Vec<Bond>) -> Self {
        bonds.sort_by_key(|b| (b.i, b.j));
        bonds.dedup_by_key(|b| (b.i, b.j));
        let mut counts = vec![0usize; n_particles + 1];
        for b in &bonds {
            counts[b.i + 1] += 1;
            counts[b.j + 1] += 1;
        }
        for k in 0..n_particles {
            counts[k + 1] += counts[k];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut adjacency = vec![BondRef { neighbor: 0, bond: 0 }; offsets[n_particles]];
        for (k, b) in bonds.iter().enumerate() {
            adjacency[fill[b.i]] = BondRef { neighbor: b.j, bond: k };
            fill[b.i] += 1;
            adjacency[fill[b.j]] = BondRef { neighbor: b.i, bond: k };
            fill[b.j] += 1;
        }
        for i in 0..n_particles {
            adjacency[offsets[i]..offsets[i + 1]].sort_by_key(|r| r.neighbor);
        }
        Self {
            bonds,
            offsets,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    /// All bonds ever attached to particle `i`, broken or not.
    #[inline]
    pub fn of(&self, i: usize) -> &[BondRef] {
        if i + 1 >= self.offsets.len() {
            return &[];
        }
        &self.adjacency[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn initial_degree(&self, i: usize) -> usize {
        self.of(i).len()
    }

    pub fn broken_count(&self) -> usize {
        self.bonds.iter().filter(|b| !b.is_intact()).count()
    }
}

/// Relative tolerance on the immediate-neighbor cutoff `sqrt(2) dp`.
pub const BOND_CUTOFF_TOL: f64 = 1e-3;

/// Pseudo-springs between each solid particle and its immediate lattice
/// neighbors (axis and diagonal, cutoff `sqrt(2) dp (1 + 1e-3)`).
pub fn build_bonds(set: &ParticleSet, dp: f64) -> BondSet {
    let cutoff = std::f64::consts::SQRT_2 * dp * (1.0 + BOND_CUTOFF_TOL);
    let grid = NeighborGrid::build_filtered(&set.x, cutoff, |i| set.phase[i] == Phase::Solid);
    let mut bonds = Vec::new();
    for i in 0..set.len() {
        if set.phase[i] != Phase::Solid {
            continue;
        }
        grid.for_each_within(set.x[i], cutoff, |j, _, _| {
            if j > i {
                bonds.push(Bond::new(i, j, set.x[i], set.x[j]));
            }
        });
    }
    BondSet::from_bonds(set.len(), bonds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn lattice_counts_and_mass() {
        let dp = 0.0057;
        let ps = build_lattice(&Rect::new([0.0, 0.0], [0.057, 0.057]), dp, Phase::Fluid, 1000.0, 1.5 * dp).unwrap();
        assert_eq!(ps.len(), 100);
        for p in &ps {
            assert!((p.m - 1000.0 * dp * dp).abs() < 1e-15);
            assert_eq!(p.rho, 1000.0);
        }
        let one = build_lattice(&Rect::new([0.0, 0.0], [1.0, 1.0]), 1.0, Phase::Solid, 1.0, 1.5).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].x, Vec2::new(0.5, 0.5));
    }

    #[test]
    fn lattice_rejects_degenerate_rectangles() {
        assert!(build_lattice(&Rect::new([0.0, 0.0], [0.0, 1.0]), 0.1, Phase::Fluid, 1.0, 0.15).is_err());
        assert!(build_lattice(&Rect::new([0.0, 0.0], [0.05, 1.0]), 0.1, Phase::Fluid, 1.0, 0.15).is_err());
    }

    #[test]
    fn isolated_and_pair_queries() {
        let h = 1.0;
        let g = NeighborGrid::build(&[Vec2::new(0.0, 0.0)], 2.0 * h);
        assert!(g.neighbor_query(0, 2.0 * h).is_empty());
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(1.9 * h, 0.0)];
        let g = NeighborGrid::build(&pts, 2.0 * h);
        assert_eq!(g.neighbor_query(0, 2.0 * h), vec![1]);
        assert_eq!(g.neighbor_query(1, 2.0 * h), vec![0]);
    }

    fn brute_force(pts: &[Vec2], i: usize, radius: f64) -> Vec<usize> {
        (0..pts.len())
            .filter(|&j| j != i && (pts[i] - pts[j]).norm() < radius)
            .collect()
    }

    #[test]
    fn random_cloud_matches_brute_force() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let pts: Vec<Vec2> = (0..500)
            .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(-0.5..0.5)))
            .collect();
        let radius = 0.06;
        let g = NeighborGrid::build(&pts, radius);
        for i in 0..pts.len() {
            assert_eq!(g.neighbor_query(i, radius), brute_force(&pts, i, radius));
        }
        // a radius larger than the cell still works (multi-ring scan)
        for i in (0..pts.len()).step_by(37) {
            assert_eq!(g.neighbor_query(i, 0.15), brute_force(&pts, i, 0.15));
        }
    }

    fn solid_block(nx: usize, ny: usize, dp: f64) -> ParticleSet {
        let ps = build_lattice(
            &Rect::new([0.0, 0.0], [nx as f64 * dp, ny as f64 * dp]),
            dp,
            Phase::Solid,
            1000.0,
            1.5 * dp,
        )
        .unwrap();
        ParticleSet::from_particles(&ps)
    }

    #[test]
    fn three_by_three_bond_degrees() {
        let set = solid_block(3, 3, 0.1);
        let bonds = build_bonds(&set, 0.1);
        // row-major: 0 corner, 1 edge midpoint, 4 centre
        assert_eq!(bonds.initial_degree(4), 8);
        assert_eq!(bonds.initial_degree(0), 3);
        assert_eq!(bonds.initial_degree(1), 5);
        for b in &bonds.bonds {
            assert!(b.i < b.j);
            assert_eq!(b.f(), 1.0);
        }
    }

    #[test]
    fn bond_count_formula() {
        for &(n, m) in &[(1usize, 1usize), (2, 3), (5, 4), (10, 7)] {
            let set = solid_block(n, m, 0.25);
            let bonds = build_bonds(&set, 0.25);
            let expected = (n - 1) * m + n * (m - 1) + 2 * (n - 1) * (m - 1);
            assert_eq!(bonds.len(), expected, "{n}x{m}");
        }
    }

    #[test]
    fn breaking_is_permanent() {
        let mut b = Bond::new(3, 1, Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0));
        assert_eq!((b.i, b.j), (1, 3));
        assert_eq!(b.rest_vector, Vec2::new(1.0, 0.0));
        b.break_bond();
        assert_eq!(b.f(), 0.0);
        b.break_bond();
        assert!(!b.is_intact());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn grid_equals_brute_force(
                pts in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..400),
                radius in 0.05f64..0.6,
            ) {
                let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
                let g = NeighborGrid::build(&pts, radius);
                for i in 0..pts.len() {
                    prop_assert_eq!(g.neighbor_query(i, radius), brute_force(&pts, i, radius));
                }
            }
        }
    }
}
