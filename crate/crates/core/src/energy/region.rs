//! Energies of a field restricted to sub-regions of a window grid. The field
//! is known on every window cell and equals a constant beyond the window;
//! `G₁(v, S) = K₁(v, S) + 𝒲(v, S)` then treats every window cell outside `S`
//! (by collocation) and the tail (by its exact moment) as exterior.

use serde::{Deserialize, Serialize};

use super::exterior::tail_moments;
use super::kernel::KernelTable;
use super::model::{EnergyBreakdown, ModelParams};
use crate::error::{Error, Result};
use crate::lattice::{Disorder, Grid};

/// Membership mask over the cells of a window grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Region { mask }
    }

    pub fn all(grid: &Grid) -> Self {
        Region {
            mask: vec![true; grid.len()],
        }
    }

    /// Cells with axis indices in `lo[a]..hi[a]`.
    pub fn index_box(grid: &Grid, lo: [usize; 2], hi: [usize; 2]) -> Self {
        let mask = (0..grid.len())
            .map(|i| {
                let k = grid.multi_index(i);
                (0..grid.dim()).all(|a| k[a] >= lo[a] && k[a] < hi[a])
            })
            .collect();
        Region { mask }
    }

    /// Cells of the concentric sub-grid `inner`.
    pub fn concentric(window: &Grid, inner: &Grid) -> Result<Self> {
        let off = inner.offset_in(window)?;
        let end = off + inner.side();
        Ok(Self::index_box(window, [off; 2], [end; 2]))
    }

    /// Cells of `self` whose distance to the complement of `inner` is at most
    /// `width`, for a concentric box `inner`.
    pub fn boundary_shell(window: &Grid, inner: &Grid, width: f64) -> Result<Self> {
        let base = Self::concentric(window, inner)?;
        let hw = inner.half_width();
        let mask = (0..window.len())
            .map(|i| {
                let x = window.point(i);
                let dist = (0..window.dim())
                    .map(|a| hw - x[a].abs())
                    .fold(f64::INFINITY, f64::min);
                base.mask[i] && dist <= width
            })
            .collect();
        Ok(Region { mask })
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn union(&self, other: &Region) -> Region {
        Region {
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn minus(&self, other: &Region) -> Region {
        Region {
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && !*b).collect(),
        }
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        !self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }
}

/// Direct evaluator on a window grid.
#[derive(Debug, Clone)]
pub struct WindowModel {
    grid: Grid,
    params: ModelParams,
    kernel: KernelTable,
    tail_moment: Vec<f64>,
    g1: Vec<f64>,
}

impl WindowModel {
    pub fn new(grid: Grid, params: ModelParams, disorder: &Disorder) -> Result<Self> {
        let g1 = disorder.lift_grid(&grid)?;
        Self::with_lifted(grid, params, g1)
    }

    pub fn with_lifted(grid: Grid, params: ModelParams, g1: Vec<f64>) -> Result<Self> {
        if g1.len() != grid.len() {
            return Err(Error::Mismatch("lifted disorder length".into()));
        }
        Ok(WindowModel {
            kernel: KernelTable::for_grid(&grid, params.s)?,
            tail_moment: tail_moments(&grid, &grid, params.s),
            grid,
            params,
            g1,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lifted_disorder(&self) -> &[f64] {
        &self.g1
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        let a = self.grid.multi_index(i);
        let b = self.grid.multi_index(j);
        self.kernel.at(a[0].abs_diff(b[0]), a[1].abs_diff(b[1]))
    }

    fn check(&self, v: &[f64], r: &Region) -> Result<()> {
        if v.len() != self.grid.len() || r.mask.len() != self.grid.len() {
            return Err(Error::Mismatch("field or region does not match the window".into()));
        }
        Ok(())
    }

    /// `(gagliardo, potential, disorder)` parts of `K₁(v, S)`.
    pub fn interior_parts(&self, v: &[f64], region: &Region) -> Result<(f64, f64, f64)> {
        self.check(v, region)?;
        let idx = region.indices();
        let hd = self.grid.cell_volume();
        let mut gag = 0.0;
        let mut pot = 0.0;
        let mut dis = 0.0;
        for &i in &idx {
            for &j in &idx {
                if i != j {
                    let d = v[i] - v[j];
                    gag += self.k(i, j) * d * d;
                }
            }
            pot += self.params.potential.value(v[i]);
            dis += self.g1[i] * v[i];
        }
        Ok((gag, hd * pot, -self.params.theta * hd * dis))
    }

    /// `𝒲((v, A), (u, B)) = 2 Σ_{i∈A, j∈B} K(i-j) (v_i - u_j)²` for disjoint `A`, `B`.
    pub fn pair_interaction(&self, v: &[f64], a: &Region, u: &[f64], b: &Region) -> Result<f64> {
        self.check(v, a)?;
        self.check(u, b)?;
        let ib = b.indices();
        let mut acc = 0.0;
        for i in a.indices() {
            for &j in &ib {
                if i != j {
                    let d = v[i] - u[j];
                    acc += self.k(i, j) * d * d;
                }
            }
        }
        Ok(2.0 * acc)
    }

    /// `𝒲((v, S), (u, S^c))`: window cells outside `S` carry `u`, the tail beyond
    /// the window carries `tail`.
    pub fn exterior_interaction(&self, v: &[f64], region: &Region, u: &[f64], tail: f64) -> Result<f64> {
        let outside = Region::all(&self.grid).minus(region);
        let pair = self.pair_interaction(v, region, u, &outside)?;
        let hd = self.grid.cell_volume();
        let mut t = 0.0;
        for i in region.indices() {
            let d = v[i] - tail;
            t += self.tail_moment[i] * d * d;
        }
        Ok(pair + 2.0 * hd * t)
    }

    /// `G₁(v, S)` with the exterior of `S` given by `v` itself and the tail.
    pub fn breakdown(&self, v: &[f64], tail: f64, region: &Region) -> Result<EnergyBreakdown> {
        self.breakdown_with_exterior(v, region, v, tail)
    }

    /// `G₁^{u}(v, S)`: interior values from `v`, exterior from `u` and `tail`.
    pub fn breakdown_with_exterior(
        &self,
        v: &[f64],
        region: &Region,
        u: &[f64],
        tail: f64,
    ) -> Result<EnergyBreakdown> {
        let (gag, pot, dis) = self.interior_parts(v, region)?;
        let ext = self.exterior_interaction(v, region, u, tail)?;
        Ok(EnergyBreakdown::new(gag, pot, dis, ext))
    }

    pub fn total(&self, v: &[f64], tail: f64, region: &Region) -> Result<f64> {
        Ok(self.breakdown(v, tail, region)?.total)
    }

    pub fn interior(&self, v: &[f64], region: &Region) -> Result<f64> {
        let (g, p, d) = self.interior_parts(v, region)?;
        Ok(g + p + d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::model::EnergyModel;
    use crate::energy::potential::Potential;
    use crate::lattice::{make_grid, sample_disorder, Distribution, Exterior, WindowExterior};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(dim: usize, n: usize, s: f64) -> (Grid, ModelParams, Disorder) {
        let grid = make_grid(dim, n, 1).unwrap();
        let params = ModelParams::new(s, 0.9, Potential::default()).unwrap();
        let g = sample_disorder(grid.site_box(), Distribution::default(), 4).unwrap();
        (grid, params, g)
    }

    #[test]
    fn whole_window_matches_energy_model() {
        for (dim, n, s) in [(1, 12, 0.3), (2, 6, 0.7)] {
            let (grid, params, g) = setup(dim, n, s);
            let wm = WindowModel::new(grid, params, &g).unwrap();
            let em = EnergyModel::new(grid, params, &g, Exterior::constant(-0.5)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = wm.breakdown(&v, -0.5, &Region::all(&grid)).unwrap();
            let b = em.total_energy(&v).unwrap();
            assert!((a.total - b.total).abs() < 1e-12 * b.total.abs());
            assert!((a.exterior - b.exterior).abs() < 1e-12 * b.exterior.abs());
        }
    }

    #[test]
    fn concentric_region_matches_window_exterior_model() {
        let (outer, params, g) = setup(1, 16, 0.6);
        let inner = make_grid(1, 8, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let full: Vec<f64> = (0..outer.len()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let wm = WindowModel::new(outer, params, &g).unwrap();
        let region = Region::concentric(&outer, &inner).unwrap();
        let a = wm.breakdown(&full, 0.8, &region).unwrap();

        let ext = Exterior::Window(WindowExterior {
            outer,
            values: full.clone(),
            tail: 0.8,
        });
        let em = EnergyModel::new(inner, params, &g, ext).unwrap();
        let v: Vec<f64> = region.indices().iter().map(|&i| full[i]).collect();
        let b = em.total_energy(&v).unwrap();
        assert!((a.total - b.total).abs() < 1e-12 * b.total.abs());
    }

    #[test]
    fn shell_has_unit_width() {
        let window = make_grid(1, 12, 2).unwrap();
        let inner = make_grid(1, 8, 2).unwrap();
        let shell = Region::boundary_shell(&window, &inner, 1.0).unwrap();
        // two cells of width 1/2 on each side of Λ_8
        assert_eq!(shell.len(), 4);
        let core = Region::concentric(&window, &inner).unwrap().minus(&shell);
        assert_eq!(core.len(), 12);
        assert!(core.is_disjoint(&shell));
    }
}
