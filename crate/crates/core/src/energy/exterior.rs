use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use super::kernel::KernelTable;
use crate::error::{Error, Result};
use crate::lattice::{Exterior, Grid, MAX_DIM};

/// `∫_{(a,b)^c} |x - y|^{-(1+2s)} dy` for `a < x < b`.
pub fn moment_1d(x: f64, a: f64, b: f64, s: f64) -> f64 {
    ((x - a).powf(-2.0 * s) + (b - x).powf(-2.0 * s)) / (2.0 * s)
}

/// `∫_0^β cos^{2s} φ dφ` for `0 ≤ β < π/2`, via the incomplete beta function
/// (`t = sin² φ`).
fn cos_power_integral(beta_angle: f64, s: f64) -> f64 {
    if beta_angle <= 0.0 {
        return 0.0;
    }
    let x = beta_angle.sin().powi(2);
    0.5 * beta(0.5, s + 0.5) * beta_reg(0.5, s + 0.5, x)
}

/// `∫_{R^c} |x - y|^{-(2+2s)} dy` for the rectangle `R = (lo0,hi0)×(lo1,hi1)`.
///
/// In polar coordinates around `x` the radial integral is exact, leaving
/// `(2s)^{-1} ∫ ρ(φ)^{-2s} dφ` with `ρ` the distance to `∂R` along `φ`; each
/// side contributes `d^{-2s} ∫ cos^{2s}`, split at the foot of the normal.
pub fn moment_2d(x: [f64; 2], lo: [f64; 2], hi: [f64; 2], s: f64) -> f64 {
    let right = hi[0] - x[0];
    let left = x[0] - lo[0];
    let up = hi[1] - x[1];
    let down = x[1] - lo[1];
    let side = |d: f64, e1: f64, e2: f64| {
        d.powf(-2.0 * s)
            * (cos_power_integral((e1 / d).atan(), s) + cos_power_integral((e2 / d).atan(), s))
    };
    (side(right, up, down) + side(left, up, down) + side(up, left, right) + side(down, left, right))
        / (2.0 * s)
}

/// Zeroth moment of the complement of `box_grid`'s domain, at every point of `grid`.
pub fn tail_moments(grid: &Grid, box_grid: &Grid, s: f64) -> Vec<f64> {
    let hw = box_grid.half_width();
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            match grid.dim() {
                1 => moment_1d(x[0], -hw, hw, s),
                _ => moment_2d([x[0], x[1]], [-hw; 2], [hw; 2], s),
            }
        })
        .collect()
}

/// The exterior reduced to a per-point quadratic:
/// `𝒲 = 2 Σ_i A_i (v_i - t_i)² + offset`, where `A_i` is the total exterior
/// weight seen by point `i` and `t_i` the weighted exterior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorWeights {
    /// `w_i = ∫ |x_i - y|^{-(d+2s)} dy` over the region carrying the constant tail.
    pub tail_moment: Vec<f64>,
    /// `Σ_j K(i-j)` over window cells outside the box (zero for constant exteriors).
    pub pair_weight: Vec<f64>,
    /// `A_i = pair_weight_i + h^d w_i`.
    pub weight: Vec<f64>,
    /// Effective exterior value `t_i`.
    pub target: Vec<f64>,
    /// `2 Σ_i Σ_{exterior} weight · (u - t_i)²`, the part independent of `v`.
    pub offset: f64,
}

impl ExteriorWeights {
    pub fn build(grid: &Grid, s: f64, exterior: &Exterior) -> Result<Self> {
        exterior.validate(grid)?;
        let hd = grid.cell_volume();
        match exterior {
            Exterior::Constant { value } => {
                let tail_moment = tail_moments(grid, grid, s);
                let weight = tail_moment.iter().map(|w| hd * w).collect();
                Ok(ExteriorWeights {
                    pair_weight: vec![0.0; grid.len()],
                    weight,
                    target: vec![*value; grid.len()],
                    offset: 0.0,
                    tail_moment,
                })
            }
            Exterior::Window(win) => {
                let outer = &win.outer;
                let off = grid.offset_in(outer)?;
                let kernel = KernelTable::for_grid(outer, s)?;
                let tail_moment = tail_moments(grid, outer, s);
                let inner_side = grid.side();
                let in_inner = |k: [usize; MAX_DIM]| {
                    (0..grid.dim()).all(|a| k[a] >= off && k[a] < off + inner_side)
                };
                let ext_cells: Vec<usize> = (0..outer.len())
                    .filter(|&j| !in_inner(outer.multi_index(j)))
                    .collect();
                let n = grid.len();
                let mut pair_weight = vec![0.0; n];
                let mut weight = vec![0.0; n];
                let mut target = vec![0.0; n];
                let mut offset = 0.0;
                for i in 0..n {
                    let ki = outer.multi_index(grid.embed(outer, i)?);
                    let kij = |j: usize| {
                        let kj = outer.multi_index(j);
                        kernel.at(ki[0].abs_diff(kj[0]), ki[1].abs_diff(kj[1]))
                    };
                    let mut a = 0.0;
                    let mut b = 0.0;
                    for &j in &ext_cells {
                        let k = kij(j);
                        a += k;
                        b += k * win.values[j];
                    }
                    let wt = hd * tail_moment[i];
                    pair_weight[i] = a;
                    weight[i] = a + wt;
                    target[i] = (b + wt * win.tail) / weight[i];
                    let t = target[i];
                    let mut c = wt * (win.tail - t).powi(2);
                    for &j in &ext_cells {
                        c += kij(j) * (win.values[j] - t).powi(2);
                    }
                    offset += 2.0 * c;
                }
                Ok(ExteriorWeights {
                    tail_moment,
                    pair_weight,
                    weight,
                    target,
                    offset,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// `h^d Σ_i w_i`, the boundary-interaction mass of the tail region.
    pub fn tail_mass(&self, cell_volume: f64) -> f64 {
        cell_volume * self.tail_moment.iter().sum::<f64>()
    }

    pub fn interaction(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.len() {
            return Err(Error::Mismatch("field and exterior weights differ in length".into()));
        }
        let mut acc = 0.0;
        for i in 0..v.len() {
            let d = v[i] - self.target[i];
            acc += self.weight[i] * d * d;
        }
        Ok(2.0 * acc + self.offset)
    }

    /// Cached copy under `dir` for constant exteriors of `grid`.
    pub fn load_or_build_constant(dir: &std::path::Path, grid: &Grid, s: f64, value: f64) -> Result<Self> {
        let path = dir.join(format!(
            "exterior_d{}_n{}_m{}_s{:016x}.json",
            grid.dim(),
            grid.n(),
            grid.m(),
            s.to_bits()
        ));
        let moments = match std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str::<Vec<f64>>(&t).ok())
            .filter(|m| m.len() == grid.len())
        {
            Some(m) => m,
            None => {
                let m = tail_moments(grid, grid, s);
                std::fs::create_dir_all(dir)?;
                std::fs::write(&path, serde_json::to_string(&m)?)?;
                m
            }
        };
        let hd = grid.cell_volume();
        Ok(ExteriorWeights {
            pair_weight: vec![0.0; grid.len()],
            weight: moments.iter().map(|w| hd * w).collect(),
            target: vec![value; grid.len()],
            offset: 0.0,
            tail_moment: moments,
        })
    }
}

/// `𝒲((v, Λ), (v₀, Λ^c))` for a field with its exterior description.
pub fn exterior_interaction(v: &[f64], weights: &ExteriorWeights) -> Result<f64> {
    weights.interaction(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_grid, WindowExterior};

    /// `∫_{r0}^∞ r^{-1-2s} dr` by Gauss–Legendre after `r = r0 e^τ`.
    fn half_line_quadrature(r0: f64, s: f64) -> f64 {
        // ∫_0^∞ r0^{-2s} e^{-2sτ} dτ, truncated where the integrand is < 1e-20
        let tmax = 46.0 / (2.0 * s);
        let panels = 400;
        let (nodes, weights) = gauss_legendre_8();
        let mut acc = 0.0;
        for p in 0..panels {
            let a = tmax * p as f64 / panels as f64;
            let b = tmax * (p + 1) as f64 / panels as f64;
            for (x, w) in nodes.iter().zip(&weights) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                acc += 0.5 * (b - a) * w * (-2.0 * s * t).exp();
            }
        }
        acc * r0.powf(-2.0 * s)
    }

    fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
        (
            [
                -0.960_289_856_497_536_3,
                -0.796_666_477_413_626_7,
                -0.525_532_409_916_329,
                -0.183_434_642_495_649_8,
                0.183_434_642_495_649_8,
                0.525_532_409_916_329,
                0.796_666_477_413_626_7,
                0.960_289_856_497_536_3,
            ],
            [
                0.101_228_536_290_376_26,
                0.222_381_034_453_374_47,
                0.313_706_645_877_887_3,
                0.362_683_783_378_362,
                0.362_683_783_378_362,
                0.313_706_645_877_887_3,
                0.222_381_034_453_374_47,
                0.101_228_536_290_376_26,
            ],
        )
    }

    #[test]
    fn single_point_example() {
        // Λ = (-1, 1), x = 0, s = 1/4: (1/(2s)) (1 + 1) = 4
        assert!((moment_1d(0.0, -1.0, 1.0, 0.25) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_quadrature_d1() {
        for &(x, s) in &[(0.0, 0.25), (0.9, 0.75), (-0.3, 0.5), (0.49, 0.1)] {
            let (a, b) = (-1.0, 1.0);
            let q = half_line_quadrature(x - a, s) + half_line_quadrature(b - x, s);
            let c = moment_1d(x, a, b, s);
            assert!(((q - c) / c).abs() < 1e-10, "x={x} s={s}: {q} vs {c}");
        }
    }

    #[test]
    fn cos_power_integral_against_simpson() {
        for &s in &[0.1, 0.25, 0.5, 0.75, 0.95] {
            for &beta_angle in &[0.2, 0.785, 1.3, 1.55] {
                let n = 200_000;
                let h = beta_angle / n as f64;
                let f = |p: f64| p.cos().powf(2.0 * s);
                let mut acc = f(0.0) + f(beta_angle);
                for k in 1..n {
                    acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
                }
                let simpson = acc * h / 3.0;
                let exact = cos_power_integral(beta_angle, s);
                assert!(((simpson - exact) / exact).abs() < 1e-11, "s={s} β={beta_angle}");
            }
        }
    }

    #[test]
    fn moment_2d_against_polar_sum() {
        // direct angular quadrature of (2s)^{-1} ∫ ρ(φ)^{-2s} dφ
        let s = 0.6;
        let (lo, hi) = ([-2.0, -2.0], [2.0, 2.0]);
        for &x in &[[0.0, 0.0], [1.5, -0.7], [-1.9, 1.9]] {
            let n = 400_000;
            let mut acc = 0.0;
            for k in 0..n {
                let phi = (k as f64 + 0.5) * std::f64::consts::TAU / n as f64;
                let (c, sn) = (phi.cos(), phi.sin());
                let tx = if c > 0.0 { (hi[0] - x[0]) / c } else if c < 0.0 { (lo[0] - x[0]) / c } else { f64::INFINITY };
                let ty = if sn > 0.0 { (hi[1] - x[1]) / sn } else if sn < 0.0 { (lo[1] - x[1]) / sn } else { f64::INFINITY };
                acc += tx.min(ty).powf(-2.0 * s);
            }
            let direct = acc * std::f64::consts::TAU / n as f64 / (2.0 * s);
            let exact = moment_2d(x, lo, hi, s);
            assert!(((direct - exact) / exact).abs() < 1e-6, "{x:?}: {direct} vs {exact}");
        }
    }

    #[test]
    fn moments_grow_toward_boundary() {
        let g = make_grid(2, 6, 1).unwrap();
        let w = tail_moments(&g, &g, 0.5);
        // along the diagonal toward the corner
        let diag: Vec<f64> = (3..6).map(|k| w[g.flat_index([k, k])]).collect();
        assert!(diag.windows(2).all(|p| p[1] > p[0]));
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn constant_exterior_interaction() {
        let g = make_grid(1, 8, 1).unwrap();
        let ew = ExteriorWeights::build(&g, 0.3, &Exterior::constant(0.7)).unwrap();
        assert_eq!(ew.interaction(&vec![0.7; 8]).unwrap(), 0.0);
        let v: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let direct: f64 = (0..8)
            .map(|i| 2.0 * ew.tail_moment[i] * (v[i] - 0.7).powi(2))
            .sum();
        assert!((ew.interaction(&v).unwrap() - direct).abs() < 1e-13);
    }

    #[test]
    fn window_reduction_matches_pairwise_sum() {
        let inner = make_grid(1, 4, 2).unwrap();
        let outer = inner.padded(2);
        let s = 0.4;
        let values: Vec<f64> = (0..outer.len()).map(|j| (j as f64 * 0.7).sin()).collect();
        let tail = -0.4;
        let ext = Exterior::Window(WindowExterior {
            outer,
            values: values.clone(),
            tail,
        });
        let ew = ExteriorWeights::build(&inner, s, &ext).unwrap();
        let kernel = KernelTable::for_grid(&outer, s).unwrap();
        let w_tail = tail_moments(&inner, &outer, s);
        let v: Vec<f64> = (0..inner.len()).map(|i| 0.3 * i as f64 - 1.0).collect();
        let off = inner.offset_in(&outer).unwrap();
        let mut direct = 0.0;
        for i in 0..inner.len() {
            let ki = i + off;
            for j in 0..outer.len() {
                if j >= off && j < off + inner.side() {
                    continue;
                }
                direct += 2.0 * kernel.at(ki.abs_diff(j), 0) * (v[i] - values[j]).powi(2);
            }
            direct += 2.0 * inner.cell_volume() * w_tail[i] * (v[i] - tail).powi(2);
        }
        let reduced = ew.interaction(&v).unwrap();
        assert!(((reduced - direct) / direct).abs() < 1e-13);
    }

    #[test]
    fn cached_constant_weights() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(2, 4, 1).unwrap();
        let a = ExteriorWeights::load_or_build_constant(dir.path(), &g, 0.5, 1.0).unwrap();
        let b = ExteriorWeights::load_or_build_constant(dir.path(), &g, 0.5, 1.0).unwrap();
        let c = ExteriorWeights::build(&g, 0.5, &Exterior::constant(1.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
