use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::exterior::{tail_moments, ExteriorWeights};
use super::kernel::{KernelTable, MatvecPath, ToeplitzOperator};
use super::potential::Potential;
use crate::error::{invalid, Error, Result};
use crate::lattice::{Disorder, Exterior, Grid, ScalarField};

/// Physical parameters shared by every realization of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub s: f64,
    pub theta: f64,
    pub potential: Potential,
}

impl ModelParams {
    pub fn new(s: f64, theta: f64, potential: Potential) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("s", format!("{s} must lie in (0, 1)")));
        }
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(invalid("theta", format!("{theta} must be non-negative")));
        }
        Ok(ModelParams {
            s,
            theta,
            potential,
        })
    }

    /// `1 + C₀ θ A`, the a priori sup bound on minimizers.
    pub fn sup_bound(&self, disorder_bound: f64) -> f64 {
        1.0 + self.potential.c0() * self.theta * disorder_bound
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `Σ_{i≠j} K(i-j) (v_i - v_j)²` over ordered pairs inside the box.
    pub gagliardo: f64,
    /// `h^d Σ_i W(v_i)`.
    pub potential: f64,
    /// `-θ h^d Σ_i g₁(x_i) v_i`.
    pub disorder: f64,
    /// `𝒲((v, Λ), (v₀, Λ^c))`.
    pub exterior: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(gagliardo: f64, potential: f64, disorder: f64, exterior: f64) -> Self {
        EnergyBreakdown {
            gagliardo,
            potential,
            disorder,
            exterior,
            total: gagliardo + potential + disorder + exterior,
        }
    }

    /// `K₁ = gagliardo + potential + disorder`.
    pub fn interior(&self) -> f64 {
        self.gagliardo + self.potential + self.disorder
    }
}

/// Everything about a grid that does not depend on the realization.
#[derive(Debug)]
pub struct Geometry {
    grid: Grid,
    s: f64,
    op: ToeplitzOperator,
    row_sums: Vec<f64>,
    tail_moment: Vec<f64>,
}

impl Geometry {
    pub fn new(grid: Grid, s: f64) -> Result<Arc<Self>> {
        let kernel = Arc::new(KernelTable::for_grid(&grid, s)?);
        let op = ToeplitzOperator::auto(&grid, kernel)?;
        Ok(Arc::new(Self::from_operator(grid, s, op)))
    }

    pub fn with_path(grid: Grid, s: f64, path: MatvecPath) -> Result<Arc<Self>> {
        let kernel = Arc::new(KernelTable::for_grid(&grid, s)?);
        let op = ToeplitzOperator::new(&grid, kernel, path)?;
        Ok(Arc::new(Self::from_operator(grid, s, op)))
    }

    fn from_operator(grid: Grid, s: f64, op: ToeplitzOperator) -> Self {
        let row_sums = op.row_sums();
        let tail_moment = tail_moments(&grid, &grid, s);
        Geometry {
            grid,
            s,
            op,
            row_sums,
            tail_moment,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn operator(&self) -> &ToeplitzOperator {
        &self.op
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn exterior_weights(&self, exterior: &Exterior) -> Result<ExteriorWeights> {
        match exterior {
            Exterior::Constant { value } => {
                let hd = self.grid.cell_volume();
                Ok(ExteriorWeights {
                    tail_moment: self.tail_moment.clone(),
                    pair_weight: vec![0.0; self.grid.len()],
                    weight: self.tail_moment.iter().map(|w| hd * w).collect(),
                    target: vec![*value; self.grid.len()],
                    offset: 0.0,
                })
            }
            Exterior::Window(_) => ExteriorWeights::build(&self.grid, self.s, exterior),
        }
    }
}

/// The discrete energy `G₁^{v₀}(·, ω, Λ)` on one grid for one realization and
/// one exterior prescription.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    geometry: Arc<Geometry>,
    params: ModelParams,
    g1: Vec<f64>,
    disorder_sup: f64,
    exterior: Exterior,
    weights: ExteriorWeights,
}

/// Per-iterate cache: `q = rowsum ∘ v - K v`, so that the Gagliardo term is
/// `2 Σ v_i q_i` and its gradient `4 q`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub q: Vec<f64>,
}

impl EnergyModel {
    pub fn new(grid: Grid, params: ModelParams, disorder: &Disorder, exterior: Exterior) -> Result<Self> {
        let geometry = Geometry::new(grid, params.s)?;
        Self::with_geometry(geometry, params, disorder, exterior)
    }

    pub fn with_geometry(
        geometry: Arc<Geometry>,
        params: ModelParams,
        disorder: &Disorder,
        exterior: Exterior,
    ) -> Result<Self> {
        if geometry.s != params.s {
            return Err(Error::Mismatch("geometry built for a different s".into()));
        }
        let g1 = disorder.lift_grid(&geometry.grid)?;
        let disorder_sup = g1.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let weights = geometry.exterior_weights(&exterior)?;
        Ok(EnergyModel {
            geometry,
            params,
            g1,
            disorder_sup,
            exterior,
            weights,
        })
    }

    /// Same geometry and disorder with another exterior.
    pub fn with_exterior(&self, exterior: Exterior) -> Result<Self> {
        let weights = self.geometry.exterior_weights(&exterior)?;
        Ok(EnergyModel {
            exterior,
            weights,
            ..self.clone()
        })
    }

    /// Same geometry and exterior with `g₁` replaced.
    pub fn with_lifted_disorder(&self, g1: Vec<f64>) -> Result<Self> {
        if g1.len() != self.grid().len() {
            return Err(Error::Mismatch("lifted disorder length".into()));
        }
        let disorder_sup = g1.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        Ok(EnergyModel {
            g1,
            disorder_sup,
            ..self.clone()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.geometry.grid
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn lifted_disorder(&self) -> &[f64] {
        &self.g1
    }

    /// `sup |g₁|` over the grid.
    pub fn disorder_sup(&self) -> f64 {
        self.disorder_sup
    }

    pub fn exterior(&self) -> &Exterior {
        &self.exterior
    }

    pub fn exterior_weights(&self) -> &ExteriorWeights {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.g1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g1.is_empty()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a grid of {} points",
                v.len(),
                self.len()
            )));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(())
    }

    pub fn evaluate(&self, v: &[f64]) -> Evaluation {
        let mut kv = vec![0.0; v.len()];
        self.geometry.op.apply(v, &mut kv);
        let q = v
            .iter()
            .zip(&self.geometry.row_sums)
            .zip(&kv)
            .map(|((vi, r), k)| r * vi - k)
            .collect();
        Evaluation { q }
    }

    pub fn field(&self, v: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(*self.grid(), v, self.exterior.clone())
    }

    fn breakdown_with(&self, v: &[f64], eval: &Evaluation) -> EnergyBreakdown {
        let hd = self.grid().cell_volume();
        let w = &self.params.potential;
        let mut gag = 0.0;
        let mut pot = 0.0;
        let mut dis = 0.0;
        let mut ext = 0.0;
        for i in 0..v.len() {
            gag += v[i] * eval.q[i];
            pot += w.value(v[i]);
            dis += self.g1[i] * v[i];
            let d = v[i] - self.weights.target[i];
            ext += self.weights.weight[i] * d * d;
        }
        EnergyBreakdown::new(
            2.0 * gag,
            hd * pot,
            -self.params.theta * hd * dis,
            2.0 * ext + self.weights.offset,
        )
    }

    pub fn total_energy(&self, v: &[f64]) -> Result<EnergyBreakdown> {
        self.check(v)?;
        Ok(self.breakdown_with(v, &self.evaluate(v)))
    }

    /// `K₁(v, ω, Λ)`.
    pub fn interior_energy(&self, v: &[f64]) -> Result<f64> {
        Ok(self.total_energy(v)?.interior())
    }

    pub fn exterior_interaction(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        self.weights.interaction(v)
    }

    pub fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let eval = self.evaluate(v);
        Ok(self.gradient_with(v, &eval))
    }

    pub fn gradient_with(&self, v: &[f64], eval: &Evaluation) -> Vec<f64> {
        let hd = self.grid().cell_volume();
        let w = &self.params.potential;
        let theta = self.params.theta;
        (0..v.len())
            .map(|i| {
                4.0 * eval.q[i] + hd * w.derivative(v[i]) - theta * hd * self.g1[i]
                    + 4.0 * self.weights.weight[i] * (v[i] - self.weights.target[i])
            })
            .collect()
    }

    /// Discrete Euler–Lagrange residual `‖∇G‖_∞ / (2 h^d)`, i.e. the max over
    /// points of `|(-Δ)^s v + ½ (W'(v) - θ g₁)|` with
    /// `(-Δ)^s v_i = 2 h^{-d} [q_i + A_i (v_i - t_i)]`.
    pub fn el_residual(&self, v: &[f64]) -> Result<f64> {
        let g = self.gradient(v)?;
        Ok(self.residual_of_gradient(&g))
    }

    pub fn residual_of_gradient(&self, g: &[f64]) -> f64 {
        let scale = 0.5 / self.grid().cell_volume();
        g.iter().fold(0.0f64, |m, x| m.max(x.abs())) * scale
    }

    /// Per-point curvature bound `4 rowsum_i + h^d sup W'' + 4 A_i`; the map
    /// `v ↦ v - D^{-1} ∇G(v)` is order preserving.
    pub fn diagonal_bound(&self) -> Vec<f64> {
        let hd = self.grid().cell_volume();
        let wmax = self.params.potential.max_curvature();
        self.geometry
            .row_sums
            .iter()
            .zip(&self.weights.weight)
            .map(|(r, a)| 4.0 * r + hd * wmax + 4.0 * a)
            .collect()
    }

    /// Global smoothness constant `4 Σ_Δ K(Δ) + h^d sup W'' + 4 max_i A_i`.
    pub fn lipschitz_bound(&self) -> f64 {
        let rmax = self.geometry.row_sums.iter().fold(0.0f64, |m, r| m.max(*r));
        let amax = self.weights.weight.iter().fold(0.0f64, |m, a| m.max(*a));
        4.0 * rmax + self.grid().cell_volume() * self.params.potential.max_curvature() + 4.0 * amax
    }

    /// Pieces of `G(v + α p) - G(v)` that are polynomial in `α`:
    /// returns `(lin, quad)` with the non-potential change `α lin + α² quad`.
    pub fn direction_coefficients(
        &self,
        v: &[f64],
        eval: &Evaluation,
        p: &[f64],
        eval_p: &Evaluation,
    ) -> (f64, f64) {
        let hd = self.grid().cell_volume();
        let theta = self.params.theta;
        let mut lin = 0.0;
        let mut quad = 0.0;
        for i in 0..v.len() {
            let a = self.weights.weight[i];
            lin += 4.0 * p[i] * eval.q[i] - theta * hd * self.g1[i] * p[i]
                + 4.0 * a * p[i] * (v[i] - self.weights.target[i]);
            quad += 2.0 * p[i] * eval_p.q[i] + 2.0 * a * p[i] * p[i];
        }
        (lin, quad)
    }

    /// `G(v + α p) - G(v)` without forming either energy.
    pub fn energy_change(&self, v: &[f64], p: &[f64], alpha: f64, coeffs: (f64, f64)) -> f64 {
        let hd = self.grid().cell_volume();
        let w = &self.params.potential;
        let dw: f64 = v
            .iter()
            .zip(p)
            .map(|(vi, pi)| w.difference(*vi, alpha * pi))
            .sum();
        alpha * coeffs.0 + alpha * alpha * coeffs.1 + hd * dw
    }

    /// `G(to) - G(from)` computed as an increment.
    pub fn energy_difference(&self, from: &[f64], to: &[f64]) -> Result<f64> {
        self.check(from)?;
        self.check(to)?;
        let p: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
        let ev = self.evaluate(from);
        let ep = self.evaluate(&p);
        let coeffs = self.direction_coefficients(from, &ev, &p, &ep);
        Ok(self.energy_change(from, &p, 1.0, coeffs))
    }
}

/// `Σ_{i≠j} K(i-j) (v_i - v_j)²` by the direct double loop.
pub fn gagliardo_direct(grid: &Grid, kernel: &KernelTable, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..v.len() {
        let ki = grid.multi_index(i);
        for j in 0..v.len() {
            if i == j {
                continue;
            }
            let kj = grid.multi_index(j);
            let d = v[i] - v[j];
            acc += kernel.at(ki[0].abs_diff(kj[0]), ki[1].abs_diff(kj[1])) * d * d;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::potential::build_potential;
    use crate::lattice::{make_grid, sample_disorder, Distribution, WindowExterior};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(dim: usize, n: usize, m: usize, s: f64, theta: f64, ext: Exterior, seed: u64) -> EnergyModel {
        let grid = make_grid(dim, n, m).unwrap();
        let params = ModelParams::new(s, theta, Potential::default()).unwrap();
        let g = sample_disorder(grid.site_box(), Distribution::default(), seed).unwrap();
        EnergyModel::new(grid, params, &g, ext).unwrap()
    }

    fn random_field(len: usize, seed: u64, amp: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-amp..amp)).collect()
    }

    #[test]
    fn constant_one_has_zero_energy() {
        let m = model(1, 8, 1, 0.5, 0.0, Exterior::constant(1.0), 1);
        let e = m.total_energy(&vec![1.0; 8]).unwrap();
        assert_eq!(e.total, 0.0);
        assert_eq!(m.interior_energy(&vec![1.0; 8]).unwrap(), 0.0);
        let g = m.gradient(&vec![1.0; 8]).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-14));
        assert!(m.el_residual(&vec![1.0; 8]).unwrap() < 1e-14);
        let m2 = model(2, 4, 2, 0.3, 0.0, Exterior::constant(1.0), 1);
        assert!(m2.total_energy(&vec![1.0; 64]).unwrap().total.abs() < 1e-13);
    }

    #[test]
    fn two_point_gagliardo() {
        // d=1, n=2, m=1, s=1/2, v=(0,1): two ordered pairs at distance 1 → 2
        let m = model(1, 2, 1, 0.5, 0.0, Exterior::constant(0.0), 1);
        let e = m.total_energy(&[0.0, 1.0]).unwrap();
        assert!((e.gagliardo - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_energy_is_potential_only() {
        let m = model(1, 6, 2, 0.4, 1.5, Exterior::constant(0.0), 3);
        let e = m.total_energy(&vec![0.0; 12]).unwrap();
        assert_eq!(e.disorder, 0.0);
        assert_eq!(e.gagliardo, 0.0);
        assert_eq!(e.exterior, 0.0);
        assert!((e.total - 12.0 * 0.5 * 0.3125).abs() < 1e-14);
    }

    #[test]
    fn matvec_form_matches_direct_sum() {
        for (dim, n, m_, s) in [(1, 16, 1, 0.25), (1, 6, 3, 0.8), (2, 6, 1, 0.5)] {
            let em = model(dim, n, m_, s, 1.0, Exterior::constant(0.3), 5);
            let v = random_field(em.len(), 9, 2.0);
            let kernel = KernelTable::for_grid(em.grid(), s).unwrap();
            let direct = gagliardo_direct(em.grid(), &kernel, &v);
            let e = em.total_energy(&v).unwrap();
            assert!(((e.gagliardo - direct) / direct).abs() < 1e-12);
            assert!((e.total - (e.gagliardo + e.potential + e.disorder + e.exterior)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for (dim, n, m_, s) in [(1, 8, 1, 0.25), (1, 4, 2, 0.75), (2, 4, 1, 0.5)] {
            let em = model(dim, n, m_, s, 0.8, Exterior::constant(-0.4), 7);
            let v = random_field(em.len(), 11, 1.8);
            let g = em.gradient(&v).unwrap();
            let h = 1e-5;
            for i in 0..v.len() {
                let mut a = v.clone();
                let mut b = v.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (em.total_energy(&a).unwrap().total - em.total_energy(&b).unwrap().total) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0), "i={i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn gradient_is_affine_in_theta() {
        let grid = make_grid(1, 8, 2).unwrap();
        let g = sample_disorder(grid.site_box(), Distribution::default(), 2).unwrap();
        let mk = |theta| {
            EnergyModel::new(grid, ModelParams::new(0.6, theta, Potential::default()).unwrap(), &g, Exterior::constant(0.0)).unwrap()
        };
        let (m1, m2) = (mk(0.3), mk(1.1));
        let v = random_field(16, 4, 1.0);
        let (g1, g2) = (m1.gradient(&v).unwrap(), m2.gradient(&v).unwrap());
        let hd = grid.cell_volume();
        for i in 0..16 {
            let expected = (1.1 - 0.3) * hd * m1.lifted_disorder()[i];
            assert!((g1[i] - g2[i] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn residual_is_scaled_gradient() {
        let em = model(1, 8, 2, 0.5, 1.0, Exterior::constant(1.0), 3);
        let v = random_field(16, 2, 1.0);
        let g = em.gradient(&v).unwrap();
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let r = em.el_residual(&v).unwrap();
        assert!((r - gmax / (2.0 * em.grid().cell_volume())).abs() < 1e-15);
    }

    #[test]
    fn energy_change_matches_difference() {
        let em = model(1, 16, 1, 0.4, 1.0, Exterior::constant(0.5), 8);
        let v = random_field(16, 1, 1.5);
        let p = random_field(16, 2, 1.0);
        let (ev, ep) = (em.evaluate(&v), em.evaluate(&p));
        let coeffs = em.direction_coefficients(&v, &ev, &p, &ep);
        for alpha in [1e-6, 1e-2, 0.5, 2.0] {
            let w: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let direct = em.total_energy(&w).unwrap().total - em.total_energy(&v).unwrap().total;
            let change = em.energy_change(&v, &p, alpha, coeffs);
            assert!((direct - change).abs() < 1e-12 * (1.0 + direct.abs()), "α={alpha}");
        }
    }

    #[test]
    fn negation_symmetry_is_exact() {
        let grid = make_grid(1, 16, 1).unwrap();
        let params = ModelParams::new(0.3, 1.0, build_potential(1.0, 0.5).unwrap()).unwrap();
        let g = sample_disorder(grid.site_box(), Distribution::default(), 21).unwrap();
        let m_plus = EnergyModel::new(grid, params, &g, Exterior::constant(0.7)).unwrap();
        let m_minus = EnergyModel::new(grid, params, &g.negate(), Exterior::constant(-0.7)).unwrap();
        let v = random_field(16, 3, 2.0);
        let w: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(m_plus.total_energy(&v).unwrap(), m_minus.total_energy(&w).unwrap());
    }

    #[test]
    fn window_exterior_with_constant_values_is_consistent() {
        // a window filled with the tail constant only moves the collocated part
        // of the exterior; the energy remains minimal at v ≡ tail
        let grid = make_grid(1, 8, 1).unwrap();
        let outer = grid.padded(4);
        let ext = Exterior::Window(WindowExterior {
            outer,
            values: vec![1.0; outer.len()],
            tail: 1.0,
        });
        let em = model(1, 8, 1, 0.5, 0.0, ext, 1);
        assert!(em.total_energy(&vec![1.0; 8]).unwrap().total.abs() < 1e-14);
        assert!(em.exterior_weights().target.iter().all(|t| (t - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rejects_non_finite() {
        let em = model(1, 4, 1, 0.5, 0.0, Exterior::constant(0.0), 1);
        assert!(em.total_energy(&[0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(em.gradient(&[0.0; 3]).is_err());
    }
}
