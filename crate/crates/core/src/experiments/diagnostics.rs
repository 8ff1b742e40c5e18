//! Qualitative diagnostics: decay of the boundary interaction `𝒲(v, Δ)/|Δ|`
//! on growing cubes, discrete Hölder quotients, and the constant of the
//! Hölder-difference bound on Gagliardo energies.

use serde::{Deserialize, Serialize};

use super::{envelope::envelope_derivative_check, Experiment, Row, Statistic, SweepConfig, SweepRecord};
use crate::energy::{Geometry, KernelTable, ModelParams, Potential, Region, WindowModel};
use crate::error::{invalid, Error, Result};
use crate::lattice::{make_grid, sample_disorder, Grid};
use crate::minimize::{cutoff_weight, extremal_pair_on};

/// Values of a field beyond its window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    Constant(f64),
    /// Separate constants left and right of a one-dimensional window.
    Sides { left: f64, right: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPoint {
    pub side: usize,
    pub interaction: f64,
    pub per_volume: f64,
}

/// `𝒲(v, Δ)` for concentric cubes `Δ` of the given sides inside `window`.
pub fn cutoff_diagnostic(window: &Grid, v: &[f64], tail: Tail, s: f64, sides: &[usize]) -> Result<Vec<CutoffPoint>> {
    if v.len() != window.len() {
        return Err(Error::Mismatch("field does not match the window".into()));
    }
    let params = ModelParams::new(s, 0.0, Potential::default())?;
    let wm = WindowModel::with_lifted(*window, params, vec![0.0; window.len()])?;
    let hd = window.cell_volume();
    let mut out = Vec::with_capacity(sides.len());
    for &l in sides {
        let cube = make_grid(window.dim(), l, window.m())?;
        let region = Region::concentric(window, &cube)?;
        let w = match tail {
            Tail::Constant(c) => wm.exterior_interaction(v, &region, v, c)?,
            Tail::Sides { left, right } => {
                if window.dim() != 1 {
                    return Err(invalid("tail", "sided tails need a one-dimensional window"));
                }
                let outside = Region::all(window).minus(&region);
                let pair = wm.pair_interaction(v, &region, v, &outside)?;
                let hw = window.half_width();
                let mut t = 0.0;
                for i in region.indices() {
                    let x = window.point(i)[0];
                    let ml = (x + hw).powf(-2.0 * s) / (2.0 * s);
                    let mr = (hw - x).powf(-2.0 * s) / (2.0 * s);
                    t += ml * (v[i] - left).powi(2) + mr * (v[i] - right).powi(2);
                }
                pair + 2.0 * hd * t
            }
        };
        out.push(CutoffPoint {
            side: l,
            interaction: w,
            per_volume: w / cube.volume(),
        });
    }
    Ok(out)
}

/// `max_{i≠j} |v_i - v_j| / |x_i - x_j|^α` over `region` (all points when `None`).
pub fn holder_quotient(grid: &Grid, v: &[f64], alpha: f64, region: Option<&Region>) -> f64 {
    let idx: Vec<usize> = match region {
        Some(r) => r.indices(),
        None => (0..grid.len()).collect(),
    };
    let mut q = 0.0f64;
    for (a, &i) in idx.iter().enumerate() {
        let xi = grid.point(i);
        for &j in &idx[a + 1..] {
            let xj = grid.point(j);
            let d2: f64 = (0..grid.dim()).map(|c| (xi[c] - xj[c]).powi(2)).sum();
            q = q.max((v[i] - v[j]).abs() / d2.powf(alpha / 2.0));
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvestReport {
    pub alpha: f64,
    /// `|Σ K (Δu)² - Σ K (Δu_n)²|`.
    pub difference: f64,
    /// `[u]_α + [u_n]_α`.
    pub holder_sum: f64,
    /// `[u - u_n]_α`.
    pub holder_difference: f64,
    /// `Σ_{i≠j} K(i-j) |x_i - x_j|^{2α}`.
    pub kernel_moment: f64,
    pub bound: f64,
    /// `difference / bound`, at most 1.
    pub ratio: f64,
}

/// The discrete form of the bound
/// `|K(u) - K(u_n)| ≤ ([u]_α + [u_n]_α) [u - u_n]_α Σ K |x - y|^{2α}`.
pub fn convest_constant(grid: &Grid, u: &[f64], un: &[f64], s: f64, alpha: f64) -> Result<ConvestReport> {
    if u.len() != grid.len() || un.len() != grid.len() {
        return Err(Error::Mismatch("fields do not match the grid".into()));
    }
    if !(alpha > s && alpha < 2.0 * s && alpha <= 1.0) {
        return Err(invalid("alpha", format!("{alpha} must lie in (s, min(2s, 1)]")));
    }
    let kernel = KernelTable::for_grid(grid, s)?;
    let mut diff = 0.0;
    let mut moment = 0.0;
    for i in 0..grid.len() {
        let ki = grid.multi_index(i);
        let xi = grid.point(i);
        for j in 0..grid.len() {
            if i == j {
                continue;
            }
            let kj = grid.multi_index(j);
            let k = kernel.at(ki[0].abs_diff(kj[0]), ki[1].abs_diff(kj[1]));
            let xj = grid.point(j);
            let d2: f64 = (0..grid.dim()).map(|c| (xi[c] - xj[c]).powi(2)).sum();
            diff += k * ((u[i] - u[j]).powi(2) - (un[i] - un[j]).powi(2));
            moment += k * d2.powf(alpha);
        }
    }
    let e: Vec<f64> = u.iter().zip(un).map(|(a, b)| a - b).collect();
    let holder_sum = holder_quotient(grid, u, alpha, None) + holder_quotient(grid, un, alpha, None);
    let holder_difference = holder_quotient(grid, &e, alpha, None);
    let bound = holder_sum * holder_difference * moment;
    Ok(ConvestReport {
        alpha,
        difference: diff.abs(),
        holder_sum,
        holder_difference,
        kernel_moment: moment,
        bound,
        ratio: if bound > 0.0 { diff.abs() / bound } else { 0.0 },
    })
}

/// Smoothstep wall from `-1` to `+1` across `[-1/2, 1/2]` along the first axis.
pub fn wall_profile(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| 2.0 * cutoff_weight(grid.point(i)[0] + 0.5) - 1.0)
        .collect()
}

/// Cutoff decay for a wall profile (`d = 1`) or a bump (`d = 2`), the
/// Hölder quotient of an extremal state, the `K` vs `2K` Hölder-difference
/// constant, and the envelope-derivative check.
pub fn diagnostics_run(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let mut rec = SweepRecord::new(Experiment::Diagnostics, cfg, &["side"], &["interaction", "per_volume"]);
    let max_side = *cfg.cube_list.iter().max().expect("validated nonempty");
    let window = make_grid(cfg.d, 4 * max_side, cfg.m)?;
    let (v, tail) = if cfg.d == 1 {
        (wall_profile(&window), Tail::Sides { left: -1.0, right: 1.0 })
    } else {
        let r = max_side as f64 / 4.0;
        let v = (0..window.len())
            .map(|i| {
                let x = window.point(i);
                cutoff_weight(r - (x[0] * x[0] + x[1] * x[1]).sqrt())
            })
            .collect();
        (v, Tail::Constant(0.0))
    };
    let mut sides = cfg.cube_list.clone();
    sides.sort_unstable();
    let points = cutoff_diagnostic(&window, &v, tail, cfg.s, &sides)?;
    for p in &points {
        rec.rows.push(Row {
            group: vec![p.side as f64],
            realization: 0,
            seed: cfg.seed,
            converged: true,
            values: vec![p.interaction, p.per_volume],
        });
    }
    let constant = cutoff_diagnostic(&window, &vec![0.3; window.len()], Tail::Constant(0.3), cfg.s, &sides)?;
    rec.statistics.push(Statistic::new(
        "constant_field_interaction",
        vec![],
        constant.iter().fold(0.0f64, |m, p| m.max(p.interaction.abs())),
    ));
    let reference = 2f64.powf(cfg.d as f64 - 2.0 * cfg.s);
    for w in points.windows(2) {
        if w[1].side == 2 * w[0].side {
            rec.statistics.push(
                Statistic::new("doubling_ratio", vec![w[1].side as f64], w[1].interaction / w[0].interaction)
                    .with_reference(reference),
            );
        }
    }

    // Hölder diagnostics on an extremal state
    let n = cfg.n_list[0];
    let grid = cfg.grid(n)?;
    let geo = Geometry::new(grid, cfg.s)?;
    let g = sample_disorder(grid.site_box(), cfg.distribution, cfg.realization_seed(n, 0))?;
    let k = cfg.barrier();
    let params = cfg.params()?;
    let pair = extremal_pair_on(&geo, params, &g, k, &cfg.solver, false)?;
    let pair2 = extremal_pair_on(&geo, params, &g, 2.0 * k, &cfg.solver, false)?;
    rec.tasks += 4;
    rec.failures += !pair.converged() as usize * 2 + !pair2.converged() as usize * 2;
    let alpha = 0.5 * (cfg.s + (2.0 * cfg.s).min(1.0));
    let bulk = Region::from_mask((0..grid.len()).map(|i| grid.distance_to_boundary(i) >= n as f64 / 4.0).collect());
    rec.statistics.push(
        Statistic::new("holder_quotient_bulk", vec![alpha], holder_quotient(&grid, pair.plus.values(), alpha, Some(&bulk))),
    );
    rec.statistics.push(Statistic::new(
        "holder_quotient",
        vec![alpha],
        holder_quotient(&grid, pair.plus.values(), alpha, None),
    ));
    if alpha > cfg.s {
        let c = convest_constant(&grid, pair.plus.values(), pair2.plus.values(), cfg.s, alpha)?;
        rec.statistics
            .push(Statistic::new("convest_ratio", vec![alpha], c.ratio).with_reference(c.bound));
    }

    let env = envelope_derivative_check(cfg)?;
    Ok(vec![rec, env])
}
