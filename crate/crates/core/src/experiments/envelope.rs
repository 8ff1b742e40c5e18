//! Derivative of the maximal-minimizer energy in a single disorder value.
//!
//! Lowering `g(z)` by `h` changes the energy of a fixed field by
//! `θ h ∫_{Q(z)} v`, so for minimizers
//! `θ h ∫_{Q(z)} v⁺(ω) ≥ G(v⁺(ω'), ω') - G(v⁺(ω), ω) ≥ θ h ∫_{Q(z)} v⁺(ω')`
//! with `ω' = ω - h e_z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_tasks, Experiment, Row, Statistic, SweepConfig, SweepRecord};
use crate::energy::{EnergyModel, Geometry};
use crate::error::Result;
use crate::lattice::{sample_disorder, Disorder, Exterior, Grid, MAX_DIM};
use crate::minimize::{minimize, InitPolicy, MinimizeResult};

/// `∫_{Q(z)} v = h^d Σ_{x_j ∈ Q(z)} v_j`.
pub fn cell_integral(grid: &Grid, v: &[f64], z: [i64; MAX_DIM]) -> f64 {
    grid.cell_volume()
        * (0..grid.len())
            .filter(|&j| grid.site_of(j) == z)
            .map(|j| v[j])
            .sum::<f64>()
}

fn solve_plus(model: &EnergyModel, cfg: &SweepConfig, k: f64) -> Result<MinimizeResult> {
    minimize(model, &cfg.solver.with_init(InitPolicy::Constant { value: k }))
}

fn with_site(g: &Disorder, z: [i64; MAX_DIM], value: f64) -> Result<Disorder> {
    let mut out = g.clone();
    out.set(z, value)?;
    Ok(out)
}

/// Sandwich, derivative and monotonicity checks at one site per realization.
pub fn envelope_derivative_check(cfg: &SweepConfig) -> Result<SweepRecord> {
    let mut rec = SweepRecord::new(
        Experiment::Diagnostics,
        cfg,
        &["n", "h"],
        &[
            "site",
            "upper",
            "delta_g",
            "lower",
            "sandwich_excess",
            "derivative_error",
            "monotonicity_drop",
        ],
    );
    rec.label = "envelope".into();
    let params = cfg.params()?;
    let k = cfg.barrier();
    let a = cfg.distribution.bound();
    let r_count = cfg.realizations.max(1);
    let geos: Vec<_> = cfg
        .n_list
        .iter()
        .map(|&n| Geometry::new(cfg.grid(n)?, cfg.s))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..geos.len()).flat_map(|c| (0..r_count).map(move |r| (c, r))).collect();
    let out = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<(Vec<Row>, usize, usize)> {
        let (c, r) = tasks[t];
        let n = cfg.n_list[c];
        let geo = &geos[c];
        let grid = *geo.grid();
        let seed = cfg.realization_seed(n, r);
        let g = sample_disorder(grid.site_box(), cfg.distribution, seed)?;
        let model = EnergyModel::with_geometry(geo.clone(), params, &g, Exterior::constant(k))?;
        // a site in the central half
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = (n / 4) as i64;
        let mut z = [0i64; MAX_DIM];
        for zc in z.iter_mut().take(cfg.d) {
            *zc = rng.gen_range(-half + 1..=half);
        }
        let base = solve_plus(&model, cfg, k)?;
        let mut tasks_run = 1;
        let mut failures = !base.converged as usize;
        let v = base.values();
        let iv = cell_integral(&grid, v, z);
        let theta = cfg.theta;

        let mut drop = 0.0f64;
        let mut prev = f64::NEG_INFINITY;
        for j in 0..5 {
            let value = -a + 2.0 * a * j as f64 / 4.0;
            let gj = with_site(&g, z, value)?;
            let mj = model.with_lifted_disorder(gj.lift_grid(&grid)?)?;
            let res = solve_plus(&mj, cfg, k)?;
            tasks_run += 1;
            failures += !res.converged as usize;
            let ij = cell_integral(&grid, res.values(), z);
            drop = drop.max(prev - ij);
            prev = ij;
        }

        let mut rows = Vec::new();
        for &h in &cfg.h_list {
            let gp = with_site(&g, z, g.get(z)? - h)?;
            let mp = model.with_lifted_disorder(gp.lift_grid(&grid)?)?;
            let pert = solve_plus(&mp, cfg, k)?;
            tasks_run += 1;
            failures += !pert.converged as usize;
            let vp = pert.values();
            let dg = mp.energy_difference(v, vp)? + theta * h * iv;
            let upper = theta * h * iv;
            let lower = theta * h * cell_integral(&grid, vp, z);
            rows.push(Row {
                group: vec![n as f64, h],
                realization: r,
                seed,
                converged: base.converged && pert.converged,
                values: vec![
                    grid.site_box().index_of(z).map_or(f64::NAN, |i| i as f64),
                    upper,
                    dg,
                    lower,
                    (dg - upper).max(lower - dg),
                    (dg / h - theta * iv).abs() / (theta * iv).abs().max(1.0),
                    drop.max(0.0),
                ],
            });
        }
        Ok((rows, tasks_run, failures))
    })?;
    for o in out {
        let (rows, t, f) = o?;
        rec.tasks += t;
        rec.failures += f;
        rec.rows.extend(rows);
    }
    for g in rec.groups() {
        let worst = |c: &str| rec.values(c, &g).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let stats = [
            Statistic::new("max_sandwich_excess", g.clone(), worst("sandwich_excess")),
            Statistic::new("max_derivative_error", g.clone(), worst("derivative_error")),
            Statistic::new("max_monotonicity_drop", g.clone(), worst("monotonicity_drop")),
        ];
        rec.statistics.extend(stats);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    #[test]
    fn cell_integral_sums_subcells() {
        let grid = make_grid(1, 4, 2).unwrap();
        let v: Vec<f64> = (0..8).map(|i| i as f64).collect();
        // site 0 holds the sub-cells at x = -0.25 and x = 0.25 ... with the
        // half-open rule x ∈ [-1/2, 1/2)
        let members: Vec<usize> = (0..8).filter(|&j| grid.site_of(j) == [0, 0]).collect();
        assert_eq!(members.len(), 2);
        let expect = 0.5 * members.iter().map(|&j| v[j]).sum::<f64>();
        assert_eq!(cell_integral(&grid, &v, [0, 0]), expect);
    }

    #[test]
    fn small_check_passes() {
        let cfg = SweepConfig {
            n_list: vec![16],
            realizations: 2,
            jobs: 1,
            ..SweepConfig::default()
        };
        let rec = envelope_derivative_check(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 4);
        for g in rec.groups() {
            assert!(rec.statistic("max_sandwich_excess", &g).unwrap().value <= 1e-9);
            assert!(rec.statistic("max_monotonicity_drop", &g).unwrap().value <= 1e-9);
        }
        assert!(rec.statistic("max_derivative_error", &[16.0, 1e-3]).unwrap().value < 1e-2);
    }
}
