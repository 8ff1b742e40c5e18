//! Central-window gap between the extremal states and the sandwich test for
//! other bounded exteriors.
//!
//! All boundary conditions of one realization are written on the same
//! window (the box padded by `P` cells plus a constant tail), so the
//! discrete problems differ only in the exterior targets and the discrete
//! comparison principle applies to them exactly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_tasks, stats, Experiment, Row, Statistic, SweepConfig, SweepRecord};
use crate::energy::{EnergyModel, Geometry};
use crate::error::Result;
use crate::lattice::{derive_seed, sample_disorder, Exterior, Grid, WindowExterior};
use crate::minimize::{minimize, InitPolicy};

/// Number of bounded non-constant exteriors tested against the extremal pair.
pub const EXTRA_CONDITIONS: usize = 3;

/// Window exteriors: `+K`, `-K`, then a sinusoid, seeded noise and a step,
/// all with values in `[-K, K]`.
pub fn window_exteriors(window: &Grid, k: f64, seed: u64) -> Vec<Exterior> {
    let make = |values: Vec<f64>, tail: f64| {
        Exterior::Window(WindowExterior {
            outer: *window,
            values,
            tail,
        })
    };
    let len = window.len();
    let x0 = |i: usize| window.point(i)[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        make(vec![k; len], k),
        make(vec![-k; len], -k),
        make((0..len).map(|i| k * (2.0 * PI * x0(i) / 7.0).sin()).collect(), 0.0),
        make((0..len).map(|_| rng.gen_range(-k..=k)).collect(), 0.0),
        make((0..len).map(|i| if x0(i) < 0.0 { -k } else { k }).collect(), 0.5 * k),
    ]
}

/// Per realization: `max_{Λ_{n/2}} (v⁺ - v⁻)`, the global ordering margin,
/// and the sandwich excess and central distances of the three other
/// exteriors.
pub fn uniqueness_gap_sweep(cfg: &SweepConfig) -> Result<SweepRecord> {
    let mut cols: Vec<String> = vec!["gap".into(), "min_difference".into(), "sandwich_excess".into()];
    for b in 0..EXTRA_CONDITIONS {
        cols.push(format!("dist_plus_{b}"));
        cols.push(format!("dist_minus_{b}"));
    }
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut rec = SweepRecord::new(Experiment::Gap, cfg, &["n"], &col_refs);
    let params = cfg.params()?;
    let k = cfg.barrier();
    let r_count = cfg.realizations.max(1);
    let geos: Vec<_> = cfg
        .n_list
        .iter()
        .map(|&n| Geometry::new(cfg.grid(n)?, cfg.s))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = (0..geos.len()).flat_map(|c| (0..r_count).map(move |r| (c, r))).collect();
    let rows = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<(Row, usize)> {
        let (c, r) = tasks[t];
        let n = cfg.n_list[c];
        let geo = &geos[c];
        let grid = *geo.grid();
        let window = grid.padded(cfg.pad_for(n).max(1));
        let seed = cfg.realization_seed(n, r);
        let g = sample_disorder(grid.site_box(), cfg.distribution, seed)?;
        let exteriors = window_exteriors(&window, k, derive_seed(seed, 1));
        let mut fields = Vec::with_capacity(exteriors.len());
        let mut failures = 0;
        for (b, ext) in exteriors.into_iter().enumerate() {
            let model = EnergyModel::with_geometry(geo.clone(), params, &g, ext)?;
            let init = match b {
                0 => InitPolicy::Constant { value: k },
                1 => InitPolicy::Constant { value: -k },
                _ => InitPolicy::Random { amplitude: k },
            };
            let solver = crate::minimize::SolverConfig {
                seed: derive_seed(seed, 10 + b as u64),
                ..cfg.solver.with_init(init)
            };
            let res = minimize(&model, &solver)?;
            failures += !res.converged as usize;
            fields.push(res.field.values);
        }
        let (plus, minus) = (&fields[0], &fields[1]);
        let central: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.distance_to_boundary(i) >= n as f64 / 4.0)
            .collect();
        let gap = central
            .iter()
            .map(|&i| plus[i] - minus[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let min_diff = plus
            .iter()
            .zip(minus)
            .map(|(p, m)| p - m)
            .fold(f64::INFINITY, f64::min);
        let mut excess = f64::NEG_INFINITY;
        let mut values = vec![gap, min_diff, 0.0];
        for w in &fields[2..] {
            for i in 0..grid.len() {
                excess = excess.max(w[i] - plus[i]).max(minus[i] - w[i]);
            }
            let dist = |v: &[f64]| central.iter().fold(0.0f64, |m, &i| m.max((w[i] - v[i]).abs()));
            values.push(dist(plus));
            values.push(dist(minus));
        }
        values[2] = excess;
        Ok((
            Row {
                group: vec![n as f64],
                realization: r,
                seed,
                converged: failures == 0,
                values,
            },
            failures,
        ))
    })?;
    for row in rows {
        let (row, f) = row?;
        rec.tasks += 2 + EXTRA_CONDITIONS;
        rec.failures += f;
        rec.rows.push(row);
    }
    for &n in &cfg.n_list {
        let g = vec![n as f64];
        let gaps = rec.values("gap", &g);
        rec.statistics.push(Statistic::new("median_gap", g.clone(), stats::median(&gaps)));
        rec.statistics
            .push(Statistic::new("mean_gap", g.clone(), stats::mean(&gaps)).with_se(stats::std_error(&gaps)));
        let worst = rec.values("sandwich_excess", &g).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rec.statistics.push(Statistic::new("max_sandwich_excess", g.clone(), worst));
        let least = rec.values("min_difference", &g).iter().copied().fold(f64::INFINITY, f64::min);
        rec.statistics.push(Statistic::new("min_difference", g, least));
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    #[test]
    fn exteriors_are_bounded_and_distinct() {
        let window = make_grid(1, 16, 1).unwrap();
        let ext = window_exteriors(&window, 2.0, 3);
        assert_eq!(ext.len(), 2 + EXTRA_CONDITIONS);
        for e in &ext {
            assert!(e.sup_norm() <= 2.0);
        }
        for a in 0..ext.len() {
            for b in a + 1..ext.len() {
                assert_ne!(ext[a], ext[b]);
            }
        }
    }

    #[test]
    fn small_sweep_orders_states() {
        let cfg = SweepConfig {
            n_list: vec![16],
            realizations: 3,
            jobs: 1,
            ..SweepConfig::default()
        };
        let rec = uniqueness_gap_sweep(&cfg).unwrap();
        assert_eq!(rec.failures, 0);
        assert!(rec.statistic("max_sandwich_excess", &[16.0]).unwrap().value <= 1e-6);
        assert!(rec.statistic("min_difference", &[16.0]).unwrap().value >= -1e-6);
    }
}
