//! Boundary-interaction mass `h^d Σ w_i` and extremal-pair energy
//! differences as functions of the box size.

use super::{run_tasks, stats, Experiment, Fit, Row, Statistic, SweepConfig, SweepRecord};
use crate::energy::{tail_moments, Geometry};
use crate::error::{Error, Result};
use crate::lattice::{sample_disorder, Grid};
use crate::minimize::extremal_pair_on;

/// `h^d Σ_i w_i` for the constant exterior of `grid`.
pub fn exterior_mass(grid: &Grid, s: f64) -> f64 {
    grid.cell_volume() * tail_moments(grid, grid, s).iter().sum::<f64>()
}

/// Growth exponent of boundary energies in units of the volume `|Λ| = n^d`:
/// `(d-2s)/d` for `s < 1/2`, `(d-1)/d` for `s > 1/2`, `None` at the
/// logarithmic case `s = 1/2`.
pub fn expected_volume_exponent(d: usize, s: f64) -> Option<f64> {
    let d = d as f64;
    if (s - 0.5).abs() < 1e-12 {
        None
    } else if s < 0.5 {
        Some((d - 2.0 * s) / d)
    } else {
        Some((d - 1.0) / d)
    }
}

/// For every `s` in `s_list` and `n` in `n_list`: the exterior mass and, when
/// `realizations > 0`, extremal-pair energy differences. Fits are log-log in
/// the volume; at `s = 1/2` the residual ratio after adding a `log log |Λ|`
/// regressor is reported as `log_factor_rss_ratio`.
pub fn boundary_scaling_sweep(cfg: &SweepConfig) -> Result<SweepRecord> {
    if cfg.n_list.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} system sizes, need at least 3 for a fit",
            cfg.n_list.len()
        )));
    }
    let mut rec = SweepRecord::new(Experiment::Scaling, cfg, &["s", "n"], &["delta_g", "abs_delta_g"]);
    let d = cfg.d;
    let volumes: Vec<f64> = cfg.n_list.iter().map(|&n| (n as f64).powi(d as i32)).collect();

    for &s in &cfg.s_list {
        let masses: Vec<f64> = cfg
            .n_list
            .iter()
            .map(|&n| Ok(exterior_mass(&cfg.grid(n)?, s)))
            .collect::<Result<_>>()?;
        for (&n, &w) in cfg.n_list.iter().zip(&masses) {
            rec.statistics.push(Statistic::new("exterior_mass", vec![s, n as f64], w));
        }
        let expected = expected_volume_exponent(d, s);
        rec.fits.push(Fit::loglog(
            "exterior_mass",
            vec![s],
            &volumes,
            &masses,
            expected.unwrap_or(f64::NAN),
        )?);
        if expected.is_none() {
            let lv: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
            let llv: Vec<f64> = lv.iter().map(|v| v.ln()).collect();
            let lm: Vec<f64> = masses.iter().map(|v| v.ln()).collect();
            // needs at least four sizes for the extra regressor
            if let (Ok(plain), Ok(with_log)) = (stats::ols(&[lv.clone()], &lm), stats::ols(&[lv, llv], &lm)) {
                rec.statistics.push(
                    Statistic::new("log_factor_rss_ratio", vec![s], with_log.rss / plain.rss.max(f64::MIN_POSITIVE))
                        .with_reference(plain.rss),
                );
            }
        }
    }

    if cfg.realizations == 0 || cfg.theta == 0.0 {
        return Ok(rec);
    }
    let k = cfg.barrier();
    let mut geos = Vec::new();
    for &s in &cfg.s_list {
        for &n in &cfg.n_list {
            geos.push((s, n, Geometry::new(cfg.grid(n)?, s)?));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..geos.len())
        .flat_map(|gi| (0..cfg.realizations).map(move |r| (gi, r)))
        .collect();
    let rows = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<Row> {
        let (gi, r) = tasks[t];
        let (s, n, geo) = &geos[gi];
        let params = cfg.with_s(*s).params()?;
        let seed = cfg.realization_seed(*n, r);
        let g = sample_disorder(geo.grid().site_box(), cfg.distribution, seed)?;
        let pair = extremal_pair_on(geo, params, &g, k, &cfg.solver, false)?;
        let dg = pair.energy_difference();
        Ok(Row {
            group: vec![*s, *n as f64],
            realization: r,
            seed,
            converged: pair.converged(),
            values: vec![dg, dg.abs()],
        })
    })?;
    for row in rows {
        let row = row?;
        rec.tasks += 1;
        if !row.converged {
            rec.failures += 1;
        }
        rec.rows.push(row);
    }

    for &s in &cfg.s_list {
        let side_exp = expected_volume_exponent(d, s).unwrap_or((d as f64 - 1.0) / d as f64) * d as f64;
        let mut maxes = Vec::new();
        for &n in &cfg.n_list {
            let g = vec![s, n as f64];
            let abs = rec.values("abs_delta_g", &g);
            let mx = abs.iter().copied().fold(0.0, f64::max);
            maxes.push(mx);
            rec.statistics.push(Statistic::new("max_abs_delta_g", g.clone(), mx));
            rec.statistics.push(
                Statistic::new("mean_abs_delta_g", g.clone(), stats::mean(&abs)).with_se(stats::std_error(&abs)),
            );
            rec.statistics.push(
                Statistic::new("scaled_max_abs_delta_g", g, mx * (n as f64).powf(-side_exp)).with_reference(side_exp),
            );
        }
        if maxes.iter().all(|m| *m > 0.0) {
            let expected = expected_volume_exponent(d, s).unwrap_or(f64::NAN);
            rec.fits
                .push(Fit::loglog("max_abs_delta_g", vec![s], &volumes, &maxes, expected)?);
            let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
            let scaled: Vec<f64> = maxes
                .iter()
                .zip(&ns)
                .map(|(m, n)| m * n.powf(-side_exp))
                .collect();
            rec.fits.push(Fit::loglog("scaled_max_abs_delta_g", vec![s], &ns, &scaled, 0.0)?);
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::moment_1d;
    use crate::lattice::make_grid;

    #[test]
    fn mass_matches_summed_closed_form() {
        let grid = make_grid(1, 16, 2).unwrap();
        let s = 0.3;
        let direct: f64 = (0..grid.len())
            .map(|i| 0.5 * moment_1d(grid.point(i)[0], -8.0, 8.0, s))
            .sum();
        assert!((exterior_mass(&grid, s) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn exponents() {
        assert_eq!(expected_volume_exponent(1, 0.25), Some(0.5));
        assert_eq!(expected_volume_exponent(1, 0.75), Some(0.0));
        assert_eq!(expected_volume_exponent(2, 0.75), Some(0.5));
        assert_eq!(expected_volume_exponent(2, 0.25), Some(0.75));
        assert_eq!(expected_volume_exponent(1, 0.5), None);
    }

    #[test]
    fn mass_slope_quarter() {
        let cfg = SweepConfig {
            n_list: vec![64, 128, 256, 512, 1024],
            s_list: vec![0.25, 0.5],
            realizations: 0,
            ..SweepConfig::default()
        };
        let rec = boundary_scaling_sweep(&cfg).unwrap();
        let f = rec.fit("exterior_mass", &[0.25]).unwrap();
        assert!((f.slope - 0.5).abs() < 0.05, "{}", f.slope);
        let ratio = rec.statistic("log_factor_rss_ratio", &[0.5]).unwrap().value;
        assert!(ratio < 0.5);
    }

    #[test]
    fn too_few_sizes_rejected() {
        let cfg = SweepConfig {
            n_list: vec![8, 16],
            ..SweepConfig::default()
        };
        assert!(boundary_scaling_sweep(&cfg).is_err());
    }
}
