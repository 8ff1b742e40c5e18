//! The fluctuation statistic `F_n`: conditional mean, given the disorder in
//! `Λ_n`, of the extremal-pair energy difference restricted to `Λ_n`. The
//! conditional expectation is approximated by resampling the disorder in a
//! padding layer of `P` cells around `Λ_n`, with constant `±K` beyond it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_tasks, stats, Experiment, Fit, Row, Statistic, SweepConfig, SweepRecord};
use crate::energy::{Geometry, ModelParams, Region, WindowModel};
use crate::error::{invalid, Result};
use crate::lattice::{derive_seed, sample_disorder, Disorder, Grid};
use crate::minimize::extremal_pair_on;

const EXTERIOR_STREAM: u64 = 0x5eed_0f_e7e2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnEstimate {
    pub n: usize,
    pub interior_seed: u64,
    pub resamples: usize,
    pub pad: usize,
    /// `ΔG` of every successful resample, in resample order.
    pub delta_g: Vec<f64>,
    pub f_hat: f64,
    pub std_error: f64,
    pub failures: usize,
    /// Disorder at the site `0`.
    pub omega0: f64,
    /// Averages of `v^±` over `Λ_n`, averaged over successful resamples.
    pub m_plus: f64,
    pub m_minus: f64,
}

/// Shared geometry for repeated estimates at one system size.
#[derive(Debug, Clone)]
pub struct FnContext {
    inner: Grid,
    window: Grid,
    pad: usize,
    geometry: Arc<Geometry>,
    region: Region,
    params: ModelParams,
    k: f64,
    cfg: SweepConfig,
}

impl FnContext {
    pub fn new(cfg: &SweepConfig, n: usize, pad: usize) -> Result<Self> {
        let inner = cfg.grid(n)?;
        let window = inner.padded(pad);
        Ok(FnContext {
            inner,
            window,
            pad,
            geometry: Geometry::new(window, cfg.s)?,
            region: Region::concentric(&window, &inner)?,
            params: cfg.params()?,
            k: cfg.barrier(),
            cfg: cfg.clone(),
        })
    }

    pub fn inner(&self) -> &Grid {
        &self.inner
    }

    pub fn window(&self) -> &Grid {
        &self.window
    }

    fn interior(&self, seed: u64) -> Result<Disorder> {
        sample_disorder(self.inner.site_box(), self.cfg.distribution, seed)
    }

    fn resampled(&self, interior: &Disorder, interior_seed: u64, j: usize) -> Result<Disorder> {
        let seed = derive_seed(derive_seed(interior_seed, EXTERIOR_STREAM), j as u64);
        let outer = sample_disorder(self.window.site_box(), self.cfg.distribution, seed)?;
        outer.splice(interior, &self.inner.site_box())
    }

    /// `ΔG = G₁(v⁺, Λ_n) - G₁(v⁻, Λ_n)` and the `Λ_n` averages for one
    /// window disorder; `None` when the solver did not converge.
    pub fn resample_difference(&self, disorder: &Disorder) -> Result<Option<(f64, f64, f64)>> {
        let pair = extremal_pair_on(&self.geometry, self.params, disorder, self.k, &self.cfg.solver, false)?;
        if !pair.converged() {
            return Ok(None);
        }
        let wm = WindowModel::new(self.window, self.params, disorder)?;
        let (p, m) = (pair.plus.values(), pair.minus.values());
        let dg = wm.total(p, self.k, &self.region)? - wm.total(m, -self.k, &self.region)?;
        let idx = self.region.indices();
        let avg = |v: &[f64]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
        Ok(Some((dg, avg(p), avg(m))))
    }

    pub fn estimate(&self, interior_seed: u64, resamples: usize) -> Result<FnEstimate> {
        if resamples < 1 {
            return Err(invalid("resamples", "need at least one resample"));
        }
        let interior = self.interior(interior_seed)?;
        let omega0 = interior.get([0, 0]).unwrap_or(f64::NAN);
        let mut delta_g = Vec::with_capacity(resamples);
        let (mut mp, mut mm) = (0.0, 0.0);
        let mut failures = 0;
        for j in 0..resamples {
            let dis = self.resampled(&interior, interior_seed, j)?;
            match self.resample_difference(&dis)? {
                Some((dg, a, b)) => {
                    delta_g.push(dg);
                    mp += a;
                    mm += b;
                }
                None => failures += 1,
            }
        }
        let ok = delta_g.len() as f64;
        Ok(FnEstimate {
            n: self.inner.n(),
            interior_seed,
            resamples,
            pad: self.pad,
            f_hat: stats::mean(&delta_g),
            std_error: if delta_g.len() > 1 { stats::std_error(&delta_g) } else { f64::NAN },
            failures,
            omega0,
            m_plus: mp / ok,
            m_minus: mm / ok,
            delta_g,
        })
    }
}

/// `F̂_n` for one interior disorder: `M` exterior resamples on `Λ_{n+2P}`.
pub fn estimate_fn(cfg: &SweepConfig, n: usize, pad: usize, resamples: usize, interior_seed: u64) -> Result<FnEstimate> {
    if resamples < 2 {
        return Err(invalid("resamples", "need at least two resamples"));
    }
    FnContext::new(cfg, n, pad)?.estimate(interior_seed, resamples)
}

fn contexts(cfg: &SweepConfig, doubled: bool) -> Result<Vec<FnContext>> {
    cfg.n_list
        .iter()
        .map(|&n| {
            let p = cfg.pad_for(n);
            FnContext::new(cfg, n, if doubled { 2 * p } else { p })
        })
        .collect()
}

fn push_rows(rec: &mut SweepRecord, rows: Vec<Result<(Row, usize, usize)>>) -> Result<()> {
    for r in rows {
        let (row, tasks, failures) = r?;
        rec.tasks += tasks;
        rec.failures += failures;
        rec.rows.push(row);
    }
    Ok(())
}

/// `F̂_n` over interior realizations, with the same estimate repeated at
/// doubled padding as a bias check.
pub fn fn_sweep(cfg: &SweepConfig) -> Result<SweepRecord> {
    if cfg.resamples < 2 {
        return Err(invalid("resamples", "need at least two resamples"));
    }
    let mut rec = SweepRecord::new(
        Experiment::Fn,
        cfg,
        &["n"],
        &["f_hat", "f_se", "omega0", "failed_resamples", "f_hat_double_pad", "pad_difference"],
    );
    let ctx = contexts(cfg, false)?;
    let ctx2 = contexts(cfg, true)?;
    let r_count = cfg.realizations.max(1);
    let tasks: Vec<(usize, usize)> = (0..ctx.len()).flat_map(|c| (0..r_count).map(move |r| (c, r))).collect();
    let rows = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<(Row, usize, usize)> {
        let (c, r) = tasks[t];
        let n = cfg.n_list[c];
        let seed = cfg.realization_seed(n, r);
        let e = ctx[c].estimate(seed, cfg.resamples)?;
        let e2 = ctx2[c].estimate(seed, cfg.resamples)?;
        let fails = e.failures + e2.failures;
        Ok((
            Row {
                group: vec![n as f64],
                realization: r,
                seed,
                converged: !e.delta_g.is_empty() && !e2.delta_g.is_empty(),
                values: vec![
                    e.f_hat,
                    e.std_error,
                    e.omega0,
                    e.failures as f64,
                    e2.f_hat,
                    e2.f_hat - e.f_hat,
                ],
            },
            2 * cfg.resamples,
            fails,
        ))
    })?;
    push_rows(&mut rec, rows)?;
    for &n in &cfg.n_list {
        let g = vec![n as f64];
        let f = rec.values("f_hat", &g);
        rec.statistics
            .push(Statistic::new("mean_f", g.clone(), stats::mean(&f)).with_se(stats::std_error(&f)));
        rec.statistics
            .push(Statistic::new("var_f", g.clone(), stats::variance(&f)));
        let diff = rec.values("pad_difference", &g);
        rec.statistics.push(
            Statistic::new("pad_doubling_bias", g, stats::mean(&diff)).with_se(stats::std_error(&diff)),
        );
    }
    Ok(rec)
}

/// `4 θ² (1 + C₀ θ A)²`.
pub fn variance_ceiling(cfg: &SweepConfig) -> f64 {
    4.0 * cfg.theta * cfg.theta * cfg.sup_bound().powi(2)
}

/// `Var(F̂_n)/n^d`, the between-bin estimate of `Var(E[F_n | g(0)])`, a
/// normality test and the `Λ_n` averages of the extremal states.
pub fn variance_sweep(cfg: &SweepConfig) -> Result<SweepRecord> {
    if cfg.resamples < 2 {
        return Err(invalid("resamples", "need at least two resamples"));
    }
    let mut rec = SweepRecord::new(
        Experiment::Variance,
        cfg,
        &["n"],
        &["f_hat", "f_se", "omega0", "failed_resamples", "m_plus", "m_minus"],
    );
    let ctx = contexts(cfg, false)?;
    let r_count = cfg.realizations.max(1);
    let tasks: Vec<(usize, usize)> = (0..ctx.len()).flat_map(|c| (0..r_count).map(move |r| (c, r))).collect();
    let rows = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<(Row, usize, usize)> {
        let (c, r) = tasks[t];
        let n = cfg.n_list[c];
        let seed = cfg.realization_seed(n, r);
        let e = ctx[c].estimate(seed, cfg.resamples)?;
        Ok((
            Row {
                group: vec![n as f64],
                realization: r,
                seed,
                converged: !e.delta_g.is_empty(),
                values: vec![e.f_hat, e.std_error, e.omega0, e.failures as f64, e.m_plus, e.m_minus],
            },
            cfg.resamples,
            e.failures,
        ))
    })?;
    push_rows(&mut rec, rows)?;

    let ceiling = variance_ceiling(cfg);
    let mut volumes = Vec::new();
    let mut vars = Vec::new();
    for &n in &cfg.n_list {
        let g = vec![n as f64];
        let f = rec.values("f_hat", &g);
        let vol = (n as f64).powi(cfg.d as i32);
        let var = stats::variance(&f);
        rec.statistics
            .push(Statistic::new("mean_f", g.clone(), stats::mean(&f)).with_se(stats::std_error(&f)));
        rec.statistics.push(
            Statistic::new("var_f_per_volume", g.clone(), var / vol)
                .with_se(var / vol * (2.0 / (f.len() as f64 - 1.0)).sqrt())
                .with_reference(ceiling),
        );
        volumes.push(vol);
        vars.push(var);
        let keys: Vec<f64> = rec.values("omega0", &g);
        for bins in [cfg.bins / 2, cfg.bins, 2 * cfg.bins] {
            if bins < 2 {
                continue;
            }
            if let Ok(b) = stats::binned_conditional_variance(&keys, &f, bins) {
                rec.statistics.push(
                    Statistic::new(format!("d_squared_b{bins}"), g.clone(), b.estimate)
                        .with_se(b.std_error)
                        .with_reference(b.raw),
                );
            }
        }
        if let Ok(a2) = stats::anderson_darling(&f) {
            rec.statistics
                .push(Statistic::new("anderson_darling", g.clone(), a2).with_reference(stats::AD_CRITICAL_5));
        }
        ergodic_statistics(&mut rec, &g);
    }
    if volumes.len() >= 3 && vars.iter().all(|v| *v > 0.0) {
        rec.fits.push(Fit::loglog("var_f", vec![], &volumes, &vars, 1.0)?);
    }
    Ok(rec)
}

fn ergodic_statistics(rec: &mut SweepRecord, g: &[f64]) {
    let mp = rec.values("m_plus", g);
    let mm = rec.values("m_minus", g);
    let sum: Vec<f64> = mp.iter().zip(&mm).map(|(a, b)| a + b).collect();
    rec.statistics
        .push(Statistic::new("m_plus", g.to_vec(), stats::mean(&mp)).with_se(stats::std_error(&mp)));
    rec.statistics
        .push(Statistic::new("m_minus", g.to_vec(), stats::mean(&mm)).with_se(stats::std_error(&mm)));
    rec.statistics.push(
        Statistic::new("antisymmetry_defect", g.to_vec(), stats::mean(&sum)).with_se(stats::std_error(&sum)),
    );
}

/// Volume averages of the extremal states over `Λ_n`, computed inside a
/// padded box with one disorder sample per realization.
pub fn ergodic_means(cfg: &SweepConfig) -> Result<SweepRecord> {
    let mut rec = SweepRecord::new(Experiment::Ergodic, cfg, &["n"], &["m_plus", "m_minus"]);
    let ctx = contexts(cfg, false)?;
    let r_count = cfg.realizations.max(1);
    let tasks: Vec<(usize, usize)> = (0..ctx.len()).flat_map(|c| (0..r_count).map(move |r| (c, r))).collect();
    let rows = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<(Row, usize, usize)> {
        let (c, r) = tasks[t];
        let n = cfg.n_list[c];
        let seed = cfg.realization_seed(n, r);
        let dis = sample_disorder(ctx[c].window().site_box(), cfg.distribution, seed)?;
        let res = ctx[c].resample_difference(&dis)?;
        let (mp, mm) = res.map_or((f64::NAN, f64::NAN), |(_, a, b)| (a, b));
        Ok((
            Row {
                group: vec![n as f64],
                realization: r,
                seed,
                converged: res.is_some(),
                values: vec![mp, mm],
            },
            1,
            res.is_none() as usize,
        ))
    })?;
    push_rows(&mut rec, rows)?;
    for &n in &cfg.n_list {
        ergodic_statistics(&mut rec, &[n as f64]);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SweepConfig {
        SweepConfig {
            n_list: vec![8, 16],
            realizations: 4,
            resamples: 3,
            jobs: 1,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn estimate_is_mean_of_resamples() {
        let e = estimate_fn(&cfg(), 8, 4, 4, 17).unwrap();
        assert_eq!(e.delta_g.len() + e.failures, 4);
        assert!((e.f_hat - stats::mean(&e.delta_g)).abs() < 1e-12);
        assert!((e.std_error - stats::std_error(&e.delta_g)).abs() < 1e-12);
        assert!(estimate_fn(&cfg(), 8, 4, 1, 17).is_err());
    }

    #[test]
    fn no_disorder_gives_zero() {
        let c = SweepConfig {
            theta: 0.0,
            ..cfg()
        };
        let e = estimate_fn(&c, 8, 4, 3, 5).unwrap();
        assert!(e.delta_g.iter().all(|d| d.abs() < 1e-9));
        assert!((e.m_plus + e.m_minus).abs() < 1e-9);
    }

    #[test]
    fn interior_disorder_is_held_fixed() {
        let ctx = FnContext::new(&cfg(), 8, 4).unwrap();
        let interior = ctx.interior(3).unwrap();
        let a = ctx.resampled(&interior, 3, 0).unwrap();
        let b = ctx.resampled(&interior, 3, 1).unwrap();
        for z in ctx.inner().site_box().sites() {
            assert_eq!(a.get(z).unwrap(), interior.get(z).unwrap());
            assert_eq!(b.get(z).unwrap(), interior.get(z).unwrap());
        }
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn sign_flip_negates_the_difference() {
        let ctx = FnContext::new(&cfg(), 8, 4).unwrap();
        let dis = sample_disorder(ctx.window().site_box(), cfg().distribution, 9).unwrap();
        let (a, p, m) = ctx.resample_difference(&dis).unwrap().unwrap();
        let (b, p2, m2) = ctx.resample_difference(&dis.negate()).unwrap().unwrap();
        assert!((a + b).abs() < 1e-8 * a.abs().max(1.0));
        assert!((p + m2).abs() < 1e-8 && (m + p2).abs() < 1e-8);
    }

    #[test]
    fn sweeps_run() {
        let rec = variance_sweep(&cfg()).unwrap();
        assert_eq!(rec.rows.len(), 8);
        assert!(rec.statistic("var_f_per_volume", &[8.0]).is_some());
        let e = ergodic_means(&cfg()).unwrap();
        assert_eq!(e.rows.len(), 8);
        let f = fn_sweep(&SweepConfig {
            n_list: vec![8],
            realizations: 2,
            ..cfg()
        })
        .unwrap();
        assert!(f.statistic("pad_doubling_bias", &[8.0]).is_some());
    }
}
