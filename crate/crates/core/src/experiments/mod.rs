//! Runnable experiments on finite-volume extremal states: boundary-layer
//! scaling, the fluctuation statistic `F_n` and its variance, envelope
//! derivatives, ergodic means, the uniqueness gap and cutoff diagnostics.
//!
//! Every experiment returns a [`SweepRecord`] holding one row of scalars per
//! realization plus derived statistics and fits. Realizations run as
//! independent tasks on a worker pool and are collected in index order, so
//! the output does not depend on the number of workers.

pub mod diagnostics;
pub mod envelope;
pub mod fluctuation;
pub mod gap;
pub mod scaling;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyModel, Geometry, ModelParams, Potential};
use crate::error::{invalid, Error, Result};
use crate::lattice::{derive_seed, make_grid, sample_disorder, Distribution, Exterior, Grid, ScalarField};
use crate::minimize::{extremal_pair_on, minimize, SolverConfig};

pub use diagnostics::{convest_constant, cutoff_diagnostic, holder_quotient, ConvestReport, CutoffPoint, Tail};
pub use envelope::envelope_derivative_check;
pub use fluctuation::{ergodic_means, estimate_fn, variance_sweep, FnContext, FnEstimate};
pub use gap::uniqueness_gap_sweep;
pub use scaling::{boundary_scaling_sweep, exterior_mass, expected_volume_exponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Minimize,
    Extremal,
    Scaling,
    Fn,
    Variance,
    Ergodic,
    Gap,
    Diagnostics,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Minimize,
        Experiment::Extremal,
        Experiment::Scaling,
        Experiment::Fn,
        Experiment::Variance,
        Experiment::Ergodic,
        Experiment::Gap,
        Experiment::Diagnostics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Minimize => "minimize",
            Experiment::Extremal => "extremal",
            Experiment::Scaling => "scaling",
            Experiment::Fn => "fn",
            Experiment::Variance => "variance",
            Experiment::Ergodic => "ergodic",
            Experiment::Gap => "gap",
            Experiment::Diagnostics => "diagnostics",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid("experiment", format!("unknown experiment {s:?}")))
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub s: f64,
    pub theta: f64,
    pub c0: f64,
    pub delta0: f64,
    /// Barrier `K`; `None` means `1 + C₀ θ A`.
    pub k: Option<f64>,
    pub n_list: Vec<usize>,
    pub m: usize,
    /// Padding in cells for nested-box computations; `None` means `n/2`.
    pub pad: Option<usize>,
    /// Exterior resamples `M` per `F_n` estimate.
    pub resamples: usize,
    /// Disorder realizations `R`.
    pub realizations: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Worker threads; 0 uses the available parallelism.
    pub jobs: usize,
    pub s_list: Vec<f64>,
    pub h_list: Vec<f64>,
    pub cube_list: Vec<usize>,
    pub bins: usize,
    /// Constant exterior for the plain minimization run.
    pub exterior: f64,
    pub distribution: Distribution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            d: 1,
            s: 0.75,
            theta: 1.0,
            c0: 1.0,
            delta0: 0.5,
            k: None,
            n_list: vec![32, 64, 128],
            m: 1,
            pad: None,
            resamples: 20,
            realizations: 30,
            seed: 1,
            solver: SolverConfig::default(),
            jobs: 0,
            s_list: vec![0.25, 0.5, 0.75],
            h_list: vec![1e-2, 1e-3],
            cube_list: vec![8, 16, 32, 64],
            bins: 8,
            exterior: 1.0,
            distribution: Distribution::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d == 1 || self.d == 2) {
            return Err(invalid("d", "dimension must be 1 or 2"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid("s", format!("{} must lie in (0, 1)", self.s)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(invalid("theta", "must be non-negative"));
        }
        if self.n_list.is_empty() {
            return Err(invalid("n", "list must be nonempty"));
        }
        for &n in &self.n_list {
            make_grid(self.d, n, self.m).map_err(|e| invalid("n", e.to_string()))?;
        }
        if self.s_list.is_empty() || self.s_list.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(invalid("s_list", "values must lie in (0, 1)"));
        }
        if self.h_list.is_empty() || self.h_list.iter().any(|h| !(*h > 0.0)) {
            return Err(invalid("h_list", "steps must be positive"));
        }
        if self.cube_list.is_empty() || self.cube_list.iter().any(|c| *c < 2 || c % 2 == 1) {
            return Err(invalid("cube_list", "sides must be even and at least 2"));
        }
        if self.bins < 2 {
            return Err(invalid("bins", "need at least two bins"));
        }
        if let Some(k) = self.k {
            if !(k > 0.0) {
                return Err(invalid("k", "barrier must be positive"));
            }
        }
        if !self.exterior.is_finite() {
            return Err(invalid("exterior", "must be finite"));
        }
        self.distribution.validate()?;
        self.params()?;
        self.solver.validate()
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.s, self.theta, Potential::new(self.c0, self.delta0)?)
    }

    pub fn with_s(&self, s: f64) -> Self {
        SweepConfig { s, ..self.clone() }
    }

    /// `1 + C₀ θ A`.
    pub fn sup_bound(&self) -> f64 {
        1.0 + self.c0 * self.theta * self.distribution.bound()
    }

    pub fn barrier(&self) -> f64 {
        self.k.unwrap_or_else(|| self.sup_bound())
    }

    pub fn pad_for(&self, n: usize) -> usize {
        self.pad.unwrap_or(n / 2)
    }

    pub fn grid(&self, n: usize) -> Result<Grid> {
        make_grid(self.d, n, self.m)
    }

    /// Seed of realization `r` at system size `n`.
    pub fn realization_seed(&self, n: usize, r: usize) -> u64 {
        derive_seed(derive_seed(self.seed, n as u64), r as u64)
    }

    /// `{experiment}_{d}d_s{s}_theta{θ}_n{n}` with the sizes joined by `-`.
    pub fn file_stem(&self, experiment: Experiment) -> String {
        self.labeled_stem(experiment.name())
    }

    pub fn labeled_stem(&self, label: &str) -> String {
        let ns: Vec<String> = self.n_list.iter().map(|n| n.to_string()).collect();
        format!(
            "{}_{}d_s{}_theta{}_n{}",
            label,
            self.d,
            self.s,
            self.theta,
            ns.join("-")
        )
    }
}

/// Runs `f(0..tasks)` on `jobs` workers and returns the results in index order.
pub fn run_tasks<T, F>(jobs: usize, tasks: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if jobs > 0 {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid("jobs", e.to_string()))?;
    Ok(pool.install(|| (0..tasks).into_par_iter().map(&f).collect()))
}

/// Per-realization scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub group: Vec<f64>,
    pub realization: usize,
    pub seed: u64,
    pub converged: bool,
    pub values: Vec<f64>,
}

/// A derived scalar with its standard error (NaN when not applicable) and
/// an optional reference value it is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub group: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    pub reference: f64,
}

impl Statistic {
    pub fn new(name: impl Into<String>, group: Vec<f64>, value: f64) -> Self {
        Statistic {
            name: name.into(),
            group,
            value,
            std_error: f64::NAN,
            reference: f64::NAN,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = se;
        self
    }

    pub fn with_reference(mut self, r: f64) -> Self {
        self.reference = r;
        self
    }
}

/// Slope of `log y` against `log x` with a 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub group: Vec<f64>,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
    pub points: usize,
    /// Expected exponent, NaN when none applies.
    pub expected: f64,
}

impl Fit {
    pub fn loglog(name: impl Into<String>, group: Vec<f64>, x: &[f64], y: &[f64], expected: f64) -> Result<Self> {
        let f = stats::loglog_fit(x, y)?;
        let (lo, hi) = f.ci(1, 0.95);
        Ok(Fit {
            name: name.into(),
            group,
            slope: f.coef[1],
            slope_se: f.std_err[1],
            intercept: f.coef[0],
            ci_lo: lo,
            ci_hi: hi,
            r2: f.r2,
            points: x.len(),
            expected,
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: Vec<f64>,
    pub column: String,
    pub summary: stats::Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub experiment: Experiment,
    /// Output label, the experiment name unless a run writes several records.
    pub label: String,
    pub config: SweepConfig,
    pub group_columns: Vec<String>,
    pub value_columns: Vec<String>,
    pub rows: Vec<Row>,
    pub statistics: Vec<Statistic>,
    pub fits: Vec<Fit>,
    /// Solver tasks attempted and failed.
    pub tasks: usize,
    pub failures: usize,
    /// Optional field dumps, written as separate CSV files.
    #[serde(skip)]
    pub fields: Vec<(String, ScalarField)>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepRecord {
    pub fn new(experiment: Experiment, config: &SweepConfig, group_columns: &[&str], value_columns: &[&str]) -> Self {
        SweepRecord {
            experiment,
            label: experiment.name().to_string(),
            config: config.clone(),
            group_columns: group_columns.iter().map(|s| s.to_string()).collect(),
            value_columns: value_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            statistics: Vec::new(),
            fits: Vec::new(),
            tasks: 0,
            failures: 0,
            fields: Vec::new(),
        }
    }

    pub fn stem(&self) -> String {
        self.config.labeled_stem(&self.label)
    }

    pub fn failure_rate(&self) -> f64 {
        if self.tasks == 0 {
            0.0
        } else {
            self.failures as f64 / self.tasks as f64
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.value_columns.iter().position(|c| c == name)
    }

    /// Values of `name` over converged rows of `group`.
    pub fn values(&self, name: &str, group: &[f64]) -> Vec<f64> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| r.converged && r.group == group)
            .map(|r| r.values[c])
            .filter(|v| v.is_finite())
            .collect()
    }

    pub fn groups(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.group) {
                out.push(r.group.clone());
            }
        }
        out
    }

    /// Per-group summaries of every value column over converged rows.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for g in self.groups() {
            for c in &self.value_columns {
                let x = self.values(c, &g);
                out.push(Aggregate {
                    group: g.clone(),
                    column: c.clone(),
                    summary: stats::summarize(&x),
                });
            }
        }
        out
    }

    pub fn statistic(&self, name: &str, group: &[f64]) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name && s.group == group)
    }

    pub fn fit(&self, name: &str, group: &[f64]) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name && f.group == group)
    }

    /// Per-realization table.
    pub fn rows_csv(&self) -> String {
        let mut out = String::new();
        let mut head: Vec<&str> = self.group_columns.iter().map(|s| s.as_str()).collect();
        head.extend(["realization", "seed", "converged"]);
        head.extend(self.value_columns.iter().map(|s| s.as_str()));
        out.push_str(&head.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut cells: Vec<String> = r.group.iter().map(|v| fmt_f(*v)).collect();
            cells.push(r.realization.to_string());
            cells.push(r.seed.to_string());
            cells.push((r.converged as u8).to_string());
            cells.extend(r.values.iter().map(|v| fmt_f(*v)));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Aggregates, statistics and fits in one long table.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("section,group,quantity,count,value,std_error,variance,median,lo,hi,reference\n");
        let key = |g: &[f64]| g.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        for a in self.aggregates() {
            let s = a.summary;
            let _ = writeln!(
                out,
                "aggregate,{},{},{},{},{},{},{},{},{},NaN",
                key(&a.group),
                a.column,
                s.count,
                fmt_f(s.mean),
                fmt_f(s.std_error),
                fmt_f(s.variance),
                fmt_f(s.median),
                fmt_f(s.min),
                fmt_f(s.max)
            );
        }
        for st in &self.statistics {
            let _ = writeln!(
                out,
                "statistic,{},{},NaN,{},{},NaN,NaN,NaN,NaN,{}",
                key(&st.group),
                st.name,
                fmt_f(st.value),
                fmt_f(st.std_error),
                fmt_f(st.reference)
            );
        }
        for f in &self.fits {
            let _ = writeln!(
                out,
                "fit,{},{},{},{},{},{},{},{},{},{}",
                key(&f.group),
                f.name,
                f.points,
                fmt_f(f.slope),
                fmt_f(f.slope_se),
                fmt_f(f.r2),
                fmt_f(f.intercept),
                fmt_f(f.ci_lo),
                fmt_f(f.ci_hi),
                fmt_f(f.expected)
            );
        }
        out
    }

    /// Manifest with configuration, seeds, failure counts and results.
    pub fn manifest(&self) -> serde_json::Value {
        let mut m = manifest(self.experiment, &self.config, "complete");
        m["tasks"] = self.tasks.into();
        m["failures"] = self.failures.into();
        m["statistics"] = serde_json::to_value(&self.statistics).unwrap_or_default();
        m["fits"] = serde_json::to_value(&self.fits).unwrap_or_default();
        m
    }
}

/// Manifest written before any computation starts.
pub fn manifest(experiment: Experiment, config: &SweepConfig, status: &str) -> serde_json::Value {
    serde_json::json!({
        "experiment": experiment.name(),
        "status": status,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config": config,
    })
}

/// Dispatches `experiment` on `config`.
pub fn run_experiment(experiment: Experiment, config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let one = match experiment {
        Experiment::Minimize => minimize_run(config),
        Experiment::Extremal => extremal_sweep(config),
        Experiment::Scaling => boundary_scaling_sweep(config),
        Experiment::Fn => fluctuation::fn_sweep(config),
        Experiment::Variance => variance_sweep(config),
        Experiment::Ergodic => ergodic_means(config),
        Experiment::Gap => uniqueness_gap_sweep(config),
        Experiment::Diagnostics => return diagnostics::diagnostics_run(config),
    };
    Ok(vec![one?])
}

/// One minimization per system size with exterior `CONSTANT(exterior)`.
pub fn minimize_run(cfg: &SweepConfig) -> Result<SweepRecord> {
    let mut rec = SweepRecord::new(
        Experiment::Minimize,
        cfg,
        &["n"],
        &["total", "gagliardo", "potential", "disorder", "exterior", "residual", "iterations", "sup_norm"],
    );
    let params = cfg.params()?;
    let results = run_tasks(cfg.jobs, cfg.n_list.len(), |t| -> Result<_> {
        let n = cfg.n_list[t];
        let grid = cfg.grid(n)?;
        let seed = cfg.realization_seed(n, 0);
        let g = sample_disorder(grid.site_box(), cfg.distribution, seed)?;
        let model = EnergyModel::new(grid, params, &g, Exterior::constant(cfg.exterior))?;
        Ok((n, seed, minimize(&model, &cfg.solver)?))
    })?;
    for r in results {
        let (n, seed, res) = r?;
        rec.tasks += 1;
        if !res.converged {
            rec.failures += 1;
        }
        let e = res.energy;
        rec.rows.push(Row {
            group: vec![n as f64],
            realization: 0,
            seed,
            converged: res.converged,
            values: vec![
                e.total,
                e.gagliardo,
                e.potential,
                e.disorder,
                e.exterior,
                res.residual,
                res.iterations as f64,
                res.field.sup_norm(),
            ],
        });
        rec.fields.push((format!("field_n{n}"), res.field));
    }
    Ok(rec)
}

/// Extremal pairs over realizations: energy difference, ordering, sup
/// bounds, `K`-sensitivity and the sign-flip symmetry defect.
pub fn extremal_sweep(cfg: &SweepConfig) -> Result<SweepRecord> {
    let mut rec = SweepRecord::new(
        Experiment::Extremal,
        cfg,
        &["n"],
        &[
            "delta_g",
            "ordering_violation",
            "k_gap",
            "sup_plus",
            "sup_minus",
            "bulk_sup",
            "mean_plus",
            "mean_minus",
            "symmetry_defect",
        ],
    );
    let params = cfg.params()?;
    let k = cfg.barrier();
    let r_count = cfg.realizations.max(1);
    let mut geometries = BTreeMap::new();
    for &n in &cfg.n_list {
        geometries.insert(n, Geometry::new(cfg.grid(n)?, cfg.s)?);
    }
    let tasks: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..r_count).map(move |r| (n, r)))
        .collect();
    let results = run_tasks(cfg.jobs, tasks.len(), |t| -> Result<Row> {
        let (n, r) = tasks[t];
        let geo = &geometries[&n];
        let grid = *geo.grid();
        let seed = cfg.realization_seed(n, r);
        let g = sample_disorder(grid.site_box(), cfg.distribution, seed)?;
        let pair = extremal_pair_on(geo, params, &g, k, &cfg.solver, true)?;
        let flipped = extremal_pair_on(geo, params, &g.negate(), k, &cfg.solver, false)?;
        let sym = pair
            .plus
            .values()
            .iter()
            .zip(flipped.minus.values())
            .chain(pair.minus.values().iter().zip(flipped.plus.values()))
            .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        // bulk: points at depth at least n/4
        let bulk = (0..grid.len())
            .filter(|&i| grid.distance_to_boundary(i) >= n as f64 / 4.0)
            .fold(0.0f64, |m, i| m.max(pair.plus.values()[i].abs()).max(pair.minus.values()[i].abs()));
        let converged = pair.converged() && flipped.converged();
        Ok(Row {
            group: vec![n as f64],
            realization: r,
            seed,
            converged,
            values: vec![
                pair.energy_difference(),
                pair.ordering_violation,
                pair.k_gap.unwrap_or(f64::NAN),
                pair.plus.field.sup_norm(),
                pair.minus.field.sup_norm(),
                bulk,
                stats::mean(pair.plus.values()),
                stats::mean(pair.minus.values()),
                sym,
            ],
        })
    })?;
    for row in results {
        let row = row?;
        rec.tasks += 1;
        if !row.converged {
            rec.failures += 1;
        }
        rec.rows.push(row);
    }
    let bound = cfg.sup_bound().max(k);
    for &n in &cfg.n_list {
        let g = vec![n as f64];
        let abs_dg: Vec<f64> = rec.values("delta_g", &g).iter().map(|v| v.abs()).collect();
        rec.statistics
            .push(Statistic::new("max_abs_delta_g", g.clone(), abs_dg.iter().copied().fold(0.0, f64::max)));
        let worst = |c: &str| rec.values(c, &g).iter().copied().fold(0.0, f64::max);
        let stats = [
            Statistic::new("max_ordering_violation", g.clone(), worst("ordering_violation")),
            Statistic::new("max_symmetry_defect", g.clone(), worst("symmetry_defect")),
            Statistic::new("max_sup_norm", g.clone(), worst("sup_plus").max(worst("sup_minus"))).with_reference(bound),
        ];
        rec.statistics.extend(stats);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            n_list: vec![8, 16],
            realizations: 3,
            resamples: 2,
            jobs: 1,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("bogus".parse::<Experiment>().is_err());
    }

    #[test]
    fn file_stem_format() {
        let cfg = SweepConfig {
            n_list: vec![32, 64],
            ..SweepConfig::default()
        };
        assert_eq!(cfg.file_stem(Experiment::Gap), "gap_1d_s0.75_theta1_n32-64");
    }

    #[test]
    fn config_validation_names_the_key() {
        let bad = SweepConfig {
            s: 1.2,
            ..SweepConfig::default()
        };
        match bad.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "s"),
            other => panic!("unexpected {other:?}"),
        }
        let odd = SweepConfig {
            n_list: vec![7],
            ..SweepConfig::default()
        };
        assert!(matches!(odd.validate(), Err(Error::InvalidParameter { name: "n", .. })));
    }

    #[test]
    fn tasks_come_back_in_order() {
        let a = run_tasks(1, 50, |i| i * i).unwrap();
        let b = run_tasks(4, 50, |i| i * i).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let rec = extremal_sweep(&small()).unwrap();
        assert_eq!(rec.rows.len(), 6);
        for a in rec.aggregates() {
            let x = rec.values(&a.column, &a.group);
            assert_eq!(a.summary, stats::summarize(&x));
        }
        let csv = rec.rows_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("n,realization,seed,converged,delta_g"));
        assert!(rec.aggregate_csv().contains("statistic,8,max_symmetry_defect"));
    }

    #[test]
    fn extremal_sweep_properties() {
        let rec = extremal_sweep(&small()).unwrap();
        assert_eq!(rec.failures, 0);
        for g in rec.groups() {
            assert!(rec.statistic("max_ordering_violation", &g).unwrap().value <= 1e-6);
            assert!(rec.statistic("max_symmetry_defect", &g).unwrap().value <= 1e-6);
            let sup = rec.statistic("max_sup_norm", &g).unwrap();
            assert!(sup.value <= sup.reference + 1e-6);
        }
    }

    #[test]
    fn minimize_run_without_disorder() {
        let cfg = SweepConfig {
            theta: 0.0,
            n_list: vec![16],
            jobs: 1,
            ..SweepConfig::default()
        };
        let rec = minimize_run(&cfg).unwrap();
        let total = rec.values("total", &[16.0])[0];
        assert!(total.abs() < 1e-12);
        assert_eq!(rec.fields.len(), 1);
    }
}
