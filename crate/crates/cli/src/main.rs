//! `nlrf`: run finite-volume experiments and write manifests and CSV tables.
//!
//! Outputs per record: `{stem}.json` (manifest), `{stem}.cfg` (resolved flat
//! config, reusable with `--config`), `{stem}.csv` (one row per realization),
//! `{stem}_agg.csv` (statistics and fits) and optional `{stem}_{field}.csv`.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use nlrf_core::experiments::{manifest, run_experiment, Experiment, SweepRecord};

use config::{ConfigError, RunConfig};

/// Largest tolerated fraction of solver tasks without convergence.
const FAILURE_QUOTA: f64 = 0.10;

#[derive(Debug, Parser)]
#[command(name = "nlrf", version, about = "Random-field nonlocal phase-field experiments")]
struct Cli {
    /// minimize, extremal, scaling, fn, variance, ergodic, gap or diagnostics.
    /// May instead be given as `experiment` in the config file.
    command: Option<String>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (0 = available parallelism).
    #[arg(long)]
    jobs: Option<String>,
    /// Replace existing output files.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    overwrite: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long)]
    delta0: Option<String>,
    /// Barrier K (`auto` = 1 + C₀θA).
    #[arg(long)]
    k: Option<String>,
    /// System sizes, comma separated.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    pad: Option<String>,
    /// Exterior resamples M.
    #[arg(long)]
    resamples: Option<String>,
    /// Disorder realizations R.
    #[arg(long)]
    realizations: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    /// Any other key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        let named = [
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.clone()),
            ("jobs", self.jobs.clone()),
            ("overwrite", self.overwrite.clone()),
            ("d", self.d.clone()),
            ("s", self.s.clone()),
            ("theta", self.theta.clone()),
            ("c0", self.c0.clone()),
            ("delta0", self.delta0.clone()),
            ("k", self.k.clone()),
            ("n", self.n.clone()),
            ("m", self.m.clone()),
            ("pad", self.pad.clone()),
            ("resamples", self.resamples.clone()),
            ("realizations", self.realizations.clone()),
            ("tol", self.tol.clone()),
            ("max_iter", self.max_iter.clone()),
        ];
        let mut out: Vec<(String, String)> = self
            .set
            .iter()
            .map(|kv| match kv.split_once('=') {
                Some((k, v)) => (k.trim().to_string(), v.to_string()),
                None => (kv.trim().to_string(), String::new()),
            })
            .collect();
        out.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        out
    }
}

fn parse_config(cli: &Cli) -> Result<(Experiment, RunConfig), ConfigError> {
    let mut rc = RunConfig::default();
    if let Some(path) = &cli.config {
        rc.apply_file(path)?;
    }
    if let Some(cmd) = &cli.command {
        rc.set("experiment", cmd)?;
    }
    for (k, v) in cli.overrides() {
        rc.set(&k, &v)?;
    }
    let exp = rc.validate()?;
    Ok((exp, rc))
}

#[derive(Debug, thiserror::Error)]
enum OutputError {
    #[error("{0} already exists; pass --overwrite to replace it")]
    Exists(PathBuf),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

fn write(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn json(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn prepare(rc: &RunConfig, exp: Experiment) -> Result<PathBuf, OutputError> {
    fs::create_dir_all(&rc.out).map_err(|source| OutputError::Write {
        path: rc.out.clone(),
        source,
    })?;
    let stem = rc.sweep.file_stem(exp);
    let manifest_path = rc.out.join(format!("{stem}.json"));
    if !rc.overwrite {
        let mut stems = vec![stem.clone()];
        if exp == Experiment::Diagnostics {
            stems.push(rc.sweep.labeled_stem("envelope"));
        }
        let taken = fs::read_dir(&rc.out)
            .map_err(|source| OutputError::Write {
                path: rc.out.clone(),
                source,
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| {
                let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                stems.iter().any(|st| {
                    name.strip_prefix(st.as_str())
                        .is_some_and(|rest| rest.starts_with('.') || rest.starts_with('_'))
                })
            });
        if let Some(p) = taken {
            return Err(OutputError::Exists(p));
        }
    }
    write(&manifest_path, &json(&manifest(exp, &rc.sweep, "running")))?;
    write(&rc.out.join(format!("{stem}.cfg")), &rc.to_text())?;
    Ok(manifest_path)
}

fn write_record(dir: &Path, rec: &SweepRecord, status: &str) -> Result<(), OutputError> {
    let stem = rec.stem();
    let mut m = rec.manifest();
    m["status"] = status.into();
    m["label"] = rec.label.clone().into();
    write(&dir.join(format!("{stem}.csv")), &rec.rows_csv())?;
    write(&dir.join(format!("{stem}_agg.csv")), &rec.aggregate_csv())?;
    for (name, field) in &rec.fields {
        write(&dir.join(format!("{stem}_{name}.csv")), &field.to_csv())?;
    }
    write(&dir.join(format!("{stem}.json")), &json(&m))
}

fn run(cli: &Cli) -> ExitCode {
    let (exp, rc) = match parse_config(cli) {
        Ok(v) => v,
        Err(e) => {
            match e.key() {
                Some(key) => eprintln!("config error in `{key}`: {e}"),
                None => eprintln!("config error: {e}"),
            }
            return ExitCode::from(2);
        }
    };
    let manifest_path = match prepare(&rc, exp) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("output error: {e}");
            return ExitCode::from(2);
        }
    };
    let records = match run_experiment(exp, &rc.sweep) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("run failed: {e}");
            let mut m = manifest(exp, &rc.sweep, "error");
            m["error"] = e.to_string().into();
            // best effort: the running manifest already names config and seed
            let _ = write(&manifest_path, &json(&m));
            return ExitCode::from(1);
        }
    };
    let tasks: usize = records.iter().map(|r| r.tasks).sum();
    let failures: usize = records.iter().map(|r| r.failures).sum();
    let breach = tasks > 0 && failures as f64 > FAILURE_QUOTA * tasks as f64;
    let status = if breach { "failure_quota_exceeded" } else { "complete" };
    for rec in &records {
        if let Err(e) = write_record(&rc.out, rec, status) {
            eprintln!("output error: {e}");
            return ExitCode::from(2);
        }
        println!("wrote {}", rc.out.join(rec.stem()).display());
    }
    if breach {
        eprintln!("{failures} of {tasks} solver tasks did not converge");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    run(&Cli::parse())
}
