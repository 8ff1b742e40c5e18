use nlrf_core::experiments::{run_experiment, Experiment, SweepConfig};

fn small() -> SweepConfig {
    SweepConfig {
        n_list: vec![16, 24, 32],
        realizations: 3,
        resamples: 2,
        h_list: vec![1e-2],
        cube_list: vec![4, 8],
        bins: 2,
        jobs: 1,
        ..SweepConfig::default()
    }
}

#[test]
fn every_experiment_writes_consistent_tables() {
    for exp in Experiment::ALL {
        for rec in run_experiment(exp, &small()).unwrap() {
            let csv = rec.rows_csv();
            let mut lines = csv.lines();
            let header: Vec<&str> = lines.next().unwrap().split(',').collect();
            assert_eq!(header.len(), rec.group_columns.len() + 3 + rec.value_columns.len(), "{exp}");
            let rows: Vec<&str> = lines.collect();
            assert_eq!(rows.len(), rec.rows.len(), "{exp}");
            for row in rows {
                let cells: Vec<&str> = row.split(',').collect();
                assert_eq!(cells.len(), header.len());
                // floats carry 17 significant digits
                let last = cells.last().unwrap();
                if *last != "NaN" {
                    assert!(last.contains('e') && last.parse::<f64>().is_ok(), "{exp}: {last}");
                }
            }
            assert!(rec.aggregate_csv().starts_with("section,group,quantity"));
            assert!(!csv.contains('\r'));
            assert!(rec.stem().ends_with("_1d_s0.75_theta1_n16-24-32"));
            assert_eq!(rec.manifest()["experiment"], exp.name());
        }
    }
}

#[test]
fn solver_failures_are_counted() {
    let mut cfg = small();
    cfg.solver.max_iter = 1;
    let rec = run_experiment(Experiment::Extremal, &cfg).unwrap().remove(0);
    assert_eq!(rec.failures, rec.tasks);
    assert!(rec.failure_rate() > 0.1);
}

#[test]
fn invalid_configs_name_the_key() {
    let mut cfg = small();
    cfg.s = 1.2;
    let err = run_experiment(Experiment::Minimize, &cfg).unwrap_err().to_string();
    assert!(err.contains("`s`"), "{err}");
    let mut cfg = small();
    cfg.n_list.clear();
    let err = run_experiment(Experiment::Gap, &cfg).unwrap_err().to_string();
    assert!(err.contains("`n`"), "{err}");
}
