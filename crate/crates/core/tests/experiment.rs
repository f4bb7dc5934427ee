use fbpinn_core::harness::{run_experiment, write_trace_csv, CSV_HEADER};
use fbpinn_core::model::load_checkpoint;
use fbpinn_core::{ExperimentConfig, Strategy};

fn small(strategy: Strategy, k_max: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults("poisson1d");
    cfg.subdomains = vec![4];
    cfg.points = 200;
    cfg.width = 8;
    cfg.blocks = 1;
    cfg.validation = vec![64];
    cfg.eta = 2;
    cfg.strategy = strategy;
    cfg.k_max = k_max;
    cfg.seed = 11;
    cfg.wall_clock = false;
    cfg
}

fn csv(cfg: &ExperimentConfig) -> String {
    let exp = run_experiment(cfg).unwrap();
    let mut out = Vec::new();
    write_trace_csv(&exp.trace, &mut out, cfg.wall_clock).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn trace_is_deterministic_without_wall_clock() {
    for strategy in [Strategy::Lbfgs, Strategy::Unis, Strategy::Lss, Strategy::Spm] {
        let cfg = small(strategy, 5);
        assert_eq!(csv(&cfg), csv(&cfg), "{strategy}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    for strategy in [Strategy::Lss, Strategy::Spm] {
        let mut cfg = small(strategy, 5);
        let serial = csv(&cfg);
        cfg.threads = 3;
        assert_eq!(serial, csv(&cfg), "{strategy}");
    }
}

#[test]
fn zero_epochs_give_only_the_initial_row() {
    let text = csv(&small(Strategy::Spm, 0));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn checkpoint_round_trips_the_final_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Strategy::Spm, 3);
    cfg.checkpoint = Some(dir.path().join("theta.bin"));
    cfg.output_csv = Some(dir.path().join("trace.csv"));
    let exp = run_experiment(&cfg).unwrap();
    let loaded = load_checkpoint(cfg.checkpoint.as_ref().unwrap()).unwrap();
    assert_eq!(loaded, exp.model.theta);
    assert_eq!(loaded.values, exp.trace.theta);
    let written = std::fs::read_to_string(cfg.output_csv.as_ref().unwrap()).unwrap();
    assert_eq!(written.lines().count(), 1 + 4);
}

#[test]
fn losses_never_increase_under_spm() {
    let exp = run_experiment(&small(Strategy::Spm, 10)).unwrap();
    for w in exp.trace.records.windows(2) {
        assert!(w[1].loss <= w[0].loss);
        if let Some(h) = w[1].loss_half {
            assert!(h <= w[0].loss);
        }
    }
}
