use robust_orl::harness::{
    mm_check, read_csv, run_ope_experiment, run_opo_experiment, summarize, write_csv, ExperimentConfig,
    MmCheckConfig, Task,
};

fn ope(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, Task::Ope).unwrap()
}

fn opo(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, Task::Opo).unwrap()
}

fn csv_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let records = match cfg.task {
        Task::Ope => run_ope_experiment(cfg).unwrap(),
        Task::Opo => run_opo_experiment(cfg).unwrap(),
    };
    let mut buf = Vec::new();
    write_csv(&records, &mut buf).unwrap();
    buf
}

#[test]
fn one_cell_one_record() {
    let cfg = ope("methods = FQE\ndf = 2\nkappa = 1\nreplicates = 1\nn_episodes = 10\nhorizon = 20");
    let records = run_ope_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!(r.squared_error, (r.value - r.truth).powi(2));
    assert_eq!(r.seed, 0);
}

#[test]
fn record_count_is_methods_times_grid_times_replicates() {
    let cfg = ope("methods = FQE, ROAM-DM\ndf = 2, 5\nkappa = 1\nK = 3, 5\nq = 0.1\nreplicates = 3\nn_episodes = 10\nhorizon = 10\nseed = 40");
    let records = run_ope_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2 * 3);
    for r in &records {
        assert_eq!(r.seed, 40 + r.replicate as u64);
    }
    // methods that ignore K repeat their value across it
    let fqe: Vec<_> = records.iter().filter(|r| r.method == "FQE" && r.replicate == 0 && r.df == 2.0).collect();
    assert_eq!(fqe[0].value, fqe[1].value);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = ope("methods = FQE, MIS, TM-MIS, MA-DM, MA-MIS, ROAM-DM, ROAM-Variant, ROAM-MIS, ROAM-FQE, B-ROAM-DM, B-ROAM-MIS\ndf = 2, 30\nkappa = 2\nreplicates = 3\nn_episodes = 20\nhorizon = 20");
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
    let cfg = opo("env = grid:3\nmethods = FQI, PB, MA-VM, ROOM-VM, P-ROOM-VM, ROOM-FQI, P-ROOM-FQI\ndf = 2\nkappa = 2\nreplicates = 2\nn_episodes = 20\nhorizon = 20");
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
}

#[test]
fn csv_header_and_round_trip() {
    let cfg = ope("methods = ROAM-DM\ndf = 3\nkappa = 1\nreplicates = 2\nn_episodes = 10\nhorizon = 10");
    let bytes = csv_bytes(&cfg);
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "replicate,method,env,df,kappa,K,q,seed,estimate_or_regret,truth,squared_error,wall_time_ms"
    );
    let back = read_csv(bytes.as_slice()).unwrap();
    let again = run_ope_experiment(&cfg).unwrap();
    for (a, b) in back.iter().zip(&again) {
        assert_eq!(a.value, b.value);
        assert_eq!(a.truth, b.truth);
    }
}

#[test]
fn unknown_methods_are_rejected() {
    assert!(run_ope_experiment(&ope("methods = FQI")).is_err());
    assert!(run_opo_experiment(&opo("methods = ROAM-DM")).is_err());
    assert!(run_ope_experiment(&opo("methods = FQI")).is_err());
}

#[test]
fn methods_in_a_replicate_share_one_dataset() {
    let cfg = opo("methods = FQI, ROOM-VM\ndf = 2\nkappa = 2\nreplicates = 2\nn_episodes = 15\nhorizon = 15");
    let records = run_opo_experiment(&cfg).unwrap();
    for r in 0..2 {
        let prints: Vec<u64> = records.iter().filter(|x| x.replicate == r).map(|x| x.dataset_fingerprint).collect();
        assert!(prints.windows(2).all(|w| w[0] == w[1]));
    }
    assert_ne!(records[0].dataset_fingerprint, records[2].dataset_fingerprint);
}

#[test]
fn truth_is_shared_across_methods() {
    let cfg = ope("methods = FQE, ROAM-MIS\ndf = 2\nkappa = 1\nreplicates = 2\nn_episodes = 10\nhorizon = 10");
    let records = run_ope_experiment(&cfg).unwrap();
    assert!(records.windows(2).all(|w| w[0].truth == w[1].truth));
}

#[test]
fn clean_data_fqi_finds_the_optimum() {
    let cfg = opo("methods = FQI\ndf = 2\nkappa = 0\nepsilon = 0.5\nreplicates = 3\nn_episodes = 100\nhorizon = 30");
    for r in run_opo_experiment(&cfg).unwrap() {
        assert!(r.value <= 1e-6, "regret {}", r.value);
        assert!(r.value >= -1e-8);
    }
}

#[test]
fn half_quantile_matches_median_for_odd_k() {
    let cfg = opo("env = grid:3\nmethods = ROOM-VM, P-ROOM-VM\ndf = 2\nkappa = 2\nK = 5\nq = 0.5\nreplicates = 5\nn_episodes = 50\nhorizon = 20");
    let records = run_opo_experiment(&cfg).unwrap();
    let (vm, p): (Vec<_>, Vec<_>) = records.iter().partition(|r| r.method == "ROOM-VM");
    for (a, b) in vm.iter().zip(&p) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn noiseless_errors_are_comparable_across_methods() {
    let cfg = ope("methods = FQE, MIS, MA-DM, MA-MIS, ROAM-DM, ROAM-Variant, ROAM-MIS, ROAM-FQE, B-ROAM-DM, B-ROAM-MIS\ndf = 2\nkappa = 0\nreplicates = 20");
    let rows = summarize(&run_ope_experiment(&cfg).unwrap()).unwrap();
    let lo = rows.iter().map(|r| r.mse).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.mse).fold(0.0, f64::max);
    for r in &rows {
        println!("{} mse {}", r.method, r.mse);
    }
    assert!(hi <= 10.0 * lo, "mse spread {lo}..{hi}");
}

#[test]
fn mm_check_is_deterministic() {
    let cfg = MmCheckConfig {
        replicates: 50,
        ..Default::default()
    };
    let a = mm_check(&cfg).unwrap();
    assert_eq!(a, mm_check(&cfg).unwrap());
    assert!(a.rmse_mm > 0.0 && a.rmse_sample_mean > 0.0);
}
