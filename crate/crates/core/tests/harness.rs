use std::collections::BTreeSet;

use prc_core::harness::{
    export_csv, optimal_config_matrix, run_plan, summarize, ConfigEntry, ExperimentPlan, Report,
    ResultRow, ResultTable, TaskKind, COLUMNS, STATUS_OK,
};
use prc_core::readout::SplitSpec;
use prc_core::Error;
use proptest::prelude::*;

fn row(config: &str, amplitude: f64, order: usize, rep: usize, nmse: f64) -> ResultRow {
    ResultRow {
        run_id: format!("{config}/{amplitude}/{order}/{rep}"),
        task: "narma".into(),
        config: config.into(),
        amplitude: Some(amplitude),
        order: Some(order),
        repetition: rep,
        status: STATUS_OK.into(),
        nmse: Some(nmse),
        ..ResultRow::default()
    }
}

fn small_plan() -> ExperimentPlan {
    let mut plan = ExperimentPlan::default_narma();
    plan.split = SplitSpec { washout: 60, train: 60, test: 60 };
    plan
}

#[test]
fn single_point_grid_has_one_row() {
    let mut plan = small_plan();
    plan.configurations = vec![ConfigEntry::preset("C5")];
    plan.amplitudes = vec![0.006];
    plan.narma_orders = vec![2];
    plan.repetitions = 1;
    let t = run_plan::<f64>(&plan).unwrap();
    assert_eq!(t.len(), 1);
    assert!(t.rows[0].is_ok(), "{}", t.rows[0].status);
}

#[test]
fn default_narma_plan_has_seventy_five_runs() {
    let plan = ExperimentPlan::default_narma();
    assert_eq!(plan.configurations.len() * plan.amplitudes.len() * plan.repetitions, 75);
}

#[test]
fn baseline_best_gives_zero_reduction() {
    let t = ResultTable::new(vec![row("C5", 0.02, 2, 0, 0.1), row("C1", 0.02, 2, 0, 0.3)]);
    let cells = optimal_config_matrix(&t, "C5").unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].best_config, "C5");
    assert_eq!(cells[0].reduction_percent, 0.0);
}

#[test]
fn two_config_hand_table() {
    let t = ResultTable::new(vec![
        row("C5", 0.02, 10, 0, 0.4),
        row("C5", 0.02, 10, 1, 0.6),
        row("C3", 0.02, 10, 0, 0.2),
        row("C3", 0.02, 10, 1, 0.3),
    ]);
    let c = &optimal_config_matrix(&t, "C5").unwrap()[0];
    assert_eq!(c.best_config, "C3");
    assert!((c.best_nmse - 0.25).abs() < 1e-15);
    assert!((c.baseline_nmse - 0.5).abs() < 1e-15);
    assert!((c.reduction_percent - 50.0).abs() < 1e-12);
}

#[test]
fn missing_baseline_is_an_error() {
    let t = ResultTable::new(vec![row("C1", 0.02, 2, 0, 0.3)]);
    assert!(matches!(optimal_config_matrix(&t, "C5"), Err(Error::InvalidConfig(_))));
}

#[test]
fn failed_rows_are_excluded_from_means() {
    let t = ResultTable::new(vec![
        row("C5", 0.02, 2, 0, 0.4),
        row("C5", 0.02, 2, 1, 9.0).failed("simulation unstable"),
    ]);
    let s = summarize(&t);
    assert_eq!((s[0].ok, s[0].failed), (1, 1));
    assert_eq!(s[0].mean_nmse, Some(0.4));
    assert_eq!(t.failures().len(), 1);
}

#[test]
fn empty_table_exports_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    export_csv(&Report::Table(&ResultTable::new(Vec::new())), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with(COLUMNS[0]));
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn table_csv_round_trips_and_is_stable() {
    let mut plan = small_plan();
    plan.configurations = vec![ConfigEntry::preset("C1"), ConfigEntry::preset("C5")];
    plan.repetitions = 2;
    let t = run_plan::<f64>(&plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    export_csv(&Report::Table(&t), &a).unwrap();
    let back = ResultTable::load(&a).unwrap();
    assert_eq!(back, t);
    export_csv(&Report::Table(&back), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn plan_toml_round_trips() {
    for task in [TaskKind::NarmaSweep, TaskKind::PayloadSweep, TaskKind::MultiTask] {
        let plan = ExperimentPlan::default_for(task);
        let back = ExperimentPlan::from_toml_str(&plan.to_toml_string()).unwrap();
        assert_eq!(back, plan);
    }
}

#[test]
fn plan_validation_rejects_bad_grids() {
    let text = r#"
task = "narma_sweep"
amplitudes = [0.006]
narma_orders = [2]
repetitions = 0
[[configurations]]
preset = "C5"
"#;
    assert!(matches!(ExperimentPlan::from_toml_str(text), Err(Error::InvalidPlan(_))));
    let valid = text.replace("repetitions = 0", "repetitions = 1");
    assert!(ExperimentPlan::from_toml_str(&valid).is_ok());
    let unknown = valid.replace("narma_orders = [2]", "narma_orders = [2]\nbogus = 1");
    assert!(ExperimentPlan::from_toml_str(&unknown).is_err());
    let unknown_preset = valid.replace("\"C5\"", "\"C42\"");
    assert!(ExperimentPlan::from_toml_str(&unknown_preset).is_err());
    let mut empty = ExperimentPlan::default_narma();
    empty.amplitudes.clear();
    assert!(empty.validate().is_err());
}

#[test]
fn explicit_module_words_are_accepted() {
    let text = r#"
task = "narma_sweep"
amplitudes = [0.006]
narma_orders = [2]
[split]
washout = 60
train = 60
test = 60
[[configurations]]
label = "mixed"
modules = ["000", "010", "111"]
"#;
    let plan = ExperimentPlan::from_toml_str(text).unwrap();
    let t = run_plan::<f64>(&plan).unwrap();
    assert_eq!(t.rows[0].config, "mixed");
    assert!(t.rows[0].is_ok(), "{}", t.rows[0].status);
}

#[test]
fn unstable_cells_are_marked_without_aborting() {
    let mut plan = small_plan();
    plan.configurations = vec![ConfigEntry::preset("C5")];
    plan.amplitudes = vec![0.006, 0.5];
    plan.narma_orders = vec![2];
    plan.repetitions = 1;
    plan.substrate.blowup_displacement = Some(0.1);
    let t = run_plan::<f64>(&plan).unwrap();
    assert_eq!(t.len(), 2);
    let failed: Vec<_> = t.failures().iter().map(|r| r.amplitude).collect();
    assert_eq!(failed, vec![Some(0.5)]);
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 6,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn every_grid_tuple_appears_once(
        configs in prop::sample::subsequence(vec!["C1", "C2", "C3", "C4", "C5"], 1..=3),
        amps in prop::sample::subsequence(vec![0.002, 0.006, 0.02], 1..=2),
        orders in prop::sample::subsequence(vec![2usize, 3, 5], 1..=2),
        reps in 1usize..3,
        seed in any::<u64>(),
    ) {
        let mut plan = small_plan();
        plan.configurations = configs.iter().map(|c| ConfigEntry::preset(c)).collect();
        plan.amplitudes = amps.clone();
        plan.narma_orders = orders.clone();
        plan.repetitions = reps;
        plan.seed = seed;
        let t = run_plan::<f64>(&plan).unwrap();
        prop_assert_eq!(t.len(), configs.len() * amps.len() * orders.len() * reps);
        let keys: BTreeSet<_> = t
            .rows
            .iter()
            .map(|r| (r.config.clone(), r.amplitude.map(f64::to_bits), r.order, r.repetition))
            .collect();
        prop_assert_eq!(keys.len(), t.len());
        let again = run_plan::<f64>(&plan).unwrap();
        prop_assert_eq!(again.to_csv_string(), t.to_csv_string());
    }

    #[test]
    fn argmin_is_invariant_under_positive_rescaling(values in prop::collection::vec(0.01_f64..10.0, 3), k in 0.01_f64..100.0) {
        let configs = ["C1", "C3", "C5"];
        let build = |scale: f64| ResultTable::new(
            configs.iter().zip(&values).map(|(c, v)| row(c, 0.02, 10, 0, v * scale)).collect(),
        );
        let a = &optimal_config_matrix(&build(1.0), "C5").unwrap()[0];
        let b = &optimal_config_matrix(&build(k), "C5").unwrap()[0];
        prop_assert_eq!(&a.best_config, &b.best_config);
        prop_assert!(a.reduction_percent >= 0.0);
        prop_assert!((a.reduction_percent - b.reduction_percent).abs() < 1e-9);
    }
}
