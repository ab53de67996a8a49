use prc_core::harness::{observe, run_payload_point, ExperimentPlan, ObservationSettings};
use prc_core::substrate::ChainConfig;
use prc_core::perception::{
    classify_payload, estimate_weight, mean_output, reconstruct_inputs, train_weight_estimator,
    train_weight_estimator_with, EstimatorBundle, EstimatorOptions, LabeledRun, Orientation,
};
use prc_core::readout::{predict, ReadoutWeights};
use prc_core::substrate::StateTrajectory;
use prc_core::tasks::{pwm3, SampledSignal};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATE: f64 = 60.0;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Node 0 reads the mass plus noise, nodes 1 and 2 carry unrelated tones; 20 s at 60 Hz.
fn synthetic_run(mass: f64, seed: u64) -> LabeledRun<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1200;
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let t = k as f64 / RATE;
                    let signal = if i == 0 { 1e-2 * mass } else { (t * (2.0 + i as f64)).sin() };
                    signal + rng.random_range(-0.01..0.01)
                })
                .collect()
        })
        .collect();
    LabeledRun {
        trajectory: StateTrajectory::from_rows(rows, RATE).unwrap(),
        payload_mass: mass,
        orientation: None,
        input: SampledSignal::from_channels(vec![vec![0.0; n]], RATE).unwrap(),
        repetition: 0,
    }
}

fn constant_readout(bias: f64, nodes: usize) -> ReadoutWeights<f64> {
    ReadoutWeights {
        bias,
        weights: vec![0.0; nodes],
        ridge: 0.0,
        provenance: String::new(),
        rank_deficient: false,
    }
}

fn constant_bundle(weight: f64) -> EstimatorBundle<f64> {
    EstimatorBundle {
        weights: constant_readout(weight, 3),
        training_masses: vec![weight],
        window: 5.0,
        washout: 10.0,
    }
}

#[test]
fn staircase_lengths_follow_mass_count() {
    let runs: Vec<_> = [0.0, 50.0, 90.0, 130.0, 170.0]
        .iter()
        .enumerate()
        .map(|(i, &m)| synthetic_run(m, i as u64))
        .collect();
    let two = train_weight_estimator(&runs, &[0.0, 170.0], 5.0).unwrap();
    assert_eq!(two.training_masses, vec![0.0, 170.0]);
    let five = train_weight_estimator(&runs, &[170.0, 0.0, 90.0, 50.0, 130.0], 5.0).unwrap();
    assert_eq!(five.training_masses.len(), 5);
    for (i, &m) in [0.0, 50.0, 90.0, 130.0, 170.0].iter().enumerate() {
        let est = estimate_weight(&five, &synthetic_run(m, 100 + i as u64)).unwrap();
        assert!((est - m).abs() < 5.0, "{m}: {est}");
    }
}

#[test]
fn single_mass_training_ignores_the_true_mass() {
    let runs = vec![synthetic_run(0.0, 1)];
    let b = train_weight_estimator(&runs, &[0.0], 5.0).unwrap();
    for m in [0.0, 90.0, 170.0] {
        let est = estimate_weight(&b, &synthetic_run(m, 9)).unwrap();
        assert!(est.abs() <= 10.0, "{m}: {est}");
    }
}

#[test]
fn estimate_is_affine_of_mean_state() {
    let runs: Vec<_> = [0.0, 170.0].iter().map(|&m| synthetic_run(m, m as u64)).collect();
    let b = train_weight_estimator(&runs, &[0.0, 170.0], 5.0).unwrap();
    let run = synthetic_run(90.0, 42);
    let window = run.trajectory.window(600, 300).unwrap();
    let means: Vec<f64> = window.rows().iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let oracle = b.weights.bias + b.weights.weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    assert!((estimate_weight(&b, &run).unwrap() - oracle).abs() < 1e-9);
    let direct = predict(&b.weights, &window).unwrap();
    let avg = direct.iter().sum::<f64>() / direct.len() as f64;
    assert!((mean_output(&b.weights, &run, 10.0, 5.0).unwrap() - avg).abs() < 1e-12);
}

#[test]
fn classification_examples() {
    let run = synthetic_run(0.0, 0);
    let (w, o) = classify_payload(&constant_bundle(161.0), &constant_readout(-0.8, 3), &run).unwrap();
    assert_eq!((w, o), (161.0, Some(Orientation::Left)));
    let (w, o) = classify_payload(&constant_bundle(100.6), &constant_readout(-0.8, 3), &run).unwrap();
    assert!((w - 100.6).abs() < 1e-12 && o.is_none());
    let (_, o) = classify_payload(&constant_bundle(150.0), &constant_readout(0.5, 3), &run).unwrap();
    assert_eq!(o, Some(Orientation::Front));
}

#[test]
fn reconstructing_the_command_from_itself_is_exact() {
    let input = pwm3(0.1, 0.2, 1.0, 31.0, RATE).unwrap();
    let n = 1800;
    let rows: Vec<Vec<f64>> = (0..3).map(|c| input.channel(c)[..n].to_vec()).collect();
    let run = LabeledRun {
        trajectory: StateTrajectory::from_rows(rows, RATE).unwrap(),
        payload_mass: 0.0,
        orientation: None,
        input,
        repetition: 0,
    };
    let rec = reconstruct_inputs(&run).unwrap();
    assert!(rec.mse.iter().all(|&m| m < 1e-20), "{:?}", rec.mse);
    for c in 0..3 {
        assert!(rec.mse[c] <= rec.mean_baseline_mse[c]);
    }
}

#[test]
fn simulated_reconstruction_beats_channel_mean() {
    let config = ChainConfig::<f64>::from_preset("C7").unwrap();
    let drive = pwm3(0.1, 0.2, 1.0, 30.0, 3000.0).unwrap();
    let trajectory = observe(&config, &drive, 1800, &ObservationSettings::default(), 5).unwrap();
    let run = LabeledRun {
        trajectory,
        payload_mass: 0.0,
        orientation: None,
        input: drive,
        repetition: 0,
    };
    let rec = reconstruct_inputs(&run).unwrap();
    for c in 0..3 {
        assert!(rec.mse[c] <= rec.mean_baseline_mse[c], "{:?} vs {:?}", rec.mse, rec.mean_baseline_mse);
    }
}

#[test]
fn more_training_masses_never_hurt_on_simulated_runs() {
    let plan = ExperimentPlan::default_payload();
    for entry in &plan.configurations {
        // training-set size -> summed absolute error over masses and seeds
        let mut totals = std::collections::BTreeMap::<usize, f64>::new();
        for rep in 0..5 {
            for row in run_payload_point::<f64>(&plan, entry, 0.005, 4.0, rep) {
                assert!(row.is_ok(), "{}", row.status);
                if let (Some(e), Some(m)) = (row.estimate, row.mass) {
                    *totals.entry(row.variant.matches('+').count() + 1).or_default() += (e - m).abs();
                }
            }
        }
        let errors: Vec<f64> = totals.values().copied().collect();
        assert_eq!(totals.keys().copied().collect::<Vec<_>>(), vec![1, 2, 5]);
        assert!(errors.windows(2).all(|w| w[1] <= w[0]), "{}: {totals:?}", entry.label());
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn rescaled_states_give_the_same_estimates(scale in prop_oneof![-100.0_f64..-0.01, 0.01_f64..100.0], seed in any::<u64>()) {
        let masses = [0.0, 50.0, 90.0, 130.0, 170.0];
        let runs: Vec<_> = masses.iter().enumerate().map(|(i, &m)| synthetic_run(m, seed.wrapping_add(i as u64))).collect();
        let scaled: Vec<_> = runs.iter().map(|r| LabeledRun { trajectory: r.trajectory.scaled(scale), ..r.clone() }).collect();
        let options = EstimatorOptions::default();
        let a = train_weight_estimator_with(&runs, &masses, options).unwrap();
        let b = train_weight_estimator_with(&scaled, &masses, options).unwrap();
        let probe = synthetic_run(110.0, seed ^ 0xABCD);
        let probe_scaled = LabeledRun { trajectory: probe.trajectory.scaled(scale), ..probe.clone() };
        let (ea, eb) = (estimate_weight(&a, &probe).unwrap(), estimate_weight(&b, &probe_scaled).unwrap());
        prop_assert!((ea - eb).abs() <= 1e-6 * ea.abs().max(1.0), "{} vs {}", ea, eb);
    }

    #[test]
    fn orientation_output_is_closed(weight in 0.0_f64..300.0, score in -5.0_f64..5.0) {
        let run = synthetic_run(0.0, 0);
        let (_, o) = classify_payload(&constant_bundle(weight), &constant_readout(score, 3), &run).unwrap();
        let in_band = (140.0..=180.0).contains(&weight);
        prop_assert_eq!(o.is_some(), in_band);
        if let Some(o) = o {
            prop_assert!(Orientation::ALL.contains(&o));
        }
    }
}
