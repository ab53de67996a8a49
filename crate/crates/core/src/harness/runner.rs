use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{correlation_matrix, nmse, psi, DEFAULT_PEAKS};
use crate::perception::{
    classify_payload, estimate_weight, reconstruct_inputs_with, train_on_runs,
    train_weight_estimator_with, EstimatorBundle, EstimatorOptions, LabeledRun, Orientation,
    ReconstructionOptions,
};
use crate::readout::{baseline_input_regression, predict, predict_signal, split, train_readout};
use crate::scalar::Scalar;
use crate::substrate::{build_chain, simulate_from, ChainConfig, InitialState, StateTrajectory};
use crate::tasks::{narma_target, pwm3, single_harmonic, triple_harmonic, NarmaParams, SampledSignal};

use super::plan::{ConfigEntry, ExperimentPlan, ObservationSettings, PwmPattern, TaskKind};
use super::table::{ResultRow, ResultTable, STATUS_OK};

/// Mixes `parts` into `base` with the splitmix64 finalizer.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Simulates from a perturbed equilibrium and adds tracking noise.
///
/// Returns the first `samples` recorded samples.
pub fn observe<T: Scalar>(
    config: &ChainConfig<T>,
    drive: &SampledSignal<T>,
    samples: usize,
    observation: &ObservationSettings,
    seed: u64,
) -> Result<StateTrajectory<T>> {
    let model = build_chain(config.clone())?;
    let initial = InitialState::perturbed(&model, T::lit(observation.perturbation), derive_seed(seed, &[1]));
    let duration = T::from_usize_lossy(samples.max(2) - 1) / config.sample_rate;
    let outcome = simulate_from(&model, drive, duration, &initial)?;
    let clean = outcome.trajectory.window(0, samples)?;
    Ok(clean.with_tracking_noise(T::lit(observation.tracking_noise), derive_seed(seed, &[2])))
}

fn seconds<T: Scalar>(s: f64, rate: T) -> usize {
    (T::lit(s) * rate).round().to_usize().unwrap_or(0)
}

fn base_row(plan: &ExperimentPlan, config: &str, rep: usize) -> ResultRow {
    ResultRow {
        task: plan.task.name().to_string(),
        config: config.to_string(),
        repetition: rep,
        status: STATUS_OK.to_string(),
        ..ResultRow::default()
    }
}

fn with_id(mut row: ResultRow) -> ResultRow {
    let mut id = format!("{}/{}", row.task, row.config);
    if let Some(a) = row.amplitude {
        id.push_str(&format!("/A={a}"));
    }
    if let Some(f) = row.frequency {
        id.push_str(&format!("/f={f}"));
    }
    if let Some(n) = row.order {
        id.push_str(&format!("/N={n}"));
    }
    if let Some(m) = row.mass {
        id.push_str(&format!("/m={m}"));
    }
    if !row.variant.is_empty() {
        id.push_str(&format!("/{}", row.variant));
    }
    id.push_str(&format!("/rep={}", row.repetition));
    row.run_id = id;
    row
}

/// NARMA emulation at one (configuration, amplitude, repetition); one row per order.
pub fn run_narma_point<T: Scalar>(
    plan: &ExperimentPlan,
    entry: &ConfigEntry,
    amplitude: f64,
    rep: usize,
) -> Vec<ResultRow> {
    let label = entry.label();
    let rows = || {
        plan.narma_orders.iter().map(|&n| ResultRow {
            amplitude: Some(amplitude),
            order: Some(n),
            ..base_row(plan, &label, rep)
        })
    };
    let outcome = (|| -> Result<_> {
        let config: ChainConfig<T> = plan.chain_config(entry)?;
        let rate = config.sample_rate;
        let total = plan.split.total();
        let duration = T::from_usize_lossy(total) / rate;
        let a = T::lit(amplitude);
        let drive = triple_harmonic(a, duration, T::lit(plan.observation.drive_rate))?;
        let seed = derive_seed(plan.seed, &[1, rep as u64]);
        let states = observe(&config, &drive, total, &plan.observation, seed)?;
        let input = triple_harmonic(a, duration, rate)?.truncated(total);
        Ok((states, input, rate))
    })();
    let (states, input, rate) = match outcome {
        Ok(v) => v,
        Err(e) => return rows().map(|r| with_id(r.failed(&e))).collect(),
    };
    let avg_ci = states
        .window(plan.split.washout + plan.split.train, plan.split.test)
        .and_then(|w| correlation_matrix(&w))
        .ok();
    rows()
        .map(|mut row| {
            let n = row.order.expect("order set");
            let result = (|| -> Result<()> {
                let params = NarmaParams {
                    alpha: T::lit(plan.narma.alpha),
                    beta: T::lit(plan.narma.beta),
                    gamma: T::lit(plan.narma.gamma),
                    delta: T::lit(plan.narma.delta),
                    classic: plan.narma.classic,
                    ..NarmaParams::for_amplitude(n, T::lit(amplitude))
                };
                let y = narma_target(&input, &params)?;
                let (train, test) = split(&states, &y, plan.split)?;
                let w = train_readout(&train.states, &train.target, T::lit(plan.narma.ridge))?;
                let prediction = predict(&w, &test.states)?;
                row.nmse = Some(nmse(&test.target, &prediction)?.as_f64());
                let report = psi(&test.target, &prediction, rate, DEFAULT_PEAKS)?;
                row.psi = Some(report.psi.as_f64());
                row.occupancy = report.occupancy.iter().map(|v| v.as_f64()).collect();

                let s = plan.split;
                let slice = |start: usize, len: usize| {
                    SampledSignal::from_channels(vec![input.channel(0)[start..start + len].to_vec()], rate)
                };
                let base_train = slice(s.washout, s.train)?;
                let base_test = slice(s.washout + s.train, s.test)?;
                let wb = baseline_input_regression(&base_train, &train.target)?;
                let pb = predict_signal(&wb, &base_test)?;
                row.baseline_nmse = Some(nmse(&test.target, &pb)?.as_f64());
                if let Some(c) = &avg_ci {
                    row.avg_ci = Some(c.avg_ci.as_f64());
                    row.avg_ci_normalized = Some(c.avg_ci_normalized.as_f64());
                }
                Ok(())
            })();
            match result {
                Ok(()) => with_id(row),
                Err(e) => with_id(row.failed(e)),
            }
        })
        .collect()
}

/// Simulated runs of one configuration under a shared drive, one per payload.
fn payload_runs<T: Scalar>(
    plan: &ExperimentPlan,
    config: &ChainConfig<T>,
    drive: &SampledSignal<T>,
    masses: &[f64],
    samples: usize,
    rep: usize,
    seed: u64,
) -> Result<Vec<LabeledRun<T>>> {
    masses
        .iter()
        .map(|&m| {
            let mut c = config.clone();
            c.payload_mass = T::lit(m / 1000.0);
            Ok(LabeledRun {
                trajectory: observe(&c, drive, samples, &plan.observation, seed)?,
                payload_mass: T::lit(m),
                orientation: None,
                input: drive.clone(),
                repetition: rep,
            })
        })
        .collect()
}

fn training_label(set: &[f64]) -> String {
    let parts: Vec<String> = set.iter().map(|m| m.to_string()).collect();
    format!("train[{}]", parts.join("+"))
}

/// Weight estimation and correlation at one (configuration, amplitude, frequency, repetition).
///
/// Estimators are trained on one set of runs and evaluated on a second,
/// independently perturbed and noised set.
pub fn run_payload_point<T: Scalar>(
    plan: &ExperimentPlan,
    entry: &ConfigEntry,
    amplitude: f64,
    frequency: f64,
    rep: usize,
) -> Vec<ResultRow> {
    let label = entry.label();
    let p = &plan.payload;
    let mut template: Vec<ResultRow> = Vec::new();
    for &m in &p.masses {
        template.push(ResultRow {
            variant: "correlation".into(),
            mass: Some(m),
            ..base_row(plan, &label, rep)
        });
        for set in &p.training_sets {
            template.push(ResultRow {
                variant: training_label(set),
                mass: Some(m),
                ..base_row(plan, &label, rep)
            });
        }
    }
    for row in &mut template {
        row.amplitude = Some(amplitude);
        row.frequency = Some(frequency);
    }

    let result = (|| -> Result<Vec<ResultRow>> {
        let config: ChainConfig<T> = plan.chain_config(entry)?;
        let rate = config.sample_rate;
        let washout = seconds(p.washout, rate);
        let window = seconds(p.window, rate);
        let samples = washout + window;
        let duration = T::from_usize_lossy(samples) / rate;
        let drive = single_harmonic(
            T::lit(amplitude),
            T::lit(frequency),
            duration,
            T::lit(plan.observation.drive_rate),
        )?;
        let train_runs = payload_runs(plan, &config, &drive, &p.masses, samples, rep, derive_seed(plan.seed, &[2, rep as u64, 0]))?;
        let test_runs = payload_runs(plan, &config, &drive, &p.masses, samples, rep, derive_seed(plan.seed, &[2, rep as u64, 1]))?;
        let options = EstimatorOptions {
            washout: T::lit(p.washout),
            window: T::lit(p.window),
            ridge: T::lit(p.ridge),
        };
        let bundles = p
            .training_sets
            .iter()
            .map(|set| {
                let masses: Vec<T> = set.iter().map(|&m| T::lit(m)).collect();
                train_weight_estimator_with(&train_runs, &masses, options)
            })
            .collect::<Vec<Result<EstimatorBundle<T>>>>();

        let mut rows = template.clone();
        for row in &mut rows {
            let m = row.mass.expect("mass set");
            let run = test_runs
                .iter()
                .find(|r| r.payload_mass.as_f64() == m)
                .expect("one run per mass");
            let outcome = if row.variant == "correlation" {
                run.trajectory
                    .window(washout, window)
                    .and_then(|w| correlation_matrix(&w))
                    .map(|c| {
                        row.avg_ci = Some(c.avg_ci.as_f64());
                        row.avg_ci_normalized = Some(c.avg_ci_normalized.as_f64());
                    })
            } else {
                let k = p
                    .training_sets
                    .iter()
                    .position(|s| training_label(s) == row.variant)
                    .expect("variant from training sets");
                match &bundles[k] {
                    Ok(b) => estimate_weight(b, run).map(|e| {
                        row.estimate = Some(e.as_f64());
                    }),
                    Err(e) => Err(Error::InvalidConfig(e.to_string())),
                }
            };
            if let Err(e) = outcome {
                *row = row.clone().failed(e);
            }
        }
        Ok(rows)
    })();
    match result {
        Ok(rows) => rows.into_iter().map(with_id).collect(),
        Err(e) => template.into_iter().map(|r| with_id(r.failed(&e))).collect(),
    }
}

/// Item runs of the classification task: every item once, the eccentric item in all orientations.
pub fn item_runs<T: Scalar>(
    plan: &ExperimentPlan,
    config: &ChainConfig<T>,
    drive: &SampledSignal<T>,
    samples: usize,
    rep: usize,
    seed: u64,
) -> Result<Vec<LabeledRun<T>>> {
    let m = &plan.multitask;
    let mut runs = Vec::new();
    for &item in &m.items {
        let orientations: Vec<Option<Orientation>> = if item == m.eccentric_item {
            Orientation::ALL.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for o in orientations {
            let mut c = config.clone();
            c.payload_mass = T::lit(item / 1000.0);
            c.payload_eccentricity =
                T::lit(f64::from(o.map_or(0, Orientation::label)) * m.eccentricity_scale);
            runs.push(LabeledRun {
                trajectory: observe(&c, drive, samples, &plan.observation, seed)?,
                payload_mass: T::lit(item),
                orientation: o,
                input: drive.clone(),
                repetition: rep,
            });
        }
    }
    Ok(runs)
}

/// Trained weight and orientation readouts of the classification task.
pub fn train_classifier<T: Scalar>(
    plan: &ExperimentPlan,
    runs: &[LabeledRun<T>],
) -> Result<(EstimatorBundle<T>, crate::readout::ReadoutWeights<T>)> {
    let m = &plan.multitask;
    let options = EstimatorOptions {
        washout: T::lit(m.washout),
        window: T::lit(m.window),
        ridge: T::lit(m.ridge),
    };
    let all: Vec<&LabeledRun<T>> = runs.iter().collect();
    let labels: Vec<T> = runs.iter().map(|r| r.payload_mass).collect();
    let weights = train_on_runs(&all, &labels, options)?.with_provenance("item weight");
    let hammer: Vec<&LabeledRun<T>> = runs.iter().filter(|r| r.orientation.is_some()).collect();
    let orientation_labels: Vec<T> = hammer
        .iter()
        .map(|r| T::lit(f64::from(r.orientation.expect("filtered").label())))
        .collect();
    let orientation = train_on_runs(&hammer, &orientation_labels, options)?.with_provenance("orientation");
    let mut masses: Vec<T> = m.items.iter().map(|&v| T::lit(v)).collect();
    masses.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    masses.dedup();
    let bundle = EstimatorBundle {
        weights,
        training_masses: masses,
        window: options.window,
        washout: options.washout,
    };
    Ok((bundle, orientation))
}

/// Reconstruction and classification at one (configuration, PWM pattern, repetition).
pub fn run_multitask_point<T: Scalar>(
    plan: &ExperimentPlan,
    entry: &ConfigEntry,
    pattern: &PwmPattern,
    rep: usize,
) -> Vec<ResultRow> {
    let label = entry.label();
    let m = &plan.multitask;
    let variant_of = |pattern: &PwmPattern, what: &str| format!("{}:{what}", pattern.label);
    let mut template = Vec::new();
    for c in 1..=3 {
        template.push(ResultRow {
            variant: variant_of(pattern, &format!("reconstruct_ch{c}")),
            ..base_row(plan, &label, rep)
        });
    }
    for &item in &m.items {
        let orientations: Vec<Option<Orientation>> = if item == m.eccentric_item {
            Orientation::ALL.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for o in orientations {
            template.push(ResultRow {
                variant: variant_of(pattern, &format!("classify_{}", o.map_or("none".into(), |o| o.to_string()))),
                mass: Some(item),
                orientation: o.map(|o| o.to_string()),
                ..base_row(plan, &label, rep)
            });
        }
    }

    let result = (|| -> Result<Vec<ResultRow>> {
        let config: ChainConfig<T> = plan.chain_config(entry)?;
        let rate = config.sample_rate;
        let drive_rate = T::lit(plan.observation.drive_rate);
        let amp = T::lit(m.command_amplitude);
        let (on, off) = (T::lit(pattern.on), T::lit(pattern.off));
        let mut rows = template.clone();

        let rec_samples = seconds(m.reconstruction_train + m.reconstruction_test, rate);
        let rec_duration = T::from_usize_lossy(rec_samples) / rate;
        let rec_drive = pwm3(on, off, amp, rec_duration, drive_rate)?;
        let rec_run = LabeledRun {
            trajectory: observe(&config, &rec_drive, rec_samples, &plan.observation, derive_seed(plan.seed, &[3, rep as u64, 2]))?,
            payload_mass: T::zero(),
            orientation: None,
            input: rec_drive,
            repetition: rep,
        };
        let rec = reconstruct_inputs_with(
            &rec_run,
            ReconstructionOptions {
                train: T::lit(m.reconstruction_train),
                test: T::lit(m.reconstruction_test),
                ridge: T::lit(m.ridge),
            },
        )?;
        for c in 0..3 {
            rows[c].mse = Some(rec.mse[c].as_f64());
        }

        let samples = seconds(m.washout + m.window, rate);
        let duration = T::from_usize_lossy(samples) / rate;
        let drive = pwm3(on, off, amp, duration, drive_rate)?;
        let train = item_runs(plan, &config, &drive, samples, rep, derive_seed(plan.seed, &[3, rep as u64, 0]))?;
        let test = item_runs(plan, &config, &drive, samples, rep, derive_seed(plan.seed, &[3, rep as u64, 1]))?;
        let (bundle, orientation) = train_classifier(plan, &train)?;
        for (row, run) in rows[3..].iter_mut().zip(&test) {
            let (estimate, predicted) = classify_payload(&bundle, &orientation, run)?;
            row.estimate = Some(estimate.as_f64());
            row.predicted_orientation = Some(predicted.map_or("none".into(), |o| o.to_string()));
        }
        Ok(rows)
    })();
    match result {
        Ok(rows) => rows.into_iter().map(with_id).collect(),
        Err(e) => template.into_iter().map(|r| with_id(r.failed(&e))).collect(),
    }
}

enum Point<'a> {
    Narma(&'a ConfigEntry, f64, usize),
    Payload(&'a ConfigEntry, f64, f64, usize),
    Multi(&'a ConfigEntry, &'a PwmPattern, usize),
}

/// Executes every grid point of `plan` in parallel and returns the sorted table.
///
/// Failed simulations and diverged targets are recorded as failed rows; they
/// never abort the sweep.
pub fn run_plan<T: Scalar>(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let mut points = Vec::new();
    for entry in &plan.configurations {
        for rep in 0..plan.repetitions {
            match plan.task {
                TaskKind::NarmaSweep => {
                    for &a in &plan.amplitudes {
                        points.push(Point::Narma(entry, a, rep));
                    }
                }
                TaskKind::PayloadSweep => {
                    for &a in &plan.amplitudes {
                        for &f in &plan.frequencies {
                            points.push(Point::Payload(entry, a, f, rep));
                        }
                    }
                }
                TaskKind::MultiTask => {
                    for pattern in &plan.multitask.patterns {
                        points.push(Point::Multi(entry, pattern, rep));
                    }
                }
            }
        }
    }
    let rows: Vec<ResultRow> = points
        .par_iter()
        .flat_map_iter(|p| match *p {
            Point::Narma(e, a, rep) => run_narma_point::<T>(plan, e, a, rep),
            Point::Payload(e, a, f, rep) => run_payload_point::<T>(plan, e, a, f, rep),
            Point::Multi(e, pattern, rep) => run_multitask_point::<T>(plan, e, pattern, rep),
        })
        .collect();
    Ok(ResultTable::new(rows))
}
