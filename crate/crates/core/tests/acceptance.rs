//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p prc-core --test acceptance -- --nocapture` to see them.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prc_core::harness::{run_plan, summarize, ConfigEntry, ExperimentPlan, ResultTable};
use prc_core::metrics::{correlation_matrix, mse, nmse, psi, spearman};
use prc_core::readout::train_readout;
use prc_core::substrate::StateTrajectory;
use prc_core::tasks::{narma_recursion, NarmaParams};

fn report(id: u32, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = pass && elapsed < limit;
    println!(
        "criterion {id}: {} ({detail}; {:.2}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(elapsed < limit, "criterion {id} exceeded {limit:?}: {elapsed:?}");
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn plan_with(base: ExperimentPlan, configs: &[&str]) -> ExperimentPlan {
    ExperimentPlan {
        configurations: configs.iter().map(|c| ConfigEntry::preset(c)).collect(),
        ..base
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Independent brute-force oracles.

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(scale)
}

fn oracle_mse(y: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        s += (y[i] - p[i]).powi(2);
    }
    s / y.len() as f64
}

fn oracle_nmse(y: &[f64], p: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var: f64 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    oracle_mse(y, p) / var
}

/// Naive DFT magnitude of the Hann-windowed, mean-removed series.
fn oracle_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let h = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
            (x[j] - mean) * h
        })
        .collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in w.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re.hypot(im)
        })
        .collect()
}

fn oracle_psi(y: &[f64], p: &[f64]) -> (f64, Vec<f64>) {
    let ty = oracle_spectrum(y);
    let tp = oracle_spectrum(p);
    let len = ty.len();
    let mut taken: Vec<usize> = Vec::new();
    // Repeatedly take the strongest remaining local maximum far enough from the others.
    loop {
        if taken.len() == 8 {
            break;
        }
        let mut best: Option<usize> = None;
        for i in 1..len - 1 {
            let is_max = ty[i] >= ty[i - 1] && ty[i] > ty[i + 1];
            let far = taken.iter().all(|&t| (t as i64 - i as i64).abs() > 2);
            if is_max && far && best.is_none_or(|b| ty[i] > ty[b]) {
                best = Some(i);
            }
        }
        match best {
            Some(b) => taken.push(b),
            None => break,
        }
    }
    while taken.len() < 8 {
        let mut best: Option<usize> = None;
        for i in 1..len {
            if !taken.contains(&i) && best.is_none_or(|b| ty[i] > ty[b]) {
                best = Some(i);
            }
        }
        taken.push(best.unwrap());
    }
    let occ: Vec<f64> = taken
        .iter()
        .map(|&b| if ty[b] > 0.0 { (tp[b] / ty[b]).min(1.0) } else { 0.0 })
        .collect();
    (occ.iter().sum(), occ)
}

fn oracle_corr(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let len = rows[i].len() as f64;
            let mi = rows[i].iter().sum::<f64>() / len;
            let mj = rows[j].iter().sum::<f64>() / len;
            let mut sij = 0.0;
            let mut sii = 0.0;
            let mut sjj = 0.0;
            for k in 0..rows[i].len() {
                let (a, b) = (rows[i][k] - mi, rows[j][k] - mj);
                sij += a * b;
                sii += a * a;
                sjj += b * b;
            }
            m[i][j] = sij / (sii * sjj).sqrt();
        }
    }
    m
}

/// Normal equations `(XᵀX) w = Xᵀy` with a leading bias column, Gauss-Jordan with partial pivoting.
fn oracle_readout(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let cols = rows.len() + 1;
    let feature = |c: usize, k: usize| if c == 0 { 1.0 } else { rows[c - 1][k] };
    let mut a = vec![vec![0.0; cols + 1]; cols];
    for r in 0..cols {
        for c in 0..cols {
            a[r][c] = (0..y.len()).map(|k| feature(r, k) * feature(c, k)).sum();
        }
        a[r][cols] = (0..y.len()).map(|k| feature(r, k) * y[k]).sum();
    }
    for col in 0..cols {
        let piv = (col..cols)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..cols {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=cols {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..cols).map(|r| a[r][cols] / a[r][r]).collect()
}

#[test]
fn criterion_01_formula_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    for case in 0..100 {
        let nodes = rng.random_range(1..=10);
        let samples = rng.random_range(40..=500);
        let rows: Vec<Vec<f64>> = (0..nodes)
            .map(|_| (0..samples).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..samples).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v * 0.7 + rng.random_range(-0.5..0.5)).collect();

        if !close(nmse(&y, &p).unwrap(), oracle_nmse(&y, &p), 0.0) {
            failures.push(format!("nmse case {case}"));
        }
        if !close(mse(&y, &p).unwrap(), oracle_mse(&y, &p), 0.0) {
            failures.push(format!("mse case {case}"));
        }
        let rep = psi(&y, &p, 60.0, 8).unwrap();
        let (opsi, oocc) = oracle_psi(&y, &p);
        let occ_ok = rep.occupancy.iter().zip(&oocc).all(|(a, b)| close(*a, *b, 0.0));
        if !close(rep.psi, opsi, 0.0) || !occ_ok {
            failures.push(format!("psi case {case}"));
        }
        let traj = StateTrajectory::from_rows(rows.clone(), 60.0).unwrap();
        let corr = correlation_matrix(&traj).unwrap();
        let ocorr = oracle_corr(&rows);
        let corr_ok = (0..nodes).all(|i| (0..nodes).all(|j| close(corr.matrix[i][j], ocorr[i][j], 1.0)));
        let ci: f64 = ocorr.iter().flatten().sum::<f64>() / nodes as f64;
        if !corr_ok || !close(corr.avg_ci, ci, 1.0) {
            failures.push(format!("correlation case {case}"));
        }
        let w = train_readout(&traj, &y, 0.0).unwrap();
        let ow = oracle_readout(&rows, &y);
        let scale = ow.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let got = w.coefficients();
        if !got.iter().zip(&ow).all(|(a, b)| close(*a, *b, scale)) {
            failures.push(format!("train_readout case {case}"));
        }
    }
    let detail = if failures.is_empty() {
        "500 oracle comparisons agree to 1e-8".to_string()
    } else {
        format!("mismatches: {}", failures.join(", "))
    };
    report(1, failures.is_empty(), start.elapsed(), secs(10), &detail);
}

#[test]
fn criterion_02_narma_recursion() {
    let start = Instant::now();
    let y = narma_recursion(&[0.0_f64; 8], &NarmaParams::new(2)).unwrap();
    // 0.1616 is not a binary fraction; one ulp of representation error is the exact-match floor.
    let hand = y[2] == 0.1 && y[3] == 0.14 && (y[4] - 0.1616).abs() <= f64::EPSILON * 0.1616;
    let mut fixed = true;
    let mut worst = 0.0_f64;
    for order in [3, 5, 10, 20] {
        let p = NarmaParams::<f64>::new(order);
        let target = p.delta / (1.0 - p.alpha);
        let z = narma_recursion(&vec![0.0; 201 + order], &p).unwrap();
        let err = (z[200 + order] - target).abs();
        worst = worst.max(err);
        fixed &= err <= 1e-9;
    }
    report(
        2,
        hand && fixed,
        start.elapsed(),
        secs(1),
        &format!("NARMA2 head {:?}, worst fixed-point error {worst:.1e}", &y[2..5]),
    );
}

#[test]
fn criterion_03_psi_bounds() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    for _ in 0..20 {
        let n = rng.random_range(64..=1024);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let zero = vec![0.0; n];
        let noisy: Vec<f64> = y.iter().map(|v| v * rng.random_range(0.0..3.0)).collect();
        let same = psi(&y, &y, 60.0, 8).unwrap();
        let none = psi(&y, &zero, 60.0, 8).unwrap();
        let other = psi(&y, &noisy, 60.0, 8).unwrap();
        ok &= (same.psi - 8.0).abs() < 1e-12 && none.psi == 0.0;
        ok &= [&same, &none, &other]
            .iter()
            .flat_map(|r| r.occupancy.iter())
            .all(|&o| (0.0..=1.0).contains(&o));
    }
    report(3, ok, start.elapsed(), secs(5), "psi(y,y)=8, psi(y,0)=0, occupancies in [0,1]");
}

#[test]
fn criterion_04_reservoir_beats_baseline() {
    let start = Instant::now();
    let mut plan = plan_with(ExperimentPlan::default_narma(), &["C5"]);
    plan.amplitudes = vec![0.02];
    plan.narma_orders = vec![2];
    plan.repetitions = 5;
    let table = run_plan::<f64>(&plan).unwrap();
    let pairs: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (r.nmse.unwrap_or(f64::NAN), r.baseline_nmse.unwrap_or(f64::NAN)))
        .collect();
    let wins = pairs.iter().filter(|(r, b)| r < b).count();
    report(
        4,
        pairs.len() == 5 && wins == 5,
        start.elapsed(),
        secs(120),
        &format!("{wins}/5 seeds beat the input-only baseline: {pairs:.3?}"),
    );
}

#[test]
fn criterion_05_amplitude_trend() {
    let start = Instant::now();
    let mut plan = plan_with(ExperimentPlan::default_narma(), &["C5"]);
    plan.narma_orders = vec![10];
    plan.repetitions = 5;
    let table = run_plan::<f64>(&plan).unwrap();
    let amps = &plan.amplitudes;
    let (lo, hi) = (amps[0], amps[amps.len() - 1]);
    let at = |a: f64| -> Vec<f64> {
        table
            .rows
            .iter()
            .filter(|r| r.amplitude == Some(a) && r.is_ok())
            .filter_map(|r| r.nmse)
            .collect()
    };
    let (small, large) = (at(lo), at(hi));
    let complete = small.len() == 5 && large.len() == 5;
    let (ms, ml) = (median(small), median(large));
    report(
        5,
        complete && ml <= ms,
        start.elapsed(),
        secs(300),
        &format!("median NARMA10 NMSE {ms:.4} at A={lo}, {ml:.4} at A={hi}"),
    );
}

#[test]
fn criterion_06_psi_nmse_inverse() {
    let start = Instant::now();
    let mut plan = ExperimentPlan::default_narma();
    plan.narma_orders = vec![10];
    let table = run_plan::<f64>(&plan).unwrap();
    let cells: Vec<_> = summarize(&table)
        .into_iter()
        .filter(|c| c.order == Some(10))
        .collect();
    let psi_v: Vec<f64> = cells.iter().map(|c| c.mean_psi.unwrap_or(f64::NAN)).collect();
    let nmse_v: Vec<f64> = cells.iter().map(|c| c.mean_nmse.unwrap_or(f64::NAN)).collect();
    let rho = spearman(&psi_v, &nmse_v).unwrap_or(f64::NAN);
    report(
        6,
        cells.len() == 15 && rho <= -0.4,
        start.elapsed(),
        secs(600),
        &format!("Spearman(PSI, NMSE) = {rho:.3} over {} cells", cells.len()),
    );
}

#[test]
fn criterion_07_training_data_trend() {
    let start = Instant::now();
    let plan = ExperimentPlan::default_payload();
    let table = run_plan::<f64>(&plan).unwrap();
    let mut ok = table.failures().is_empty();
    let mut lines = Vec::new();
    for entry in &plan.configurations {
        let config = entry.label();
        // number of training masses -> absolute errors
        let mut errors: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut single_off = 0.0_f64;
        for r in table.rows.iter().filter(|r| r.config == config && r.variant.starts_with("train[")) {
            let (Some(est), Some(mass)) = (r.estimate, r.mass) else {
                ok = false;
                continue;
            };
            let n = r.variant.matches('+').count() + 1;
            errors.entry(n).or_default().push((est - mass).abs());
            if n == 1 {
                // the single training label is the first payload mass
                single_off = single_off.max((est - plan.payload.training_sets[0][0]).abs());
            }
        }
        let mean = |n: usize| {
            let v = &errors[&n];
            v.iter().sum::<f64>() / v.len() as f64
        };
        let (e1, e2, e5) = (mean(1), mean(2), mean(5));
        ok &= e5 <= e2 && e2 <= e1 && single_off <= 10.0;
        lines.push(format!(
            "{config}: 5 masses {e5:.3} g, 2 masses {e2:.3} g, 1 mass {e1:.3} g, 1-mass spread {single_off:.3} g"
        ));
    }
    report(7, ok, start.elapsed(), secs(300), &lines.join("; "));
}

#[test]
fn criterion_08_correlation_stiffness() {
    let start = Instant::now();
    let mut plan = plan_with(ExperimentPlan::default_payload(), &["C5", "C6"]);
    plan.frequencies = (2..=10).map(f64::from).collect();
    plan.payload.masses = vec![0.0];
    plan.payload.training_sets = vec![vec![0.0]];
    let table = run_plan::<f64>(&plan).unwrap();
    let cells = summarize(&table);
    let first_drop = |config: &str| -> Option<f64> {
        plan.frequencies.iter().copied().find(|&f| {
            cells.iter().any(|c| {
                c.config == config
                    && c.variant == "correlation"
                    && c.frequency == Some(f)
                    && c.mean_avg_ci_normalized.is_some_and(|v| v < 0.9)
            })
        })
    };
    let (soft, stiff) = (first_drop("C5"), first_drop("C6"));
    let pass = matches!((soft, stiff), (Some(s), Some(k)) if k > s);
    report(
        8,
        pass,
        start.elapsed(),
        secs(300),
        &format!("first normalized Avg. CI < 0.9: soft {soft:?} Hz, stiff {stiff:?} Hz"),
    );
}

#[test]
fn criterion_09_two_stage_classification() {
    let start = Instant::now();
    let plan = ExperimentPlan::default_multitask();
    let table = run_plan::<f64>(&plan).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for entry in &plan.configurations {
        for pattern in &plan.multitask.patterns {
            let prefix = format!("{}:classify_", pattern.label);
            let good_reps = (0..plan.repetitions)
                .filter(|&rep| {
                    let runs: Vec<_> = table
                        .rows
                        .iter()
                        .filter(|r| {
                            r.config == entry.label()
                                && r.repetition == rep
                                && r.variant.starts_with(&prefix)
                        })
                        .collect();
                    let hammer: Vec<_> = runs.iter().filter(|r| r.orientation.is_some()).collect();
                    let others_rejected = runs
                        .iter()
                        .filter(|r| r.orientation.is_none())
                        .all(|r| r.predicted_orientation.as_deref() == Some("none"));
                    hammer.len() == 3
                        && others_rejected
                        && hammer.iter().all(|r| {
                            r.estimate.is_some_and(|e| (140.0..=180.0).contains(&e))
                                && r.predicted_orientation == r.orientation
                        })
                })
                .count();
            ok &= good_reps >= 9;
            lines.push(format!("{} {}: {good_reps}/10", entry.label(), pattern.label));
        }
    }
    report(9, ok, start.elapsed(), secs(300), &lines.join(", "));
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let plan = ExperimentPlan::default_narma();
    let a: ResultTable = run_plan::<f64>(&plan).unwrap();
    let b: ResultTable = run_plan::<f64>(&plan).unwrap();
    let (ca, cb) = (a.to_csv_string(), b.to_csv_string());
    let runs = plan.configurations.len() * plan.amplitudes.len() * plan.repetitions;
    report(
        10,
        ca.as_bytes() == cb.as_bytes() && runs == 75,
        start.elapsed(),
        secs(900),
        &format!("{runs} runs, {} rows, {} CSV bytes identical", a.len(), ca.len()),
    );
}
