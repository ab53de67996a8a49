use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tasks::SampledSignal;

use super::config::DriveMode;
use super::model::ChainModel;
use super::trajectory::StateTrajectory;

/// Starting displacement and velocity of the free nodes `1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState<T> {
    pub displacements: Vec<T>,
    pub velocities: Vec<T>,
}

impl<T: Scalar> InitialState<T> {
    /// Static equilibrium at rest.
    pub fn equilibrium(model: &ChainModel<T>) -> Self {
        Self {
            displacements: model.equilibrium()[1..].to_vec(),
            velocities: vec![T::zero(); model.n_free()],
        }
    }

    /// Equilibrium plus independent uniform offsets in `[-magnitude, magnitude]`.
    pub fn perturbed(model: &ChainModel<T>, magnitude: T, seed: u64) -> Self {
        let mut state = Self::equilibrium(model);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = magnitude.as_f64();
        for x in &mut state.displacements {
            *x += T::lit(rng.random_range(-1.0..=1.0) * m);
        }
        state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome<T> {
    pub trajectory: StateTrajectory<T>,
    /// J, relative to static equilibrium.
    pub final_energy: T,
    /// m, largest |x| over all recorded samples and nodes.
    pub max_displacement: T,
    /// Energy at every recorded sample; the first entry is the initial energy.
    pub energy_trace: Vec<T>,
}

/// Simulates from static equilibrium at rest.
pub fn simulate<T: Scalar>(
    model: &ChainModel<T>,
    input: &SampledSignal<T>,
    duration: T,
) -> Result<SimOutcome<T>> {
    simulate_from(model, input, duration, &InitialState::equilibrium(model))
}

/// Number of integrator steps per recorded sample.
pub fn steps_per_sample<T: Scalar>(sample_rate: T, integration_dt: T) -> usize {
    let ratio = (T::one() / (sample_rate * integration_dt)).as_f64();
    // Guard against 1/(60 * 1/3000) landing a hair above 50.
    let rounded = ratio.round();
    if (ratio - rounded).abs() < 1e-9 * rounded.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

struct Rk4Buffers<T> {
    k_x: [Vec<T>; 4],
    k_v: [Vec<T>; 4],
    x_tmp: Vec<T>,
    v_tmp: Vec<T>,
    tension: Vec<T>,
}

impl<T: Scalar> Rk4Buffers<T> {
    fn new(n: usize) -> Self {
        let z = || vec![T::zero(); n];
        Self {
            k_x: [z(), z(), z(), z()],
            k_v: [z(), z(), z(), z()],
            x_tmp: z(),
            v_tmp: z(),
            tension: z(),
        }
    }
}

/// Node-0 displacement and per-channel actuation level at one instant.
struct Drive<T> {
    base: T,
    channels: [T; 3],
}

fn drive_at<T: Scalar>(model: &ChainModel<T>, input: &SampledSignal<T>, t: T) -> Drive<T> {
    match model.drive() {
        DriveMode::BaseExcitation => Drive {
            base: input.interpolate(0, t),
            channels: [T::zero(); 3],
        },
        DriveMode::Actuation => Drive {
            base: T::zero(),
            channels: [
                input.interpolate(0, t),
                input.interpolate(1, t),
                input.interpolate(2, t),
            ],
        },
    }
}

fn acceleration<T: Scalar>(
    model: &ChainModel<T>,
    drive: &Drive<T>,
    x: &[T],
    v: &[T],
    tension: &mut [T],
    out: &mut [T],
) {
    let n = x.len();
    let gain = model.config().actuation_gain;
    let actuated = model.drive() == DriveMode::Actuation;
    for s in 0..n {
        let lower = if s == 0 { drive.base } else { x[s - 1] };
        let mut f = model.spring_force(s, x[s] - lower);
        if actuated {
            f += gain * drive.channels[s % 3];
        }
        tension[s] = f;
    }
    let c = model.damping();
    let masses = model.masses();
    let body = model.body_forces();
    for i in 0..n {
        let mut f = body[i] - tension[i] - c * v[i];
        if i + 1 < n {
            f += tension[i + 1];
        }
        out[i] = f / masses[i];
    }
}

fn check_input<T: Scalar>(
    model: &ChainModel<T>,
    input: &SampledSignal<T>,
    duration: T,
) -> Result<()> {
    if !(duration > T::zero()) || !duration.is_finite() {
        return Err(Error::InvalidSignal("duration must be positive".into()));
    }
    let expected = match model.drive() {
        DriveMode::BaseExcitation => 1,
        DriveMode::Actuation => 3,
    };
    if input.n_channels() != expected {
        return Err(Error::DimensionMismatch {
            what: "input channels",
            expected,
            found: input.n_channels(),
        });
    }
    if input.len() < 2 {
        return Err(Error::InvalidSignal("input needs at least two samples".into()));
    }
    let rate = input.sample_rate();
    if let Some(f) = input.max_frequency() {
        if rate < T::lit(10.0) * f {
            return Err(Error::InvalidSignal(format!(
                "input sampled at {rate} Hz, below 10x its highest frequency {f} Hz"
            )));
        }
    }
    let end = input.times()[input.len() - 1];
    if end + T::lit(0.5) / rate < duration {
        return Err(Error::InvalidSignal(format!(
            "input ends at {end} s but {duration} s were requested"
        )));
    }
    Ok(())
}

/// Integrates the chain with fixed-step RK4 and records every `1/sample_rate` seconds.
pub fn simulate_from<T: Scalar>(
    model: &ChainModel<T>,
    input: &SampledSignal<T>,
    duration: T,
    initial: &InitialState<T>,
) -> Result<SimOutcome<T>> {
    check_input(model, input, duration)?;
    let n = model.n_free();
    for (what, v) in [
        ("initial displacements", &initial.displacements),
        ("initial velocities", &initial.velocities),
    ] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: v.len(),
            });
        }
    }

    let config = model.config();
    let rate = config.sample_rate;
    let every = steps_per_sample(rate, config.integration_dt);
    let n_intervals = (duration * rate).round().to_usize().unwrap_or(0).max(1);
    let sample_dt = T::one() / rate;
    let dt = sample_dt / T::from_usize_lossy(every);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let x_bound = config.blowup_displacement;
    let v_bound = config.blowup_velocity;

    let mut x = initial.displacements.clone();
    let mut v = initial.velocities.clone();
    let mut buf = Rk4Buffers::new(n);

    let n_samples = n_intervals + 1;
    let mut rows: Vec<Vec<T>> = (0..=n).map(|_| Vec::with_capacity(n_samples)).collect();
    let mut times = Vec::with_capacity(n_samples);
    let mut energy_trace = Vec::with_capacity(n_samples);
    let mut max_displacement = T::zero();

    let mut record = |k: usize, x: &[T], v: &[T], rows: &mut Vec<Vec<T>>| {
        let t = T::from_usize_lossy(k) / rate;
        let base = drive_at(model, input, t).base;
        times.push(t);
        rows[0].push(base);
        max_displacement = max_displacement.max(base.abs());
        for (row, &xi) in rows[1..].iter_mut().zip(x) {
            row.push(xi);
            max_displacement = max_displacement.max(xi.abs());
        }
        energy_trace.push(model.energy(x, v, base));
    };
    record(0, &x, &v, &mut rows);

    let mut step = 0usize;
    for k in 0..n_intervals {
        let t_sample = T::from_usize_lossy(k) * sample_dt;
        for sub in 0..every {
            let t = t_sample + T::from_usize_lossy(sub) * dt;
            let d0 = drive_at(model, input, t);
            let dm = drive_at(model, input, t + half * dt);
            let d1 = drive_at(model, input, t + dt);

            let Rk4Buffers {
                k_x,
                k_v,
                x_tmp,
                v_tmp,
                tension,
            } = &mut buf;

            k_x[0].copy_from_slice(&v);
            acceleration(model, &d0, &x, &v, tension, &mut k_v[0]);
            for i in 0..n {
                x_tmp[i] = x[i] + half * dt * k_x[0][i];
                v_tmp[i] = v[i] + half * dt * k_v[0][i];
            }
            k_x[1].copy_from_slice(v_tmp);
            acceleration(model, &dm, x_tmp, v_tmp, tension, &mut k_v[1]);
            for i in 0..n {
                x_tmp[i] = x[i] + half * dt * k_x[1][i];
                v_tmp[i] = v[i] + half * dt * k_v[1][i];
            }
            k_x[2].copy_from_slice(v_tmp);
            acceleration(model, &dm, x_tmp, v_tmp, tension, &mut k_v[2]);
            for i in 0..n {
                x_tmp[i] = x[i] + dt * k_x[2][i];
                v_tmp[i] = v[i] + dt * k_v[2][i];
            }
            k_x[3].copy_from_slice(v_tmp);
            acceleration(model, &d1, x_tmp, v_tmp, tension, &mut k_v[3]);

            step += 1;
            for i in 0..n {
                x[i] += sixth * dt * (k_x[0][i] + T::lit(2.0) * (k_x[1][i] + k_x[2][i]) + k_x[3][i]);
                v[i] += sixth * dt * (k_v[0][i] + T::lit(2.0) * (k_v[1][i] + k_v[2][i]) + k_v[3][i]);
                let bad = !(x[i].abs() <= x_bound) || !(v[i].abs() <= v_bound);
                if bad {
                    return Err(Error::Instability {
                        step,
                        time: (t + dt).as_f64(),
                        node: i + 1,
                    });
                }
            }
        }
        record(k + 1, &x, &v, &mut rows);
    }

    let labels = (0..=n).map(|i| format!("node_{i}")).collect();
    let final_energy = *energy_trace.last().expect("at least one sample");
    Ok(SimOutcome {
        trajectory: StateTrajectory::new(times, rows, labels)?,
        final_energy,
        max_displacement,
        energy_trace,
    })
}
