use crate::error::Result;
use crate::scalar::Scalar;

use super::config::{ChainConfig, DriveMode};

/// Immutable lumped-mass chain built from a [`ChainConfig`].
///
/// Node 0 is the driven base; nodes `1..n` are free. Segment `j` (for
/// `j in 1..n`) joins node `j - 1` to node `j` and is stored at index `j - 1`.
/// Displacements are measured along the chain axis, positive away from the base.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<T> {
    config: ChainConfig<T>,
    linear: Vec<T>,
    masses: Vec<T>,
    body_forces: Vec<T>,
    damping: T,
    equilibrium: Vec<T>,
}

/// Solves `k1 e + k3 e^3 = tension` for the segment stretch `e`.
///
/// The left side is odd and strictly increasing, and Newton started from the
/// linear solution approaches the root monotonically from outside.
pub fn segment_stretch<T: Scalar>(k1: T, k3: T, tension: T) -> T {
    let mut e = tension / k1;
    if k3 == T::zero() || tension == T::zero() {
        return e;
    }
    let three = T::lit(3.0);
    for _ in 0..100 {
        let residual = k1 * e + k3 * e * e * e - tension;
        let step = residual / (k1 + three * k3 * e * e);
        e -= step;
        if step.abs() <= T::epsilon() * T::lit(4.0) * e.abs() {
            break;
        }
    }
    e
}

pub fn build_chain<T: Scalar>(config: ChainConfig<T>) -> Result<ChainModel<T>> {
    config.validate()?;
    let n = config.n_nodes();
    let npm = config.nodes_per_module;
    let last_module = config.modules.len() - 1;

    let linear: Vec<T> = (1..n)
        .map(|j| {
            let module = config.modules[(j / npm).min(last_module)];
            config.soft_linear_stiffness * module.stiffness_factor(config.stiffness_ratio)
        })
        .collect();

    let free = n - 1;
    let mut masses = vec![config.node_mass; free];
    masses[free - 1] += config.payload_mass;

    let weight = config.payload_mass * config.gravity;
    let mut body_forces = vec![T::zero(); free];
    body_forces[free - 1] =
        weight + weight * config.payload_eccentricity / config.eccentricity_lever;

    // Mass-proportional damping tuned so the linearized fundamental of a
    // uniform chain with the mean stiffness has the requested damping ratio.
    let mean_k = linear.iter().copied().sum::<T>() / T::from_usize_lossy(free);
    let free_t = T::from_usize_lossy(free);
    let angle = T::lit(std::f64::consts::PI) / (T::lit(2.0) * (T::lit(2.0) * free_t + T::one()));
    let omega1 = T::lit(2.0) * (mean_k / config.node_mass).sqrt() * angle.sin();
    let damping = T::lit(2.0) * config.damping_ratio * config.node_mass * omega1;

    let mut equilibrium = vec![T::zero(); n];
    let mut tension = T::zero();
    let mut stretches = vec![T::zero(); free];
    for j in (0..free).rev() {
        tension += body_forces[j];
        stretches[j] = segment_stretch(linear[j], config.cubic_coefficient, tension);
    }
    for j in 0..free {
        equilibrium[j + 1] = equilibrium[j] + stretches[j];
    }

    Ok(ChainModel {
        config,
        linear,
        masses,
        body_forces,
        damping,
        equilibrium,
    })
}

impl<T: Scalar> ChainModel<T> {
    pub fn config(&self) -> &ChainConfig<T> {
        &self.config
    }

    pub fn n_nodes(&self) -> usize {
        self.linear.len() + 1
    }

    pub fn n_free(&self) -> usize {
        self.linear.len()
    }

    pub fn drive(&self) -> DriveMode {
        self.config.drive
    }

    /// Linear stiffness `k1` per segment, index `j - 1` for segment `j`.
    pub fn segment_stiffness(&self) -> &[T] {
        &self.linear
    }

    pub fn cubic(&self) -> T {
        self.config.cubic_coefficient
    }

    /// Mass of free nodes `1..n`.
    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    /// Constant external force on free nodes `1..n` (payload weight and eccentric bias).
    pub fn body_forces(&self) -> &[T] {
        &self.body_forces
    }

    /// Viscous coefficient per unit mass times node mass (N s/m), same for every free node.
    pub fn damping(&self) -> T {
        self.damping
    }

    /// Static equilibrium displacement of all `n` nodes with the base at rest.
    pub fn equilibrium(&self) -> &[T] {
        &self.equilibrium
    }

    /// Actuation channel of segment `j` (1-based).
    pub fn segment_channel(j: usize) -> usize {
        (j - 1) % 3
    }

    /// Spring force of segment index `s` at stretch `e`.
    #[inline]
    pub fn spring_force(&self, s: usize, e: T) -> T {
        self.linear[s] * e + self.config.cubic_coefficient * e * e * e
    }

    fn spring_energy(&self, s: usize, e: T) -> T {
        let e2 = e * e;
        T::lit(0.5) * self.linear[s] * e2 + T::lit(0.25) * self.config.cubic_coefficient * e2 * e2
    }

    /// Mechanical energy relative to the static equilibrium, never negative.
    ///
    /// `x` and `v` hold the free nodes; `base` is the node-0 displacement. The
    /// potential part measures each spring's energy above the tangent at its
    /// equilibrium stretch, which is exactly the energy that the constant body
    /// forces cannot return.
    pub fn energy(&self, x: &[T], v: &[T], base: T) -> T {
        let half = T::lit(0.5);
        let kinetic: T = self
            .masses
            .iter()
            .zip(v)
            .map(|(&m, &vi)| half * m * vi * vi)
            .sum();
        let mut potential = T::zero();
        for s in 0..self.n_free() {
            let lower = if s == 0 { base } else { x[s - 1] };
            let e = x[s] - lower;
            let e0 = self.equilibrium[s + 1] - self.equilibrium[s];
            let excess = self.spring_energy(s, e)
                - self.spring_energy(s, e0)
                - self.spring_force(s, e0) * (e - e0);
            potential += excess.max(T::zero());
        }
        kinetic + potential
    }
}
