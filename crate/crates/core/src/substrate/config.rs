use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stable-state word of one origami module: three panels, each soft (0) or stiff (1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModuleState {
    bits: [bool; 3],
}

impl ModuleState {
    pub const SOFT: ModuleState = ModuleState { bits: [false; 3] };
    pub const STIFF: ModuleState = ModuleState { bits: [true; 3] };

    pub fn new(bits: [bool; 3]) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> [bool; 3] {
        self.bits
    }

    pub fn stiff_panels(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Segment stiffness multiplier: the panel factors (1 or `ratio`) averaged over the three panels.
    pub fn stiffness_factor<T: Scalar>(&self, ratio: T) -> T {
        let sum: T = self
            .bits
            .iter()
            .map(|&b| if b { ratio } else { T::one() })
            .sum();
        sum / T::lit(3.0)
    }
}

impl fmt::Display for ModuleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ModuleState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "module state `{s}` must have exactly 3 bits"
            )));
        }
        let mut bits = [false; 3];
        for (bit, c) in bits.iter_mut().zip(chars) {
            *bit = match c {
                '0' => false,
                '1' => true,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "module state bit `{other}` is not 0 or 1"
                    )))
                }
            };
        }
        Ok(Self { bits })
    }
}

impl TryFrom<String> for ModuleState {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<ModuleState> for String {
    fn from(value: ModuleState) -> Self {
        value.to_string()
    }
}

/// How the input stream enters the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Node 0 follows a single-channel prescribed displacement.
    #[default]
    BaseExcitation,
    /// Node 0 is clamped; three channels apply contractile forces to the segments.
    Actuation,
}

/// Named module layouts used by the experiment presets.
///
/// C1..C5 vary the module count (C5 is five soft modules), C6 is five stiff
/// modules, C7 and C8 are the four-module actuated arm in the all-soft and
/// `[010]` states.
pub fn preset_modules(label: &str) -> Option<Vec<ModuleState>> {
    let s = ModuleState::SOFT;
    let k = ModuleState::STIFF;
    let mid = ModuleState::new([false, true, false]);
    Some(match label.to_ascii_uppercase().as_str() {
        "C1" => vec![s],
        "C2" => vec![s, k],
        "C3" => vec![s, k, s],
        "C4" => vec![s, k, s, k],
        "C5" => vec![s; 5],
        "C6" => vec![k; 5],
        "C7" => vec![s; 4],
        "C8" => vec![mid; 4],
        _ => return None,
    })
}

/// Physical description of a module chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig<T> {
    pub modules: Vec<ModuleState>,
    pub nodes_per_module: usize,
    /// kg
    pub node_mass: T,
    /// Damping ratio of the chain's linearized fundamental mode.
    pub damping_ratio: T,
    /// N/m, per segment, all panels soft.
    pub soft_linear_stiffness: T,
    pub stiffness_ratio: T,
    /// N/m^3
    pub cubic_coefficient: T,
    /// kg, lumped onto the last node.
    pub payload_mass: T,
    /// m, signed offset of the payload's centre of mass.
    pub payload_eccentricity: T,
    /// m, lever that converts the eccentric moment into a bias force.
    pub eccentricity_lever: T,
    /// m/s^2, acts on the payload only.
    pub gravity: T,
    /// s
    pub integration_dt: T,
    /// Hz, camera rate of the recorded trajectory.
    pub sample_rate: T,
    pub drive: DriveMode,
    /// N per input unit, contractile force of one actuation channel.
    pub actuation_gain: T,
    /// m
    pub blowup_displacement: T,
    /// m/s
    pub blowup_velocity: T,
}

impl<T: Scalar> Default for ChainConfig<T> {
    fn default() -> Self {
        Self {
            modules: vec![ModuleState::SOFT; 5],
            nodes_per_module: 8,
            node_mass: T::lit(0.02),
            damping_ratio: T::lit(0.3),
            soft_linear_stiffness: T::lit(1000.0),
            stiffness_ratio: T::lit(4.0),
            cubic_coefficient: T::lit(1e7),
            payload_mass: T::zero(),
            payload_eccentricity: T::zero(),
            eccentricity_lever: T::lit(0.1),
            gravity: T::lit(9.81),
            integration_dt: T::lit(1.0 / 3000.0),
            sample_rate: T::lit(60.0),
            drive: DriveMode::BaseExcitation,
            actuation_gain: T::lit(1.0),
            blowup_displacement: T::one(),
            blowup_velocity: T::lit(100.0),
        }
    }
}

impl<T: Scalar> ChainConfig<T> {
    pub fn with_modules(modules: Vec<ModuleState>) -> Self {
        Self {
            modules,
            ..Self::default()
        }
    }

    pub fn from_preset(label: &str) -> Option<Self> {
        let mut config = Self::with_modules(preset_modules(label)?);
        if matches!(label.to_ascii_uppercase().as_str(), "C7" | "C8") {
            config.drive = DriveMode::Actuation;
        }
        Some(config)
    }

    pub fn n_nodes(&self) -> usize {
        self.modules.len() * self.nodes_per_module
    }

    pub fn validate(&self) -> Result<()> {
        if self.modules.is_empty() {
            return Err(Error::EmptyChain);
        }
        let named = [
            ("node_mass", self.node_mass),
            ("damping_ratio", self.damping_ratio),
            ("soft_linear_stiffness", self.soft_linear_stiffness),
            ("stiffness_ratio", self.stiffness_ratio),
            ("cubic_coefficient", self.cubic_coefficient),
            ("payload_mass", self.payload_mass),
            ("payload_eccentricity", self.payload_eccentricity),
            ("eccentricity_lever", self.eccentricity_lever),
            ("gravity", self.gravity),
            ("integration_dt", self.integration_dt),
            ("sample_rate", self.sample_rate),
            ("actuation_gain", self.actuation_gain),
            ("blowup_displacement", self.blowup_displacement),
            ("blowup_velocity", self.blowup_velocity),
        ];
        for (name, value) in named {
            if !value.is_finite() {
                return Err(Error::NonFiniteParameter(name));
            }
        }
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_nodes() < 2 {
            return fail("chain needs at least two nodes");
        }
        if self.node_mass <= T::zero() {
            return fail("node_mass must be positive");
        }
        if self.damping_ratio <= T::zero() || self.damping_ratio >= T::one() {
            return fail("damping_ratio must lie in (0, 1)");
        }
        if self.soft_linear_stiffness <= T::zero() {
            return fail("soft_linear_stiffness must be positive");
        }
        if self.stiffness_ratio <= T::zero() {
            return fail("stiffness_ratio must be positive");
        }
        if self.cubic_coefficient < T::zero() {
            return fail("cubic_coefficient must be non-negative");
        }
        if self.payload_mass < T::zero() {
            return fail("payload_mass must be non-negative");
        }
        if self.eccentricity_lever <= T::zero() {
            return fail("eccentricity_lever must be positive");
        }
        if self.sample_rate <= T::zero() {
            return fail("sample_rate must be positive");
        }
        if self.integration_dt <= T::zero()
            || self.integration_dt > T::one() / (T::lit(2.0) * self.sample_rate)
        {
            return fail("integration_dt must lie in (0, 1/(2*sample_rate)]");
        }
        if self.blowup_displacement <= T::zero() || self.blowup_velocity <= T::zero() {
            return fail("blow-up bounds must be positive");
        }
        Ok(())
    }
}
