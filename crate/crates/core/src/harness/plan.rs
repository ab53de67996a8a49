use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::{ITEM_MASSES, PAYLOAD_MASSES};
use crate::readout::SplitSpec;
use crate::scalar::Scalar;
use crate::substrate::{preset_modules, ChainConfig, DriveMode, ModuleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// NARMA emulation over configurations, amplitudes and orders.
    NarmaSweep,
    /// Payload weight estimation and spatial correlation over configurations and drive frequencies.
    PayloadSweep,
    /// Command reconstruction and two-stage item classification on the actuated arm.
    MultiTask,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::NarmaSweep => "narma",
            TaskKind::PayloadSweep => "payload",
            TaskKind::MultiTask => "multitask",
        }
    }
}

/// A configuration given by preset name or by explicit module words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEntry {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub modules: Option<Vec<ModuleState>>,
    #[serde(default)]
    pub drive: Option<DriveMode>,
}

impl ConfigEntry {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            label: None,
            modules: None,
            drive: None,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .or_else(|| self.preset.clone())
            .unwrap_or_else(|| {
                let words: Vec<String> = self
                    .modules
                    .iter()
                    .flatten()
                    .map(ToString::to_string)
                    .collect();
                words.join("-")
            })
    }
}

/// Optional replacements for the substrate defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstrateOverrides {
    pub nodes_per_module: Option<usize>,
    pub node_mass: Option<f64>,
    pub damping_ratio: Option<f64>,
    pub soft_linear_stiffness: Option<f64>,
    pub stiffness_ratio: Option<f64>,
    pub cubic_coefficient: Option<f64>,
    pub eccentricity_lever: Option<f64>,
    pub gravity: Option<f64>,
    pub integration_dt: Option<f64>,
    pub sample_rate: Option<f64>,
    pub actuation_gain: Option<f64>,
    pub blowup_displacement: Option<f64>,
    pub blowup_velocity: Option<f64>,
}

impl SubstrateOverrides {
    pub fn apply<T: Scalar>(&self, c: &mut ChainConfig<T>) {
        if let Some(v) = self.nodes_per_module {
            c.nodes_per_module = v;
        }
        let fields: [(Option<f64>, &mut T); 12] = [
            (self.node_mass, &mut c.node_mass),
            (self.damping_ratio, &mut c.damping_ratio),
            (self.soft_linear_stiffness, &mut c.soft_linear_stiffness),
            (self.stiffness_ratio, &mut c.stiffness_ratio),
            (self.cubic_coefficient, &mut c.cubic_coefficient),
            (self.eccentricity_lever, &mut c.eccentricity_lever),
            (self.gravity, &mut c.gravity),
            (self.integration_dt, &mut c.integration_dt),
            (self.sample_rate, &mut c.sample_rate),
            (self.actuation_gain, &mut c.actuation_gain),
            (self.blowup_displacement, &mut c.blowup_displacement),
            (self.blowup_velocity, &mut c.blowup_velocity),
        ];
        for (value, slot) in fields {
            if let Some(v) = value {
                *slot = T::lit(v);
            }
        }
    }
}

/// Measurement imperfections applied to every simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationSettings {
    /// m, standard deviation of the Gaussian noise added to every recorded displacement.
    pub tracking_noise: f64,
    /// m, half-width of the uniform initial-displacement perturbation per repetition.
    pub perturbation: f64,
    /// Hz, rate of the input stream handed to the integrator.
    pub drive_rate: f64,
}

impl Default for ObservationSettings {
    fn default() -> Self {
        Self {
            tracking_noise: 2e-5,
            perturbation: 1e-4,
            drive_rate: 3000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NarmaSettings {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub classic: bool,
    pub ridge: f64,
}

impl Default for NarmaSettings {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.05,
            gamma: 1.5,
            delta: 0.1,
            classic: false,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadSettings {
    /// grams
    pub masses: Vec<f64>,
    /// Mass subsets used to train the estimator, grams.
    pub training_sets: Vec<Vec<f64>>,
    /// s
    pub washout: f64,
    /// s
    pub window: f64,
    pub ridge: f64,
}

impl Default for PayloadSettings {
    fn default() -> Self {
        Self {
            masses: PAYLOAD_MASSES.to_vec(),
            training_sets: vec![vec![0.0], vec![0.0, 170.0], PAYLOAD_MASSES.to_vec()],
            washout: 10.0,
            window: 5.0,
            ridge: 0.0,
        }
    }
}

/// One PWM timing pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwmPattern {
    pub label: String,
    /// s
    pub on: f64,
    /// s
    pub off: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiTaskSettings {
    pub patterns: Vec<PwmPattern>,
    /// Actuation command level while a channel is on.
    pub command_amplitude: f64,
    /// grams
    pub items: Vec<f64>,
    /// grams; this item is run in all three orientations.
    pub eccentric_item: f64,
    /// m of lateral offset per orientation unit.
    pub eccentricity_scale: f64,
    /// s
    pub washout: f64,
    /// s
    pub window: f64,
    /// s
    pub reconstruction_train: f64,
    /// s
    pub reconstruction_test: f64,
    pub ridge: f64,
}

impl Default for MultiTaskSettings {
    fn default() -> Self {
        Self {
            patterns: vec![
                PwmPattern {
                    label: "W6".into(),
                    on: 0.1,
                    off: 0.2,
                },
                PwmPattern {
                    label: "W7".into(),
                    on: 0.05,
                    off: 0.1,
                },
            ],
            command_amplitude: 1.0,
            items: ITEM_MASSES.to_vec(),
            eccentric_item: ITEM_MASSES[3],
            eccentricity_scale: 0.01,
            washout: 10.0,
            window: 5.0,
            reconstruction_train: 15.0,
            reconstruction_test: 15.0,
            ridge: 0.0,
        }
    }
}

/// A full experiment grid, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub task: TaskKind,
    pub configurations: Vec<ConfigEntry>,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub frequencies: Vec<f64>,
    #[serde(default)]
    pub narma_orders: Vec<usize>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub substrate: SubstrateOverrides,
    #[serde(default)]
    pub observation: ObservationSettings,
    #[serde(default)]
    pub narma: NarmaSettings,
    #[serde(default)]
    pub payload: PayloadSettings,
    #[serde(default)]
    pub multitask: MultiTaskSettings,
}

fn one() -> usize {
    1
}

fn presets(names: &[&str]) -> Vec<ConfigEntry> {
    names.iter().map(|n| ConfigEntry::preset(n)).collect()
}

impl ExperimentPlan {
    /// Five configurations by three amplitudes by five repetitions.
    pub fn default_narma() -> Self {
        Self {
            task: TaskKind::NarmaSweep,
            configurations: presets(&["C1", "C2", "C3", "C4", "C5"]),
            amplitudes: vec![0.002, 0.006, 0.02],
            frequencies: Vec::new(),
            narma_orders: vec![2, 5, 10],
            repetitions: 5,
            seed: 0,
            split: SplitSpec::default(),
            substrate: SubstrateOverrides::default(),
            observation: ObservationSettings::default(),
            narma: NarmaSettings::default(),
            payload: PayloadSettings::default(),
            multitask: MultiTaskSettings::default(),
        }
    }

    pub fn default_payload() -> Self {
        Self {
            task: TaskKind::PayloadSweep,
            configurations: presets(&["C5", "C6"]),
            amplitudes: vec![0.005],
            frequencies: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            narma_orders: Vec::new(),
            repetitions: 5,
            ..Self::default_narma()
        }
    }

    pub fn default_multitask() -> Self {
        Self {
            task: TaskKind::MultiTask,
            configurations: presets(&["C7", "C8"]),
            amplitudes: Vec::new(),
            frequencies: Vec::new(),
            narma_orders: Vec::new(),
            repetitions: 10,
            ..Self::default_narma()
        }
    }

    pub fn default_for(task: TaskKind) -> Self {
        match task {
            TaskKind::NarmaSweep => Self::default_narma(),
            TaskKind::PayloadSweep => Self::default_payload(),
            TaskKind::MultiTask => Self::default_multitask(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidPlan(m));
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if self.configurations.is_empty() {
            return fail("no configurations".into());
        }
        let mut labels: Vec<String> = self.configurations.iter().map(ConfigEntry::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return fail("configuration labels must be distinct".into());
        }
        for entry in &self.configurations {
            self.chain_config::<f64>(entry)?.validate()?;
        }
        let positive = |name: &str, v: &[f64]| {
            if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                Err(Error::InvalidPlan(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        match self.task {
            TaskKind::NarmaSweep => {
                if self.amplitudes.is_empty() || self.narma_orders.is_empty() {
                    return fail("NARMA sweep needs amplitudes and narma_orders".into());
                }
                positive("amplitudes", &self.amplitudes)?;
                if self.narma_orders.iter().any(|&n| n < 2) {
                    return fail("NARMA orders must be at least 2".into());
                }
                self.split.validate(self.split.total())?;
            }
            TaskKind::PayloadSweep => {
                if self.amplitudes.is_empty() || self.frequencies.is_empty() {
                    return fail("payload sweep needs amplitudes and frequencies".into());
                }
                positive("amplitudes", &self.amplitudes)?;
                positive("frequencies", &self.frequencies)?;
                let p = &self.payload;
                if p.masses.is_empty() || p.training_sets.iter().any(Vec::is_empty) {
                    return fail("payload masses and training sets must be non-empty".into());
                }
                if p.masses.iter().any(|m| !(*m >= 0.0)) {
                    return fail("payload masses must be non-negative".into());
                }
                for set in &p.training_sets {
                    if let Some(m) = set.iter().find(|m| !p.masses.contains(m)) {
                        return fail(format!("training mass {m} g is not in the mass list"));
                    }
                }
                positive("payload window", &[p.window])?;
            }
            TaskKind::MultiTask => {
                let m = &self.multitask;
                if m.patterns.is_empty() || m.items.is_empty() {
                    return fail("multitask needs PWM patterns and items".into());
                }
                if !m.items.contains(&m.eccentric_item) {
                    return fail("eccentric item must be one of the items".into());
                }
                positive("multitask window", &[m.window])?;
            }
        }
        Ok(())
    }

    /// Resolves an entry into a substrate configuration with the plan's overrides applied.
    pub fn chain_config<T: Scalar>(&self, entry: &ConfigEntry) -> Result<ChainConfig<T>> {
        let mut config = match (&entry.preset, &entry.modules) {
            (Some(name), None) => ChainConfig::from_preset(name)
                .ok_or_else(|| Error::InvalidPlan(format!("unknown preset `{name}`")))?,
            (None, Some(modules)) => ChainConfig::with_modules(modules.clone()),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidPlan(
                    "give either a preset or modules, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidPlan(
                    "configuration needs a preset or modules".into(),
                ))
            }
        };
        if let Some(drive) = entry.drive {
            config.drive = drive;
        }
        if self.task == TaskKind::MultiTask {
            config.drive = DriveMode::Actuation;
        }
        self.substrate.apply(&mut config);
        Ok(config)
    }
}

/// Known preset labels, for CLI help and validation messages.
pub fn preset_labels() -> Vec<&'static str> {
    ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8"]
        .into_iter()
        .filter(|l| preset_modules(l).is_some())
        .collect()
}
