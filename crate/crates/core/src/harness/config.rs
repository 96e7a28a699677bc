use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Bias, StateGrid};
use crate::receiver::{BetaSchedule, ReceiverMode};
use crate::sender::{Exploration, InitMode, NoiseSpec, Schedules, StepSize};

/// Environment variable that overrides the configured base seed.
pub const SEED_ENV: &str = "CHEAPTALK_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    Babbling,
    FullRevelation,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub mode: InitKind,
    /// Off-diagonal gap for full revelation, or the fill value for a constant table.
    pub value: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { mode: InitKind::Babbling, value: InitMode::DEFAULT_REVELATION_GAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaKind {
    #[default]
    Constant,
    RobbinsMonro,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub alpha_mode: AlphaKind,
    /// Constant step, or the numerator `a` of the decaying families.
    pub alpha: f64,
    /// Offset `c` in `a / (n + c)`.
    pub alpha_c: f64,
    /// Exponent `q` in `a / (n + 1)^q`.
    pub alpha_q: f64,
    pub tau0: f64,
    pub tau_floor: f64,
    pub gamma: f64,
    /// Starting exploration weight; equal to `eps_floor` for a constant schedule.
    pub eps0: Option<f64>,
    pub eps_floor: f64,
    pub eps_rate: f64,
    pub beta: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = Schedules::default();
        ScheduleConfig {
            alpha_mode: AlphaKind::Constant,
            alpha: 0.05,
            alpha_c: 1.0,
            alpha_q: 1.0,
            tau0: s.tau0,
            tau_floor: s.tau_floor,
            gamma: s.gamma,
            eps0: None,
            eps_floor: s.exploration.floor(),
            eps_rate: 0.0,
            beta: s.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_eta: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma_eta: NoiseSpec::default().sigma_eta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Sup-norm tolerance between consecutive snapshots.
    pub delta: f64,
    /// Trailing window in steps.
    pub window: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { delta: 1e-3, window: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    /// Largest single-entry policy change that makes an update count.
    pub threshold: f64,
    /// Number of qualifying updates averaged.
    pub window: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig { threshold: 0.2, window: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    #[default]
    Exact,
    Learning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub mode: ReceiverKind,
    pub b0: f64,
    pub p: f64,
    pub sigma_r: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        let beta = BetaSchedule::default();
        ReceiverConfig { mode: ReceiverKind::Exact, b0: beta.b0, p: beta.p, sigma_r: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OdeVariantKind {
    QValues,
    #[default]
    Policy,
}

/// Settings for the limiting-ODE analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    pub variant: OdeVariantKind,
    pub tau: f64,
    pub epsilon: f64,
    /// Named starts: `babbling`, `revealing`, `worst-case`.
    pub starts: Vec<String>,
    pub random_starts: usize,
    pub t_end: f64,
    pub h: f64,
    pub perturbation: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            variant: OdeVariantKind::QValues,
            tau: 1e-3,
            epsilon: 1e-2,
            starts: vec!["babbling".into(), "worst-case".into()],
            random_starts: 0,
            t_end: 200.0,
            h: 1e-2,
            perturbation: 1e-3,
        }
    }
}

/// Everything a simulation, batch or analysis run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub b: f64,
    /// Maximum number of periods per run.
    pub steps: u64,
    pub runs: usize,
    pub seed: u64,
    pub snapshot_interval: u64,
    pub init: InitConfig,
    pub schedules: ScheduleConfig,
    pub noise: NoiseConfig,
    pub convergence: ConvergenceConfig,
    pub cycles: CycleConfig,
    pub receiver: ReceiverConfig,
    pub ode: OdeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 21,
            b: 0.0,
            steps: 10_000_000,
            runs: 50,
            seed: 0,
            snapshot_interval: 1_000,
            init: InitConfig::default(),
            schedules: ScheduleConfig::default(),
            noise: NoiseConfig::default(),
            convergence: ConvergenceConfig::default(),
            cycles: CycleConfig::default(),
            receiver: ReceiverConfig::default(),
            ode: OdeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides (dotted keys address
    /// nested tables) and validates the result.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<StateGrid> {
        StateGrid::new(self.k)
    }

    pub fn bias(&self) -> Result<Bias> {
        Bias::new(self.b)
    }

    pub fn sender_schedules(&self) -> Schedules {
        let s = &self.schedules;
        let alpha = match s.alpha_mode {
            AlphaKind::Constant => StepSize::Constant(s.alpha),
            AlphaKind::RobbinsMonro => StepSize::RobbinsMonro { a: s.alpha, c: s.alpha_c },
            AlphaKind::Polynomial => StepSize::Polynomial { a: s.alpha, q: s.alpha_q },
        };
        let exploration = match s.eps0 {
            Some(eps0) if eps0 != s.eps_floor => {
                Exploration::Exponential { eps0, floor: s.eps_floor, rate: s.eps_rate }
            }
            _ => Exploration::Constant(s.eps_floor),
        };
        Schedules { alpha, tau0: s.tau0, tau_floor: s.tau_floor, gamma: s.gamma, exploration, beta: s.beta }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec { sigma_eta: self.noise.sigma_eta }
    }

    pub fn init_mode(&self) -> InitMode {
        match self.init.mode {
            InitKind::Babbling => InitMode::Babbling,
            InitKind::FullRevelation => InitMode::FullRevelation { delta: self.init.value },
            InitKind::Constant => InitMode::Constant(self.init.value),
        }
    }

    pub fn receiver_mode(&self) -> ReceiverMode {
        match self.receiver.mode {
            ReceiverKind::Exact => ReceiverMode::Exact,
            ReceiverKind::Learning => ReceiverMode::Learning {
                beta: BetaSchedule { b0: self.receiver.b0, p: self.receiver.p },
                sigma_r: self.receiver.sigma_r,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.bias()?;
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.snapshot_interval == 0 {
            return Err(Error::Config("snapshot_interval must be at least 1".into()));
        }
        let c = &self.convergence;
        if !(c.delta > 0.0) || c.window == 0 {
            return Err(Error::Config("convergence.delta and convergence.window must be positive".into()));
        }
        if c.window % self.snapshot_interval != 0 {
            return Err(Error::Config(format!(
                "convergence.window {} is not a multiple of snapshot_interval {}",
                c.window, self.snapshot_interval
            )));
        }
        if !(self.cycles.threshold > 0.0) || self.cycles.window == 0 {
            return Err(Error::Config("cycles.threshold and cycles.window must be positive".into()));
        }
        if self.schedules.eps0.is_some() && !(self.schedules.eps_rate > 0.0) {
            return Err(Error::Config("schedules.eps0 requires a positive schedules.eps_rate".into()));
        }
        self.sender_schedules().validate()?;
        self.noise_spec().validate()?;
        if let ReceiverMode::Learning { beta, sigma_r } = self.receiver_mode() {
            beta.validate()?;
            if !(sigma_r >= 0.0 && sigma_r.is_finite()) {
                return Err(Error::Config(format!("receiver.sigma_r {sigma_r} must be finite and nonnegative")));
            }
        }
        if let InitMode::FullRevelation { delta: v } | InitMode::Constant(v) = self.init_mode() {
            if !v.is_finite() {
                return Err(Error::Config(format!("init.value {v} must be finite")));
            }
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` inside `table`, parsing `value` as a TOML value and
/// falling back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty override key in `{assignment}`")))?;
    let mut cursor = table;
    for p in parts {
        let entry = cursor.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Seed precedence: explicit flag, then `CHEAPTALK_SEED`, then the config file.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, configured: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        None => Ok(configured),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.sender_schedules(), Schedules::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.b = 0.1;
        cfg.schedules.eps0 = Some(0.1);
        cfg.schedules.eps_rate = 1e-4;
        cfg.receiver.mode = ReceiverKind::Learning;
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let text = "k = 5\nschedules.tau_floor = 1e-3\n[receiver]\nmode = \"learning\"\n";
        let cfg = ExperimentConfig::from_toml_with_overrides(text, &["b=0.2".into(), "schedules.alpha = 0.1".into()]).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.b, 0.2);
        assert_eq!(cfg.schedules.tau_floor, 1e-3);
        assert_eq!(cfg.schedules.alpha, 0.1);
        assert!(matches!(cfg.receiver_mode(), ReceiverMode::Learning { .. }));
        let cfg = ExperimentConfig::from_toml_with_overrides("", &["init.mode=full-revelation".into()]).unwrap();
        assert_eq!(cfg.init.mode, InitKind::FullRevelation);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::from_toml("schedules.tau_flor = 1e-3").unwrap_err();
        assert!(err.to_string().contains("tau_flor"), "{err}");
        let err = ExperimentConfig::from_toml_with_overrides("", &["bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        for text in ["k = 1", "b = -0.1", "steps = 0", "schedules.tau_floor = 0.0", "convergence.window = 1500"] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("7"), 11).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some("7"), 11).unwrap(), 7);
        assert_eq!(resolve_seed(None, None, 11).unwrap(), 11);
        assert!(resolve_seed(None, Some("x"), 11).is_err());
    }
}
