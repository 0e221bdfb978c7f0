//! Scenario configuration: a single TOML file describing the driver, the
//! observable, the rare event, the scale ladder, and the rate to compare
//! against.

use std::path::Path;
use std::sync::Arc;

use ldp_core::space::DiscreteMeasureSpace;
use serde::Deserialize;

pub const DRIVER_FAMILIES: [&str; 3] =
    ["gaussian_white_noise", "poisson_random_measure", "markov_counting"];
pub const OBSERVABLE_KINDS: [&str; 2] = ["driver_eval", "markov_mean_sde"];
pub const EVENT_KINDS: [&str; 2] = ["terminal_ge", "sup_abs_ge"];
pub const RATE_KINDS: [&str; 3] = ["poisson_legendre", "cramer_legendre", "schilder_hitting"];
pub const ORACLE_KINDS: [&str; 2] = ["poisson_terminal", "binomial_terminal"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub samples: u64,
    pub n_ladder: Vec<u64>,
    pub space: SpaceConfig,
    pub grid: GridConfig,
    pub driver: DriverConfig,
    pub observable: ObservableConfig,
    pub event: EventConfig,
    pub rate: RateConfig,
    pub oracle: Option<OracleConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub family: String,
    #[serde(default)]
    pub centered: bool,
    pub kernel: Option<Vec<Vec<f64>>>,
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub kind: String,
    pub h: Option<Vec<f64>>,
    pub state_values: Option<Vec<f64>>,
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub kind: String,
    pub level: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub kind: String,
    pub tolerance_rel: f64,
    pub y: Option<f64>,
    pub pi: Option<Vec<f64>>,
    pub minimize_steps: Option<usize>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: String,
    pub n_exact: u64,
    pub tolerance_rel: f64,
}

/// A validation failure, anchored to the offending line of the config file.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// First line (1-based) whose content mentions `key`, for anchoring semantic
/// errors to the file.
fn anchor(text: &str, key: &str) -> String {
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.starts_with(key)
            && trimmed[key.len()..].trim_start().starts_with(['=', '.', ']'])
        {
            return format!("line {}", i + 1);
        }
        if trimmed.starts_with('[') && trimmed.contains(key) {
            return format!("line {}", i + 1);
        }
    }
    "line ?".to_string()
}

fn fail(path: &Path, text: &str, key: &str, message: String) -> ConfigError {
    ConfigError {
        message: format!("{}:{}: {message}", path.display(), anchor(text, key)),
    }
}

/// Parses and validates a scenario file.
pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        message: format!("{}: {e}", path.display()),
    })?;
    let config: ScenarioConfig = toml::from_str(&text).map_err(|e| ConfigError {
        // toml errors already carry line/column context
        message: format!("{}: {e}", path.display()),
    })?;
    validate(&config, path, &text)?;
    Ok(config)
}

fn validate(c: &ScenarioConfig, path: &Path, text: &str) -> Result<(), ConfigError> {
    if c.name.is_empty() {
        return Err(fail(path, text, "name", "scenario name must be nonempty".into()));
    }
    if c.samples < 1_000 {
        return Err(fail(path, text, "samples", format!("samples {} below the minimum of 1000", c.samples)));
    }
    if c.n_ladder.is_empty() || c.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(fail(
            path,
            text,
            "n_ladder",
            format!("n_ladder {:?} must be nonempty and strictly increasing", c.n_ladder),
        ));
    }
    if c.n_ladder[0] == 0 {
        return Err(fail(path, text, "n_ladder", "scales must be >= 1".into()));
    }
    if c.space.masses.is_empty() || c.space.masses.iter().any(|m| !(*m >= 0.0)) {
        return Err(fail(path, text, "masses", "cell masses must be nonnegative and nonempty".into()));
    }
    if !(c.grid.horizon > 0.0) || c.grid.steps == 0 {
        return Err(fail(path, text, "[grid]", "grid needs horizon > 0 and steps >= 1".into()));
    }
    if !DRIVER_FAMILIES.contains(&c.driver.family.as_str()) {
        return Err(fail(
            path,
            text,
            "family",
            format!("unknown driver family {:?}; registered: {:?}", c.driver.family, DRIVER_FAMILIES),
        ));
    }
    if c.driver.family == "markov_counting" {
        let kernel = c.driver.kernel.as_ref().ok_or_else(|| {
            fail(path, text, "[driver]", "markov_counting needs a kernel".into())
        })?;
        ldp_core::drivers::validate_kernel(kernel)
            .map_err(|e| fail(path, text, "kernel", e.to_string()))?;
        let initial = c.driver.initial.as_ref().ok_or_else(|| {
            fail(path, text, "[driver]", "markov_counting needs an initial distribution".into())
        })?;
        if initial.len() != kernel.len() {
            return Err(fail(
                path,
                text,
                "initial",
                format!("initial distribution over {} states for a {}-state kernel", initial.len(), kernel.len()),
            ));
        }
    }
    if !OBSERVABLE_KINDS.contains(&c.observable.kind.as_str()) {
        return Err(fail(
            path,
            text,
            "kind",
            format!("unknown observable {:?}; registered: {:?}", c.observable.kind, OBSERVABLE_KINDS),
        ));
    }
    match c.observable.kind.as_str() {
        "driver_eval" => {
            let h = c.observable.h.as_ref().ok_or_else(|| {
                fail(path, text, "[observable]", "driver_eval needs h (one value per cell)".into())
            })?;
            if h.len() != c.space.masses.len() {
                return Err(fail(
                    path,
                    text,
                    "h",
                    format!("h has {} values for {} cells", h.len(), c.space.masses.len()),
                ));
            }
            if c.driver.family == "markov_counting" {
                let states = c.driver.kernel.as_ref().map(|k| k.len()).unwrap_or(0);
                if h.len() != states {
                    return Err(fail(
                        path,
                        text,
                        "h",
                        format!("h has {} values for {} chain states", h.len(), states),
                    ));
                }
            }
        }
        "markov_mean_sde" => {
            if c.driver.family != "markov_counting" {
                return Err(fail(
                    path,
                    text,
                    "[observable]",
                    "markov_mean_sde requires the markov_counting driver".into(),
                ));
            }
            let sv = c.observable.state_values.as_ref().ok_or_else(|| {
                fail(path, text, "[observable]", "markov_mean_sde needs state_values".into())
            })?;
            let states = c.driver.kernel.as_ref().map(|k| k.len()).unwrap_or(0);
            if sv.len() != states {
                return Err(fail(
                    path,
                    text,
                    "state_values",
                    format!("{} state values for {} chain states", sv.len(), states),
                ));
            }
        }
        _ => unreachable!(),
    }
    if !EVENT_KINDS.contains(&c.event.kind.as_str()) {
        return Err(fail(
            path,
            text,
            "[event]",
            format!("unknown event {:?}; registered: {:?}", c.event.kind, EVENT_KINDS),
        ));
    }
    if !RATE_KINDS.contains(&c.rate.kind.as_str()) {
        return Err(fail(
            path,
            text,
            "[rate]",
            format!("unknown rate {:?}; registered: {:?}", c.rate.kind, RATE_KINDS),
        ));
    }
    if !(c.rate.tolerance_rel > 0.0) {
        return Err(fail(path, text, "tolerance_rel", "rate tolerance must be positive".into()));
    }
    if c.rate.kind == "cramer_legendre" && c.observable.state_values.is_none() {
        return Err(fail(
            path,
            text,
            "[rate]",
            "cramer_legendre needs the markov_mean_sde observable's state_values".into(),
        ));
    }
    if let Some(o) = &c.oracle {
        if !ORACLE_KINDS.contains(&o.kind.as_str()) {
            return Err(fail(
                path,
                text,
                "[oracle]",
                format!("unknown oracle {:?}; registered: {:?}", o.kind, ORACLE_KINDS),
            ));
        }
        if o.n_exact == 0 || !(o.tolerance_rel > 0.0) {
            return Err(fail(path, text, "n_exact", "oracle needs n_exact >= 1 and a positive tolerance".into()));
        }
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn space(&self) -> Arc<DiscreteMeasureSpace> {
        DiscreteMeasureSpace::new(self.space.masses.clone()).expect("validated")
    }
}
