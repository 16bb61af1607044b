//! Scenario files: a versioned JSON schema describing one simulation run.
//!
//! Unknown keys are rejected, and validation failures name the offending
//! field. The game's nominal gains double as the stationary channel's gains,
//! so a scenario carries one authoritative gain vector.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKind, ChannelModel};
use crate::game::GameConfig;
use crate::learn::LearnerParams;

/// Schema version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Game parameters as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub gains: Vec<f64>,
    pub noise: f64,
    pub demands: Vec<f64>,
    pub p_max: Vec<f64>,
    pub capacity: f64,
}

/// Channel regime selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKindSpec {
    Stationary,
    BlockFading,
    FastFading,
}

/// Channel parameters as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: ChannelKindSpec,
    /// Coherence block length; required for (and only for) block fading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_len: Option<u64>,
    /// Mean of the per-user exponential gains under fading.
    #[serde(default = "default_mean")]
    pub mean: f64,
}

fn default_mean() -> f64 {
    1.0
}

/// Which learner drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    BanachPicard,
    ProgressiveBp,
    BushMosteller,
    Mann,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::BanachPicard => "banach_picard",
            Self::ProgressiveBp => "progressive_bp",
            Self::BushMosteller => "bush_mosteller",
            Self::Mann => "mann",
        };
        f.write_str(name)
    }
}

/// Learner selector plus tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    #[serde(default)]
    pub params: LearnerParams,
}

/// A scheduled demand change: at iteration `t`, `user`'s demand becomes
/// `new_demand`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandChange {
    pub t: u64,
    pub user: usize,
    pub new_demand: f64,
}

/// One complete simulation description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub game: GameSpec,
    pub channel: ChannelSpec,
    pub algorithm: AlgorithmSpec,
    pub initial_powers: Vec<f64>,
    /// Discrete per-user power sets; required by Bush-Mosteller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete_levels: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub demand_change_events: Vec<DemandChange>,
    pub horizon: u64,
    pub seed: u64,
}

/// Reading or validating a scenario failed.
#[derive(Debug)]
pub enum ScenarioError {
    Io(io::Error),
    /// Malformed JSON or a schema mismatch, with source position.
    Json { line: usize, column: usize, message: String },
    /// Well-formed JSON whose values violate the schema contract.
    Invalid { field: String, message: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "scenario I/O error: {e}"),
            Self::Json { line, column, message } => {
                write!(f, "scenario parse error at line {line}, column {column}: {message}")
            }
            Self::Invalid { field, message } => {
                write!(f, "invalid scenario field `{field}`: {message}")
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<io::Error> for ScenarioError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.to_string(), message: message.into() }
}

impl Scenario {
    /// Builds the validated game config.
    pub fn game_config(&self) -> Result<GameConfig, ScenarioError> {
        GameConfig::new(
            self.game.gains.clone(),
            self.game.noise,
            self.game.demands.clone(),
            self.game.p_max.clone(),
            self.game.capacity,
        )
        .map_err(|e| invalid("game", e.to_string()))
    }

    /// Builds the channel model, seeded by the scenario seed.
    pub fn channel_model(&self) -> Result<ChannelModel, ScenarioError> {
        let kind = match self.channel.kind {
            ChannelKindSpec::Stationary => ChannelKind::Stationary,
            ChannelKindSpec::BlockFading => ChannelKind::BlockFading {
                block_len: self
                    .channel
                    .block_len
                    .ok_or_else(|| invalid("channel.block_len", "required for block fading"))?,
            },
            ChannelKindSpec::FastFading => ChannelKind::FastFading,
        };
        ChannelModel::new(kind, self.game.gains.clone(), self.channel.mean, self.seed)
            .map_err(|e| invalid("channel", e.to_string()))
    }

    /// Full structural validation; run by [`read_scenario`] after parsing.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let cfg = self.game_config()?;
        self.channel_model()?;
        let n = cfg.n_users();
        if self.initial_powers.len() != n {
            return Err(invalid(
                "initial_powers",
                format!("expected {n} entries, got {}", self.initial_powers.len()),
            ));
        }
        for (i, &p) in self.initial_powers.iter().enumerate() {
            if !(p >= 0.0 && p <= cfg.p_max[i]) {
                return Err(invalid(
                    "initial_powers",
                    format!("entry {i} = {p} outside [0, {}]", cfg.p_max[i]),
                ));
            }
        }
        if self.horizon < 1 {
            return Err(invalid("horizon", "must be >= 1"));
        }
        let p = &self.algorithm.params;
        for (name, v) in
            [("epsilon", p.epsilon), ("zeta", p.zeta), ("lambda", p.lambda), ("mu", p.mu)]
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(
                    &format!("algorithm.params.{name}"),
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        if !(p.rho > 0.0 && p.rho.is_finite()) {
            return Err(invalid("algorithm.params.rho", "must be > 0 and finite"));
        }
        if self.algorithm.kind == AlgorithmKind::BushMosteller {
            let levels = self
                .discrete_levels
                .as_ref()
                .ok_or_else(|| invalid("discrete_levels", "required for bush_mosteller"))?;
            if levels.len() != n {
                return Err(invalid(
                    "discrete_levels",
                    format!("expected {n} rows, got {}", levels.len()),
                ));
            }
            for (i, row) in levels.iter().enumerate() {
                if row.is_empty() {
                    return Err(invalid("discrete_levels", format!("row {i} is empty")));
                }
                for &lv in row {
                    if !(lv > 0.0 && lv <= cfg.p_max[i]) {
                        return Err(invalid(
                            "discrete_levels",
                            format!("row {i} level {lv} outside (0, {}]", cfg.p_max[i]),
                        ));
                    }
                }
            }
        }
        let mut prev_t = 0u64;
        for (k, ev) in self.demand_change_events.iter().enumerate() {
            if ev.t < prev_t {
                return Err(invalid("demand_change_events", format!("entry {k} not sorted by t")));
            }
            prev_t = ev.t;
            if ev.user >= n {
                return Err(invalid(
                    "demand_change_events",
                    format!("entry {k}: user {} out of range", ev.user),
                ));
            }
            if !(ev.new_demand > 0.0 && ev.new_demand.is_finite()) {
                return Err(invalid(
                    "demand_change_events",
                    format!("entry {k}: new_demand must be > 0"),
                ));
            }
        }
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path)?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| ScenarioError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Writes a scenario as pretty-printed JSON (atomic: temp file + rename).
pub fn write_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(scenario).expect("scenario serialization");
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text.as_bytes())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> Scenario {
        Scenario {
            schema_version: SCHEMA_VERSION,
            game: GameSpec {
                gains: vec![1.0, 1.0, 1.0],
                noise: 1.0,
                demands: vec![0.1, 0.2, 0.3],
                p_max: vec![10.0; 3],
                capacity: 1.0,
            },
            channel: ChannelSpec { kind: ChannelKindSpec::Stationary, block_len: None, mean: 1.0 },
            algorithm: AlgorithmSpec {
                kind: AlgorithmKind::BanachPicard,
                params: LearnerParams::default(),
            },
            initial_powers: vec![1.0, 1.0, 1.0],
            discrete_levels: None,
            demand_change_events: vec![],
            horizon: 500,
            seed: 1,
        }
    }

    #[test]
    fn round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        let s = sample();
        write_scenario(&s, &path).unwrap();
        let back = read_scenario(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn negative_noise_names_the_field() {
        let mut s = sample();
        s.game.noise = -1.0;
        let err = s.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("noise"), "message was: {msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut v: serde_json::Value =
            serde_json::to_value(sample()).unwrap();
        v.as_object_mut().unwrap().insert("surprise".into(), 1.into());
        std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
        match read_scenario(&path) {
            Err(ScenarioError::Json { message, .. }) => {
                assert!(message.contains("surprise"), "message was: {message}")
            }
            other => panic!("expected Json error, got {other:?}"),
        }
    }

    #[test]
    fn bush_mosteller_requires_levels() {
        let mut s = sample();
        s.algorithm.kind = AlgorithmKind::BushMosteller;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("discrete_levels"));
        s.discrete_levels = Some(vec![vec![0.1, 0.2, 0.3]; 3]);
        s.validate().unwrap();
    }

    #[test]
    fn block_fading_requires_block_len() {
        let mut s = sample();
        s.channel.kind = ChannelKindSpec::BlockFading;
        assert!(s.validate().is_err());
        s.channel.block_len = Some(10);
        s.validate().unwrap();
    }

    #[test]
    fn unsorted_events_are_rejected() {
        let mut s = sample();
        s.demand_change_events = vec![
            DemandChange { t: 30, user: 0, new_demand: 0.2 },
            DemandChange { t: 20, user: 1, new_demand: 0.2 },
        ];
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("sorted"));
    }

    #[test]
    fn out_of_bounds_initial_power_is_rejected() {
        let mut s = sample();
        s.initial_powers[2] = 11.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("initial_powers"));
    }
}
