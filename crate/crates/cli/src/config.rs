//! Run configuration: one TOML file per run, with dotted-key overrides.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use siggame_core::{ChannelModel, GameSpec, GaussMarkovSource, GriddedDensity, ModelError, ScalarSource, Source};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key.path=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A matrix given as a scalar (1×1), a diagonal, or full rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixValue {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>, ConfigError> {
        match self {
            MatrixValue::Scalar(x) => Ok(DMatrix::from_element(1, 1, *x)),
            MatrixValue::Diagonal(d) => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            MatrixValue::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(ConfigError::Invalid("matrix rows differ in length".into()));
                }
                Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Uniform {
        low: f64,
        high: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Gridded {
        grid: Vec<f64>,
        density: Vec<f64>,
    },
    GaussMarkov {
        transition: MatrixValue,
        initial_cov: MatrixValue,
        #[serde(default)]
        noise_cov: Vec<MatrixValue>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub noise_cov: Vec<MatrixValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    #[serde(default = "one")]
    pub horizon: usize,
    pub bias: Vec<f64>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    pub source: SourceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelConfig>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub certificate_tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub starts: usize,
    pub seed: u64,
    pub p_max: f64,
    pub grad_tol: f64,
    /// `penalized` or `unit_budget`.
    pub dp_rule: String,
    pub dp_tol: f64,
    pub max_sweeps: usize,
    /// `parallel` or `sequential`.
    pub execution: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            certificate_tol: 1e-8,
            max_iters: 1_000_000,
            damping: 0.5,
            starts: 1,
            seed: 0,
            p_max: 1e6,
            grad_tol: 1e-10,
            dp_rule: "penalized".into(),
            dp_tol: 1e-12,
            max_sweeps: 100_000,
            execution: "parallel".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheapTalkConfig {
    /// Bin count; the largest feasible count when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Candidate policy for `cheaptalk-verify`.
    pub boundaries: Vec<f64>,
    pub actions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// `stackelberg_scalar`, `stackelberg_dp`, `revealing`, `babbling`,
    /// `quantized` or `nash`.
    pub policy: String,
    pub samples: usize,
    pub seed: u64,
    pub chunks: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            policy: "stackelberg_scalar".into(),
            samples: 100_000,
            seed: 1,
            chunks: 64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV path; relative paths resolve under `SIGGAME_OUT_DIR` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cheaptalk: CheapTalkConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parse `key.path=value`; the value is read as a TOML literal and falls back
/// to a bare string.
fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, raw) = text.split_once('=').ok_or_else(|| ConfigError::Override(text.into()))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(ConfigError::Override(text.into()));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key was just written"),
        Err(_) => toml::Value::String(raw.to_owned()),
    };
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for key in parents {
        let entry = cur
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("`{key}` is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn spec(&self) -> Result<GameSpec, ConfigError> {
        let g = &self.game;
        let source = match &g.source {
            SourceConfig::Uniform { low, high } => Source::Scalar(ScalarSource::uniform(*low, *high)?),
            SourceConfig::Gaussian { mean, variance } => Source::Scalar(ScalarSource::gaussian(*mean, *variance)?),
            SourceConfig::Gridded { grid, density } => {
                Source::Scalar(ScalarSource::Gridded(GriddedDensity::new(grid.clone(), density.clone())?))
            }
            SourceConfig::GaussMarkov {
                transition,
                initial_cov,
                noise_cov,
            } => Source::GaussMarkov(GaussMarkovSource::new(
                transition.to_matrix()?,
                initial_cov.to_matrix()?,
                noise_cov.iter().map(MatrixValue::to_matrix).collect::<Result<_, _>>()?,
            )?),
        };
        let mut spec = match (&g.channel, source) {
            (None, source) => {
                let mut s = GameSpec::cheap_talk(g.horizon, g.bias.clone(), source)?;
                s.lambda = g.lambda;
                s
            }
            (Some(ch), Source::GaussMarkov(src)) => {
                let channel = ChannelModel::new(ch.noise_cov.iter().map(MatrixValue::to_matrix).collect::<Result<_, _>>()?)?;
                GameSpec::signaling(g.horizon, g.bias.clone(), g.lambda, src, channel)?
            }
            (Some(_), Source::Scalar(_)) => {
                return Err(ConfigError::Invalid("a channel needs a gauss_markov source".into()));
            }
        };
        if let Some(beta) = g.discount {
            spec = spec.with_discount(beta)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// The scalar source of a cheap-talk config.
    pub fn scalar_source(&self) -> Result<ScalarSource, ConfigError> {
        match self.spec()?.source {
            Source::Scalar(s) => Ok(s),
            Source::GaussMarkov(_) => Err(ConfigError::Invalid("this command needs a scalar source".into())),
        }
    }

    pub fn scalar_bias(&self) -> Result<f64, ConfigError> {
        match self.game.bias.as_slice() {
            [b] => Ok(*b),
            other => Err(ConfigError::Invalid(format!("expected a scalar bias, got {} entries", other.len()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"
[game]
horizon = 2
bias = [0.0]
lambda = 1

[game.source]
kind = "gauss_markov"
transition = 1
initial_cov = 1
noise_cov = [1]

[game.channel]
noise_cov = [1.0, 1.0]
"#;

    #[test]
    fn integers_read_as_reals() {
        let c = RunConfig::from_toml(SCALAR, &[]).unwrap();
        let spec = c.spec().unwrap();
        assert_eq!(spec.lambda, 1.0);
        assert_eq!(spec.horizon, 2);
    }

    #[test]
    fn overrides_replace_nested_keys() {
        let c = RunConfig::from_toml(
            SCALAR,
            &["game.lambda=0.25".into(), "solver.dp_rule=unit_budget".into(), "game.discount=0.5".into()],
        )
        .unwrap();
        assert_eq!(c.game.lambda, 0.25);
        assert_eq!(c.solver.dp_rule, "unit_budget");
        assert_eq!(c.game.discount, Some(0.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml(SCALAR, &["solver.tolerance=1".into()]).is_err());
        assert!(matches!(
            RunConfig::from_toml(SCALAR, &["nonsense".into()]),
            Err(ConfigError::Override(_))
        ));
    }

    #[test]
    fn matrix_forms() {
        assert_eq!(MatrixValue::Scalar(2.0).to_matrix().unwrap(), DMatrix::from_element(1, 1, 2.0));
        let d = MatrixValue::Diagonal(vec![1.0, 2.0]).to_matrix().unwrap();
        assert_eq!(d[(1, 1)], 2.0);
        assert_eq!(d[(0, 1)], 0.0);
        assert!(MatrixValue::Rows(vec![vec![1.0], vec![1.0, 2.0]]).to_matrix().is_err());
    }
}
