//! Run configuration, read from TOML.
//!
//! ```toml
//! input = "prices.csv"
//! input_kind = "prices"        # or "returns"
//! dt = 1
//! scales = [20, 60, 390]
//! q_values = [1, 2, 3, 4, 5, 6]
//! order = 2
//! n_sets = 50                  # 0 disables significance filtering
//! seed = 7
//! output_dir = "out"
//!
//! [[transforms]]
//! kind = "amp-shuffle-above"
//! threshold_sigma = 1.8
//! seed = 11
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fluct;
use crate::ingest::TransformSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    #[default]
    Prices,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    Dot,
    Graphml,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![
        OutputFormat::Csv,
        OutputFormat::Json,
        OutputFormat::Dot,
        OutputFormat::Graphml,
    ]
}

fn default_order() -> usize {
    2
}

fn default_dt() -> usize {
    1
}

fn default_n_sets() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub input_kind: InputKind,
    #[serde(default = "default_dt")]
    pub dt: usize,
    /// Drop returns spanning more than this many minutes (prices with
    /// timestamps only).
    #[serde(default)]
    pub drop_gaps_over: Option<i64>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    pub scales: Vec<usize>,
    pub q_values: Vec<f64>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_n_sets")]
    pub n_sets: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub attributes: Option<PathBuf>,
    /// Pearson sampling intervals for the scalar-product comparison.
    #[serde(default)]
    pub compare_dts: Vec<usize>,
}

/// The part of the configuration that determines output bytes.
#[derive(Serialize)]
struct HashedConfig<'a> {
    input_kind: InputKind,
    dt: usize,
    drop_gaps_over: Option<i64>,
    transforms: &'a [TransformSpec],
    scales: &'a [usize],
    q_values: &'a [f64],
    order: usize,
    n_sets: usize,
    seed: u64,
    formats: &'a [OutputFormat],
    compare_dts: &'a [usize],
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative inputs resolve against the config file
        if let Some(dir) = path.parent() {
            if cfg.input.is_relative() {
                cfg.input = dir.join(&cfg.input);
            }
            if let Some(a) = cfg.attributes.as_mut().filter(|a| a.is_relative()) {
                *a = dir.join(&*a);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config("scales must not be empty".into()));
        }
        if self.q_values.is_empty() {
            return Err(Error::Config("q_values must not be empty".into()));
        }
        for &s in &self.scales {
            if s < self.order + 2 {
                return Err(Error::ScaleTooSmall {
                    scale: s,
                    order: self.order,
                });
            }
        }
        for &q in &self.q_values {
            fluct::check_q(q, false)?;
        }
        if self.dt == 0 {
            return Err(Error::Config("dt must be positive".into()));
        }
        if self.n_sets == 1 {
            return Err(Error::Config(
                "n_sets must be 0 (no filtering) or at least 2".into(),
            ));
        }
        if self.compare_dts.contains(&0) {
            return Err(Error::Config("compare_dts must be positive".into()));
        }
        for t in &self.transforms {
            t.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the output-determining fields. Paths and thread count are
    /// excluded.
    pub fn hash(&self) -> String {
        let hashed = HashedConfig {
            input_kind: self.input_kind,
            dt: self.dt,
            drop_gaps_over: self.drop_gaps_over,
            transforms: &self.transforms,
            scales: &self.scales,
            q_values: &self.q_values,
            order: self.order,
            n_sets: self.n_sets,
            seed: self.seed,
            formats: &self.formats,
            compare_dts: &self.compare_dts,
        };
        let json = serde_json::to_vec(&hashed).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub(crate) fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "config_hash": self.hash(),
            "seed": self.seed,
            "n_sets": self.n_sets,
            "order": self.order,
            "dt": self.dt,
            "transforms": self.transforms,
        })
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}
