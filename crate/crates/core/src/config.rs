//! Run configuration.
//!
//! A single JSON document with sections `version`, `seed`, `dataset`,
//! `windows`, `filters`, `schedule`, `model`, `train`, `sample` and `eval`.
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::FeatureMode;
use crate::eval::EvalConfig;
use crate::model::{Activation, ScoreNetConfig};
use crate::sde::{GouSchedule, VpSchedule};
use crate::topology::{FilterKind, FilterSpec};
use crate::{Error, QuantizationRule, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    CommunitySmall,
    Sbm,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Training graphs to generate (ignored for `file`).
    #[serde(default)]
    pub count: usize,
    /// Held-out reference graphs: generated from an independent stream, or
    /// taken from the end of the file.
    #[serde(default)]
    pub holdout: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub features: FeatureMode,
    pub degree_cap: usize,
    #[serde(default)]
    pub spectral_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsConfig {
    /// Interior boundaries as fractions of the horizon; `K = splits.len() + 1`.
    pub splits: Vec<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub gou: GouSchedule,
    pub vp: VpSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub n_gcn_layers: usize,
    pub n_attn_layers: usize,
    pub time_dim: usize,
    pub rw_steps: usize,
    pub sp_cutoff: usize,
    pub activation: Activation,
    #[serde(default = "yes")]
    pub eig_position: bool,
}

fn yes() -> bool {
    true
}

impl ModelConfig {
    pub fn net_config(&self, node_dim: usize) -> ScoreNetConfig {
        ScoreNetConfig {
            node_dim,
            hidden_dim: self.hidden_dim,
            n_gcn_layers: self.n_gcn_layers,
            n_attn_layers: self.n_attn_layers,
            time_dim: self.time_dim,
            rw_steps: self.rw_steps,
            sp_cutoff: self.sp_cutoff,
            activation: self.activation,
            eig_position: self.eig_position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Optimiser steps per segment.
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub grad_clip: f64,
    pub c_x: f64,
    pub c_lambda: f64,
    /// Training times are drawn from the segment shrunk by this fraction at
    /// each end.
    pub t_eps: f64,
    /// Lower bound on the conditional variance used to scale network outputs.
    pub scale_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizationKind {
    Binary,
    Molecular,
}

impl QuantizationKind {
    pub fn rule(self) -> QuantizationRule {
        match self {
            QuantizationKind::Binary => QuantizationRule::binary(),
            QuantizationKind::Molecular => QuantizationRule::molecular(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub num: usize,
    /// Reverse integration steps per segment.
    pub steps: usize,
    /// Quantize the reconstructed adjacency at interior boundaries before it
    /// conditions the next bridge.
    pub quantize_between_stages: bool,
    pub quantization: QuantizationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub windows: WindowsConfig,
    /// One filter per interior boundary.
    pub filters: Vec<FilterSpec>,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Two-stage cell-guided defaults on community-small graphs.
    pub fn community_small_default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            dataset: DatasetConfig {
                kind: DatasetKind::CommunitySmall,
                count: 100,
                holdout: 32,
                path: None,
                features: FeatureMode::DegreeOnehot,
                degree_cap: 8,
                spectral_k: 0,
            },
            windows: WindowsConfig { splits: vec![0.5], horizon: 1.0 },
            filters: vec![FilterSpec::cell(8)],
            schedule: ScheduleConfig { gou: GouSchedule::default(), vp: VpSchedule::default() },
            model: ModelConfig {
                hidden_dim: 32,
                n_gcn_layers: 2,
                n_attn_layers: 1,
                time_dim: 16,
                rw_steps: 4,
                sp_cutoff: 5,
                activation: Activation::Silu,
                eig_position: true,
            },
            train: TrainConfig {
                steps: 5000,
                batch_size: 16,
                lr: 1e-3,
                grad_clip: 1.0,
                c_x: 1.0,
                c_lambda: 1.0,
                t_eps: 1e-3,
                scale_floor: 1e-3,
            },
            sample: SampleConfig { num: 64, steps: 200, quantize_between_stages: true, quantization: QuantizationKind::Binary },
            eval: EvalConfig::default(),
        }
    }

    pub fn segments(&self) -> usize {
        self.windows.splits.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        let d = &self.dataset;
        match d.kind {
            DatasetKind::File if d.path.is_none() => return bad("dataset.path is required for kind \"file\"".into()),
            DatasetKind::CommunitySmall | DatasetKind::Sbm if d.count == 0 => {
                return bad("dataset.count must be positive".into())
            }
            _ => {}
        }
        if d.degree_cap == 0 {
            return bad("dataset.degree_cap must be positive".into());
        }
        if d.features == FeatureMode::DegreePlusSpectral && d.spectral_k == 0 {
            return bad("dataset.spectral_k must be positive for degree_plus_spectral".into());
        }
        let w = &self.windows;
        if !(w.horizon > 0.0 && w.horizon.is_finite()) {
            return bad("windows.horizon must be positive".into());
        }
        if (self.schedule.gou.horizon - w.horizon).abs() > 1e-12 {
            return bad("schedule.gou.horizon must equal windows.horizon".into());
        }
        if self.filters.len() != w.splits.len() {
            return bad(format!("{} filters given for {} interior boundaries", self.filters.len(), w.splits.len()));
        }
        for f in &self.filters {
            f.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.filters.iter().any(|f| f.kind == FilterKind::Noise) && self.filters.len() > 1 {
            // only meaningful as the single intermediate of a two-stage run
            return bad("the noise guide needs exactly one interior boundary".into());
        }
        self.schedule.gou.validate()?;
        self.schedule.vp.validate()?;
        self.model.net_config(1).validate()?;
        let t = &self.train;
        if t.batch_size == 0 || !(t.lr > 0.0) || !(t.grad_clip > 0.0) || !(t.scale_floor > 0.0) {
            return bad("train.batch_size, lr, grad_clip and scale_floor must be positive".into());
        }
        if !(0.0..0.5).contains(&t.t_eps) || t.c_x < 0.0 || t.c_lambda < 0.0 {
            return bad("train.t_eps must lie in [0, 0.5) and loss weights must be non-negative".into());
        }
        if self.sample.steps == 0 {
            return bad("sample.steps must be positive".into());
        }
        if !(self.eval.sigma > 0.0) || self.eval.clustering_bins == 0 || self.eval.spectral_bins == 0 {
            return bad("eval.sigma and bin counts must be positive".into());
        }
        crate::pipeline::TimeWindows::from_splits(w.horizon, &w.splits).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
