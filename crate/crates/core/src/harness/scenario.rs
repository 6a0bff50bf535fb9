use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{brazil_a_profile, ChannelProfile};
use crate::error::{Error, Result};
use crate::estimation::{EstimatorKind, NnHyper};
use crate::sysconfig::{mode_params, toy_params, QamOrder, SystemParams, TransmissionMode};

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Identity channel; only noise is added.
    Awgn,
    BrazilA,
    /// Profile loaded from a JSON path list.
    Custom(Vec<crate::channel::PathSpec>),
}

impl ChannelModel {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelModel::Awgn => "awgn",
            ChannelModel::BrazilA => "brazil_a",
            ChannelModel::Custom(_) => "custom",
        }
    }

    pub fn profile(&self, sample_rate: f64) -> Result<ChannelProfile> {
        match self {
            ChannelModel::Awgn => Ok(ChannelProfile::identity()),
            ChannelModel::BrazilA => brazil_a_profile(sample_rate),
            ChannelModel::Custom(paths) => ChannelProfile::from_paths(paths, sample_rate),
        }
    }
}

/// Everything a trial needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub channel: ChannelModel,
    pub snr_db: f64,
    pub estimator: EstimatorKind,
    pub nn: NnHyper,
    pub seed: u64,
    pub min_errors: u64,
    pub max_bits: u64,
    pub symbols_per_frame: usize,
    /// Symbols averaged into each raw pilot estimate.
    pub pilot_window: usize,
}

impl Scenario {
    pub fn new(params: SystemParams, channel: ChannelModel, estimator: EstimatorKind) -> Self {
        Self {
            params,
            channel,
            snr_db: f64::INFINITY,
            estimator,
            nn: NnHyper::default(),
            seed: 0,
            min_errors: 100,
            max_bits: 2_000_000,
            symbols_per_frame: 16,
            pilot_window: 1,
        }
    }

    pub fn bits_per_frame(&self) -> u64 {
        (self.params.data_carriers * self.symbols_per_frame * self.params.bits_per_symbol()) as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.nn.validate()?;
        if self.snr_db.is_nan() {
            return Err(Error::Config("SNR is NaN".into()));
        }
        if self.min_errors < 1 {
            return Err(Error::Config("min_errors must be at least 1".into()));
        }
        if self.symbols_per_frame == 0 {
            return Err(Error::Config("symbols_per_frame must be at least 1".into()));
        }
        if self.pilot_window == 0 || self.pilot_window > self.symbols_per_frame {
            return Err(Error::Config(format!(
                "pilot_window must be in 1..={}, got {}",
                self.symbols_per_frame, self.pilot_window
            )));
        }
        if self.max_bits < self.bits_per_frame() {
            return Err(Error::Config(format!(
                "max_bits {} is below the {} bits of one frame",
                self.max_bits,
                self.bits_per_frame()
            )));
        }
        Ok(())
    }

    /// Parses a scenario file. Relative profile paths resolve against `base`.
    pub fn from_json_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_scenario(base)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, path.parent())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {
    pub m: usize,
    pub occupied: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelType {
    Awgn,
    BrazilA,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(rename = "type")]
    pub kind: ChannelType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_file: Option<PathBuf>,
}

fn default_qam() -> QamOrder {
    QamOrder::Qam4
}

fn default_min_errors() -> u64 {
    100
}

fn default_max_bits() -> u64 {
    2_000_000
}

fn default_symbols() -> usize {
    16
}

fn default_window() -> usize {
    1
}

/// On-disk scenario. Exactly one of `mode` and `toy` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<TransmissionMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToySpec>,
    #[serde(default = "default_qam")]
    pub qam_order: QamOrder,
    pub channel: ChannelSpec,
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub nn: NnHyper,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    #[serde(default = "default_symbols")]
    pub symbols_per_frame: usize,
    #[serde(default = "default_window")]
    pub pilot_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl ScenarioFile {
    pub fn into_scenario(self, base: Option<&Path>) -> Result<Scenario> {
        let params = match (self.mode, &self.toy) {
            (Some(mode), None) => mode_params(mode).with_qam(self.qam_order),
            (None, Some(t)) => toy_params(t.m, t.occupied, self.qam_order)?,
            _ => return Err(Error::Config("give exactly one of 'mode' and 'toy'".into())),
        };
        let channel = match (self.channel.kind, self.channel.profile_file) {
            (ChannelType::Awgn, None) => ChannelModel::Awgn,
            (ChannelType::BrazilA, None) => ChannelModel::BrazilA,
            (ChannelType::Custom, Some(file)) => {
                let path = match base {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file,
                };
                let text = std::fs::read_to_string(&path)?;
                ChannelModel::Custom(serde_json::from_str(&text)?)
            }
            (ChannelType::Custom, None) => {
                return Err(Error::Config("custom channel needs 'profile_file'".into()))
            }
            (_, Some(_)) => {
                return Err(Error::Config(
                    "'profile_file' only applies to the custom channel".into(),
                ))
            }
        };
        let scenario = Scenario {
            params,
            channel,
            snr_db: self.snr_db.unwrap_or(f64::INFINITY),
            estimator: self.estimator,
            nn: self.nn,
            seed: self.seed,
            min_errors: self.min_errors,
            max_bits: self.max_bits,
            symbols_per_frame: self.symbols_per_frame,
            pilot_window: self.pilot_window,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
