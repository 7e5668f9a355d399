//! Run configuration file (TOML).
//!
//! ```toml
//! [run]
//! f = 4
//! prep = "zero_x"
//! od = 300.0
//! duration = 3.0
//!
//! [channel]
//! flip_noise = 1.0
//! transfer_weight = 0.95
//! chain_rule = "same_as_flip"
//!
//! [sweep]
//! f = [1, 2, 3, 4]
//! prep = ["scs", "cat", "zero_x"]
//! od = [300.0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use squeeze_core::decoherence::{ChannelConfig, ThirdStatePolicy};
use squeeze_core::protocol::DetuningMetadata;
use squeeze_core::{Error, FinalMap, Preparation, ProtocolConfig, ProtocolKind, Result, SpinQuantum};

fn default_dt() -> f64 {
    1e-3
}

fn default_policy() -> ThirdStatePolicy {
    ThirdStatePolicy::Retain
}

fn default_final_map() -> FinalMap {
    FinalMap::ScsTarget
}

fn default_protocol() -> ProtocolKind {
    ProtocolKind::Countertwist
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub f: SpinQuantum,
    pub prep: Preparation,
    pub od: f64,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_policy")]
    pub policy: ThirdStatePolicy,
    #[serde(default = "default_final_map")]
    pub final_map: FinalMap,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_protocol")]
    pub protocol: ProtocolKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub f: Vec<SpinQuantum>,
    #[serde(default)]
    pub prep: Vec<Preparation>,
    #[serde(default)]
    pub od: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub run: RunSection,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<DetuningMetadata>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn protocol(&self) -> ProtocolConfig {
        let r = &self.run;
        ProtocolConfig {
            f: r.f,
            prep: r.prep,
            od: r.od,
            duration: r.duration,
            dt: r.dt,
            policy: r.policy,
            final_map: r.final_map,
            alpha: r.alpha,
            protocol: r.protocol,
            channel: self.channel.clone(),
            detuning: self.detuning.clone(),
        }
    }

    /// Sweep axes with missing entries filled from `[run]`.
    pub fn axes(&self) -> Result<SweepAxes> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
        let axes = SweepAxes {
            f: if s.f.is_empty() { vec![self.run.f] } else { s.f.clone() },
            prep: if s.prep.is_empty() { vec![self.run.prep] } else { s.prep.clone() },
            od: if s.od.is_empty() { vec![self.run.od] } else { s.od.clone() },
        };
        if let Some(od) = axes.od.iter().find(|o| !(o.is_finite() && **o >= 0.0)) {
            return Err(Error::Config(format!("sweep od = {od} must be ≥ 0")));
        }
        Ok(axes)
    }
}
