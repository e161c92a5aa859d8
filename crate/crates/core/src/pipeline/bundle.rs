//! JSON bundle holding both warm-start networks, the optional baseline and
//! the fingerprint of the network they were trained for. Each network is
//! embedded in the single-model file layout of [`crate::mlp::save`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::mlp;
use crate::network::Network;

use super::{check_fingerprint, BaselineModel, PipelineError, Regressor, TrainedPipeline};

pub const BUNDLE_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    version: u64,
    fingerprint: String,
    dual_net: Value,
    lagrangian_net: Value,
    baseline: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub pipeline: TrainedPipeline,
    pub baseline: Option<BaselineModel>,
}

fn encode(r: &Regressor) -> Value {
    serde_json::from_slice(&mlp::save(&r.params, &r.scalers)).expect("model file is JSON")
}

fn decode(v: &Value) -> Result<Regressor, PipelineError> {
    let bytes = serde_json::to_vec(v).map_err(|e| PipelineError::Bundle(e.to_string()))?;
    let (params, scalers) = mlp::load(&bytes)?;
    Ok(Regressor { params, scalers })
}

impl ModelBundle {
    pub fn to_bytes(&self) -> Vec<u8> {
        let file = BundleFile {
            version: BUNDLE_VERSION,
            fingerprint: self.pipeline.net_fingerprint.clone(),
            dual_net: encode(&self.pipeline.dual_net),
            lagrangian_net: encode(&self.pipeline.lagrangian_net),
            baseline: self.baseline.as_ref().map(|b| encode(&b.regressor)),
        };
        serde_json::to_vec_pretty(&file).expect("bundle serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PipelineError> {
        let file: BundleFile = serde_json::from_slice(bytes).map_err(|e| PipelineError::Bundle(e.to_string()))?;
        if file.version > BUNDLE_VERSION {
            return Err(PipelineError::Bundle(format!(
                "version {} is newer than supported version {BUNDLE_VERSION}",
                file.version
            )));
        }
        let baseline = match &file.baseline {
            Some(v) => Some(BaselineModel {
                regressor: decode(v)?,
                net_fingerprint: file.fingerprint.clone(),
            }),
            None => None,
        };
        Ok(Self {
            pipeline: TrainedPipeline {
                dual_net: decode(&file.dual_net)?,
                lagrangian_net: decode(&file.lagrangian_net)?,
                net_fingerprint: file.fingerprint,
            },
            baseline,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a bundle and refuses it unless it was trained for `net`.
    pub fn load_for(path: &Path, net: &Network) -> Result<Self, PipelineError> {
        let b = Self::from_bytes(&std::fs::read(path)?)?;
        check_fingerprint(net, &b.pipeline.net_fingerprint)?;
        Ok(b)
    }
}
