//! JSON model file. Fields appear in this order: `version`, `layer_dims`,
//! `activation`, `output_activation`, `scalers` (`input` then `target`, each
//! with `shift` and `scale`), `weights` (one row-major matrix per layer,
//! rows indexed by output unit) and `biases`.

use serde::{Deserialize, Serialize};

use super::{Activation, MlpError, MlpParams, OutputActivation, ScalerPair};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u64,
    layer_dims: Vec<usize>,
    activation: Activation,
    output_activation: OutputActivation,
    scalers: ScalerPair,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

pub fn save(params: &MlpParams, scalers: &ScalerPair) -> Vec<u8> {
    let file = ModelFile {
        version: FORMAT_VERSION,
        layer_dims: params.layer_dims.clone(),
        activation: params.activation,
        output_activation: params.output_activation,
        scalers: scalers.clone(),
        weights: params.weights.clone(),
        biases: params.biases.clone(),
    };
    serde_json::to_vec(&file).expect("model serializes")
}

pub fn load(bytes: &[u8]) -> Result<(MlpParams, ScalerPair), MlpError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| MlpError::Corrupt(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| MlpError::Corrupt("missing version".into()))?;
    if version > FORMAT_VERSION {
        return Err(MlpError::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| MlpError::Corrupt(e.to_string()))?;
    let params = MlpParams {
        layer_dims: file.layer_dims,
        activation: file.activation,
        output_activation: file.output_activation,
        weights: file.weights,
        biases: file.biases,
    };
    params.check_shapes().map_err(|e| MlpError::Corrupt(e.to_string()))?;
    if params.to_flat().iter().any(|w| !w.is_finite()) {
        return Err(MlpError::Corrupt("non-finite parameter".into()));
    }
    let s = &file.scalers;
    if !s.input.is_valid()
        || !s.target.is_valid()
        || s.input.dim() != params.input_dim()
        || s.target.dim() != params.output_dim()
    {
        return Err(MlpError::Corrupt("scaler does not fit the network".into()));
    }
    Ok((params, file.scalers))
}
