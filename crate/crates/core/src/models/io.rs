//! Versioned JSON container for trained parameters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Hyperparams, ModelParams, NamedTensor, Variant};
use crate::error::{Error, Result};
use crate::features::FEATURE_SCHEMA;

pub const MODEL_FORMAT: &str = "stpkit-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    variant: Variant,
    init_seed: u64,
    hyper: Hyperparams,
    tensors: Vec<NamedTensor>,
}

pub fn model_to_json(params: &ModelParams) -> Result<String> {
    let c = Container {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_FORMAT_VERSION,
        variant: params.variant,
        init_seed: params.init_seed,
        hyper: params.hyper.clone(),
        tensors: params.tensors.clone(),
    };
    Ok(serde_json::to_string_pretty(&c)?)
}

pub fn model_from_json(text: &str) -> Result<ModelParams> {
    let c: Container = serde_json::from_str(text)?;
    if c.format != MODEL_FORMAT {
        return Err(Error::Model(format!(
            "not a model file (format {:?})",
            c.format
        )));
    }
    if c.version != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            c.version
        )));
    }
    if c.hyper.feature_schema != FEATURE_SCHEMA {
        return Err(Error::SchemaMismatch {
            expected: c.hyper.feature_schema,
            found: FEATURE_SCHEMA.to_string(),
        });
    }
    let params = ModelParams {
        variant: c.variant,
        hyper: c.hyper,
        tensors: c.tensors,
        init_seed: c.init_seed,
    };
    params.validate()?;
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(params)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    model_from_json(&fs::read_to_string(path)?)
}
