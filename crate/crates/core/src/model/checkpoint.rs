use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassifierParams, ModelError};

pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema: u32,
    checksum: String,
    params: ClassifierParams,
}

fn digest(params: &ClassifierParams) -> Result<String, ModelError> {
    let body = serde_json::to_string(params).map_err(|e| ModelError::Format(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(body.as_bytes())))
}

pub fn save_checkpoint(path: &Path, params: &ClassifierParams) -> Result<(), ModelError> {
    let env = Envelope {
        schema: CHECKPOINT_SCHEMA,
        checksum: digest(params)?,
        params: params.clone(),
    };
    let text = serde_json::to_string(&env).map_err(|e| ModelError::Format(e.to_string()))?;
    fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ClassifierParams, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let env: Envelope =
        serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
    if env.schema != CHECKPOINT_SCHEMA {
        return Err(ModelError::Format(format!(
            "unsupported schema {}",
            env.schema
        )));
    }
    if digest(&env.params)? != env.checksum {
        return Err(ModelError::Checksum);
    }
    let p = env.params;
    let s = p.shape;
    s.validate()?;
    let expected = [
        s.vocab_size * s.embed_dim,
        s.hidden_dim * s.input_width(),
        s.hidden_dim,
        s.num_classes * s.hidden_dim,
        s.num_classes,
    ];
    for (t, n) in p.tensors().iter().zip(expected) {
        if t.len() != n {
            return Err(ModelError::Format(
                "tensor size does not match shape".into(),
            ));
        }
    }
    if !p.is_finite() {
        return Err(ModelError::Format("non-finite parameter".into()));
    }
    Ok(p)
}
