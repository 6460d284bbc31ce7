//! Versioned JSON envelope for trained models.
//!
//! Floats are written in shortest round-trip form, so a saved model loads
//! back bit-identical.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "jd2p-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEnvelope<M> {
    pub format: String,
    pub version: u32,
    pub model: M,
}

pub fn to_json<M: Serialize>(model: &M) -> Result<String> {
    let env = ModelEnvelope {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_FORMAT_VERSION,
        model,
    };
    Ok(serde_json::to_string(&env)?)
}

pub fn from_json<M: DeserializeOwned>(text: &str) -> Result<M> {
    let env: ModelEnvelope<M> = serde_json::from_str(text)?;
    if env.format != MODEL_FORMAT {
        return Err(Error::Config(format!("not a model file: format {:?}", env.format)));
    }
    if env.version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(env.version));
    }
    Ok(env.model)
}

pub fn save_model<M: Serialize>(model: &M, path: impl AsRef<Path>) -> Result<()> {
    let text = to_json(model)?;
    fs::write(path.as_ref(), text).map_err(|e| Error::io(path, e))
}

pub fn load_model<M: DeserializeOwned>(path: impl AsRef<Path>) -> Result<M> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LinearSvm, Mlp};
    use ndarray::array;

    #[test]
    fn svm_round_trip_is_exact() {
        let svm = LinearSvm::new(array![0.1 + 0.2, -1.0 / 3.0], std::f64::consts::PI);
        let back: LinearSvm<f64> = from_json(&to_json(&svm).unwrap()).unwrap();
        assert_eq!(back, svm);
    }

    #[test]
    fn mlp_round_trip_through_file() {
        let net = Mlp::<f32>::new(5, &[7, 3], 4, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_model(&net, &path).unwrap();
        let back: Mlp<f32> = load_model(&path).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_future_version() {
        let text = r#"{"format":"jd2p-model","version":99,"model":{"w":{"v":1,"dim":[1],"data":[1.0]},"b":0.0}}"#;
        assert!(matches!(
            from_json::<LinearSvm<f64>>(text),
            Err(Error::UnsupportedVersion(99))
        ));
    }
}
