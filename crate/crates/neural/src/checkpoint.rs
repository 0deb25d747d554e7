//! JSON checkpoints: a kind tag, the model config, and named tensors.
//! Floats are written in shortest round-trip form, so load∘save is exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::params::Params;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub kind: String,
    pub params: BTreeMap<String, Tensor>,
    /// Row labels for lookup tables (e.g. embedding terms).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
}

impl Checkpoint {
    pub fn capture<P: Params, C: Serialize>(kind: &str, config: &C, model: &P) -> Self {
        let mut params = BTreeMap::new();
        model.visit(&mut |name, t| {
            params.insert(name.to_owned(), t.clone());
        });
        Checkpoint {
            config: serde_json::to_value(config).expect("configs serialize"),
            kind: kind.to_owned(),
            params,
            vocabulary: Vec::new(),
        }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(NeuralError::checkpoint(
                "kind",
                format!("expected a `{kind}` checkpoint, found `{}`", self.kind),
            ))
        }
    }

    /// Removes a tensor that is not part of the trainable parameters.
    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        self.params
            .remove(name)
            .ok_or_else(|| NeuralError::checkpoint(format!("params.{name}"), "missing"))
    }

    pub fn config<C: for<'de> Deserialize<'de>>(&self) -> Result<C> {
        serde_json::from_value(self.config.clone())
            .map_err(|e| NeuralError::checkpoint("config", e.to_string()))
    }

    /// Copies every named tensor into `model`, which must already have the
    /// right shapes. Missing or extra names are errors.
    pub fn restore<P: Params>(&self, model: &mut P) -> Result<()> {
        let mut error = None;
        let mut seen = 0;
        model.visit_mut(&mut |name, t| {
            if error.is_some() {
                return;
            }
            match self.params.get(name) {
                Some(saved) if saved.shape == t.shape && saved.data.len() == t.data.len() => {
                    t.data.copy_from_slice(&saved.data);
                    seen += 1;
                }
                Some(saved) => {
                    error = Some(NeuralError::checkpoint(
                        format!("params.{name}"),
                        format!("shape {:?} does not match model shape {:?}", saved.shape, t.shape),
                    ))
                }
                None => error = Some(NeuralError::checkpoint(format!("params.{name}"), "missing")),
            }
        });
        if let Some(e) = error {
            return Err(e);
        }
        if seen != self.params.len() {
            return Err(NeuralError::checkpoint(
                "params",
                format!("{} tensors in file, model uses {seen}", self.params.len()),
            ));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoints serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(json: &str, origin: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(json).map_err(|e| {
            NeuralError::checkpoint(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string())
        })?;
        for (name, t) in &ckpt.params {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(NeuralError::checkpoint(
                    format!("{origin}: params.{name}"),
                    "data length does not match shape",
                ));
            }
        }
        Ok(ckpt)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| ontoshop_core::Error::io(path, e))?;
        Checkpoint::from_json_str(&json, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| ontoshop_core::Error::io(path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Dense;

    #[test]
    fn exact_float_round_trip() {
        let mut d = Dense::zeros(3, 2);
        d.weight.data = vec![0.1, 1.0 / 3.0, -2.5e-300, 1e300, f64::MIN_POSITIVE, 0.30000000000000004];
        let ckpt = Checkpoint::capture("dense", &serde_json::json!({"n": 1}), &d);
        let json = ckpt.to_json_string();
        let back = Checkpoint::from_json_str(&json, "mem").unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_json_string(), json);
        let mut restored = Dense::zeros(3, 2);
        back.restore(&mut restored).unwrap();
        assert_eq!(restored, d);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let ckpt = Checkpoint::capture("dense", &(), &Dense::zeros(3, 2));
        assert!(ckpt.restore(&mut Dense::zeros(2, 2)).is_err());
        assert!(ckpt.expect_kind("cnn").is_err());
        let bad = r#"{"config":null,"kind":"x","params":{"w":{"shape":[2],"data":[1.0]}}}"#;
        assert!(Checkpoint::from_json_str(bad, "mem").is_err());
    }
}
