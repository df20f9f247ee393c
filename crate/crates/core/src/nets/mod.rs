//! Feedforward networks and the structured dissipative force.

mod dissipative;
pub mod linalg;
mod mlp;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dissipative::{dissipative_force, dissipative_output_dim, DissipativeForceModel, RawForceModel};
pub use linalg::{hat, orthogonal_exp, skew_dim, skew_from_coords, vee};
pub use mlp::{init_params, mlp_forward, param_count, Activation, MlpArchitecture, MlpModel};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "scalar_G")]
    ScalarG,
    #[serde(rename = "dissipative_force")]
    DissipativeForce,
    #[serde(rename = "raw_force")]
    RawForce,
}

/// On-disk network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub arch: MlpArchitecture,
    pub params: Vec<f64>,
    pub kind: ModelKind,
    /// Velocity dimension of a dissipative force.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub antisymmetric: bool,
}

impl ModelFile {
    pub fn scalar(m: &MlpModel) -> Self {
        ModelFile {
            arch: m.arch().clone(),
            params: m.params().to_vec(),
            kind: ModelKind::ScalarG,
            n: None,
            antisymmetric: false,
        }
    }

    pub fn dissipative(m: &DissipativeForceModel) -> Self {
        ModelFile {
            arch: m.net().arch().clone(),
            params: m.net().params().to_vec(),
            kind: ModelKind::DissipativeForce,
            n: Some(m.n()),
            antisymmetric: m.antisymmetric(),
        }
    }

    pub fn raw(m: &RawForceModel) -> Self {
        ModelFile {
            arch: m.net().arch().clone(),
            params: m.net().params().to_vec(),
            kind: ModelKind::RawForce,
            n: None,
            antisymmetric: false,
        }
    }

    pub fn model(&self) -> Result<MlpModel> {
        MlpModel::new(self.arch.clone(), self.params.clone())
    }

    pub fn into_scalar(&self) -> Result<MlpModel> {
        if self.kind != ModelKind::ScalarG || self.arch.output != 1 {
            return Err(Error::Invalid("model file does not hold a scalar network".into()));
        }
        self.model()
    }

    pub fn into_dissipative(&self) -> Result<DissipativeForceModel> {
        if self.kind != ModelKind::DissipativeForce {
            return Err(Error::Invalid("model file does not hold a dissipative force".into()));
        }
        let n = match self.n {
            Some(n) => n,
            None => (1..=self.arch.output)
                .find(|&n| dissipative_output_dim(n, self.antisymmetric) == self.arch.output)
                .ok_or_else(|| Error::Invalid("output width fits no velocity dimension".into()))?,
        };
        DissipativeForceModel::new(self.model()?, n, self.antisymmetric)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_roundtrip() {
        let arch = MlpArchitecture::new(4, vec![3], 6);
        let m = DissipativeForceModel::new(MlpModel::random(arch, 4).unwrap(), 3, false).unwrap();
        let f = ModelFile::dissipative(&m);
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"kind\":\"dissipative_force\""));
        assert!(text.contains("\"activation\":\"sigmoid\""));
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_dissipative().unwrap(), m);
    }

    #[test]
    fn minimal_file_parses() {
        let text = r#"{"arch":{"input":1,"hidden":[],"output":1},"params":[2.0,0.5],"kind":"scalar_G"}"#;
        let m = serde_json::from_str::<ModelFile>(text).unwrap().into_scalar().unwrap();
        assert_eq!(mlp_forward(&m, &[3.0]).unwrap(), vec![6.5]);
    }
}
