//! JSON interchange format for a single circuit: genome, vocabulary,
//! re-upload layout and (optionally) trained parameters.

use std::f64::consts::PI;
use std::path::Path;

use questa_core::circuit::{build_reupload, CircuitError, CircuitGenome, CompiledCircuit, GateVocabulary, ReuploadTemplate};
use questa_core::training::ParameterVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    #[serde(default)]
    pub vocabulary: GateVocabulary,
    pub genome: CircuitGenome,
    #[serde(default = "one")]
    pub reuploads: usize,
    #[serde(default)]
    pub features: usize,
    #[serde(default = "pi")]
    pub scale: f64,
    #[serde(default)]
    pub tie_parameters: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParameterVector>,
}

fn one() -> usize {
    1
}

fn pi() -> f64 {
    PI
}

impl CircuitFile {
    pub fn new(genome: CircuitGenome, vocabulary: GateVocabulary, template: &ReuploadTemplate) -> Self {
        Self {
            vocabulary,
            genome,
            reuploads: template.reuploads,
            features: template.features,
            scale: template.scale,
            tie_parameters: template.tie_parameters,
            params: None,
        }
    }

    /// Parses and checks that the genome fits the vocabulary and layout.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: CircuitFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        file.compile().map_err(|e| e.to_string())?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn template(&self) -> ReuploadTemplate {
        ReuploadTemplate {
            reuploads: self.reuploads,
            features: self.features,
            scale: self.scale,
            tie_parameters: self.tie_parameters,
        }
    }

    pub fn compile(&self) -> Result<CompiledCircuit, CircuitError> {
        build_reupload(&self.genome, &self.vocabulary, &self.template())
    }
}
