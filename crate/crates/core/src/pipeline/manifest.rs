use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::GenerationParams;
use crate::ingest::sha256_hex;
use crate::model::{EvidenceConfiguration, LabelRegime};

/// Provenance written next to every prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    /// `"subclaim"` or `"claim"`.
    pub level: String,
    pub dataset_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configuration: Option<EvidenceConfiguration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<LabelRegime>,
    pub template_name: String,
    pub template_hash: String,
    pub backend_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<GenerationParams>,
    pub seeds: Vec<u64>,
    pub lenient_parse: bool,
    /// Hash of the sub-claim prediction file feeding a predicted regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_source_hash: Option<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// SHA-256 of the pretty JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Conventional manifest path for a prediction file: `<file>.manifest.json`.
    pub fn path_for(predictions: impl AsRef<Path>) -> std::path::PathBuf {
        let mut s = predictions.as_ref().as_os_str().to_owned();
        s.push(".manifest.json");
        s.into()
    }
}
