//! Labelled sample files: JSON with each bit string packed as hex.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spoofsim_core::finite_math::BitString;

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Length in bits; the hex may carry up to seven padding bits.
    pub len: usize,
    pub bits: String,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFile {
    pub seed: u64,
    pub samples: Vec<SampleRecord>,
}

impl SampleFile {
    pub fn new(seed: u64, samples: &[(BitString, bool)]) -> Self {
        SampleFile {
            seed,
            samples: samples
                .iter()
                .map(|(b, y)| SampleRecord {
                    len: b.len(),
                    bits: hex::encode(b.to_packed()),
                    label: *y,
                })
                .collect(),
        }
    }

    pub fn decode(&self) -> Result<Vec<(BitString, bool)>, HarnessError> {
        self.samples
            .iter()
            .map(|r| {
                let bytes = hex::decode(&r.bits).map_err(|e| HarnessError::Config(format!("sample hex: {e}")))?;
                Ok((BitString::from_packed(&bytes, r.len)?, r.label))
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}
