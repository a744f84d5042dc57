//! JSON model documents.
//!
//! A document is an object tagged by `"model"`:
//!
//! ```json
//! {"model": "km", "feature_names": [...], "curve": {"times": [...], "probs": [...]}}
//! {"model": "cox", "beta": [...], "baseline": {...}, "feature_names": [...], ...}
//! {"model": "forest", "trees": [...], "inbag": [[...]], "config": {...}, ...}
//! {"model": "binary-forest", "trees": [...], "inbag": [[...]], "config": {...}, ...}
//! ```
//!
//! Tree nodes are `{"internal": {"feature", "threshold", "p_value", "left",
//! "right"}}` or `{"terminal": {...}}` with the node's members, weights,
//! risk profile and Kaplan-Meier curve.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use survivalkit_core::cox::CoxModel;
use survivalkit_core::forest::{BinaryForest, SurvivalForest};
use survivalkit_core::SurvivalCurve;

use crate::error::Result;
use crate::io::{create, open};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelDocument {
    Km { feature_names: Vec<String>, curve: SurvivalCurve },
    Cox(CoxModel),
    Forest(SurvivalForest),
    BinaryForest(BinaryForest),
}

impl ModelDocument {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelDocument::Km { .. } => "km",
            ModelDocument::Cox(_) => "cox",
            ModelDocument::Forest(_) => "forest",
            ModelDocument::BinaryForest(_) => "binary-forest",
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            ModelDocument::Km { feature_names, .. } => feature_names,
            ModelDocument::Cox(m) => &m.feature_names,
            ModelDocument::Forest(f) => &f.feature_names,
            ModelDocument::BinaryForest(f) => &f.feature_names,
        }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        self.write(&mut w)?;
        w.flush().map_err(|e| crate::Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(open(path)?)
    }
}
