use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use crate::{Error, Result};

/// Manipulable object model, abstracted to an upright cylinder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub id: String,
    pub category: String,
    pub footprint_radius: f64,
    pub height: f64,
    #[serde(skip)]
    pub mesh: Option<TriangleMesh>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectLibrary {
    pub models: Vec<ObjectModel>,
}

impl ObjectLibrary {
    pub fn new(models: Vec<ObjectModel>) -> Result<Self> {
        for m in &models {
            if !(m.footprint_radius > 0.0 && m.height > 0.0) {
                return Err(Error::Config(format!("object model {} needs positive extents", m.id)));
            }
        }
        Ok(Self { models })
    }

    pub fn get(&self, id: &str) -> Option<&ObjectModel> {
        self.models.iter().find(|m| m.id == id)
    }

    /// Sorted, de-duplicated category names.
    pub fn categories(&self) -> Vec<String> {
        let mut c: Vec<String> = self.models.iter().map(|m| m.category.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    pub fn models_of<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a ObjectModel> + 'a {
        self.models.iter().filter(move |m| m.category == category)
    }

    pub fn max_radius(&self) -> f64 {
        self.models.iter().map(|m| m.footprint_radius).fold(0.0, f64::max)
    }

    /// A small desk-scale library covering the curated relevance table.
    pub fn default_library() -> Self {
        const SPECS: &[(&str, f64, f64)] = &[
            ("pillow", 0.2, 0.12),
            ("stuffed toy", 0.12, 0.25),
            ("book", 0.1, 0.04),
            ("alarm clock", 0.06, 0.1),
            ("cup", 0.045, 0.1),
            ("mug", 0.05, 0.1),
            ("bowl", 0.08, 0.07),
            ("plate", 0.12, 0.03),
            ("spoon", 0.05, 0.02),
            ("apple", 0.045, 0.08),
            ("laptop", 0.18, 0.03),
            ("remote", 0.08, 0.03),
            ("vase", 0.07, 0.3),
            ("potted plant", 0.1, 0.35),
            ("soap dispenser", 0.04, 0.18),
            ("towel", 0.15, 0.05),
            ("toothbrush", 0.04, 0.15),
            ("dumbbell", 0.12, 0.1),
            ("can", 0.04, 0.12),
            ("cushion", 0.2, 0.15),
        ];
        let mut models = Vec::new();
        for (cat, r, h) in SPECS {
            for (k, s) in [1.0, 0.8].iter().enumerate() {
                models.push(ObjectModel {
                    id: format!("{}_{k}", cat.replace(' ', "_")),
                    category: cat.to_string(),
                    footprint_radius: r * s,
                    height: h * s,
                    mesh: None,
                });
            }
        }
        ObjectLibrary { models }
    }
}
