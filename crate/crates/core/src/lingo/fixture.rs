use std::collections::HashMap;
use std::path::Path;

use super::{Annotation, AnalysisError, AnnotatorProvider};

/// Table-driven provider: exact text -> annotation, with an optional
/// fallback for texts missing from the table.
pub struct FixtureProvider {
    table: HashMap<String, Annotation>,
    fallback: Option<Box<dyn AnnotatorProvider>>,
}

impl FixtureProvider {
    pub fn new(table: HashMap<String, Annotation>) -> Self {
        FixtureProvider { table, fallback: None }
    }

    /// Reads a JSON object mapping texts to annotations.
    pub fn from_json(json: &str) -> Result<Self, AnalysisError> {
        let table: HashMap<String, Annotation> = serde_json::from_str(json)
            .map_err(|e| AnalysisError::provider("fixture", format!("bad fixture table: {e}")))?;
        for (text, ann) in &table {
            ann.validate(text)?;
        }
        Ok(FixtureProvider::new(table))
    }

    pub fn from_path(path: &Path) -> Result<Self, AnalysisError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| AnalysisError::provider("fixture", format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn with_fallback(mut self, fallback: Box<dyn AnnotatorProvider>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, annotation: Annotation) {
        self.table.insert(text.into(), annotation);
    }
}

impl AnnotatorProvider for FixtureProvider {
    fn name(&self) -> &str {
        "fixture"
    }

    fn annotate(&self, text: &str) -> Result<Annotation, AnalysisError> {
        if let Some(ann) = self.table.get(text) {
            return Ok(ann.clone());
        }
        match &self.fallback {
            Some(fallback) => fallback.annotate(text),
            None => Err(AnalysisError::provider("fixture", format!("no fixture entry for {text:?}"))),
        }
    }
}
