//! Resolves scorer and annotator ids to built-ins or external processes.
//!
//! A registry file is JSON:
//!
//! ```json
//! {
//!   "scorers":   { "bart": { "kind": "process", "program": "python3", "args": ["score.py"], "batch": true } },
//!   "providers": { "srl":  { "kind": "fixture", "path": "annotations.json", "fallback": "heuristic" } }
//! }
//! ```
//!
//! Relative paths are taken relative to the registry file. Ids that are not
//! listed fall back to the built-ins: scorers `mock`, `mock:TABLE.json`,
//! `overlap`; providers `heuristic`, `fixture:ANNOTATIONS.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enderanker::{MockScorer, OverlapScorer, ProcessScorer, SequenceScorer};
use crate::lingo::{AnnotatorProvider, FixtureProvider, HeuristicProvider, ProcessProvider};

pub const REGISTRY_ENV: &str = "DIALFACT_REGISTRY";
pub const DEFAULT_REGISTRY_FILE: &str = "dialfact-registry.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerEntry {
    Mock {
        #[serde(default)]
        table: Option<PathBuf>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Overlap,
    Process {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        batch: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderEntry {
    Heuristic,
    Fixture {
        path: PathBuf,
        /// Provider id used for texts missing from the table.
        #[serde(default)]
        fallback: Option<String>,
    },
    Process {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    #[serde(default)]
    pub scorers: BTreeMap<String, ScorerEntry>,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderEntry>,
    #[serde(skip)]
    base: PathBuf,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("registry {path}: {message}")]
    File { path: String, message: String },
    #[error("unknown scorer id `{0}`")]
    UnknownScorer(String),
    #[error("unknown provider id `{0}`")]
    UnknownProvider(String),
    #[error("provider `{0}` falls back onto itself")]
    FallbackCycle(String),
    #[error("cannot start `{id}`: {message}")]
    Start { id: String, message: String },
}

impl Registry {
    pub fn from_json(json: &str, base: &Path) -> Result<Self, RegistryError> {
        let mut r: Registry = serde_json::from_str(json)
            .map_err(|e| RegistryError::File { path: base.display().to_string(), message: e.to_string() })?;
        r.base = base.to_path_buf();
        Ok(r)
    }

    pub fn from_path(path: &Path) -> Result<Self, RegistryError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| RegistryError::File { path: path.display().to_string(), message: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&json, &base)
    }

    /// Explicit path, else the environment override, else the default file
    /// in the working directory if present, else built-ins only.
    pub fn locate(explicit: Option<&Path>) -> Result<Self, RegistryError> {
        if let Some(p) = explicit {
            return Self::from_path(p);
        }
        if let Some(p) = std::env::var_os(REGISTRY_ENV).filter(|v| !v.is_empty()) {
            return Self::from_path(Path::new(&p));
        }
        let default = Path::new(DEFAULT_REGISTRY_FILE);
        if default.exists() {
            return Self::from_path(default);
        }
        Ok(Registry::default())
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn scorer(&self, id: &str) -> Result<Arc<dyn SequenceScorer>, RegistryError> {
        let start = |e: &dyn std::fmt::Display| RegistryError::Start { id: id.to_string(), message: e.to_string() };
        let entry = match self.scorers.get(id) {
            Some(e) => e.clone(),
            None => match id.split_once(':') {
                None if id == "mock" => ScorerEntry::Mock { table: None, seed: None },
                None if id == "overlap" => ScorerEntry::Overlap,
                Some(("mock", path)) => ScorerEntry::Mock { table: Some(PathBuf::from(path)), seed: None },
                _ => return Err(RegistryError::UnknownScorer(id.to_string())),
            },
        };
        Ok(match entry {
            ScorerEntry::Mock { table: Some(t), .. } => {
                let path = if self.scorers.contains_key(id) { self.resolve_path(&t) } else { t };
                Arc::new(MockScorer::from_path(&path).map_err(|e| start(&e))?)
            }
            ScorerEntry::Mock { table: None, seed } => Arc::new(MockScorer::hashed(seed.unwrap_or(0))),
            ScorerEntry::Overlap => Arc::new(OverlapScorer),
            ScorerEntry::Process { program, args, batch } => {
                Arc::new(ProcessScorer::spawn(id, &program, &args, batch).map_err(|e| start(&e))?)
            }
        })
    }

    pub fn provider(&self, id: &str) -> Result<Arc<dyn AnnotatorProvider>, RegistryError> {
        self.provider_boxed(id, 0).map(Arc::from)
    }

    fn provider_boxed(&self, id: &str, depth: usize) -> Result<Box<dyn AnnotatorProvider>, RegistryError> {
        if depth > self.providers.len() + 1 {
            return Err(RegistryError::FallbackCycle(id.to_string()));
        }
        let start = |e: &dyn std::fmt::Display| RegistryError::Start { id: id.to_string(), message: e.to_string() };
        let (entry, listed) = match self.providers.get(id) {
            Some(e) => (e.clone(), true),
            None => match id.split_once(':') {
                None if id == "heuristic" => (ProviderEntry::Heuristic, false),
                Some(("fixture", path)) => {
                    (ProviderEntry::Fixture { path: PathBuf::from(path), fallback: Some("heuristic".into()) }, false)
                }
                _ => return Err(RegistryError::UnknownProvider(id.to_string())),
            },
        };
        Ok(match entry {
            ProviderEntry::Heuristic => Box::new(HeuristicProvider::new()),
            ProviderEntry::Fixture { path, fallback } => {
                let path = if listed { self.resolve_path(&path) } else { path };
                let mut p = FixtureProvider::from_path(&path).map_err(|e| start(&e))?;
                if let Some(f) = fallback {
                    if f == id {
                        return Err(RegistryError::FallbackCycle(id.to_string()));
                    }
                    p = p.with_fallback(self.provider_boxed(&f, depth + 1)?);
                }
                Box::new(p)
            }
            ProviderEntry::Process { program, args } => {
                Box::new(ProcessProvider::spawn(id, &program, &args).map_err(|e| start(&e))?)
            }
        })
    }
}
