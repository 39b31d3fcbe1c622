use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use mortrisk::cohort::FeatureSchema;
use mortrisk::models::{load_model, TrainedModel};

use crate::ServiceError;

#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub model: TrainedModel,
    /// Modification time of the artifact file, when loaded from disk.
    pub trained_at: Option<String>,
}

/// Read-only set of models keyed by family tag, all sharing one schema.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    entries: BTreeMap<String, RegistryEntry>,
    schema: Option<FeatureSchema>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        ModelRegistry::default()
    }

    pub fn insert(&mut self, model: TrainedModel, trained_at: Option<String>) -> Result<(), ServiceError> {
        let tag = model.family.tag().to_string();
        if self.entries.contains_key(&tag) {
            return Err(ServiceError::Registry(format!("two artifacts for model `{tag}`")));
        }
        match &self.schema {
            Some(s) if *s != model.schema => {
                return Err(ServiceError::Registry(format!("model `{tag}` uses a different feature schema")));
            }
            Some(_) => {}
            None => self.schema = Some(model.schema.clone()),
        }
        self.entries.insert(tag, RegistryEntry { model, trained_at });
        Ok(())
    }

    pub fn from_models(models: impl IntoIterator<Item = TrainedModel>) -> Result<Self, ServiceError> {
        let mut r = ModelRegistry::new();
        for m in models {
            r.insert(m, None)?;
        }
        Ok(r)
    }

    /// Loads every `*.json` artifact in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, ServiceError> {
        let listing = fs::read_dir(dir).map_err(|e| ServiceError::Registry(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
            .collect();
        paths.sort();
        let mut r = ModelRegistry::new();
        for p in paths {
            let model = match load_model(&p) {
                Ok(m) => m,
                // Manifests and other JSON files share the directory.
                Err(mortrisk::Error::Json(_) | mortrisk::Error::Format(_)) => {
                    tracing::warn!(path = %p.display(), "skipping JSON file that is not a model artifact");
                    continue;
                }
                Err(e) => return Err(ServiceError::Registry(format!("{}: {e}", p.display()))),
            };
            let trained_at = fs::metadata(&p)
                .and_then(|m| m.modified())
                .ok()
                .map(|t| DateTime::<Utc>::from(t).to_rfc3339_opts(SecondsFormat::Secs, true));
            r.insert(model, trained_at)?;
        }
        Ok(r)
    }

    pub fn get(&self, tag: &str) -> Option<&RegistryEntry> {
        self.entries.get(tag)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &RegistryEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn schema(&self) -> Option<&FeatureSchema> {
        self.schema.as_ref()
    }

    /// Keeps at most `size` background rows per model.
    pub fn truncate_background(&mut self, size: usize) {
        for e in self.entries.values_mut() {
            e.model.background.truncate(size.max(1));
        }
    }
}
