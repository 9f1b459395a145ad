use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::relation::Relation;
use crate::error::{Error, Result};

/// Key metadata used to flag pk-fk joins, read from a JSON catalog file:
/// `{"primary_keys": {"orders": ["o_orderkey"], ...}}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct KeyMetadata {
    #[serde(default)]
    pub primary_keys: HashMap<String, Vec<String>>,
}

impl KeyMetadata {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        KeyMetadata::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Named base relations plus key metadata.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    relations: IndexMap<String, Arc<Relation>>,
    keys: KeyMetadata,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn with_keys(mut self, keys: KeyMetadata) -> Self {
        self.keys = keys;
        self
    }

    pub fn set_keys(&mut self, keys: KeyMetadata) {
        self.keys = keys;
    }

    /// Registers a relation under its own name.
    pub fn add(&mut self, rel: Relation) -> Arc<Relation> {
        let rel = Arc::new(rel);
        self.relations.insert(rel.name().to_string(), rel.clone());
        rel
    }

    pub fn add_arc(&mut self, rel: Arc<Relation>) {
        self.relations.insert(rel.name().to_string(), rel);
    }

    pub fn get(&self, name: &str) -> Result<&Arc<Relation>> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relations.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn primary_key(&self, relation: &str) -> Option<&[String]> {
        self.keys.primary_keys.get(relation).map(Vec::as_slice)
    }

    pub fn keys(&self) -> &KeyMetadata {
        &self.keys
    }
}
