//! Name-keyed registries of interchangeable strategies.
//!
//! A strategy is looked up by a spec string of the form `name` or
//! `name:arg`; the constructor registered under `name` receives the optional
//! argument and returns a shared trait object.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

type Constructor<T> = Box<dyn Fn(Option<&str>) -> Result<Arc<T>> + Send + Sync>;

struct Entry<T: ?Sized> {
    ctor: Constructor<T>,
    summary: &'static str,
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Entry<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers a constructor, replacing any previous entry with that name.
    pub fn register<F>(&mut self, name: &str, summary: &'static str, ctor: F) -> &mut Self
    where
        F: Fn(Option<&str>) -> Result<Arc<T>> + Send + Sync + 'static,
    {
        self.entries.insert(
            name.to_ascii_lowercase(),
            Entry {
                ctor: Box::new(ctor),
                summary,
            },
        );
        self
    }

    pub fn resolve(&self, spec: &str) -> Result<Arc<T>> {
        let spec = spec.trim();
        let (name, arg) = match spec.split_once(':') {
            Some((name, arg)) => (name, Some(arg.trim())),
            None => (spec, None),
        };
        let entry = self
            .entries
            .get(&name.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Unknown {
                kind: self.kind,
                name: spec.to_string(),
                known: self.names().collect::<Vec<_>>().join(", "),
            })?;
        (entry.ctor)(arg)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn describe(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.summary))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }
}

impl<T: ?Sized> std::fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}
