//! Locale template sets for explanations and recommended questions. The
//! built-in `en` and `zh` sets can be extended or overridden by dropping
//! `<locale>.json` files into a templates directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUILTIN: [&str; 2] = [
    include_str!("../templates/en.json"),
    include_str!("../templates/zh.json"),
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("unknown locale `{0}`")]
    UnknownLocale(String),
    #[error("cannot read templates from {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub locale: String,
    /// Use an entity's first all-ASCII alias as its display name.
    #[serde(default)]
    pub prefer_latin_names: bool,
    pub generalization: String,
    pub table_lookup: String,
    pub table_scan: String,
    pub outcome_rows: String,
    pub outcome_none: String,
    pub condition: String,
    pub default_condition: String,
    pub condition_separator: String,
    pub direct_value: String,
    pub recommendation: String,
}

/// Substitutes `{name}` placeholders.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_owned();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    sets: BTreeMap<String, Templates>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        let sets = BUILTIN
            .iter()
            .map(|text| {
                let t: Templates = serde_json::from_str(text).expect("built-in templates parse");
                (t.locale.clone(), t)
            })
            .collect();
        Self { sets }
    }

    /// Adds every `*.json` template set found in `dir`; a file replaces a
    /// built-in set of the same locale.
    pub fn load_dir(&mut self, dir: &Path) -> Result<(), TemplateError> {
        let err = |message: String| TemplateError::Load {
            path: dir.display().to_string(),
            message,
        };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| err(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
            let t: Templates = serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
            self.sets.insert(t.locale.clone(), t);
        }
        Ok(())
    }

    pub fn get(&self, locale: &str) -> Result<&Templates, TemplateError> {
        self.sets
            .get(locale)
            .ok_or_else(|| TemplateError::UnknownLocale(locale.to_owned()))
    }

    pub fn locales(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_present() {
        let registry = TemplateRegistry::builtin();
        assert_eq!(registry.locales().collect::<Vec<_>>(), vec!["en", "zh"]);
        assert!(registry.get("fr").is_err());
    }

    #[test]
    fn new_locale_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut fr = TemplateRegistry::builtin().get("en").unwrap().clone();
        fr.locale = "fr".into();
        fr.generalization = "{from} est une sorte de {to}.".into();
        fs::write(dir.path().join("fr.json"), serde_json::to_string(&fr).unwrap()).unwrap();
        let mut registry = TemplateRegistry::builtin();
        registry.load_dir(dir.path()).unwrap();
        assert_eq!(registry.get("fr").unwrap().generalization, fr.generalization);
    }

    #[test]
    fn fill_placeholders() {
        assert_eq!(fill("{a} and {b}", &[("a", "x"), ("b", "y")]), "x and y");
    }
}
