use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{KbError, KnowledgeBase};
use crate::model::{KbDocuments, KbMeta};

/// File names making up one knowledge-base directory.
pub const KB_FILES: [&str; 6] = [
    "classes.json",
    "properties.json",
    "entities.json",
    "values.json",
    "cvt_schemas.json",
    "meta.json",
];

/// Reads the document set of `dir`. Missing files count as empty.
pub fn read_documents(dir: &Path) -> Result<KbDocuments, KbError> {
    if !dir.is_dir() {
        return Err(KbError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    Ok(KbDocuments {
        classes: read_or_default(dir, "classes.json")?,
        properties: read_or_default(dir, "properties.json")?,
        entities: read_or_default(dir, "entities.json")?,
        values: read_or_default(dir, "values.json")?,
        cvt_schemas: read_or_default(dir, "cvt_schemas.json")?,
        meta: read_or_default::<KbMeta>(dir, "meta.json")?,
    })
}

fn read_or_default<T: DeserializeOwned + Default>(dir: &Path, name: &str) -> Result<T, KbError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(T::default()),
        Err(source) => return Err(KbError::Io { path, source }),
    };
    serde_json::from_str(&text).map_err(|e| KbError::Parse {
        path,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Loads, validates and indexes the knowledge base stored in `dir`.
pub fn load_kb(dir: &Path) -> Result<KnowledgeBase, KbError> {
    KnowledgeBase::from_documents(read_documents(dir)?, 1)
}

/// Writes `docs` as the six JSON documents of a knowledge-base directory.
pub fn write_documents(docs: &KbDocuments, dir: &Path) -> Result<(), KbError> {
    fs::create_dir_all(dir).map_err(|source| KbError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_json(dir, "classes.json", &docs.classes)?;
    write_json(dir, "properties.json", &docs.properties)?;
    write_json(dir, "entities.json", &docs.entities)?;
    write_json(dir, "values.json", &docs.values)?;
    write_json(dir, "cvt_schemas.json", &docs.cvt_schemas)?;
    write_json(dir, "meta.json", &docs.meta)
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<(), KbError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    fs::write(&path, text).map_err(|source| KbError::Io { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Violation;

    #[test]
    fn empty_directory_is_an_empty_valid_kb() {
        let dir = tempfile::tempdir().unwrap();
        let kb = load_kb(dir.path()).unwrap();
        assert!(kb.entities().is_empty());
        assert!(kb.mentions().is_empty());
    }

    #[test]
    fn missing_directory_is_io_error() {
        let err = load_kb(Path::new("/definitely/not/here")).unwrap_err();
        assert!(matches!(err, KbError::Io { .. }));
    }

    #[test]
    fn parse_error_carries_location() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("classes.json"), "[\n  {\"id\": }\n]").unwrap();
        match load_kb(dir.path()).unwrap_err() {
            KbError::Parse { path, line, .. } => {
                assert!(path.ends_with("classes.json"));
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_errors_are_collected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("entities.json"),
            r#"[{"id": "a", "name": "A", "instance_of": "missing"},
               {"id": "a", "name": "A2", "instance_of": "missing"}]"#,
        )
        .unwrap();
        match load_kb(dir.path()).unwrap_err() {
            KbError::Validation(v) => {
                assert!(v.iter().any(|x| matches!(x, Violation::DuplicateId { .. })));
                assert!(v.iter().any(|x| matches!(x, Violation::DanglingReference { .. })));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
