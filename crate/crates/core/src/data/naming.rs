//! Pair naming conventions, registered by name so external dataset
//! layouts plug in without touching the loader.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

/// What a file under the dataset root is, according to a scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileRole {
    /// Rain-distorted image with the given pair id.
    Distorted(String),
    /// Clear (ground-truth) image with the given pair id.
    Clear(String),
    /// Not part of any pair (sidecars, manifests, unrelated files).
    Unrelated,
}

/// A convention mapping file paths to pair roles.
pub trait NamingScheme: Send + Sync {
    fn name(&self) -> &str;
    /// Classify a path relative to the dataset root.
    fn role_of(&self, rel_path: &Path) -> FileRole;
}

const IMAGE_EXTS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn has_image_ext(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Default layout: `<id>_rain.<ext>` / `<id>_clear.<ext>` in one directory.
pub struct SuffixScheme;

impl NamingScheme for SuffixScheme {
    fn name(&self) -> &str {
        "suffix"
    }

    fn role_of(&self, rel_path: &Path) -> FileRole {
        if !has_image_ext(rel_path) || rel_path.parent() != Some(Path::new("")) {
            return FileRole::Unrelated;
        }
        let stem = match rel_path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s,
            None => return FileRole::Unrelated,
        };
        if let Some(id) = stem.strip_suffix("_rain") {
            FileRole::Distorted(id.to_string())
        } else if let Some(id) = stem.strip_suffix("_clear") {
            FileRole::Clear(id.to_string())
        } else {
            FileRole::Unrelated
        }
    }
}

/// Adapter layout: `rain/<id>.<ext>` / `clear/<id>.<ext>` subdirectories.
/// Matches datasets shipped as two parallel folders.
pub struct SubdirScheme;

impl NamingScheme for SubdirScheme {
    fn name(&self) -> &str {
        "subdirs"
    }

    fn role_of(&self, rel_path: &Path) -> FileRole {
        if !has_image_ext(rel_path) {
            return FileRole::Unrelated;
        }
        let mut parts = rel_path.components();
        let dir = parts.next().and_then(|c| c.as_os_str().to_str());
        let file: &Path = parts.as_path();
        let stem = match file.file_stem().and_then(|s| s.to_str()) {
            Some(s) if file.parent() == Some(Path::new("")) => s,
            _ => return FileRole::Unrelated,
        };
        match dir {
            Some("rain") => FileRole::Distorted(stem.to_string()),
            Some("clear") => FileRole::Clear(stem.to_string()),
            _ => FileRole::Unrelated,
        }
    }
}

/// Name-keyed registry of naming schemes.
pub struct NamingRegistry {
    schemes: BTreeMap<String, Arc<dyn NamingScheme>>,
}

impl NamingRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    /// Registry with the built-in `suffix` and `subdirs` schemes.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(SuffixScheme));
        reg.register(Arc::new(SubdirScheme));
        reg
    }

    pub fn register(&mut self, scheme: Arc<dyn NamingScheme>) {
        self.schemes.insert(scheme.name().to_string(), scheme);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn NamingScheme>> {
        self.schemes.get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.schemes.keys().cloned().collect()
    }
}

impl Default for NamingRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_scheme_classifies() {
        let s = SuffixScheme;
        assert_eq!(
            s.role_of(Path::new("0001_rain.png")),
            FileRole::Distorted("0001".into())
        );
        assert_eq!(
            s.role_of(Path::new("0001_clear.png")),
            FileRole::Clear("0001".into())
        );
        assert_eq!(s.role_of(Path::new("0001_boxes.json")), FileRole::Unrelated);
        assert_eq!(s.role_of(Path::new("sub/0001_rain.png")), FileRole::Unrelated);
    }

    #[test]
    fn subdir_scheme_classifies() {
        let s = SubdirScheme;
        assert_eq!(
            s.role_of(Path::new("rain/7.png")),
            FileRole::Distorted("7".into())
        );
        assert_eq!(s.role_of(Path::new("clear/7.png")), FileRole::Clear("7".into()));
        assert_eq!(s.role_of(Path::new("other/7.png")), FileRole::Unrelated);
    }

    #[test]
    fn registry_resolves_by_name() {
        let reg = NamingRegistry::with_builtins();
        assert!(reg.get("suffix").is_some());
        assert!(reg.get("subdirs").is_some());
        assert!(reg.get("nope").is_none());
        assert_eq!(reg.names(), vec!["subdirs".to_string(), "suffix".to_string()]);
    }
}
