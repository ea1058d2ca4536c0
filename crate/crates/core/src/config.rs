//! The application config file (`hyperrag.json`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construction::ConstructionDefaults;
use crate::prompts::Prompts;
use crate::providers::http::{
    HttpCaption, HttpChat, HttpClient, HttpImageEmbedder, HttpOcr, HttpTextEmbedder,
};
use crate::providers::mock::{
    FixtureMap, MockCaption, MockChat, MockImageEmbedder, MockOcr, MockTextEmbedder,
};
use crate::providers::{ProviderConfig, ProviderError, ProviderKind, Providers};
use crate::retrieval::{Criterion, Mode, DEFAULT_K, DEFAULT_WORD_BUDGET};

pub const DEFAULT_CONFIG_FILE: &str = "hyperrag.json";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("no config given and ./{DEFAULT_CONFIG_FILE} does not exist")]
    NotFound,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// The job a provider entry fills. Shape text is produced by a
/// caption-style endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderRole {
    Chat,
    EmbedText,
    EmbedImage,
    Ocr,
    Caption,
    ShapeText,
}

impl ProviderRole {
    pub fn kind(self) -> ProviderKind {
        match self {
            ProviderRole::Chat => ProviderKind::Chat,
            ProviderRole::EmbedText => ProviderKind::EmbedText,
            ProviderRole::EmbedImage => ProviderKind::EmbedImage,
            ProviderRole::Ocr => ProviderKind::Ocr,
            ProviderRole::Caption | ProviderRole::ShapeText => ProviderKind::Caption,
        }
    }
}

impl fmt::Display for ProviderRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderRole::ShapeText => f.write_str("shape_text"),
            other => f.write_str(other.kind().as_str()),
        }
    }
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_criteria() -> BTreeSet<Criterion> {
    Criterion::ALL.into_iter().collect()
}

fn default_budget() -> usize {
    DEFAULT_WORD_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalDefaults {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_criteria")]
    pub criteria: BTreeSet<Criterion>,
    /// Answer context limit in words.
    #[serde(default = "default_budget")]
    pub word_budget: usize,
}

impl Default for RetrievalDefaults {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            mode: Mode::default(),
            criteria: default_criteria(),
            word_budget: DEFAULT_WORD_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptPaths {
    pub extraction: Option<PathBuf>,
    pub repair: Option<PathBuf>,
    pub generation: Option<PathBuf>,
    pub judge: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub providers: BTreeMap<ProviderRole, ProviderConfig>,
    /// OCR, caption and shape-text answers for mock providers.
    #[serde(default)]
    pub mock_fixtures: Option<PathBuf>,
    #[serde(default)]
    pub construction: ConstructionDefaults,
    #[serde(default)]
    pub retrieval: RetrievalDefaults,
    #[serde(default)]
    pub prompts: PromptPaths,
    /// Where the provider response cache lives. Defaults to the KB directory.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// `explicit` if given, else `./hyperrag.json` if it exists.
pub fn discover(explicit: Option<&Path>) -> Result<PathBuf, ConfigError> {
    match explicit {
        Some(p) => Ok(p.to_path_buf()),
        None => {
            let p = PathBuf::from(DEFAULT_CONFIG_FILE);
            if p.is_file() {
                Ok(p)
            } else {
                Err(ConfigError::NotFound)
            }
        }
    }
}

impl AppConfig {
    /// All roles mocked, no fixtures.
    pub fn mock() -> Self {
        let providers = [
            ProviderRole::Chat,
            ProviderRole::EmbedText,
            ProviderRole::EmbedImage,
            ProviderRole::Ocr,
            ProviderRole::Caption,
        ]
        .into_iter()
        .map(|r| (r, ProviderConfig::mock(r.kind())))
        .collect();
        Self {
            providers,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = fs::read(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: AppConfig =
            serde_json::from_slice(&bytes).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (role, p) in &self.providers {
            if p.kind != role.kind() {
                return Err(ConfigError::Invalid(format!(
                    "provider '{role}' must have kind '{}', not '{}'",
                    role.kind(),
                    p.kind
                )));
            }
            p.validate().map_err(ConfigError::Invalid)?;
        }
        for required in [ProviderRole::Chat, ProviderRole::EmbedText] {
            if !self.providers.contains_key(&required) {
                return Err(ConfigError::Invalid(format!("provider '{required}' is required")));
            }
        }
        let c = &self.construction;
        if c.chunk_size < crate::construction::MIN_CHUNK_SIZE || c.chunk_overlap >= c.chunk_size {
            return Err(ConfigError::Invalid(format!(
                "construction chunk_size {} / chunk_overlap {} out of range",
                c.chunk_size, c.chunk_overlap
            )));
        }
        if c.enabled_lambdas.is_empty() {
            return Err(ConfigError::Invalid("construction enabled_lambdas is empty".into()));
        }
        let r = &self.retrieval;
        if r.k == 0 || r.word_budget == 0 || r.criteria.is_empty() {
            return Err(ConfigError::Invalid(
                "retrieval k, word_budget and criteria must be non-empty".into(),
            ));
        }
        let files = [
            self.mock_fixtures.as_ref(),
            self.prompts.extraction.as_ref(),
            self.prompts.repair.as_ref(),
            self.prompts.generation.as_ref(),
            self.prompts.judge.as_ref(),
        ];
        for f in files.into_iter().flatten() {
            let p = self.resolve(f);
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!(
                    "referenced file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn prompts(&self) -> Result<Prompts, ConfigError> {
        let r = |p: &Option<PathBuf>| p.as_ref().map(|p| self.resolve(p));
        let (e, rp, g, j) = (
            r(&self.prompts.extraction),
            r(&self.prompts.repair),
            r(&self.prompts.generation),
            r(&self.prompts.judge),
        );
        Prompts::load(e.as_deref(), rp.as_deref(), g.as_deref(), j.as_deref()).map_err(|source| {
            ConfigError::Io {
                path: self.base_dir.clone(),
                source,
            }
        })
    }

    pub fn fixtures(&self) -> Result<FixtureMap, ConfigError> {
        match &self.mock_fixtures {
            Some(p) => {
                let p = self.resolve(p);
                FixtureMap::read(&p).map_err(|source| ConfigError::Io { path: p, source })
            }
            None => Ok(FixtureMap::default()),
        }
    }

    /// Cache file for a knowledge base directory.
    pub fn cache_path(&self, kb_dir: &Path) -> PathBuf {
        match &self.cache_dir {
            Some(d) => self.resolve(d).join("responses.json"),
            None => kb_dir.join(crate::construction::CACHE_FILE),
        }
    }

    /// Instantiate every configured provider.
    pub fn providers(&self) -> Result<Providers, ConfigError> {
        let fixtures = Arc::new(self.fixtures()?);
        let mut out = Providers::new();
        for (&role, cfg) in &self.providers {
            out = if cfg.is_mock() {
                match role {
                    ProviderRole::Chat => out.with_chat(MockChat::new()),
                    ProviderRole::EmbedText => out.with_text_embedder(MockTextEmbedder),
                    ProviderRole::EmbedImage => out.with_image_embedder(MockImageEmbedder),
                    ProviderRole::Ocr => out.with_ocr(MockOcr::new(fixtures.clone())),
                    ProviderRole::Caption => {
                        out.with_caption(MockCaption::captions(fixtures.clone()))
                    }
                    ProviderRole::ShapeText => {
                        out.with_shape_text(MockCaption::shapes(fixtures.clone()))
                    }
                }
            } else {
                let client = HttpClient::new(cfg.clone())?;
                match role {
                    ProviderRole::Chat => out.with_chat(HttpChat(client)),
                    ProviderRole::EmbedText => out.with_text_embedder(HttpTextEmbedder(client)),
                    ProviderRole::EmbedImage => out.with_image_embedder(HttpImageEmbedder(client)),
                    ProviderRole::Ocr => out.with_ocr(HttpOcr(client)),
                    ProviderRole::Caption => out.with_caption(HttpCaption(client)),
                    ProviderRole::ShapeText => out.with_shape_text(HttpCaption(client)),
                }
            };
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, json: &str) -> PathBuf {
        let p = dir.join("hyperrag.json");
        fs::write(&p, json).unwrap();
        p
    }

    const MINIMAL: &str = r#"{"providers": {
        "chat": {"kind": "chat", "endpoint": "mock"},
        "embed_text": {"kind": "embed_text", "endpoint": "mock"}
    }}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let c = AppConfig::load(&write(dir.path(), MINIMAL)).unwrap();
        assert_eq!(c.retrieval.k, 8);
        assert_eq!(c.retrieval.mode, Mode::Nico);
        assert_eq!(c.construction.chunk_size, 200);
        let p = c.providers().unwrap();
        assert!(!p.has_ocr());
        assert_eq!(p.embed_text("x").unwrap().len(), 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"providers": {}, "extra": 1}"#);
        assert!(matches!(AppConfig::load(&p), Err(ConfigError::Parse { .. })));
        let p = write(dir.path(), r#"{"providers": {"telepathy": {"kind": "chat", "endpoint": "mock"}}}"#);
        assert!(matches!(AppConfig::load(&p), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn role_kind_mismatch_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            r#"{"providers": {"chat": {"kind": "ocr", "endpoint": "mock"},
                "embed_text": {"kind": "embed_text", "endpoint": "mock"}}}"#,
        );
        assert!(matches!(AppConfig::load(&p), Err(ConfigError::Invalid(_))));
        let p = write(
            dir.path(),
            &MINIMAL.replacen('{', r#"{"mock_fixtures": "nope.json","#, 1),
        );
        let err = AppConfig::load(&p).unwrap_err();
        assert!(err.to_string().contains("nope.json"));
    }

    #[test]
    fn required_roles() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"providers": {"chat": {"kind": "chat", "endpoint": "mock"}}}"#);
        assert!(AppConfig::load(&p).unwrap_err().to_string().contains("embed_text"));
    }

    #[test]
    fn shape_text_role_uses_caption_kind() {
        assert_eq!(ProviderRole::ShapeText.kind(), ProviderKind::Caption);
        assert_eq!(ProviderRole::ShapeText.to_string(), "shape_text");
    }

    #[test]
    fn discover_prefers_explicit_path() {
        assert_eq!(discover(Some(Path::new("x.json"))).unwrap(), PathBuf::from("x.json"));
    }
}
