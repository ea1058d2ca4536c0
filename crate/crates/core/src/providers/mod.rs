//! Uniform access to the external models the engine depends on.
//!
//! Backends implement one small trait per model kind. [`Providers`] wraps
//! whichever backends are configured and adds call accounting, output
//! validation (dimension checks, L2 normalization) and the image response
//! cache. Everything upstream talks to [`Providers`] only.

mod cache;
pub mod http;
pub mod mock;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::ResponseCache;

use crate::ids;

/// Default exponential backoff base.
pub const DEFAULT_BACKOFF_MS: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Chat,
    EmbedText,
    EmbedImage,
    Ocr,
    Caption,
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 5] = [
        ProviderKind::Chat,
        ProviderKind::EmbedText,
        ProviderKind::EmbedImage,
        ProviderKind::Ocr,
        ProviderKind::Caption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Chat => "chat",
            ProviderKind::EmbedText => "embed_text",
            ProviderKind::EmbedImage => "embed_image",
            ProviderKind::Ocr => "ocr",
            ProviderKind::Caption => "caption",
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_max_retries() -> u32 {
    2
}

fn default_timeout() -> f64 {
    30.0
}

fn default_backoff() -> u64 {
    DEFAULT_BACKOFF_MS
}

/// Connection settings for one provider. API keys are never stored here,
/// only the name of the environment variable holding them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// URL to POST to, or `"mock"`.
    pub endpoint: String,
    #[serde(default)]
    pub model_name: String,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
}

impl ProviderConfig {
    pub fn mock(kind: ProviderKind) -> Self {
        Self {
            kind,
            endpoint: "mock".into(),
            model_name: "mock".into(),
            timeout: default_timeout(),
            max_retries: default_max_retries(),
            api_key_env: None,
            backoff_base_ms: DEFAULT_BACKOFF_MS,
        }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == "mock"
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout > 0.0) {
            return Err(format!("{} provider: timeout must be > 0", self.kind));
        }
        if self.endpoint.is_empty() {
            return Err(format!("{} provider: endpoint is empty", self.kind));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.backoff_base_ms),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("{kind} provider failed after {attempts} attempts: {message}")]
    Transport {
        kind: ProviderKind,
        attempts: u32,
        message: String,
    },
    #[error("{kind} provider returned an invalid response: {message}")]
    Protocol { kind: ProviderKind, message: String },
    #[error("caption provider returned an empty caption")]
    EmptyCaption,
    #[error("empty input for {0} provider")]
    EmptyInput(ProviderKind),
    #[error("{0} provider is not configured")]
    NotConfigured(ProviderKind),
    #[error("no canned {kind} output for image {hash}")]
    MissingFixture { kind: ProviderKind, hash: String },
    #[error("{kind} provider returned dimension {actual}, expected {expected}")]
    Dimension {
        kind: ProviderKind,
        expected: usize,
        actual: usize,
    },
}

/// Exponential backoff: attempt n (0-based) waits `base * 2^(n-1)` before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt == 0 {
            Duration::ZERO
        } else {
            self.base_delay * 2u32.saturating_pow(attempt - 1)
        }
    }

    /// Run `op` until it succeeds, a non-retryable error occurs, or
    /// `max_retries + 1` attempts have been made.
    pub fn run<T>(
        &self,
        kind: ProviderKind,
        mut op: impl FnMut() -> Result<T, Attempt>,
    ) -> Result<T, ProviderError> {
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            std::thread::sleep(self.delay_before(attempt));
            match op() {
                Ok(v) => return Ok(v),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("{kind} attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
                Err(Attempt::Fatal(err)) => return Err(err),
            }
        }
        Err(ProviderError::Transport {
            kind,
            attempts: self.max_retries + 1,
            message: last,
        })
    }
}

/// Outcome of a single failed attempt.
#[derive(Debug)]
pub enum Attempt {
    Retry(String),
    Fatal(ProviderError),
}

/// What a chat call is for. Backends speaking a real wire protocol ignore
/// this; mocks use it to pick a response shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatTask {
    Extract,
    Repair,
    Generate,
    Judge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub task: ChatTask,
    /// Fully rendered prompt; context blocks are already substituted in.
    pub prompt: String,
    /// The structured context the prompt was rendered from.
    pub context: Vec<String>,
    pub image: Option<Vec<u8>>,
}

impl ChatRequest {
    pub fn new(task: ChatTask, prompt: impl Into<String>) -> Self {
        Self {
            task,
            prompt: prompt.into(),
            context: Vec::new(),
            image: None,
        }
    }

    pub fn with_context(mut self, context: Vec<String>) -> Self {
        self.context = context;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OcrOutput {
    pub tokens: Vec<String>,
    pub confidences: Vec<f64>,
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

pub trait TextEmbedBackend: Send + Sync {
    fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

pub trait ImageEmbedBackend: Send + Sync {
    fn embed_image(&self, image: &[u8]) -> Result<Vec<f32>, ProviderError>;
}

pub trait OcrBackend: Send + Sync {
    fn ocr(&self, image: &[u8]) -> Result<OcrOutput, ProviderError>;
}

pub trait CaptionBackend: Send + Sync {
    fn caption(&self, image: &[u8]) -> Result<String, ProviderError>;
}

#[derive(Debug, Default)]
struct KindStats {
    calls: AtomicU64,
    failures: AtomicU64,
    cache_hits: AtomicU64,
}

/// Snapshot of provider usage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub chat: u64,
    pub embed_text: u64,
    pub embed_image: u64,
    pub ocr: u64,
    pub caption: u64,
    pub shape_text: u64,
    pub failures: u64,
    pub cache_hits: u64,
    /// length/4 estimate over chat prompts and responses.
    pub chat_tokens: u64,
    /// Chat requests that carried an image.
    pub chat_image_payloads: u64,
}

#[derive(Debug, Default)]
struct CallStats {
    chat: KindStats,
    embed_text: KindStats,
    embed_image: KindStats,
    ocr: KindStats,
    caption: KindStats,
    shape: KindStats,
    chat_tokens: AtomicU64,
    chat_images: AtomicU64,
}

impl CallStats {
    fn all(&self) -> [&KindStats; 6] {
        [
            &self.chat,
            &self.embed_text,
            &self.embed_image,
            &self.ocr,
            &self.caption,
            &self.shape,
        ]
    }
}

fn bump(counter: &AtomicU64) {
    counter.fetch_add(1, Ordering::Relaxed);
}

fn record<T>(stats: &KindStats, result: &Result<T, ProviderError>) {
    match result {
        Ok(_) => bump(&stats.calls),
        Err(_) => bump(&stats.failures),
    }
}

fn normalized(v: Vec<f32>, kind: ProviderKind) -> Result<Vec<f32>, ProviderError> {
    let norm = crate::index::l2_norm(&v);
    if norm == 0.0 || !norm.is_finite() {
        return Err(ProviderError::Protocol {
            kind,
            message: "embedding has zero or non-finite norm".into(),
        });
    }
    Ok(v.into_iter().map(|x| (f64::from(x) / norm) as f32).collect())
}

fn check_dimension(
    slot: &OnceLock<usize>,
    kind: ProviderKind,
    len: usize,
) -> Result<(), ProviderError> {
    let expected = *slot.get_or_init(|| len);
    if expected != len {
        return Err(ProviderError::Dimension {
            kind,
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// The configured provider set plus accounting and caching.
#[derive(Default)]
pub struct Providers {
    chat: Option<Box<dyn ChatBackend>>,
    embed_text: Option<Box<dyn TextEmbedBackend>>,
    embed_image: Option<Box<dyn ImageEmbedBackend>>,
    ocr: Option<Box<dyn OcrBackend>>,
    caption: Option<Box<dyn CaptionBackend>>,
    shape: Option<Box<dyn CaptionBackend>>,
    stats: CallStats,
    cache: ResponseCache,
    text_dim: OnceLock<usize>,
    image_dim: OnceLock<usize>,
    log: Mutex<Vec<ChatRequest>>,
    keep_log: bool,
}

impl fmt::Debug for Providers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Providers")
            .field("chat", &self.chat.is_some())
            .field("embed_text", &self.embed_text.is_some())
            .field("embed_image", &self.embed_image.is_some())
            .field("ocr", &self.ocr.is_some())
            .field("caption", &self.caption.is_some())
            .field("shape", &self.shape.is_some())
            .finish()
    }
}

impl Providers {
    pub fn new() -> Self {
        Self::default()
    }

    /// All-mock provider set. OCR and caption outputs come from `fixtures`.
    pub fn mock(fixtures: mock::FixtureMap) -> Self {
        let shapes = !fixtures.shapes.is_empty();
        let fixtures = std::sync::Arc::new(fixtures);
        let mut p = Self::new()
            .with_chat(mock::MockChat::new())
            .with_text_embedder(mock::MockTextEmbedder::default())
            .with_image_embedder(mock::MockImageEmbedder::default())
            .with_ocr(mock::MockOcr::new(fixtures.clone()))
            .with_caption(mock::MockCaption::captions(fixtures.clone()));
        if shapes {
            p = p.with_shape_text(mock::MockCaption::shapes(fixtures));
        }
        p
    }

    pub fn with_chat(mut self, b: impl ChatBackend + 'static) -> Self {
        self.chat = Some(Box::new(b));
        self
    }

    pub fn with_text_embedder(mut self, b: impl TextEmbedBackend + 'static) -> Self {
        self.embed_text = Some(Box::new(b));
        self
    }

    pub fn with_image_embedder(mut self, b: impl ImageEmbedBackend + 'static) -> Self {
        self.embed_image = Some(Box::new(b));
        self
    }

    pub fn with_ocr(mut self, b: impl OcrBackend + 'static) -> Self {
        self.ocr = Some(Box::new(b));
        self
    }

    pub fn with_caption(mut self, b: impl CaptionBackend + 'static) -> Self {
        self.caption = Some(Box::new(b));
        self
    }

    /// A caption-style backend asked to describe the object's shape.
    pub fn with_shape_text(mut self, b: impl CaptionBackend + 'static) -> Self {
        self.shape = Some(Box::new(b));
        self
    }

    pub fn without_shape_text(mut self) -> Self {
        self.shape = None;
        self
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    /// Keep a copy of every chat request for inspection.
    pub fn with_chat_log(mut self) -> Self {
        self.keep_log = true;
        self
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn chat_log(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("chat log poisoned").clone()
    }

    pub fn has_ocr(&self) -> bool {
        self.ocr.is_some()
    }

    pub fn has_caption(&self) -> bool {
        self.caption.is_some()
    }

    pub fn has_shape_text(&self) -> bool {
        self.shape.is_some()
    }

    pub fn counts(&self) -> CallCounts {
        let s = &self.stats;
        let load = |c: &AtomicU64| c.load(Ordering::Relaxed);
        CallCounts {
            chat: load(&s.chat.calls),
            embed_text: load(&s.embed_text.calls),
            embed_image: load(&s.embed_image.calls),
            ocr: load(&s.ocr.calls),
            caption: load(&s.caption.calls),
            shape_text: load(&s.shape.calls),
            failures: s.all().iter().map(|k| load(&k.failures)).sum(),
            cache_hits: s.all().iter().map(|k| load(&k.cache_hits)).sum(),
            chat_tokens: load(&s.chat_tokens),
            chat_image_payloads: load(&s.chat_images),
        }
    }

    pub fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let backend = self
            .chat
            .as_ref()
            .ok_or(ProviderError::NotConfigured(ProviderKind::Chat))?;
        if self.keep_log {
            self.log.lock().expect("chat log poisoned").push(request.clone());
        }
        if request.image.is_some() {
            bump(&self.stats.chat_images);
        }
        let result = backend.chat(request);
        record(&self.stats.chat, &result);
        if let Ok(text) = &result {
            let tokens = (request.prompt.len() + text.len()) as u64 / 4;
            self.stats.chat_tokens.fetch_add(tokens, Ordering::Relaxed);
        }
        result
    }

    /// L2-normalized text embedding.
    pub fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let kind = ProviderKind::EmbedText;
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput(kind));
        }
        let backend = self.embed_text.as_ref().ok_or(ProviderError::NotConfigured(kind))?;
        let result = backend.embed_text(text);
        record(&self.stats.embed_text, &result);
        let v = normalized(result?, kind)?;
        check_dimension(&self.text_dim, kind, v.len())?;
        Ok(v)
    }

    /// L2-normalized image embedding, cached by image content hash.
    pub fn embed_image(&self, image: &[u8]) -> Result<Vec<f32>, ProviderError> {
        let kind = ProviderKind::EmbedImage;
        if image.is_empty() {
            return Err(ProviderError::EmptyInput(kind));
        }
        let backend = self.embed_image.as_ref().ok_or(ProviderError::NotConfigured(kind))?;
        let v = self.cached(kind.as_str(), image, &self.stats.embed_image, || {
            backend.embed_image(image)
        })?;
        let v = normalized(v, kind)?;
        check_dimension(&self.image_dim, kind, v.len())?;
        Ok(v)
    }

    pub fn ocr(&self, image: &[u8]) -> Result<OcrOutput, ProviderError> {
        let kind = ProviderKind::Ocr;
        let backend = self.ocr.as_ref().ok_or(ProviderError::NotConfigured(kind))?;
        let out = self.cached(kind.as_str(), image, &self.stats.ocr, || backend.ocr(image))?;
        if out.tokens.len() != out.confidences.len() {
            return Err(ProviderError::Protocol {
                kind,
                message: format!(
                    "{} tokens but {} confidences",
                    out.tokens.len(),
                    out.confidences.len()
                ),
            });
        }
        Ok(out)
    }

    pub fn caption(&self, image: &[u8]) -> Result<String, ProviderError> {
        let kind = ProviderKind::Caption;
        let backend = self.caption.as_ref().ok_or(ProviderError::NotConfigured(kind))?;
        self.cached(kind.as_str(), image, &self.stats.caption, || {
            let text = backend.caption(image)?;
            let text = text.trim().to_string();
            if text.is_empty() {
                Err(ProviderError::EmptyCaption)
            } else {
                Ok(text)
            }
        })
    }

    /// Free-text shape description, if a shape-text backend is configured.
    pub fn shape_text(&self, image: &[u8]) -> Result<Option<String>, ProviderError> {
        let Some(backend) = self.shape.as_ref() else {
            return Ok(None);
        };
        let text = self.cached("shape", image, &self.stats.shape, || {
            let text = backend.caption(image)?.trim().to_string();
            if text.is_empty() {
                Err(ProviderError::EmptyCaption)
            } else {
                Ok(text)
            }
        })?;
        Ok(Some(text))
    }

    fn cached<T>(
        &self,
        namespace: &str,
        image: &[u8],
        stats: &KindStats,
        call: impl FnOnce() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError>
    where
        T: Serialize + for<'de> Deserialize<'de>,
    {
        let key = format!("{namespace}:{}", ids::image_id(image));
        if let Some(hit) = self.cache.get::<T>(&key) {
            bump(&stats.cache_hits);
            return Ok(hit);
        }
        let result = call();
        record(stats, &result);
        let value = result?;
        self.cache.put(&key, &value);
        Ok(value)
    }
}
