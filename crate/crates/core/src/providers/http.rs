//! JSON-over-HTTP backends.
//!
//! Chat and embeddings speak the OpenAI-compatible request/response shapes.
//! OCR and captioning use a single-endpoint protocol:
//!
//! ```text
//! POST {"image_b64": "..."}  ->  {"tokens": [...], "confidences": [...]}
//! POST {"image_b64": "..."}  ->  {"caption": "..."}
//! ```

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::{
    Attempt, CaptionBackend, ChatBackend, ChatRequest, ImageEmbedBackend, OcrBackend, OcrOutput,
    ProviderConfig, ProviderError, ProviderKind, TextEmbedBackend,
};

/// Blocking JSON POST client with retries.
pub struct HttpClient {
    config: ProviderConfig,
    client: Client,
}

impl HttpClient {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout))
            .build()
            .map_err(|e| ProviderError::Protocol {
                kind: config.kind,
                message: e.to_string(),
            })?;
        Ok(Self { config, client })
    }

    pub fn kind(&self) -> ProviderKind {
        self.config.kind
    }

    fn protocol(&self, message: impl Into<String>) -> ProviderError {
        ProviderError::Protocol {
            kind: self.config.kind,
            message: message.into(),
        }
    }

    fn api_key(&self) -> Result<Option<String>, ProviderError> {
        match &self.config.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| self.protocol(format!("environment variable {var} is not set"))),
        }
    }

    pub fn post(&self, body: &Value) -> Result<Value, ProviderError> {
        let key = self.api_key()?;
        self.config.retry_policy().run(self.config.kind, || {
            let mut req = self.client.post(&self.config.endpoint).json(body);
            if let Some(key) = &key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                return Err(Attempt::Retry(format!("HTTP {status}")));
            }
            if !status.is_success() {
                return Err(Attempt::Fatal(self.protocol(format!("HTTP {status}"))));
            }
            resp.json::<Value>()
                .map_err(|e| Attempt::Fatal(self.protocol(e.to_string())))
        })
    }

    fn model(&self) -> &str {
        &self.config.model_name
    }
}

fn embedding_from(resp: &Value) -> Option<Vec<f32>> {
    resp.pointer("/data/0/embedding")?
        .as_array()?
        .iter()
        .map(|v| v.as_f64().map(|x| x as f32))
        .collect()
}

/// OpenAI-compatible chat completions.
pub struct HttpChat(pub HttpClient);

impl HttpChat {
    pub fn request_body(&self, request: &ChatRequest) -> Value {
        let content = match &request.image {
            None => json!(request.prompt),
            Some(bytes) => json!([
                {"type": "text", "text": request.prompt},
                {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{}", B64.encode(bytes))}},
            ]),
        };
        json!({
            "model": self.0.model(),
            "messages": [{"role": "user", "content": content}],
        })
    }
}

impl ChatBackend for HttpChat {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let resp = self.0.post(&self.request_body(request))?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| self.0.protocol("missing choices[0].message.content"))
    }
}

/// OpenAI-compatible embeddings over text.
pub struct HttpTextEmbedder(pub HttpClient);

impl TextEmbedBackend for HttpTextEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let resp = self.0.post(&json!({"model": self.0.model(), "input": text}))?;
        embedding_from(&resp).ok_or_else(|| self.0.protocol("missing data[0].embedding"))
    }
}

/// Embeddings endpoint fed a base64-encoded image as its input.
pub struct HttpImageEmbedder(pub HttpClient);

impl ImageEmbedBackend for HttpImageEmbedder {
    fn embed_image(&self, image: &[u8]) -> Result<Vec<f32>, ProviderError> {
        let resp = self
            .0
            .post(&json!({"model": self.0.model(), "input": B64.encode(image)}))?;
        embedding_from(&resp).ok_or_else(|| self.0.protocol("missing data[0].embedding"))
    }
}

pub struct HttpOcr(pub HttpClient);

impl OcrBackend for HttpOcr {
    fn ocr(&self, image: &[u8]) -> Result<OcrOutput, ProviderError> {
        let resp = self.0.post(&json!({"image_b64": B64.encode(image)}))?;
        serde_json::from_value(resp).map_err(|e| self.0.protocol(e.to_string()))
    }
}

pub struct HttpCaption(pub HttpClient);

impl CaptionBackend for HttpCaption {
    fn caption(&self, image: &[u8]) -> Result<String, ProviderError> {
        let resp = self.0.post(&json!({"image_b64": B64.encode(image)}))?;
        resp.get("caption")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| self.0.protocol("missing caption"))
    }
}
