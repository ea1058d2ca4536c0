//! Deterministic in-process providers.
//!
//! Every mock is a pure function of its input plus the fixture map it was
//! built from, so two pipeline runs over the same inputs are identical.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    CaptionBackend, ChatBackend, ChatRequest, ChatTask, ImageEmbedBackend, OcrBackend, OcrOutput,
    ProviderError, ProviderKind, TextEmbedBackend,
};
use crate::ids;
use crate::text;

pub const MOCK_DIMENSION: usize = 64;

/// Canned OCR, caption and shape-text outputs keyed by image content hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureMap {
    #[serde(default)]
    pub ocr: BTreeMap<String, OcrOutput>,
    #[serde(default)]
    pub captions: BTreeMap<String, String>,
    #[serde(default)]
    pub shapes: BTreeMap<String, String>,
}

impl FixtureMap {
    pub fn read(path: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn histogram<'a>(grams: impl Iterator<Item = &'a [u8]>) -> Vec<f32> {
    let mut bins = vec![0f32; MOCK_DIMENSION];
    for g in grams {
        bins[(fnv1a(g) % MOCK_DIMENSION as u64) as usize] += 1.0;
    }
    let norm = crate::index::l2_norm(&bins);
    if norm > 0.0 {
        for b in &mut bins {
            *b = (f64::from(*b) / norm) as f32;
        }
    }
    bins
}

/// Hashed character-trigram histogram, L2-normalized.
pub fn trigram_embedding(text: &str) -> Vec<f32> {
    let lowered = text.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let grams: Vec<Vec<u8>> = if chars.len() < 3 {
        vec![lowered.into_bytes()]
    } else {
        chars
            .windows(3)
            .map(|w| w.iter().collect::<String>().into_bytes())
            .collect()
    };
    histogram(grams.iter().map(Vec::as_slice))
}

/// Hashed byte-trigram histogram, L2-normalized.
pub fn byte_trigram_embedding(bytes: &[u8]) -> Vec<f32> {
    if bytes.len() < 3 {
        histogram(std::iter::once(bytes))
    } else {
        histogram(bytes.windows(3))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockTextEmbedder;

impl TextEmbedBackend for MockTextEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyInput(ProviderKind::EmbedText));
        }
        Ok(trigram_embedding(text))
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockImageEmbedder;

impl ImageEmbedBackend for MockImageEmbedder {
    fn embed_image(&self, image: &[u8]) -> Result<Vec<f32>, ProviderError> {
        if image.is_empty() {
            return Err(ProviderError::EmptyInput(ProviderKind::EmbedImage));
        }
        Ok(byte_trigram_embedding(image))
    }
}

pub struct MockOcr {
    fixtures: Arc<FixtureMap>,
}

impl MockOcr {
    pub fn new(fixtures: Arc<FixtureMap>) -> Self {
        Self { fixtures }
    }
}

impl OcrBackend for MockOcr {
    fn ocr(&self, image: &[u8]) -> Result<OcrOutput, ProviderError> {
        Ok(self
            .fixtures
            .ocr
            .get(&ids::image_id(image))
            .cloned()
            .unwrap_or_default())
    }
}

/// Serves either the caption or the shape-text table of a fixture map.
pub struct MockCaption {
    fixtures: Arc<FixtureMap>,
    shapes: bool,
}

impl MockCaption {
    pub fn captions(fixtures: Arc<FixtureMap>) -> Self {
        Self {
            fixtures,
            shapes: false,
        }
    }

    pub fn shapes(fixtures: Arc<FixtureMap>) -> Self {
        Self {
            fixtures,
            shapes: true,
        }
    }
}

impl CaptionBackend for MockCaption {
    fn caption(&self, image: &[u8]) -> Result<String, ProviderError> {
        let hash = ids::image_id(image);
        let table = if self.shapes {
            &self.fixtures.shapes
        } else {
            &self.fixtures.captions
        };
        table
            .get(&hash)
            .cloned()
            .ok_or(ProviderError::MissingFixture {
                kind: ProviderKind::Caption,
                hash,
            })
    }
}

/// Always fails with a transport error; stands in for an unreachable host.
#[derive(Debug, Clone, Copy)]
pub struct Unreachable(pub ProviderKind);

impl Unreachable {
    fn err(&self) -> ProviderError {
        ProviderError::Transport {
            kind: self.0,
            attempts: 1,
            message: "unreachable".into(),
        }
    }
}

impl ChatBackend for Unreachable {
    fn chat(&self, _: &ChatRequest) -> Result<String, ProviderError> {
        Err(self.err())
    }
}

impl TextEmbedBackend for Unreachable {
    fn embed_text(&self, _: &str) -> Result<Vec<f32>, ProviderError> {
        Err(self.err())
    }
}

impl ImageEmbedBackend for Unreachable {
    fn embed_image(&self, _: &[u8]) -> Result<Vec<f32>, ProviderError> {
        Err(self.err())
    }
}

impl OcrBackend for Unreachable {
    fn ocr(&self, _: &[u8]) -> Result<OcrOutput, ProviderError> {
        Err(self.err())
    }
}

impl CaptionBackend for Unreachable {
    fn caption(&self, _: &[u8]) -> Result<String, ProviderError> {
        Err(self.err())
    }
}

/// Scriptable chat model.
///
/// Scripted responses are served first, in order. Once the script is
/// exhausted the response depends on the request task:
///
/// * `Extract` / `Repair`: a heuristic extraction over the first context
///   block. Runs of capitalized words become entities; each sentence naming
///   two or more entities becomes a relation.
/// * `Generate`: `"ANSWER: "` followed by the first context block, or by the
///   prompt when there is no context.
/// * `Judge`: aspect scores from token overlap between the prediction
///   (context block 1) and the golden answer (context block 2).
#[derive(Debug, Default)]
pub struct MockChat {
    script: Mutex<VecDeque<String>>,
}

impl MockChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scripted<I: IntoIterator<Item = S>, S: Into<String>>(responses: I) -> Self {
        Self {
            script: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }
}

impl ChatBackend for MockChat {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        if let Some(next) = self.script.lock().expect("script poisoned").pop_front() {
            return Ok(next);
        }
        let first = request.context.first().map(String::as_str);
        Ok(match request.task {
            ChatTask::Extract | ChatTask::Repair => heuristic_extraction(first.unwrap_or("")),
            ChatTask::Generate => format!("ANSWER: {}", first.unwrap_or(&request.prompt)),
            ChatTask::Judge => {
                let prediction = request.context.get(1).map(String::as_str).unwrap_or("");
                let gold = request.context.get(2).map(String::as_str).unwrap_or("");
                let (p, r, f1) = text::set_prf(&text::token_set(prediction), &text::token_set(gold));
                json!({"comprehensiveness": r, "correctness": p, "relevance": f1}).to_string()
            }
        })
    }
}

const STOPWORDS: &[&str] = &[
    "A", "An", "And", "As", "At", "All", "Both", "But", "By", "Each", "For", "From", "In", "It",
    "Its", "Many", "Most", "Of", "On", "Or", "Some", "The", "Their", "These", "They", "This",
    "Those", "To", "We", "When", "While", "With",
];

fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn capitalized_runs(sentence: &str) -> Vec<String> {
    let mut runs = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for raw in sentence.split_whitespace() {
        let word: String = raw
            .chars()
            .filter(|c| c.is_alphanumeric() || *c == '-')
            .collect();
        let breaks = raw.ends_with(',') || raw.ends_with(':');
        let is_name = word.chars().next().is_some_and(char::is_uppercase)
            && !STOPWORDS.contains(&word.as_str());
        if is_name {
            current.push(word);
        } else if !current.is_empty() {
            runs.push(current.join(" "));
            current.clear();
        }
        if breaks && !current.is_empty() {
            runs.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        runs.push(current.join(" "));
    }
    runs
}

/// Rule-based stand-in for LLM entity/relation extraction.
pub fn heuristic_extraction(text: &str) -> String {
    let mut order: Vec<String> = Vec::new();
    let mut descriptions: BTreeMap<String, String> = BTreeMap::new();
    let mut relations = Vec::new();
    for sentence in sentences(text) {
        let mut members: Vec<String> = Vec::new();
        for name in capitalized_runs(sentence) {
            if !descriptions.contains_key(&name) {
                descriptions.insert(name.clone(), sentence.to_string());
                order.push(name.clone());
            }
            if !members.contains(&name) {
                members.push(name);
            }
        }
        if members.len() >= 2 {
            relations.push(json!({
                "members": members,
                "relation_text": sentence,
                "weight": 1.0,
            }));
        }
    }
    let entities: Vec<_> = order
        .iter()
        .map(|name| {
            json!({
                "name": name,
                "kind_hint": "concept",
                "description": descriptions[name],
            })
        })
        .collect();
    json!({"entities": entities, "relations": relations}).to_string()
}
