//! Text entity and relation extraction through the chat model.

use serde::{Deserialize, Serialize};

use crate::model::Chunk;
use crate::prompts::Prompts;
use crate::providers::{ChatRequest, ChatTask, ProviderError, Providers};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedEntity {
    pub name: String,
    #[serde(default)]
    pub kind_hint: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRelation {
    pub members: Vec<String>,
    #[serde(default)]
    pub relation_text: String,
    #[serde(default)]
    pub weight: Option<f64>,
}

/// What the chat model is asked to return for each chunk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionPayload {
    #[serde(default)]
    pub entities: Vec<ExtractedEntity>,
    #[serde(default)]
    pub relations: Vec<ExtractedRelation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextExtraction {
    /// `None` when both the first reply and the repair reply failed to parse.
    pub payload: Option<ExtractionPayload>,
    pub repairs: u32,
    pub error: Option<String>,
}

/// Pull the JSON object out of a model reply, tolerating code fences and
/// surrounding prose.
pub fn parse_payload(reply: &str) -> Result<ExtractionPayload, String> {
    let start = reply.find('{').ok_or("no JSON object in reply")?;
    let end = reply.rfind('}').ok_or("no JSON object in reply")?;
    if end < start {
        return Err("no JSON object in reply".into());
    }
    serde_json::from_str(&reply[start..=end]).map_err(|e| e.to_string())
}

/// Ask the chat model for the chunk's entities and relations. A reply that
/// does not parse gets exactly one repair prompt; if that fails too the
/// chunk contributes nothing.
pub fn extract_text_graph(
    providers: &Providers,
    prompts: &Prompts,
    chunk: &Chunk,
) -> Result<TextExtraction, ProviderError> {
    let request = ChatRequest::new(ChatTask::Extract, prompts.extraction_prompt(&chunk.text))
        .with_context(vec![chunk.text.clone()]);
    let reply = providers.chat(&request)?;
    let first_error = match parse_payload(&reply) {
        Ok(payload) => {
            return Ok(TextExtraction {
                payload: Some(payload),
                repairs: 0,
                error: None,
            })
        }
        Err(e) => e,
    };
    log::warn!("chunk {}: extraction reply did not parse: {first_error}", chunk.id);
    let repair = ChatRequest::new(
        ChatTask::Repair,
        prompts.repair_prompt(&chunk.text, &reply, &first_error),
    )
    .with_context(vec![chunk.text.clone(), reply]);
    let reply = providers.chat(&repair)?;
    Ok(match parse_payload(&reply) {
        Ok(payload) => TextExtraction {
            payload: Some(payload),
            repairs: 1,
            error: None,
        },
        Err(e) => TextExtraction {
            payload: None,
            repairs: 1,
            error: Some(e),
        },
    })
}
