//! Answer generation from a retrieval result.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{lambdas_for_criteria, Engine, Mode, Query, RetrievalError, RetrievalResult};
use crate::index::{score_key, ScoredHit};
use crate::model::{spaces, KnowledgeBase};
use crate::providers::{ChatRequest, ChatTask};
use crate::text::word_count;

pub const DEFAULT_WORD_BUDGET: usize = 6000;

/// Context groups, in serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKind {
    Chunk,
    Hyperedge,
    Entity,
    Image,
    Caption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub kind: ContextKind,
    pub id: String,
    /// Relevance used for truncation, comparable across groups.
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub mode: Mode,
    pub answer: String,
    pub context: Vec<ContextItem>,
    /// Items left out to respect the word budget.
    pub dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalResult>,
}

/// Keep the highest-scoring items that fit in `budget` words, then return
/// them in group order (chunks, hyperedges, entities, images), each group
/// best first. Fails only when even the best item does not fit.
pub fn build_context(
    items: Vec<ContextItem>,
    budget: usize,
) -> Result<(Vec<ContextItem>, usize), RetrievalError> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| {
        score_key(items[b].score)
            .cmp(&score_key(items[a].score))
            .then(items[a].kind.cmp(&items[b].kind))
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; items.len()];
    let mut used = 0;
    for (n, &i) in order.iter().enumerate() {
        let words = word_count(&items[i].text);
        if used + words > budget {
            if n == 0 {
                return Err(RetrievalError::ContextOverflow { words, budget });
            }
            break;
        }
        used += words;
        keep[i] = true;
    }
    let dropped = keep.iter().filter(|k| !**k).count();
    let mut kept: Vec<(usize, ContextItem)> = items
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .collect();
    kept.sort_by(|(a, x), (b, y)| {
        x.kind
            .cmp(&y.kind)
            .then(score_key(y.score).cmp(&score_key(x.score)))
            .then(a.cmp(b))
    });
    Ok((kept.into_iter().map(|(_, item)| item).collect(), dropped))
}

fn image_label(kb: &KnowledgeBase, id: &str) -> String {
    match kb.image(id) {
        Some(r) => format!("image {}", r.uri),
        None => format!("image {id}"),
    }
}

/// Subgraph serialization for nico mode.
fn subgraph_items(kb: &KnowledgeBase, query: &Query, r: &RetrievalResult) -> Vec<ContextItem> {
    let mut items = Vec::new();
    for h in &r.chunks {
        if let Some(c) = kb.chunk(&h.id) {
            items.push(ContextItem {
                kind: ContextKind::Chunk,
                id: h.id.clone(),
                score: h.score,
                text: c.text.clone(),
            });
        }
    }
    for h in &r.hyperedges {
        if let Some(e) = kb.hyperedge(&h.id) {
            items.push(ContextItem {
                kind: ContextKind::Hyperedge,
                id: h.id.clone(),
                score: h.score,
                text: e.relation_text.clone(),
            });
        }
    }
    for h in &r.entities {
        if let Some(e) = kb.entity(&h.id) {
            items.push(ContextItem {
                kind: ContextKind::Entity,
                id: h.id.clone(),
                score: h.score,
                text: format!("{}: {}", e.name, e.description),
            });
        }
    }
    let lambdas: BTreeSet<_> = lambdas_for_criteria(&query.criteria)
        .intersection(&kb.meta.enabled_lambdas)
        .copied()
        .collect();
    // A perfect match in every active criterion normalizes to 1.
    let best = r.criteria.len() as f64 / (super::RRF_CONSTANT + 1.0);
    for m in &r.images {
        if let Some(rec) = kb.image(&m.id) {
            let summary = rec.descriptors.summary(&lambdas);
            items.push(ContextItem {
                kind: ContextKind::Image,
                id: m.id.clone(),
                score: if best > 0.0 { m.fused / best } else { 0.0 },
                text: format!("{}: {summary}", image_label(kb, &m.id)),
            });
        }
    }
    items
}

impl Engine<'_> {
    /// Top-k image captions for standard mode: the fused image matches if
    /// there is a query image, otherwise caption embeddings against the
    /// question.
    fn caption_items(
        &self,
        query: &Query,
        r: &RetrievalResult,
    ) -> Result<Vec<ContextItem>, RetrievalError> {
        let kb = self.kb;
        let hits: Vec<ScoredHit> = if query.image.is_some() {
            let best = r.criteria.len() as f64 / (super::RRF_CONSTANT + 1.0);
            r.images
                .iter()
                .map(|m| ScoredHit {
                    id: m.id.clone(),
                    score: if best > 0.0 { m.fused / best } else { 0.0 },
                })
                .collect()
        } else {
            match kb.index(spaces::CAPTIONS) {
                Some(index) if !index.is_empty() => {
                    let qv = self.providers.embed_text(&query.text)?;
                    index.top_k(&qv, query.k)?
                }
                _ => Vec::new(),
            }
        };
        Ok(hits
            .into_iter()
            .filter_map(|h| {
                let caption = kb.image(&h.id)?.descriptors.caption.clone()?;
                Some(ContextItem {
                    kind: ContextKind::Caption,
                    text: format!("{}: {caption}", image_label(kb, &h.id)),
                    id: h.id,
                    score: h.score,
                })
            })
            .collect())
    }

    /// Answer a query in its mode. Only nico and standard retrieve; no mode
    /// sends image bytes to the chat model.
    pub fn answer(&self, query: &Query) -> Result<Answer, RetrievalError> {
        query.validate()?;
        let (items, retrieval) = match query.mode {
            Mode::Naive => (Vec::new(), None),
            Mode::Standard => {
                let r = self.retrieve(query)?;
                (self.caption_items(query, &r)?, Some(r))
            }
            Mode::Nico => {
                let r = self.retrieve(query)?;
                (subgraph_items(self.kb, query, &r), Some(r))
            }
        };
        let (context, dropped) = if items.is_empty() {
            (Vec::new(), 0)
        } else {
            build_context(items, self.word_budget)?
        };
        let blocks: Vec<String> = context.iter().map(|c| c.text.clone()).collect();
        let prompt = self
            .prompts
            .generation_prompt(&query.text, &blocks.join("\n"));
        let request = ChatRequest::new(ChatTask::Generate, prompt).with_context(blocks);
        let answer = self.providers.chat(&request)?;
        Ok(Answer {
            mode: query.mode,
            answer,
            context,
            dropped,
            retrieval,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, score: f64, words: usize) -> ContextItem {
        ContextItem {
            kind: ContextKind::Chunk,
            id: id.into(),
            score,
            text: vec!["w"; words].join(" "),
        }
    }

    #[test]
    fn budget_keeps_only_best_chunk() {
        let items = vec![chunk("b", 0.5, 8), chunk("a", 0.9, 8), chunk("c", 0.1, 8)];
        let (kept, dropped) = build_context(items, 10).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
        assert_eq!(dropped, 2);
    }

    #[test]
    fn overflow_only_when_top_item_too_large() {
        let err = build_context(vec![chunk("a", 0.9, 20), chunk("b", 0.1, 2)], 10).unwrap_err();
        assert!(matches!(err, RetrievalError::ContextOverflow { words: 20, budget: 10 }));
    }

    #[test]
    fn output_is_grouped_and_sorted() {
        let mut edge = chunk("e", 0.99, 1);
        edge.kind = ContextKind::Hyperedge;
        let items = vec![edge, chunk("c1", 0.2, 1), chunk("c2", 0.7, 1)];
        let (kept, _) = build_context(items, 100).unwrap();
        let ids: Vec<_> = kept.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["c2", "c1", "e"]);
    }
}
