//! Query-time retrieval over a built knowledge base.
//!
//! The text side embeds the question and matches entities, hyperedges and
//! chunks, then widens the entity set by one hop. The image side scores
//! every stored image on up to five criteria, takes each criterion's top-k
//! and merges them with reciprocal-rank fusion.

mod generate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{build_context, Answer, ContextItem, ContextKind, DEFAULT_WORD_BUDGET};

use crate::descriptors::{self, color_similarity, DescriptorError, DescriptorSet, Lambda};
use crate::index::{cosine, score_key, sort_hits, IndexError, ScoredHit};
use crate::model::{spaces, EntityKind, KnowledgeBase};
use crate::prompts::Prompts;
use crate::providers::{ProviderError, Providers};
use crate::text;

pub const RRF_CONSTANT: f64 = 60.0;
pub const DEFAULT_K: usize = 8;
/// Upper bound on matched plus expanded entities.
pub const MAX_EXPANDED_ENTITIES: usize = 32;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no non-empty ranking to fuse")]
    EmptyRankings,
    #[error("context budget of {budget} words is smaller than the top item ({words} words)")]
    ContextOverflow { words: usize, budget: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Image matching criteria. Serialized as lowercase roman numerals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    /// Image embedding cosine.
    #[serde(rename = "i")]
    Embedding,
    /// Caption embedding cosine.
    #[serde(rename = "ii")]
    Description,
    #[serde(rename = "iii")]
    Color,
    #[serde(rename = "iv")]
    Shape,
    /// Token-set F1 of OCR text.
    #[serde(rename = "v")]
    Ocr,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Embedding,
        Criterion::Description,
        Criterion::Color,
        Criterion::Shape,
        Criterion::Ocr,
    ];

    pub fn roman(self) -> &'static str {
        match self {
            Criterion::Embedding => "i",
            Criterion::Description => "ii",
            Criterion::Color => "iii",
            Criterion::Shape => "iv",
            Criterion::Ocr => "v",
        }
    }

    /// The extractor whose output this criterion compares.
    pub fn lambda(self) -> Option<Lambda> {
        match self {
            Criterion::Embedding => None,
            Criterion::Description => Some(Lambda::Caption),
            Criterion::Color => Some(Lambda::Color),
            Criterion::Shape => Some(Lambda::Shape),
            Criterion::Ocr => Some(Lambda::Ocr),
        }
    }

    pub fn of_lambda(lambda: Lambda) -> Criterion {
        match lambda {
            Lambda::Color => Criterion::Color,
            Lambda::Shape => Criterion::Shape,
            Lambda::Ocr => Criterion::Ocr,
            Lambda::Caption => Criterion::Description,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.roman() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown criterion '{s}' (expected i, ii, iii, iv or v)"))
    }
}

/// Parse a comma-separated list such as `i,iii,v`.
pub fn parse_criteria(s: &str) -> Result<BTreeSet<Criterion>, String> {
    let set: BTreeSet<Criterion> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    if set.is_empty() {
        return Err("criterion set is empty".into());
    }
    Ok(set)
}

/// Criteria available for an extractor subset. Embedding is always on.
pub fn criteria_for_lambdas(lambdas: &BTreeSet<Lambda>) -> BTreeSet<Criterion> {
    std::iter::once(Criterion::Embedding)
        .chain(lambdas.iter().map(|&l| Criterion::of_lambda(l)))
        .collect()
}

pub fn lambdas_for_criteria(criteria: &BTreeSet<Criterion>) -> BTreeSet<Lambda> {
    criteria.iter().filter_map(|c| c.lambda()).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The question alone, no retrieval.
    Naive,
    /// The question plus retrieved image captions.
    Standard,
    /// The question plus the serialized retrieved subgraph.
    #[default]
    Nico,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(Mode::Naive),
            "standard" => Ok(Mode::Standard),
            "nico" => Ok(Mode::Nico),
            _ => Err(format!("unknown mode '{s}' (expected naive, standard or nico)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Naive => "naive",
            Mode::Standard => "standard",
            Mode::Nico => "nico",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub text: String,
    /// Encoded query image.
    pub image: Option<Vec<u8>>,
    pub k: usize,
    pub mode: Mode,
    pub criteria: BTreeSet<Criterion>,
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            image: None,
            k: DEFAULT_K,
            mode: Mode::default(),
            criteria: Criterion::ALL.into_iter().collect(),
        }
    }

    pub fn with_image(mut self, bytes: Vec<u8>) -> Self {
        self.image = Some(bytes);
        self
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.text.trim().is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        if self.k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        Ok(())
    }
}

/// One image-side match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMatch {
    pub id: String,
    pub scores: BTreeMap<Criterion, f64>,
    /// Active criteria that could not be scored for this image.
    pub missing: BTreeSet<Criterion>,
    pub fused: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub entities: Vec<ScoredHit>,
    pub hyperedges: Vec<ScoredHit>,
    pub chunks: Vec<ScoredHit>,
    pub images: Vec<ImageMatch>,
    /// Criteria that took part in image fusion.
    pub criteria: BTreeSet<Criterion>,
    /// Item id to the retrieval paths that produced it.
    pub provenance: BTreeMap<String, BTreeSet<String>>,
}

impl RetrievalResult {
    fn note(&mut self, id: &str, via: impl Into<String>) {
        self.provenance
            .entry(id.to_string())
            .or_default()
            .insert(via.into());
    }
}

/// Query image features computed on the fly. Never stored in the KB.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryImage {
    pub descriptors: DescriptorSet,
    pub embedding: Vec<f32>,
    pub caption_embedding: Option<Vec<f32>>,
    pub shape_embedding: Option<Vec<f32>>,
}

impl QueryImage {
    pub fn prepare(
        bytes: &[u8],
        criteria: &BTreeSet<Criterion>,
        providers: &Providers,
    ) -> Result<Self, RetrievalError> {
        let lambdas = lambdas_for_criteria(criteria);
        let descriptors = if lambdas.is_empty() {
            descriptors::decode(bytes)?;
            DescriptorSet::default()
        } else {
            let x = descriptors::extract_all(bytes, &lambdas, providers)?;
            for (l, reason) in &x.failures {
                log::warn!("query image extractor {l} failed: {reason}");
            }
            x.descriptors
        };
        let embedding = providers.embed_image(bytes)?;
        let caption_embedding = match &descriptors.caption {
            Some(c) => Some(providers.embed_text(c)?),
            None => None,
        };
        let shape_embedding = match descriptors.shape.as_ref().and_then(|s| s.text.as_ref()) {
            Some(t) => Some(providers.embed_text(t)?),
            None => None,
        };
        Ok(Self {
            descriptors,
            embedding,
            caption_embedding,
            shape_embedding,
        })
    }
}

/// Token-set F1, except that two images without any text agree fully.
fn ocr_similarity(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    text::set_prf(a, b).2
}

/// Score one stored image against the query image on each active
/// criterion. Criteria that lack a descriptor on either side are reported
/// as missing instead.
pub fn criterion_scores(
    query: &QueryImage,
    kb: &KnowledgeBase,
    candidate: &str,
    criteria: &BTreeSet<Criterion>,
) -> (BTreeMap<Criterion, f64>, BTreeSet<Criterion>) {
    let mut scores = BTreeMap::new();
    let mut missing = BTreeSet::new();
    let Some(record) = kb.image(candidate) else {
        return (scores, criteria.clone());
    };
    let d = &record.descriptors;
    let q = &query.descriptors;
    let vector = |space: &str| kb.index(space).and_then(|i| i.get(candidate));
    for &c in criteria {
        let score = match c {
            Criterion::Embedding => vector(spaces::IMAGES).map(|v| cosine(&query.embedding, v)),
            Criterion::Description => match (&query.caption_embedding, vector(spaces::CAPTIONS)) {
                (Some(a), Some(b)) => Some(cosine(a, b)),
                _ => None,
            },
            Criterion::Color => match (&q.color, &d.color) {
                (Some(a), Some(b)) => Some(color_similarity(a.avg_rgb, b.avg_rgb)),
                _ => None,
            },
            Criterion::Shape => match (&q.shape, &d.shape) {
                (Some(a), Some(b)) => match (&query.shape_embedding, vector(spaces::SHAPES)) {
                    (Some(x), Some(y)) if a.text.is_some() && b.text.is_some() => {
                        Some(cosine(x, y))
                    }
                    _ => Some(if a.class == b.class { 1.0 } else { 0.0 }),
                },
                _ => None,
            },
            Criterion::Ocr => match (&q.ocr, &d.ocr) {
                (Some(a), Some(b)) => Some(ocr_similarity(&a.token_set(), &b.token_set())),
                _ => None,
            },
        };
        match score {
            Some(s) => {
                scores.insert(c, s);
            }
            None => {
                missing.insert(c);
            }
        }
    }
    (scores, missing)
}

/// Competition ranks ("1224") of a ranking after canonical ordering. The
/// quantized score decides ties.
pub fn competition_ranks(ranking: &[ScoredHit]) -> Vec<(String, usize)> {
    let mut sorted = ranking.to_vec();
    sort_hits(&mut sorted);
    let mut out: Vec<(String, usize)> = Vec::with_capacity(sorted.len());
    for (i, hit) in sorted.iter().enumerate() {
        let rank = match i {
            0 => 1,
            _ if score_key(hit.score) == score_key(sorted[i - 1].score) => out[i - 1].1,
            _ => i + 1,
        };
        out.push((hit.id.clone(), rank));
    }
    out
}

/// Reciprocal-rank fusion: each item scores the sum of 1/(60 + rank) over
/// the rankings it appears in. Returns the top `k`, best first, ties by id.
pub fn fuse(rankings: &[Vec<ScoredHit>], k: usize) -> Result<Vec<ScoredHit>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if rankings.iter().all(Vec::is_empty) {
        return Err(RetrievalError::EmptyRankings);
    }
    let mut ranks: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for ranking in rankings {
        for (id, rank) in competition_ranks(ranking) {
            ranks.entry(id).or_default().push(rank);
        }
    }
    // Summing in rank order keeps the result independent of ranking order.
    let mut hits: Vec<ScoredHit> = ranks
        .into_iter()
        .map(|(id, mut r)| {
            r.sort_unstable();
            let score = r.iter().map(|&x| 1.0 / (RRF_CONSTANT + x as f64)).sum();
            ScoredHit { id, score }
        })
        .collect();
    sort_hits(&mut hits);
    hits.truncate(k);
    Ok(hits)
}

/// Whether an entity may appear given the active criteria. Descriptor
/// entities of disabled extractors are hidden; labels are always visible.
fn entity_visible(kb: &KnowledgeBase, id: &str, lambdas: &BTreeSet<Lambda>) -> bool {
    match kb.entity(id) {
        Some(e) if e.kind == EntityKind::Descriptor => match Lambda::of_descriptor(&e.name) {
            Some(l) => lambdas.contains(&l),
            None => true,
        },
        Some(_) => true,
        None => false,
    }
}

fn ranked(
    kb: &KnowledgeBase,
    space: &str,
    query: &[f32],
    keep: impl Fn(&str) -> bool,
    k: usize,
) -> Result<Vec<ScoredHit>, RetrievalError> {
    let Some(index) = kb.index(space) else {
        return Ok(Vec::new());
    };
    let mut hits: Vec<ScoredHit> = index
        .top_k(query, index.len())?
        .into_iter()
        .filter(|h| keep(&h.id))
        .collect();
    hits.truncate(k);
    Ok(hits)
}

/// Read-only query engine over one knowledge base.
pub struct Engine<'a> {
    pub kb: &'a KnowledgeBase,
    pub providers: &'a Providers,
    pub prompts: &'a Prompts,
    pub word_budget: usize,
    retrievals: AtomicUsize,
}

impl<'a> Engine<'a> {
    pub fn new(kb: &'a KnowledgeBase, providers: &'a Providers, prompts: &'a Prompts) -> Self {
        Self {
            kb,
            providers,
            prompts,
            word_budget: DEFAULT_WORD_BUDGET,
            retrievals: AtomicUsize::new(0),
        }
    }

    pub fn with_word_budget(mut self, budget: usize) -> Self {
        self.word_budget = budget;
        self
    }

    /// Number of `retrieve` calls made so far.
    pub fn retrievals(&self) -> usize {
        self.retrievals.load(Ordering::Relaxed)
    }

    pub fn retrieve(&self, query: &Query) -> Result<RetrievalResult, RetrievalError> {
        query.validate()?;
        self.retrievals.fetch_add(1, Ordering::Relaxed);
        let kb = self.kb;
        let k = query.k;
        let lambdas: BTreeSet<Lambda> = lambdas_for_criteria(&query.criteria)
            .intersection(&kb.meta.enabled_lambdas)
            .copied()
            .collect();
        let mut result = RetrievalResult {
            criteria: query.criteria.clone(),
            ..RetrievalResult::default()
        };

        let qv = self.providers.embed_text(&query.text)?;
        let visible = |id: &str| entity_visible(kb, id, &lambdas);

        let mut entities = ranked(kb, spaces::ENTITIES, &qv, visible, k)?;
        for h in &entities {
            result.note(&h.id, "entity-match");
        }
        let cap = MAX_EXPANDED_ENTITIES.max(entities.len());
        let seen: BTreeSet<String> = entities.iter().map(|h| h.id.clone()).collect();
        let mut expansion: BTreeSet<String> = BTreeSet::new();
        for h in &entities {
            if let Ok(n) = kb.neighbors(&h.id) {
                expansion.extend(n.into_iter().filter(|id| !seen.contains(id) && visible(id)));
            }
        }
        let index = kb.index(spaces::ENTITIES);
        let mut extra: Vec<ScoredHit> = expansion
            .into_iter()
            .map(|id| {
                let score = match index {
                    Some(i) => i.score(&qv, &id).ok().flatten().unwrap_or(0.0),
                    None => 0.0,
                };
                ScoredHit { id, score }
            })
            .collect();
        sort_hits(&mut extra);
        extra.truncate(cap - entities.len());
        for h in &extra {
            result.note(&h.id, "neighbor-expansion");
        }
        entities.extend(extra);
        sort_hits(&mut entities);
        result.entities = entities;

        result.hyperedges = ranked(
            kb,
            spaces::HYPEREDGES,
            &qv,
            |id| {
                kb.hyperedge(id)
                    .is_some_and(|e| e.members.iter().all(|m| visible(m)))
            },
            k,
        )?;
        for h in result.hyperedges.clone() {
            result.note(&h.id, "hyperedge-match");
        }

        result.chunks = ranked(kb, spaces::CHUNKS, &qv, |_| true, k)?;
        for h in result.chunks.clone() {
            result.note(&h.id, "chunk-match");
        }

        if let Some(bytes) = &query.image {
            self.retrieve_images(bytes, query, &mut result)?;
        }
        Ok(result)
    }

    fn retrieve_images(
        &self,
        bytes: &[u8],
        query: &Query,
        result: &mut RetrievalResult,
    ) -> Result<(), RetrievalError> {
        let kb = self.kb;
        if kb.images().is_empty() {
            return Ok(());
        }
        let qi = QueryImage::prepare(bytes, &query.criteria, self.providers)?;
        let mut all: BTreeMap<String, (BTreeMap<Criterion, f64>, BTreeSet<Criterion>)> =
            BTreeMap::new();
        for id in kb.images().keys() {
            all.insert(id.clone(), criterion_scores(&qi, kb, id, &query.criteria));
        }
        let mut rankings = Vec::new();
        for &c in &query.criteria {
            let mut hits: Vec<ScoredHit> = all
                .iter()
                .filter_map(|(id, (s, _))| {
                    s.get(&c).map(|&score| ScoredHit {
                        id: id.clone(),
                        score,
                    })
                })
                .collect();
            sort_hits(&mut hits);
            hits.truncate(query.k);
            for h in &hits {
                result.note(&h.id, format!("criterion-{c}"));
            }
            rankings.push(hits);
        }
        for (id, (_, missing)) in &all {
            for c in missing {
                if result.provenance.contains_key(id) {
                    result.note(id, format!("missing-{c}"));
                }
            }
        }
        let fused = match fuse(&rankings, query.k) {
            Ok(f) => f,
            Err(RetrievalError::EmptyRankings) => return Ok(()),
            Err(e) => return Err(e),
        };
        result.images = fused
            .into_iter()
            .map(|h| {
                let (scores, missing) = all.remove(&h.id).unwrap_or_default();
                ImageMatch {
                    id: h.id,
                    scores,
                    missing,
                    fused: h.score,
                }
            })
            .collect();
        Ok(())
    }
}
