//! Knowledge-base construction.
//!
//! The build unions two halves into one hypergraph:
//!
//! * text: documents are chunked, each chunk is sent through the chat model
//!   for entity/relation extraction, and the results are merged as `text`
//!   entities and n-ary hyperedges;
//! * images: every image runs through the enabled descriptor extractors and
//!   is attached as an `image` entity linked to shared `descriptor` entities
//!   (one hyperedge per extractor, plus one per catalog label).
//!
//! Finally every chunk, entity, hyperedge, image, caption and shape text is
//! embedded. With mock providers the whole process is deterministic.

mod chunk;
mod extract;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{
    check_chunking, chunk_text, DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE, MIN_CHUNK_SIZE,
};
pub use extract::{
    extract_text_graph, parse_payload, ExtractedEntity, ExtractedRelation, ExtractionPayload,
    TextExtraction,
};

use crate::descriptors::{self, DescriptorError, DescriptorRelation, ImageExtraction, Lambda};
use crate::ids;
use crate::model::{
    normalize_name, spaces, EntityKind, ImageRecord, KbError, KbMeta, KnowledgeBase, Labels,
    DEFAULT_WEIGHT,
};
use crate::prompts::Prompts;
use crate::providers::{CallCounts, ProviderError, Providers};
use crate::store;
use crate::text;

/// Description given to entities that only appear as relation members.
pub const STUB_DESCRIPTION: &str = "(mentioned)";

pub const REPORT_FILE: &str = "report.json";
/// Default location of the provider response cache inside a KB directory.
pub const CACHE_FILE: &str = "cache/responses.json";

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid corpus configuration: {0}")]
    Config(String),
    #[error("document {0} is empty")]
    EmptyDocument(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

impl ConstructionError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One line of the image ingestion manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tobacco_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
}

impl ImageEntry {
    pub fn labels(&self) -> Labels {
        Labels {
            tobacco_type: self.tobacco_type.clone(),
            product_type: self.product_type.clone(),
            brand: self.brand.clone(),
        }
    }
}

pub fn read_image_manifest(path: &Path) -> Result<Vec<ImageEntry>, ConstructionError> {
    let text = fs::read_to_string(path).map_err(|e| ConstructionError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| {
                ConstructionError::Config(format!("{}:{}: {e}", path.display(), n + 1))
            })
        })
        .collect()
}

fn default_size() -> usize {
    DEFAULT_CHUNK_SIZE
}

fn default_overlap() -> usize {
    DEFAULT_CHUNK_OVERLAP
}

fn default_lambdas() -> BTreeSet<Lambda> {
    Lambda::ALL.into_iter().collect()
}

/// Construction settings used when the corpus file leaves them out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionDefaults {
    #[serde(default = "default_size")]
    pub chunk_size: usize,
    #[serde(default = "default_overlap")]
    pub chunk_overlap: usize,
    #[serde(default = "default_lambdas")]
    pub enabled_lambdas: BTreeSet<Lambda>,
    #[serde(default)]
    pub captions_to_text: bool,
}

impl Default for ConstructionDefaults {
    fn default() -> Self {
        Self {
            chunk_size: DEFAULT_CHUNK_SIZE,
            chunk_overlap: DEFAULT_CHUNK_OVERLAP,
            enabled_lambdas: default_lambdas(),
            captions_to_text: false,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    #[serde(default)]
    docs: Vec<String>,
    #[serde(default)]
    images: Option<String>,
    chunk_size: Option<usize>,
    chunk_overlap: Option<usize>,
    enabled_lambdas: Option<BTreeSet<Lambda>>,
    captions_to_text: Option<bool>,
}

/// A resolved `corpus.json`. Paths are relative to the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSpec {
    pub docs: Vec<String>,
    /// Image ingestion manifest (JSONL).
    pub images: Option<String>,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub enabled_lambdas: BTreeSet<Lambda>,
    /// Also run text extraction over image captions.
    pub captions_to_text: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self::with_defaults(&ConstructionDefaults::default())
    }
}

impl CorpusSpec {
    pub fn with_defaults(d: &ConstructionDefaults) -> Self {
        Self {
            docs: Vec::new(),
            images: None,
            chunk_size: d.chunk_size,
            chunk_overlap: d.chunk_overlap,
            enabled_lambdas: d.enabled_lambdas.clone(),
            captions_to_text: d.captions_to_text,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: &Path, defaults: &ConstructionDefaults) -> Result<Self, ConstructionError> {
        let bytes = fs::read(path).map_err(|e| ConstructionError::io(path, e))?;
        let raw: CorpusFile = serde_json::from_slice(&bytes)
            .map_err(|e| ConstructionError::Config(format!("{}: {e}", path.display())))?;
        let spec = CorpusSpec {
            docs: raw.docs,
            images: raw.images,
            chunk_size: raw.chunk_size.unwrap_or(defaults.chunk_size),
            chunk_overlap: raw.chunk_overlap.unwrap_or(defaults.chunk_overlap),
            enabled_lambdas: raw
                .enabled_lambdas
                .unwrap_or_else(|| defaults.enabled_lambdas.clone()),
            captions_to_text: raw.captions_to_text.unwrap_or(defaults.captions_to_text),
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConstructionError> {
        check_chunking(self.chunk_size, self.chunk_overlap)?;
        if self.enabled_lambdas.is_empty() {
            return Err(ConstructionError::Config("no extractors enabled".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub uri: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionalFailure {
    pub image_id: String,
    pub lambda: Lambda,
    pub reason: String,
}

/// Written to `report.json` next to the knowledge base.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub documents: usize,
    pub empty_documents: Vec<String>,
    pub chunks: usize,
    pub images: usize,
    pub duplicate_images: Vec<String>,
    pub skipped_images: Vec<SkippedImage>,
    pub entities: BTreeMap<EntityKind, usize>,
    pub hyperedges: usize,
    pub text_hyperedges: usize,
    /// Extractor hyperedges plus label hyperedges.
    pub descriptor_hyperedges: usize,
    pub label_hyperedges: usize,
    /// Extractor hyperedges keyed by extractor number.
    pub lambda_hyperedges: BTreeMap<Lambda, usize>,
    /// Sum over images of succeeding extractors plus present labels.
    pub expected_descriptor_hyperedges: usize,
    pub optional_failures: Vec<OptionalFailure>,
    pub parse_failures: Vec<String>,
    pub repairs: u32,
    pub stub_entities: usize,
    pub dropped_entities: usize,
    pub dropped_relations: usize,
    pub provider_calls: CallCounts,
}

/// Merge an extraction payload into the knowledge base.
pub fn apply_payload(
    kb: &mut KnowledgeBase,
    payload: &ExtractionPayload,
    source: &str,
    report: &mut ConstructionReport,
) -> Result<(), KbError> {
    let mut local: BTreeMap<String, String> = BTreeMap::new();
    for e in &payload.entities {
        let name = normalize_name(&e.name);
        if name.is_empty() {
            report.dropped_entities += 1;
            continue;
        }
        let description = e.description.as_deref().unwrap_or_default();
        let id = kb.add_entity(&name, EntityKind::Text, description, source)?;
        local.insert(name, id);
    }
    for r in &payload.relations {
        let weight = r.weight.unwrap_or(DEFAULT_WEIGHT);
        if !(0.0..=1.0).contains(&weight) || r.relation_text.trim().is_empty() {
            report.dropped_relations += 1;
            continue;
        }
        let mut members = Vec::new();
        for raw in &r.members {
            let name = normalize_name(raw);
            if name.is_empty() {
                continue;
            }
            let id = match local.get(&name) {
                Some(id) => id.clone(),
                None => match kb.entity_by_name(&name, EntityKind::Text) {
                    Some(existing) => {
                        let id = existing.id.clone();
                        kb.add_entity(&name, EntityKind::Text, "", source)?;
                        id
                    }
                    None => {
                        report.stub_entities += 1;
                        kb.add_entity(&name, EntityKind::Text, STUB_DESCRIPTION, source)?
                    }
                },
            };
            local.insert(name, id.clone());
            if !members.contains(&id) {
                members.push(id);
            }
        }
        if members.len() < 2 {
            report.dropped_relations += 1;
            continue;
        }
        kb.add_hyperedge(&members, r.relation_text.trim(), weight, source)?;
    }
    Ok(())
}

/// Hyperedges created for one image.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttachCounts {
    pub lambda_edges: BTreeMap<Lambda, usize>,
    pub label_edges: usize,
}

/// Add an image entity plus its descriptor entities and hyperedges. The
/// record itself must already be stored.
pub fn attach_image(
    kb: &mut KnowledgeBase,
    record: &ImageRecord,
    relations: &[DescriptorRelation],
) -> Result<AttachCounts, KbError> {
    // The caption lives on its own descriptor entity so that disabling an
    // extractor leaves the image entity untouched.
    let description = format!("product image {}", record.uri);
    let image_entity = kb.add_entity(&record.id, EntityKind::Image, &description, &record.id)?;
    let mut counts = AttachCounts::default();
    for rel in relations {
        let mut members = vec![image_entity.clone()];
        for v in &rel.values {
            members.push(kb.add_entity(&v.name, EntityKind::Descriptor, &v.description, &record.id)?);
        }
        kb.add_hyperedge(&members, &rel.relation_text, DEFAULT_WEIGHT, &record.id)?;
        *counts.lambda_edges.entry(rel.lambda).or_default() += 1;
    }
    for (field, value) in record.labels.present() {
        let value = normalize_name(value);
        let label = kb.add_entity(
            &format!("{field}:{value}"),
            EntityKind::Descriptor,
            &format!("{} {value}", field.replace('_', " ")),
            &record.id,
        )?;
        kb.add_hyperedge(
            &[image_entity.clone(), label],
            &format!("{}: {value}", field.replace('_', " ")),
            DEFAULT_WEIGHT,
            &record.id,
        )?;
        counts.label_edges += 1;
    }
    Ok(counts)
}

/// Does `brand` occur as a whole-word phrase in `text`?
fn mentions(text: &str, brand: &str) -> bool {
    let hay: Vec<String> = text.split_whitespace().map(text::normalize_token).collect();
    let needle: Vec<String> = brand.split_whitespace().map(text::normalize_token).collect();
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

struct LoadedImage {
    entry: ImageEntry,
    id: String,
    bytes: Vec<u8>,
}

fn load_images(
    spec: &CorpusSpec,
    report: &mut ConstructionReport,
) -> Result<Vec<LoadedImage>, ConstructionError> {
    let Some(manifest) = &spec.images else {
        return Ok(Vec::new());
    };
    let manifest = spec.resolve(manifest);
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut by_id: BTreeMap<String, LoadedImage> = BTreeMap::new();
    for entry in read_image_manifest(&manifest)? {
        let path = base.join(&entry.uri);
        let bytes = fs::read(&path).map_err(|e| ConstructionError::io(&path, e))?;
        let id = ids::image_id(&bytes);
        if by_id.contains_key(&id) {
            report.duplicate_images.push(entry.uri);
            continue;
        }
        by_id.insert(id.clone(), LoadedImage { entry, id, bytes });
    }
    Ok(by_id.into_values().collect())
}

/// Build a knowledge base from a corpus.
pub fn build_knowledge(
    spec: &CorpusSpec,
    providers: &Providers,
    prompts: &Prompts,
) -> Result<(KnowledgeBase, ConstructionReport), ConstructionError> {
    spec.validate()?;
    let mut report = ConstructionReport::default();
    let mut kb = KnowledgeBase::new(KbMeta {
        dimension: 0,
        image_dimension: 0,
        enabled_lambdas: spec.enabled_lambdas.clone(),
    });

    // Images first: descriptor extraction is independent per image.
    let images = load_images(spec, &mut report)?;
    let extractions: Vec<Result<ImageExtraction, DescriptorError>> = images
        .par_iter()
        .map(|img| descriptors::extract_all(&img.bytes, &spec.enabled_lambdas, providers))
        .collect();

    let mut accepted: Vec<(&LoadedImage, ImageExtraction)> = Vec::new();
    for (img, result) in images.iter().zip(extractions) {
        match result {
            Ok(x) => accepted.push((img, x)),
            Err(DescriptorError::Provider(e)) => return Err(e.into()),
            Err(e) => report.skipped_images.push(SkippedImage {
                uri: img.entry.uri.clone(),
                reason: e.to_string(),
            }),
        }
    }
    for (img, _) in &accepted {
        kb.add_image(ImageRecord {
            id: img.id.clone(),
            uri: img.entry.uri.clone(),
            labels: img.entry.labels(),
            descriptors: Default::default(),
        });
    }

    // Text: documents in the listed order, chunks in offset order.
    let mut docs: Vec<(String, String)> = Vec::new();
    for doc in &spec.docs {
        let path = spec.resolve(doc);
        let text = fs::read_to_string(&path).map_err(|e| ConstructionError::io(&path, e))?;
        docs.push((doc.clone(), text));
    }
    if spec.captions_to_text {
        for (img, x) in &accepted {
            if let Some(c) = &x.descriptors.caption {
                docs.push((format!("caption:{}", img.id), c.clone()));
            }
        }
    }
    report.documents = docs.len();
    for (doc_id, text) in &docs {
        let chunks = match chunk_text(doc_id, text, spec.chunk_size, spec.chunk_overlap) {
            Ok(c) => c,
            Err(ConstructionError::EmptyDocument(d)) => {
                report.empty_documents.push(d);
                continue;
            }
            Err(e) => return Err(e),
        };
        for chunk in chunks {
            let id = kb.add_chunk(chunk)?;
            let chunk = kb.chunk(&id).expect("just inserted").clone();
            let extraction = extract_text_graph(providers, prompts, &chunk)?;
            report.repairs += extraction.repairs;
            match extraction.payload {
                Some(payload) => apply_payload(&mut kb, &payload, &id, &mut report)?,
                None => report.parse_failures.push(id),
            }
        }
    }
    report.text_hyperedges = kb.hyperedges().len();

    // Attach images in ascending id order.
    for (img, x) in &accepted {
        let record = {
            let r = kb.image_mut(&img.id).expect("image stored");
            r.descriptors = x.descriptors.clone();
            r.clone()
        };
        let counts = attach_image(&mut kb, &record, &x.relations)?;
        for (l, n) in counts.lambda_edges {
            *report.lambda_hyperedges.entry(l).or_default() += n;
        }
        report.label_hyperedges += counts.label_edges;
        report.expected_descriptor_hyperedges += x.relations.len() + record.labels.present().len();
        for (lambda, reason) in &x.failures {
            report.optional_failures.push(OptionalFailure {
                image_id: img.id.clone(),
                lambda: *lambda,
                reason: reason.clone(),
            });
        }
    }

    link_images_to_chunks(&mut kb);
    embed_all(&mut kb, providers, &accepted)?;
    kb.validate().map_err(KbError::CorruptManifest)?;

    report.chunks = kb.chunks().len();
    report.images = kb.images().len();
    report.entities = kb.entity_counts();
    report.hyperedges = kb.hyperedges().len();
    report.descriptor_hyperedges =
        report.lambda_hyperedges.values().sum::<usize>() + report.label_hyperedges;
    report.provider_calls = providers.counts();
    Ok((kb, report))
}

fn link_images_to_chunks(kb: &mut KnowledgeBase) {
    let brands: Vec<(String, String)> = kb
        .images()
        .values()
        .filter_map(|i| i.labels.brand.clone().map(|b| (i.id.clone(), b)))
        .collect();
    let chunk_ids: Vec<String> = kb.chunks().keys().cloned().collect();
    for cid in chunk_ids {
        let text = kb.chunk(&cid).expect("chunk").text.clone();
        let linked: Vec<String> = brands
            .iter()
            .filter(|(_, b)| mentions(&text, b))
            .map(|(id, _)| id.clone())
            .collect();
        kb.chunk_mut(&cid).expect("chunk").image_ids = linked;
    }
}

fn embed_all(
    kb: &mut KnowledgeBase,
    providers: &Providers,
    images: &[(&LoadedImage, ImageExtraction)],
) -> Result<(), ConstructionError> {
    let chunks: Vec<(String, String)> = kb
        .chunks()
        .values()
        .map(|c| (c.id.clone(), c.text.clone()))
        .collect();
    for (id, text) in chunks {
        let v = providers.embed_text(&text)?;
        kb.upsert_vector(spaces::CHUNKS, &id, &v)?;
        kb.chunk_mut(&id).expect("chunk").embedding_id = Some(id.clone());
    }

    let entities: Vec<(String, String)> = kb
        .entities()
        .values()
        .map(|e| (e.id.clone(), format!("{}: {}", e.name, e.description)))
        .collect();
    for (id, text) in entities {
        let v = providers.embed_text(&text)?;
        kb.upsert_vector(spaces::ENTITIES, &id, &v)?;
        kb.set_entity_embedding(&id, &id);
    }

    let edges: Vec<(String, String)> = kb
        .hyperedges()
        .values()
        .map(|h| (h.id.clone(), h.relation_text.clone()))
        .collect();
    for (id, text) in edges {
        let v = providers.embed_text(&text)?;
        kb.upsert_vector(spaces::HYPEREDGES, &id, &v)?;
        kb.set_hyperedge_embedding(&id, &id);
    }

    for (img, x) in images {
        let v = providers.embed_image(&img.bytes)?;
        kb.upsert_vector(spaces::IMAGES, &img.id, &v)?;
        if let Some(c) = &x.descriptors.caption {
            let v = providers.embed_text(c)?;
            kb.upsert_vector(spaces::CAPTIONS, &img.id, &v)?;
        }
        if let Some(t) = x.descriptors.shape.as_ref().and_then(|s| s.text.as_ref()) {
            let v = providers.embed_text(t)?;
            kb.upsert_vector(spaces::SHAPES, &img.id, &v)?;
        }
        kb.image_mut(&img.id)
            .expect("image stored")
            .descriptors
            .image_embedding_id = Some(img.id.clone());
    }
    Ok(())
}

/// Save the knowledge base and its construction report under `dir`.
pub fn write_build(
    kb: &KnowledgeBase,
    report: &ConstructionReport,
    dir: &Path,
) -> Result<(), ConstructionError> {
    store::save(kb, dir)?;
    let path = dir.join(REPORT_FILE);
    let mut json = serde_json::to_vec_pretty(report)
        .map_err(|e| ConstructionError::Config(e.to_string()))?;
    json.push(b'\n');
    fs::write(&path, json).map_err(|e| ConstructionError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{DescriptorSet, DescriptorValue};
    use crate::providers::mock::{FixtureMap, MockChat};

    fn record(id: &str, brand: Option<&str>) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            uri: format!("{id}.png"),
            labels: Labels {
                brand: brand.map(Into::into),
                ..Labels::default()
            },
            descriptors: DescriptorSet::default(),
        }
    }

    fn rel(lambda: Lambda, name: &str) -> DescriptorRelation {
        DescriptorRelation {
            lambda,
            values: vec![DescriptorValue {
                name: name.into(),
                description: name.into(),
            }],
            relation_text: format!("{} {name}", lambda.name()),
        }
    }

    fn four() -> Vec<DescriptorRelation> {
        vec![
            rel(Lambda::Color, "color:blue"),
            rel(Lambda::Shape, "shape:tall"),
            rel(Lambda::Ocr, "ocr:zyn"),
            rel(Lambda::Caption, "caption:a blue tin"),
        ]
    }

    #[test]
    fn attach_with_all_lambdas_and_brand() {
        let mut kb = KnowledgeBase::new(KbMeta::default());
        let r = record("img1", Some("Zyn"));
        kb.add_image(r.clone());
        let counts = attach_image(&mut kb, &r, &four()).unwrap();
        let by_kind = kb.entity_counts();
        assert_eq!(by_kind[&EntityKind::Image], 1);
        assert!(by_kind[&EntityKind::Descriptor] <= 5);
        assert_eq!(kb.hyperedges().len(), 5);
        assert_eq!(counts.label_edges, 1);
        assert_eq!(kb.validate(), Ok(()));
    }

    #[test]
    fn shared_descriptor_entity() {
        let mut kb = KnowledgeBase::new(KbMeta::default());
        for id in ["img1", "img2"] {
            let r = record(id, None);
            kb.add_image(r.clone());
            attach_image(&mut kb, &r, &[rel(Lambda::Color, "color:blue")]).unwrap();
        }
        let blue = kb.entity_by_name("color:blue", EntityKind::Descriptor).unwrap();
        assert_eq!(blue.sources.len(), 2);
        assert_eq!(kb.entity_counts()[&EntityKind::Descriptor], 1);
        assert_eq!(kb.hyperedges().len(), 2);
    }

    #[test]
    fn single_lambda_no_labels_is_one_edge() {
        let mut kb = KnowledgeBase::new(KbMeta::default());
        let r = record("img1", None);
        kb.add_image(r.clone());
        attach_image(&mut kb, &r, &[rel(Lambda::Color, "color:red")]).unwrap();
        assert_eq!(kb.hyperedges().len(), 1);
    }

    fn chunk_kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new(KbMeta::default());
        for c in chunk_text("d", "Zyn and Velo sell mint pouches in cans.", 16, 4).unwrap() {
            kb.add_chunk(c).unwrap();
        }
        kb
    }

    #[test]
    fn payload_with_one_entity() {
        let mut kb = chunk_kb();
        let cid = kb.chunks().keys().next().unwrap().clone();
        let payload = parse_payload(
            r#"{"entities":[{"name":"Zyn","kind_hint":"brand","description":"nicotine pouch brand"}],"relations":[]}"#,
        )
        .unwrap();
        let mut report = ConstructionReport::default();
        apply_payload(&mut kb, &payload, &cid, &mut report).unwrap();
        assert_eq!(kb.entities().len(), 1);
        assert_eq!(kb.hyperedges().len(), 0);
    }

    #[test]
    fn unseen_relation_member_becomes_stub() {
        let mut kb = chunk_kb();
        let cid = kb.chunks().keys().next().unwrap().clone();
        let payload = parse_payload(
            r#"{"entities":[{"name":"Zyn","description":"brand"}],
                "relations":[{"members":["Zyn","Velo"],"relation_text":"Zyn competes with Velo"}]}"#,
        )
        .unwrap();
        let mut report = ConstructionReport::default();
        apply_payload(&mut kb, &payload, &cid, &mut report).unwrap();
        let velo = kb.entity_by_name("Velo", EntityKind::Text).unwrap();
        assert_eq!(velo.description, STUB_DESCRIPTION);
        assert_eq!(report.stub_entities, 1);
        let edge = kb.hyperedges().values().next().unwrap();
        assert_eq!(edge.weight, DEFAULT_WEIGHT);
        assert_eq!(edge.members.len(), 2);
    }

    #[test]
    fn invalid_relations_are_dropped() {
        let mut kb = chunk_kb();
        let cid = kb.chunks().keys().next().unwrap().clone();
        let payload = parse_payload(
            r#"{"entities":[{"name":"a"},{"name":"  "}],
                "relations":[{"members":["a"],"relation_text":"solo"},
                             {"members":["a","b"],"relation_text":"heavy","weight":3.0}]}"#,
        )
        .unwrap();
        let mut report = ConstructionReport::default();
        apply_payload(&mut kb, &payload, &cid, &mut report).unwrap();
        assert_eq!(report.dropped_relations, 2);
        assert_eq!(report.dropped_entities, 1);
        assert!(kb.hyperedges().is_empty());
    }

    #[test]
    fn brand_mentions_are_whole_words() {
        assert!(mentions("Try Polar Cool Mint today", "polar"));
        assert!(mentions("the Nordic Frost line.", "Nordic Frost"));
        assert!(!mentions("Polaris is different", "polar"));
    }

    #[test]
    fn text_only_corpus() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("a.txt"),
            "Polar makes Cool Mint pouches. Vento sells Berry Blast in a red can.",
        )
        .unwrap();
        let spec = CorpusSpec {
            docs: vec!["a.txt".into()],
            chunk_size: 16,
            chunk_overlap: 4,
            base_dir: dir.path().into(),
            ..CorpusSpec::default()
        };
        let providers = Providers::mock(FixtureMap::default());
        let (kb, report) = build_knowledge(&spec, &providers, &Prompts::default()).unwrap();
        assert_eq!(report.chunks, 1);
        assert!(report.entities[&EntityKind::Text] >= 4);
        assert_eq!(report.text_hyperedges, 2);
        assert!(kb.images().is_empty());
        assert_eq!(providers.counts().embed_image, 0);
    }

    #[test]
    fn parse_failures_are_reported_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "Polar makes Cool Mint pouches.").unwrap();
        let spec = CorpusSpec {
            docs: vec!["a.txt".into()],
            chunk_size: 16,
            chunk_overlap: 4,
            base_dir: dir.path().into(),
            ..CorpusSpec::default()
        };
        let providers =
            Providers::mock(FixtureMap::default()).with_chat(MockChat::scripted(["bad", "worse"]));
        let (kb, report) = build_knowledge(&spec, &providers, &Prompts::default()).unwrap();
        assert_eq!(report.parse_failures.len(), 1);
        assert_eq!(report.repairs, 1);
        assert!(kb.entities().is_empty());
        assert_eq!(kb.chunks().len(), 1);
    }

    #[test]
    fn missing_document_fails_fast() {
        let spec = CorpusSpec {
            docs: vec!["nope.txt".into()],
            base_dir: "/nonexistent".into(),
            ..CorpusSpec::default()
        };
        let err = build_knowledge(&spec, &Providers::mock(FixtureMap::default()), &Prompts::default())
            .unwrap_err();
        assert!(matches!(err, ConstructionError::Io { .. }));
        assert!(err.to_string().contains("nope.txt"));
    }

    #[test]
    fn corpus_spec_defaults_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        fs::write(&path, r#"{"docs": ["a.txt"]}"#).unwrap();
        let spec = CorpusSpec::load(&path, &ConstructionDefaults::default()).unwrap();
        assert_eq!((spec.chunk_size, spec.chunk_overlap), (200, 40));
        assert_eq!(spec.enabled_lambdas.len(), 4);
        assert_eq!(spec.base_dir, dir.path());

        fs::write(&path, r#"{"docs": [], "chunk_size": 10}"#).unwrap();
        let d = ConstructionDefaults::default();
        assert!(matches!(CorpusSpec::load(&path, &d), Err(ConstructionError::Config(_))));
        fs::write(&path, r#"{"docs": [], "bogus": 1}"#).unwrap();
        assert!(matches!(CorpusSpec::load(&path, &d), Err(ConstructionError::Config(_))));

        let d = ConstructionDefaults {
            chunk_size: 64,
            ..ConstructionDefaults::default()
        };
        fs::write(&path, r#"{"docs": [], "chunk_overlap": 8}"#).unwrap();
        let spec = CorpusSpec::load(&path, &d).unwrap();
        assert_eq!((spec.chunk_size, spec.chunk_overlap), (64, 8));
    }
}
