//! The knowledge base: entities, hyperedges, text chunks and images, plus
//! the vector indexes that embed them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptors::{DescriptorSet, Lambda};
use crate::ids;
use crate::index::{IndexError, VectorIndex};

/// Separator between merged entity descriptions.
pub const DESCRIPTION_SEPARATOR: &str = "<SEP>";
/// Merged descriptions are truncated to this many characters.
pub const MAX_DESCRIPTION_CHARS: usize = 4096;
/// Weight given to hyperedges whose extractor emitted none.
pub const DEFAULT_WEIGHT: f64 = 1.0;

/// Names of the vector spaces stored alongside the graph.
pub mod spaces {
    pub const CHUNKS: &str = "chunks";
    pub const ENTITIES: &str = "entities";
    pub const HYPEREDGES: &str = "hyperedges";
    pub const IMAGES: &str = "images";
    pub const CAPTIONS: &str = "captions";
    pub const SHAPES: &str = "shapes";

    pub const TEXT: [&str; 5] = [CHUNKS, ENTITIES, HYPEREDGES, CAPTIONS, SHAPES];
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("entity name is empty after normalization")]
    EmptyName,
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("a hyperedge needs at least two distinct members")]
    ArityTooSmall,
    #[error("hyperedge weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("chunk text is empty")]
    EmptyChunk,
    #[error("unknown vector space {0}")]
    UnknownSpace(String),
    #[error("vector space {space}: {source}")]
    Index {
        space: String,
        #[source]
        source: IndexError,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("knowledge base version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt knowledge base: {0}")]
    CorruptManifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Text,
    Image,
    Descriptor,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Text => "text",
            EntityKind::Image => "image",
            EntityKind::Descriptor => "descriptor",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub name: String,
    pub kind: EntityKind,
    pub description: String,
    /// Chunk or image ids this entity was extracted from.
    pub sources: BTreeSet<String>,
    pub embedding_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub id: String,
    pub members: Vec<String>,
    pub relation_text: String,
    pub weight: f64,
    /// Chunk or image id.
    pub source: String,
    pub embedding_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub text: String,
    pub doc_id: String,
    /// Starting word offset within the document.
    pub offset: usize,
    pub embedding_id: Option<String>,
    pub image_ids: Vec<String>,
}

/// Hierarchical catalog labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tobacco_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
}

impl Labels {
    /// Present labels as `(field name, value)` in hierarchy order.
    pub fn present(&self) -> Vec<(&'static str, &str)> {
        [
            ("tobacco_type", &self.tobacco_type),
            ("product_type", &self.product_type),
            ("brand", &self.brand),
        ]
        .into_iter()
        .filter_map(|(k, v)| {
            v.as_deref()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| (k, s))
        })
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub uri: String,
    pub labels: Labels,
    pub descriptors: DescriptorSet,
}

/// Knowledge-base wide settings persisted in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbMeta {
    /// Dimension of every text-space vector.
    pub dimension: usize,
    /// Dimension of image embeddings.
    pub image_dimension: usize,
    pub enabled_lambdas: BTreeSet<Lambda>,
}

impl Default for KbMeta {
    fn default() -> Self {
        Self {
            dimension: 0,
            image_dimension: 0,
            enabled_lambdas: Lambda::ALL.into_iter().collect(),
        }
    }
}

pub fn normalize_name(name: &str) -> String {
    name.trim().to_lowercase()
}

fn truncate_chars(s: &mut String, max: usize) {
    if let Some((idx, _)) = s.char_indices().nth(max) {
        s.truncate(idx);
    }
}

fn merge_description(existing: &mut String, incoming: &str) {
    let incoming = incoming.trim();
    if incoming.is_empty() || existing.split(DESCRIPTION_SEPARATOR).any(|d| d == incoming) {
        return;
    }
    if !existing.is_empty() {
        existing.push_str(DESCRIPTION_SEPARATOR);
    }
    existing.push_str(incoming);
    truncate_chars(existing, MAX_DESCRIPTION_CHARS);
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub meta: KbMeta,
    entities: BTreeMap<String, Entity>,
    hyperedges: BTreeMap<String, Hyperedge>,
    chunks: BTreeMap<String, Chunk>,
    images: BTreeMap<String, ImageRecord>,
    indexes: BTreeMap<String, VectorIndex>,
    /// entity id -> incident hyperedge ids
    incidence: HashMap<String, BTreeSet<String>>,
}

impl KnowledgeBase {
    pub fn new(meta: KbMeta) -> Self {
        Self {
            meta,
            ..Self::default()
        }
    }

    pub fn entities(&self) -> &BTreeMap<String, Entity> {
        &self.entities
    }

    pub fn hyperedges(&self) -> &BTreeMap<String, Hyperedge> {
        &self.hyperedges
    }

    pub fn chunks(&self) -> &BTreeMap<String, Chunk> {
        &self.chunks
    }

    pub fn images(&self) -> &BTreeMap<String, ImageRecord> {
        &self.images
    }

    pub fn indexes(&self) -> &BTreeMap<String, VectorIndex> {
        &self.indexes
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn entity_by_name(&self, name: &str, kind: EntityKind) -> Option<&Entity> {
        self.entities
            .get(&ids::entity_id(&normalize_name(name), kind.as_str()))
    }

    pub fn hyperedge(&self, id: &str) -> Option<&Hyperedge> {
        self.hyperedges.get(id)
    }

    pub fn chunk(&self, id: &str) -> Option<&Chunk> {
        self.chunks.get(id)
    }

    pub fn image(&self, id: &str) -> Option<&ImageRecord> {
        self.images.get(id)
    }

    pub fn index(&self, space: &str) -> Option<&VectorIndex> {
        self.indexes.get(space)
    }

    /// Add an entity, or merge into the one with the same normalized name
    /// and kind. Returns the entity id either way.
    pub fn add_entity(
        &mut self,
        name: &str,
        kind: EntityKind,
        description: &str,
        source: &str,
    ) -> Result<String, KbError> {
        let name = normalize_name(name);
        if name.is_empty() {
            return Err(KbError::EmptyName);
        }
        let id = ids::entity_id(&name, kind.as_str());
        let entity = self.entities.entry(id.clone()).or_insert_with(|| Entity {
            id: id.clone(),
            name,
            kind,
            description: String::new(),
            sources: BTreeSet::new(),
            embedding_id: None,
        });
        merge_description(&mut entity.description, description);
        entity.sources.insert(source.to_string());
        Ok(id)
    }

    /// Store an n-ary relation. Duplicate members are collapsed; adding an
    /// identical hyperedge twice returns the existing id.
    pub fn add_hyperedge(
        &mut self,
        members: &[String],
        relation_text: &str,
        weight: f64,
        source: &str,
    ) -> Result<String, KbError> {
        let mut distinct: Vec<String> = Vec::with_capacity(members.len());
        for m in members {
            if !distinct.contains(m) {
                distinct.push(m.clone());
            }
        }
        if distinct.len() < 2 {
            return Err(KbError::ArityTooSmall);
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(KbError::WeightOutOfRange(weight));
        }
        if let Some(missing) = distinct.iter().find(|m| !self.entities.contains_key(*m)) {
            return Err(KbError::UnknownEntity(missing.clone()));
        }
        let id = ids::hyperedge_id(&distinct, relation_text, source);
        if self.hyperedges.contains_key(&id) {
            return Ok(id);
        }
        for m in &distinct {
            self.incidence.entry(m.clone()).or_default().insert(id.clone());
        }
        self.hyperedges.insert(
            id.clone(),
            Hyperedge {
                id: id.clone(),
                members: distinct,
                relation_text: relation_text.to_string(),
                weight,
                source: source.to_string(),
                embedding_id: None,
            },
        );
        Ok(id)
    }

    /// Hyperedges that contain `entity_id`.
    pub fn incident(&self, entity_id: &str) -> Result<Vec<&Hyperedge>, KbError> {
        if !self.entities.contains_key(entity_id) {
            return Err(KbError::UnknownEntity(entity_id.to_string()));
        }
        Ok(self
            .incidence
            .get(entity_id)
            .into_iter()
            .flatten()
            .map(|e| &self.hyperedges[e])
            .collect())
    }

    /// Entities sharing at least one hyperedge with `entity_id`.
    pub fn neighbors(&self, entity_id: &str) -> Result<BTreeSet<String>, KbError> {
        let mut out = BTreeSet::new();
        for edge in self.incident(entity_id)? {
            out.extend(edge.members.iter().filter(|m| *m != entity_id).cloned());
        }
        Ok(out)
    }

    pub fn add_chunk(&mut self, chunk: Chunk) -> Result<String, KbError> {
        if chunk.text.trim().is_empty() {
            return Err(KbError::EmptyChunk);
        }
        let id = chunk.id.clone();
        self.chunks.insert(id.clone(), chunk);
        Ok(id)
    }

    pub fn chunk_mut(&mut self, id: &str) -> Option<&mut Chunk> {
        self.chunks.get_mut(id)
    }

    pub fn add_image(&mut self, record: ImageRecord) -> String {
        let id = record.id.clone();
        self.images.insert(id.clone(), record);
        id
    }

    pub fn image_mut(&mut self, id: &str) -> Option<&mut ImageRecord> {
        self.images.get_mut(id)
    }

    pub fn set_entity_embedding(&mut self, id: &str, embedding_id: &str) {
        if let Some(e) = self.entities.get_mut(id) {
            e.embedding_id = Some(embedding_id.to_string());
        }
    }

    pub fn set_hyperedge_embedding(&mut self, id: &str, embedding_id: &str) {
        if let Some(e) = self.hyperedges.get_mut(id) {
            e.embedding_id = Some(embedding_id.to_string());
        }
    }

    fn space_dimension(&self, space: &str) -> Result<usize, KbError> {
        if space == spaces::IMAGES {
            Ok(self.meta.image_dimension)
        } else if spaces::TEXT.contains(&space) {
            Ok(self.meta.dimension)
        } else {
            Err(KbError::UnknownSpace(space.to_string()))
        }
    }

    /// Store a vector in one of the named spaces. The space's dimension is
    /// fixed by the manifest; a zero manifest dimension adopts the first
    /// vector's length.
    pub fn upsert_vector(&mut self, space: &str, id: &str, vector: &[f32]) -> Result<(), KbError> {
        let mut dim = self.space_dimension(space)?;
        if dim == 0 {
            dim = vector.len();
            if space == spaces::IMAGES {
                self.meta.image_dimension = dim;
            } else {
                self.meta.dimension = dim;
            }
        }
        self.indexes
            .entry(space.to_string())
            .or_insert_with(|| VectorIndex::new(dim))
            .upsert(id, vector)
            .map_err(|source| KbError::Index {
                space: space.to_string(),
                source,
            })
    }

    pub(crate) fn insert_index(&mut self, space: &str, index: VectorIndex) -> Result<(), KbError> {
        self.space_dimension(space)?;
        self.indexes.insert(space.to_string(), index);
        Ok(())
    }

    pub(crate) fn insert_raw(
        &mut self,
        entities: Vec<Entity>,
        hyperedges: Vec<Hyperedge>,
        chunks: Vec<Chunk>,
        images: Vec<ImageRecord>,
    ) {
        for e in entities {
            self.entities.insert(e.id.clone(), e);
        }
        for h in hyperedges {
            for m in &h.members {
                self.incidence.entry(m.clone()).or_default().insert(h.id.clone());
            }
            self.hyperedges.insert(h.id.clone(), h);
        }
        for c in chunks {
            self.chunks.insert(c.id.clone(), c);
        }
        for i in images {
            self.images.insert(i.id.clone(), i);
        }
    }

    fn resolves_source(&self, id: &str) -> bool {
        self.chunks.contains_key(id) || self.images.contains_key(id)
    }

    fn check_embedding(&self, space: &str, owner: &str, id: &Option<String>) -> Result<(), String> {
        match id {
            None => Ok(()),
            Some(eid) if self.indexes.get(space).is_some_and(|i| i.contains(eid)) => Ok(()),
            Some(eid) => Err(format!("{owner}: embedding {eid} missing from space {space}")),
        }
    }

    /// Check referential integrity and vector dimensions. Returns the first
    /// violation found.
    pub fn validate(&self) -> Result<(), String> {
        for (id, e) in &self.entities {
            if e.id != *id || e.name.is_empty() {
                return Err(format!("entity {id}: bad id or empty name"));
            }
            if e.sources.is_empty() {
                return Err(format!("entity {id}: no sources"));
            }
            if let Some(s) = e.sources.iter().find(|s| !self.resolves_source(s)) {
                return Err(format!("entity {id}: unknown source {s}"));
            }
            self.check_embedding(spaces::ENTITIES, id, &e.embedding_id)?;
        }
        for (id, h) in &self.hyperedges {
            if h.members.len() < 2 {
                return Err(format!("hyperedge {id}: arity < 2"));
            }
            if !(0.0..=1.0).contains(&h.weight) {
                return Err(format!("hyperedge {id}: weight out of range"));
            }
            if let Some(m) = h.members.iter().find(|m| !self.entities.contains_key(*m)) {
                return Err(format!("hyperedge {id}: unknown member {m}"));
            }
            if !self.resolves_source(&h.source) {
                return Err(format!("hyperedge {id}: unknown source {}", h.source));
            }
            self.check_embedding(spaces::HYPEREDGES, id, &h.embedding_id)?;
        }
        for (id, c) in &self.chunks {
            if c.text.trim().is_empty() {
                return Err(format!("chunk {id}: empty text"));
            }
            if let Some(i) = c.image_ids.iter().find(|i| !self.images.contains_key(*i)) {
                return Err(format!("chunk {id}: unknown image {i}"));
            }
            self.check_embedding(spaces::CHUNKS, id, &c.embedding_id)?;
        }
        for (id, img) in &self.images {
            self.check_embedding(spaces::IMAGES, id, &img.descriptors.image_embedding_id)?;
        }
        for (space, index) in &self.indexes {
            let want = self.space_dimension(space).map_err(|e| e.to_string())?;
            if index.dimension() != want {
                return Err(format!(
                    "space {space}: dimension {} but manifest says {want}",
                    index.dimension()
                ));
            }
        }
        Ok(())
    }

    /// Entity counts by kind.
    pub fn entity_counts(&self) -> BTreeMap<EntityKind, usize> {
        let mut out = BTreeMap::new();
        for e in self.entities.values() {
            *out.entry(e.kind).or_default() += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::new(KbMeta::default())
    }

    #[test]
    fn add_entity_inserts() {
        let mut kb = kb();
        kb.add_entity("Zyn", EntityKind::Text, "brand", "c1").unwrap();
        assert_eq!(kb.entities().len(), 1);
    }

    #[test]
    fn names_normalize_and_merge() {
        let mut kb = kb();
        let a = kb.add_entity("zyn ", EntityKind::Text, "pouch brand", "c1").unwrap();
        let b = kb.add_entity("Zyn", EntityKind::Text, "sold in tins", "c2").unwrap();
        assert_eq!(a, b);
        let e = kb.entity(&a).unwrap();
        assert_eq!(e.name, "zyn");
        assert_eq!(e.sources.len(), 2);
        assert_eq!(e.description, "pouch brand<SEP>sold in tins");
    }

    #[test]
    fn kind_disambiguates() {
        let mut kb = kb();
        kb.add_entity("Zyn", EntityKind::Text, "", "c1").unwrap();
        kb.add_entity("Zyn", EntityKind::Image, "", "i1").unwrap();
        assert_eq!(kb.entities().len(), 2);
    }

    #[test]
    fn empty_name_rejected() {
        assert!(matches!(
            kb().add_entity("   ", EntityKind::Text, "", "c"),
            Err(KbError::EmptyName)
        ));
    }

    #[test]
    fn description_merge_is_capped() {
        let mut kb = kb();
        let long = "x".repeat(3000);
        let id = kb.add_entity("a", EntityKind::Text, &long, "c").unwrap();
        kb.add_entity("a", EntityKind::Text, &"y".repeat(3000), "c").unwrap();
        assert_eq!(kb.entity(&id).unwrap().description.chars().count(), MAX_DESCRIPTION_CHARS);
    }

    #[test]
    fn repeated_description_is_not_duplicated() {
        let mut kb = kb();
        let id = kb.add_entity("a", EntityKind::Text, "same", "c1").unwrap();
        kb.add_entity("a", EntityKind::Text, "same", "c2").unwrap();
        assert_eq!(kb.entity(&id).unwrap().description, "same");
    }

    fn abcd(kb: &mut KnowledgeBase) -> Vec<String> {
        ["a", "b", "c", "d"]
            .iter()
            .map(|n| kb.add_entity(n, EntityKind::Text, "", "src").unwrap())
            .collect()
    }

    #[test]
    fn hyperedge_neighbors() {
        let mut kb = kb();
        let ids = abcd(&mut kb);
        kb.add_hyperedge(&ids[..3], "abc", 1.0, "src").unwrap();
        let n = kb.neighbors(&ids[0]).unwrap();
        assert!(n.contains(&ids[1]) && n.contains(&ids[2]));
        assert!(kb.neighbors(&ids[3]).unwrap().is_empty());
    }

    #[test]
    fn neighbors_union_over_edges() {
        let mut kb = kb();
        let ids = abcd(&mut kb);
        kb.add_hyperedge(&[ids[0].clone(), ids[1].clone()], "ab", 1.0, "s").unwrap();
        kb.add_hyperedge(&[ids[0].clone(), ids[2].clone(), ids[3].clone()], "acd", 1.0, "s")
            .unwrap();
        let want: BTreeSet<_> = ids[1..].iter().cloned().collect();
        assert_eq!(kb.neighbors(&ids[0]).unwrap(), want);
    }

    #[test]
    fn hyperedge_errors() {
        let mut kb = kb();
        let ids = abcd(&mut kb);
        assert!(matches!(
            kb.add_hyperedge(&ids[..1], "a", 1.0, "s"),
            Err(KbError::ArityTooSmall)
        ));
        assert!(matches!(
            kb.add_hyperedge(&[ids[0].clone(), ids[0].clone()], "aa", 1.0, "s"),
            Err(KbError::ArityTooSmall)
        ));
        assert!(matches!(
            kb.add_hyperedge(&[ids[0].clone(), "missing".into()], "x", 1.0, "s"),
            Err(KbError::UnknownEntity(m)) if m == "missing"
        ));
        assert!(matches!(
            kb.add_hyperedge(&ids[..2], "x", 1.5, "s"),
            Err(KbError::WeightOutOfRange(_))
        ));
        assert!(matches!(kb.neighbors("nope"), Err(KbError::UnknownEntity(_))));
    }

    #[test]
    fn vectors_adopt_and_enforce_dimension() {
        let mut kb = kb();
        kb.upsert_vector(spaces::CHUNKS, "c", &[1.0, 0.0]).unwrap();
        assert_eq!(kb.meta.dimension, 2);
        assert!(kb.upsert_vector(spaces::ENTITIES, "e", &[1.0, 0.0, 0.0]).is_err());
        assert!(matches!(
            kb.upsert_vector("bogus", "x", &[1.0]),
            Err(KbError::UnknownSpace(_))
        ));
    }

    /// Random hypergraph over `n` entities; returns the entity ids and the
    /// raw member lists for oracle checks.
    fn random_graph(seed: u64, n: usize, m: usize) -> (KnowledgeBase, Vec<String>, Vec<Vec<String>>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut kb = kb();
        let ids: Vec<String> = (0..n)
            .map(|i| kb.add_entity(&format!("e{i}"), EntityKind::Text, "", "s").unwrap())
            .collect();
        let mut edges = Vec::new();
        for j in 0..m {
            let arity = rng.gen_range(2..=4.min(n));
            let mut members = Vec::new();
            while members.len() < arity {
                let pick = ids[rng.gen_range(0..n)].clone();
                if !members.contains(&pick) {
                    members.push(pick);
                }
            }
            kb.add_hyperedge(&members, &format!("r{j}"), 1.0, "s").unwrap();
            edges.push(members);
        }
        (kb, ids, edges)
    }

    #[test]
    fn neighbors_match_exhaustive_edge_scan() {
        let (kb, ids, edges) = random_graph(42, 20, 15);
        for id in &ids {
            let oracle: BTreeSet<String> = edges
                .iter()
                .filter(|e| e.contains(id))
                .flat_map(|e| e.iter().cloned())
                .filter(|m| m != id)
                .collect();
            assert_eq!(kb.neighbors(id).unwrap(), oracle);
        }
    }

    proptest! {
        #[test]
        fn neighbors_are_symmetric(seed in any::<u64>()) {
            let (kb, ids, _) = random_graph(seed, 12, 10);
            for a in &ids {
                for b in kb.neighbors(a).unwrap() {
                    prop_assert!(kb.neighbors(&b).unwrap().contains(a));
                }
            }
        }

        #[test]
        fn repeated_insertion_yields_one_entity(n in 1usize..20, pad in 0usize..3) {
            let mut kb = kb();
            for i in 0..n {
                let name = format!("{}Zyn{}", " ".repeat(i % (pad + 1)), " ".repeat(pad));
                kb.add_entity(&name, EntityKind::Descriptor, "d", "s").unwrap();
            }
            prop_assert_eq!(kb.entities().len(), 1);
        }

        #[test]
        fn random_ops_keep_integrity(ops in proptest::collection::vec((0u8..3, 0usize..8, 0usize..8, 0usize..8), 1..60)) {
            let mut kb = kb();
            kb.add_chunk(Chunk {
                id: "c".into(), text: "t".into(), doc_id: "d".into(), offset: 0,
                embedding_id: None, image_ids: vec![],
            }).unwrap();
            for (op, a, b, c) in ops {
                match op {
                    0 => { kb.add_entity(&format!("n{a}"), EntityKind::Text, "x", "c").unwrap(); }
                    1 => {
                        let members: Vec<String> = [a, b, c].iter()
                            .map(|i| ids::entity_id(&format!("n{i}"), "text")).collect();
                        let _ = kb.add_hyperedge(&members, "r", 0.5, "c");
                    }
                    _ => { let _ = kb.add_hyperedge(&[ids::entity_id(&format!("n{a}"), "text")], "r", 1.0, "c"); }
                }
                prop_assert_eq!(kb.validate(), Ok(()));
            }
        }
    }
}
