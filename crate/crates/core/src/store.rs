//! On-disk knowledge-base layout.
//!
//! ```text
//! kb_dir/
//!   manifest.json      version, dimensions, enabled extractors, vector row tables
//!   entities.jsonl     one record per line, sorted by id
//!   hyperedges.jsonl
//!   chunks.jsonl
//!   images.jsonl
//!   vectors.bin        little-endian f32, row-major; spaces in manifest order
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::descriptors::Lambda;
use crate::index::VectorIndex;
use crate::model::{KbError, KbMeta, KnowledgeBase};

pub const FORMAT_VERSION: u32 = 1;

pub const MANIFEST: &str = "manifest.json";
pub const ENTITIES: &str = "entities.jsonl";
pub const HYPEREDGES: &str = "hyperedges.jsonl";
pub const CHUNKS: &str = "chunks.jsonl";
pub const IMAGES: &str = "images.jsonl";
pub const VECTORS: &str = "vectors.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorTable {
    pub space: String,
    pub dimension: usize,
    /// embedding id -> row within this space
    pub rows: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub dimension: usize,
    pub image_dimension: usize,
    pub enabled_lambdas: BTreeSet<Lambda>,
    pub vectors: Vec<VectorTable>,
}

fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl Iterator<Item = &'a T>,
) -> Result<(), KbError> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)
            .map_err(|e| KbError::CorruptManifest(e.to_string()))?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, KbError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| {
                KbError::CorruptManifest(format!("{}:{}: {e}", path.display(), n + 1))
            })
        })
        .collect()
}

pub fn save(kb: &KnowledgeBase, dir: &Path) -> Result<(), KbError> {
    fs::create_dir_all(dir)?;
    let mut vectors = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    for (space, index) in kb.indexes() {
        let rows = index
            .ids()
            .iter()
            .enumerate()
            .map(|(row, id)| (id.clone(), row))
            .collect();
        vectors.push(VectorTable {
            space: space.clone(),
            dimension: index.dimension(),
            rows,
        });
        for v in index.values() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        dimension: kb.meta.dimension,
        image_dimension: kb.meta.image_dimension,
        enabled_lambdas: kb.meta.enabled_lambdas.clone(),
        vectors,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| KbError::CorruptManifest(e.to_string()))?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST), json)?;
    write_jsonl(&dir.join(ENTITIES), kb.entities().values())?;
    write_jsonl(&dir.join(HYPEREDGES), kb.hyperedges().values())?;
    write_jsonl(&dir.join(CHUNKS), kb.chunks().values())?;
    write_jsonl(&dir.join(IMAGES), kb.images().values())?;
    let mut f = fs::File::create(dir.join(VECTORS))?;
    f.write_all(&blob)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, KbError> {
    let bytes = fs::read(dir.join(MANIFEST))?;
    let raw: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| KbError::CorruptManifest(e.to_string()))?;
    let version = raw
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| KbError::CorruptManifest("manifest has no version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(KbError::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(raw).map_err(|e| KbError::CorruptManifest(e.to_string()))
}

pub fn load(dir: &Path) -> Result<KnowledgeBase, KbError> {
    let manifest = read_manifest(dir)?;
    let mut kb = KnowledgeBase::new(KbMeta {
        dimension: manifest.dimension,
        image_dimension: manifest.image_dimension,
        enabled_lambdas: manifest.enabled_lambdas.clone(),
    });
    kb.insert_raw(
        read_jsonl(&dir.join(ENTITIES))?,
        read_jsonl(&dir.join(HYPEREDGES))?,
        read_jsonl(&dir.join(CHUNKS))?,
        read_jsonl(&dir.join(IMAGES))?,
    );

    let blob = fs::read(dir.join(VECTORS))?;
    if blob.len() % 4 != 0 {
        return Err(KbError::CorruptManifest("vectors.bin is not f32-aligned".into()));
    }
    let floats: Vec<f32> = blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut offset = 0usize;
    for table in &manifest.vectors {
        let n = table.rows.len();
        let mut ids = vec![String::new(); n];
        for (id, &row) in &table.rows {
            if row >= n || !ids[row].is_empty() {
                return Err(KbError::CorruptManifest(format!(
                    "space {}: bad row table",
                    table.space
                )));
            }
            ids[row] = id.clone();
        }
        let len = n * table.dimension;
        let values = floats
            .get(offset..offset + len)
            .ok_or_else(|| KbError::CorruptManifest("vectors.bin is truncated".into()))?
            .to_vec();
        offset += len;
        let index = VectorIndex::from_rows(table.dimension, ids, values).map_err(|source| {
            KbError::Index {
                space: table.space.clone(),
                source,
            }
        })?;
        kb.insert_index(&table.space, index)?;
    }
    if offset != floats.len() {
        return Err(KbError::CorruptManifest("vectors.bin has trailing data".into()));
    }
    kb.validate().map_err(KbError::CorruptManifest)?;
    Ok(kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{spaces, Chunk, EntityKind};

    fn small_kb() -> KnowledgeBase {
        let mut kb = KnowledgeBase::new(KbMeta::default());
        kb.add_chunk(Chunk {
            id: "c1".into(),
            text: "Zyn sells mint".into(),
            doc_id: "d".into(),
            offset: 0,
            embedding_id: Some("c1".into()),
            image_ids: vec![],
        })
        .unwrap();
        let a = kb.add_entity("zyn", EntityKind::Text, "brand", "c1").unwrap();
        let b = kb.add_entity("mint", EntityKind::Text, "flavor", "c1").unwrap();
        kb.add_hyperedge(&[a, b], "zyn sells mint", 1.0, "c1").unwrap();
        kb.upsert_vector(spaces::CHUNKS, "c1", &[0.1, 0.2, 0.3]).unwrap();
        kb
    }

    #[test]
    fn empty_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let kb = KnowledgeBase::new(KbMeta::default());
        save(&kb, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), kb);
    }

    #[test]
    fn roundtrip_preserves_fields_and_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let kb = small_kb();
        save(&kb, dir.path()).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back, kb);
        let again = tempfile::tempdir().unwrap();
        save(&back, again.path()).unwrap();
        for f in [MANIFEST, ENTITIES, HYPEREDGES, CHUNKS, IMAGES, VECTORS] {
            assert_eq!(
                fs::read(dir.path().join(f)).unwrap(),
                fs::read(again.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn version_bump_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save(&small_kb(), dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace("\"version\": 1", "\"version\": 2")).unwrap();
        assert!(matches!(
            load(dir.path()),
            Err(KbError::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save(&small_kb(), dir.path()).unwrap();
        fs::write(dir.path().join(VECTORS), [0u8; 6]).unwrap();
        assert!(matches!(load(dir.path()), Err(KbError::CorruptManifest(_))));

        save(&small_kb(), dir.path()).unwrap();
        fs::write(dir.path().join(MANIFEST), "{not json").unwrap();
        assert!(matches!(load(dir.path()), Err(KbError::CorruptManifest(_))));
    }

    #[test]
    fn dangling_reference_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        save(&small_kb(), dir.path()).unwrap();
        fs::write(dir.path().join(CHUNKS), "").unwrap();
        assert!(matches!(load(dir.path()), Err(KbError::CorruptManifest(_))));
    }

    #[test]
    fn missing_directory_is_io_error() {
        assert!(matches!(
            load(Path::new("/definitely/not/here")),
            Err(KbError::Io(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_weights_and_vectors_roundtrip(
            weight in 0.0f64..=1.0,
            v in proptest::collection::vec(-1e6f32..1e6, 3),
        ) {
            let mut kb = small_kb();
            let ids: Vec<String> = kb.entities().keys().cloned().collect();
            kb.add_hyperedge(&ids, "weighted", weight, "c1").unwrap();
            kb.upsert_vector(spaces::CHUNKS, "c1", &v).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save(&kb, dir.path()).unwrap();
            proptest::prop_assert_eq!(load(dir.path()).unwrap(), kb);
        }
    }
}
