//! Content-hash identifiers.
//!
//! Every id in a knowledge base is the lowercase hex encoding of the first
//! 128 bits of a SHA-256 digest over the identifying content.

use sha2::{Digest, Sha256};

/// Hash an ordered list of parts into a 128-bit hex id.
///
/// Parts are length-prefixed so that `["ab", "c"]` and `["a", "bc"]` never
/// collide.
pub fn content_id(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    hex::encode(&digest[..16])
}

/// Id of an image: hash of its file bytes.
pub fn image_id(bytes: &[u8]) -> String {
    content_id(&[b"image", bytes])
}

/// Id of an entity: hash of normalized name and kind.
pub fn entity_id(name: &str, kind: &str) -> String {
    content_id(&[b"entity", name.as_bytes(), kind.as_bytes()])
}

/// Id of a chunk: hash of document id and the chunk's starting word offset.
pub fn chunk_id(doc_id: &str, offset: usize) -> String {
    content_id(&[b"chunk", doc_id.as_bytes(), &(offset as u64).to_le_bytes()])
}

/// Id of a hyperedge: hash of its ordered members, relation text and source.
pub fn hyperedge_id(members: &[String], relation_text: &str, source: &str) -> String {
    let mut parts: Vec<&[u8]> = vec![b"hyperedge"];
    for m in members {
        parts.push(m.as_bytes());
    }
    parts.push(b"|");
    parts.push(relation_text.as_bytes());
    parts.push(source.as_bytes());
    content_id(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_128_bit_lowercase_hex() {
        let id = image_id(b"abc");
        assert_eq!(id.len(), 32);
        assert!(id.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }

    #[test]
    fn length_prefix_prevents_concatenation_collisions() {
        assert_ne!(content_id(&[b"ab", b"c"]), content_id(&[b"a", b"bc"]));
    }

    #[test]
    fn identical_bytes_share_an_id() {
        assert_eq!(image_id(b"same"), image_id(b"same"));
        assert_ne!(entity_id("zyn", "text"), entity_id("zyn", "image"));
    }
}
