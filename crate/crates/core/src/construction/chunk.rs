use crate::ids;
use crate::model::Chunk;

use super::ConstructionError;

pub const MIN_CHUNK_SIZE: usize = 16;
pub const DEFAULT_CHUNK_SIZE: usize = 200;
pub const DEFAULT_CHUNK_OVERLAP: usize = 40;

pub fn check_chunking(size: usize, overlap: usize) -> Result<(), ConstructionError> {
    if size < MIN_CHUNK_SIZE {
        return Err(ConstructionError::Config(format!(
            "chunk_size {size} is below the minimum of {MIN_CHUNK_SIZE}"
        )));
    }
    if overlap >= size {
        return Err(ConstructionError::Config(format!(
            "chunk_overlap {overlap} must be smaller than chunk_size {size}"
        )));
    }
    Ok(())
}

/// Split a document into sliding windows of `size` whitespace-separated
/// words, advancing by `size - overlap`. The final window may be shorter,
/// and no window starts once the previous one reached the end.
pub fn chunk_text(
    doc_id: &str,
    text: &str,
    size: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, ConstructionError> {
    check_chunking(size, overlap)?;
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(ConstructionError::EmptyDocument(doc_id.to_string()));
    }
    let stride = size - overlap;
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + size).min(words.len());
        chunks.push(Chunk {
            id: ids::chunk_id(doc_id, start),
            text: words[start..end].join(" "),
            doc_id: doc_id.to_string(),
            offset: start,
            embedding_id: None,
            image_ids: Vec::new(),
        });
        if end == words.len() {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn short_doc_is_one_chunk() {
        assert_eq!(chunk_text("d", &doc(50), 100, 20).unwrap().len(), 1);
    }

    #[test]
    fn stride_arithmetic() {
        let chunks = chunk_text("d", &doc(250), 100, 20).unwrap();
        let starts: Vec<_> = chunks.iter().map(|c| c.offset).collect();
        assert_eq!(starts, [0, 80, 160]);
        assert_eq!(chunks[2].text.split_whitespace().count(), 90);
    }

    #[test]
    fn exact_fit_has_no_trailing_window() {
        assert_eq!(chunk_text("d", &doc(100), 100, 20).unwrap().len(), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            chunk_text("d", "  \n ", 100, 20),
            Err(ConstructionError::EmptyDocument(_))
        ));
        assert!(matches!(chunk_text("d", "x", 8, 2), Err(ConstructionError::Config(_))));
        assert!(matches!(chunk_text("d", "x", 20, 20), Err(ConstructionError::Config(_))));
    }

    #[test]
    fn chunk_ids_depend_on_doc_and_offset() {
        let a = chunk_text("a", &doc(300), 100, 20).unwrap();
        let b = chunk_text("b", &doc(300), 100, 20).unwrap();
        assert_ne!(a[0].id, a[1].id);
        assert_ne!(a[0].id, b[0].id);
    }

    proptest! {
        #[test]
        fn every_word_is_covered(n in 1usize..600, size in 16usize..120, overlap_frac in 0.0f64..0.9) {
            let overlap = ((size as f64) * overlap_frac) as usize;
            let chunks = chunk_text("d", &doc(n), size, overlap).unwrap();
            let mut covered = vec![false; n];
            for c in &chunks {
                let len = c.text.split_whitespace().count();
                prop_assert!(len <= size && len > 0);
                for i in c.offset..c.offset + len {
                    covered[i] = true;
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
            prop_assert_eq!(chunks.last().unwrap().offset + chunks.last().unwrap().text.split_whitespace().count(), n);
        }
    }
}
