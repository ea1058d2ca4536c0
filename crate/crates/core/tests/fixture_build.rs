use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use hyperrag::config::AppConfig;
use hyperrag::construction::{build_knowledge, write_build, ConstructionReport, CorpusSpec};
use hyperrag::descriptors::Lambda;
use hyperrag::model::{EntityKind, KnowledgeBase};
use hyperrag::retrieval::{Criterion, Engine, Mode, Query};
use hyperrag::{ids, store};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn config() -> AppConfig {
    AppConfig::load(&fixture().join("hyperrag.json")).unwrap()
}

fn build_with(lambdas: &[Lambda]) -> (KnowledgeBase, ConstructionReport) {
    let cfg = config();
    let mut spec = CorpusSpec::load(&fixture().join("corpus.json"), &cfg.construction).unwrap();
    spec.enabled_lambdas = lambdas.iter().copied().collect();
    let providers = cfg.providers().unwrap();
    build_knowledge(&spec, &providers, &cfg.prompts().unwrap()).unwrap()
}

fn build() -> (KnowledgeBase, ConstructionReport) {
    build_with(&Lambda::ALL)
}

#[test]
fn report_counts() {
    let (kb, report) = build();
    assert_eq!(report.documents, 8);
    assert_eq!(report.images, 32);
    assert_eq!(report.chunks, 16);
    assert!(report.parse_failures.is_empty());
    assert!(report.optional_failures.is_empty());
    // 4 extractor edges and 3 label edges per image.
    assert_eq!(report.descriptor_hyperedges, 32 * 7);
    assert_eq!(report.expected_descriptor_hyperedges, 32 * 7);
    assert_eq!(report.hyperedges, report.text_hyperedges + 32 * 7);
    assert_eq!(kb.entity_counts()[&EntityKind::Image], 32);
    assert_eq!(kb.validate(), Ok(()));
    for img in kb.images().values() {
        let e = kb.entity_by_name(&img.id, EntityKind::Image).unwrap();
        assert!(!kb.incident(&e.id).unwrap().is_empty());
    }
}

#[test]
fn shared_color_descriptor() {
    let (kb, _) = build();
    let green = kb.entity_by_name("color:green", EntityKind::Descriptor).unwrap();
    assert_eq!(kb.incident(&green.id).unwrap().len(), 4);
    assert!(kb.entity_by_name("ocr:(none)", EntityKind::Descriptor).is_some());
}

#[test]
fn chunks_link_to_brand_images() {
    let (kb, _) = build();
    for c in kb.chunks().values() {
        assert!(!c.image_ids.is_empty(), "chunk {} of {}", c.offset, c.doc_id);
    }
}

#[test]
fn disabling_an_extractor_only_removes_its_artifacts() {
    let (full, _) = build();
    let (partial, _) = build_with(&[Lambda::Color, Lambda::Shape, Lambda::Ocr]);
    let full_ids: BTreeSet<_> = full.entities().keys().collect();
    let part_ids: BTreeSet<_> = partial.entities().keys().collect();
    assert!(part_ids.is_subset(&full_ids));
    for id in full_ids.difference(&part_ids) {
        assert!(full.entity(id).unwrap().name.starts_with("caption:"));
    }
    for (id, e) in partial.entities() {
        assert_eq!(e, full.entity(id).unwrap());
    }
    for (id, h) in partial.hyperedges() {
        assert_eq!(h, full.hyperedge(id).unwrap());
    }
    assert_eq!(full.hyperedges().len() - partial.hyperedges().len(), 32);
}

#[test]
fn build_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let (kb, report) = build();
        write_build(&kb, &report, dir).unwrap();
    }
    for name in [
        store::MANIFEST,
        store::ENTITIES,
        store::HYPEREDGES,
        store::CHUNKS,
        store::IMAGES,
        store::VECTORS,
        "report.json",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let reloaded = store::load(a.path()).unwrap();
    assert_eq!(reloaded, build().0);
}

fn fixture_images() -> Vec<Vec<u8>> {
    let dir = fixture().join("images");
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    out.sort();
    out.into_iter().map(|p| fs::read(p).unwrap()).collect()
}

#[test]
fn every_image_retrieves_itself() {
    let (kb, _) = build();
    let cfg = config();
    let providers = cfg.providers().unwrap();
    let prompts = cfg.prompts().unwrap();
    let engine = Engine::new(&kb, &providers, &prompts);
    for bytes in fixture_images() {
        let id = ids::image_id(&bytes);
        let q = Query::new("which product is this?").with_image(bytes);
        let r = engine.retrieve(&q).unwrap();
        let top = &r.images[0];
        assert_eq!(top.id, id);
        assert_eq!(top.scores.len(), 5);
        for (c, s) in &top.scores {
            assert!((s - 1.0).abs() < 1e-9, "criterion {c}: {s}");
        }
        assert!((top.fused - 5.0 / 61.0).abs() < 1e-12);
    }
}

#[test]
fn text_query_has_no_images() {
    let (kb, _) = build();
    let providers = config().providers().unwrap();
    let prompts = config().prompts().unwrap();
    let engine = Engine::new(&kb, &providers, &prompts);
    let r = engine.retrieve(&Query::new("Which flavors does Polar sell?")).unwrap();
    assert!(r.images.is_empty());
    assert!(!r.chunks.is_empty() && !r.entities.is_empty());
    for id in r
        .chunks
        .iter()
        .chain(&r.entities)
        .chain(&r.hyperedges)
        .map(|h| &h.id)
    {
        assert!(r.provenance.contains_key(id));
        assert!(kb.chunk(id).is_some() || kb.entity(id).is_some() || kb.hyperedge(id).is_some());
    }

    let mut big = Query::new("mint");
    big.k = 10_000;
    let r = engine.retrieve(&big).unwrap();
    assert_eq!(r.chunks.len(), kb.chunks().len());
}

#[test]
fn disabled_criteria_hide_descriptors_without_changing_other_scores() {
    let (kb, _) = build();
    let providers = config().providers().unwrap();
    let prompts = config().prompts().unwrap();
    let engine = Engine::new(&kb, &providers, &prompts);
    let bytes = fixture_images().remove(3);
    let full = engine
        .retrieve(&Query::new("green packaging").with_image(bytes.clone()))
        .unwrap();
    let mut q = Query::new("green packaging").with_image(bytes);
    q.criteria = [Criterion::Embedding, Criterion::Color].into();
    let part = engine.retrieve(&q).unwrap();
    for m in &part.images {
        assert_eq!(m.scores.len(), 2);
        if let Some(f) = full.images.iter().find(|x| x.id == m.id) {
            for (c, s) in &m.scores {
                assert_eq!(f.scores[c], *s);
            }
        }
    }
    for h in &part.entities {
        let name = &kb.entity(&h.id).unwrap().name;
        assert!(!name.starts_with("ocr:") && !name.starts_with("shape:") && !name.starts_with("caption:"));
    }
}

#[test]
fn modes() {
    let (kb, _) = build();
    let providers = config().providers().unwrap().with_chat_log();
    let prompts = config().prompts().unwrap();
    let engine = Engine::new(&kb, &providers, &prompts);

    let mut q = Query::new("What flavors does Polar offer?");
    q.mode = Mode::Naive;
    let before = providers.counts();
    let a = engine.answer(&q).unwrap();
    assert_eq!(providers.counts().chat - before.chat, 1);
    assert_eq!(providers.counts().embed_text, before.embed_text);
    assert_eq!(engine.retrievals(), 0);
    assert!(a.context.is_empty());

    q.mode = Mode::Nico;
    q.image = Some(fixture_images().remove(0));
    let a = engine.answer(&q).unwrap();
    let top_chunk = &a.retrieval.as_ref().unwrap().chunks[0].id;
    assert!(a.answer.contains(&kb.chunk(top_chunk).unwrap().text));
    assert_eq!(providers.counts().chat_image_payloads, 0);
    assert!(providers.chat_log().iter().all(|r| r.image.is_none()));

    q.mode = Mode::Standard;
    let a = engine.answer(&q).unwrap();
    assert!(a.context.iter().all(|c| c.text.contains(" of ")));
    assert_eq!(providers.counts().chat_image_payloads, 0);
}
