mod support;

use std::fs;
use std::path::Path;

use relemb_core::corpus::{build_corpus, load_sentences, Corpus, CorpusConfig, Strategy};
use relemb_core::error::FormatError;
use relemb_core::eval::LinkGraph;
use relemb_core::kg::{build_kg, train_transh, TransHConfig, TransHModel, TripleStore};
use relemb_core::schema::synth::{generate_synthetic, LinkParams, SynthParams};
use relemb_core::schema::{denormalize, load_database, write_database};
use relemb_core::seq::{Layout, SeqModel, Variant};
use relemb_core::sgns::EmbeddingStore;
use relemb_core::Error;
use support::*;

fn bytes(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

fn small_store(seed: u64, n: usize, d: usize) -> EmbeddingStore {
    let mut r = rng(seed);
    let tokens = (0..n).map(|i| format!("t={i}")).collect();
    EmbeddingStore::new(tokens, d, uniform_vec(&mut r, n * d, 2.0)).unwrap()
}

fn seq_model(seed: u64) -> SeqModel {
    let mut r = rng(seed);
    let table = random_table(&mut r, 3, 7);
    let layout = Layout::new(3, 4, Variant::ActorConcat);
    let params = layout.init(seed);
    SeqModel {
        variant: Variant::ActorConcat,
        layout,
        params,
        table,
    }
}

#[test]
fn embedding_store_survives_save_load_save() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    let store = small_store(1, 10, 8);
    store.save(&a).unwrap();
    let back = EmbeddingStore::load(&a).unwrap();
    assert_eq!(back.len(), 10);
    assert_eq!(back.dim(), 8);
    assert_eq!(back.tokens(), store.tokens());
    back.save(&b).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    // values survive to the printed precision
    for t in store.tokens() {
        for (x, y) in store.vector(t).unwrap().iter().zip(back.vector(t).unwrap()) {
            assert!((x - y).abs() <= 5e-7);
        }
    }
}

#[test]
fn transh_model_survives_save_load_save() {
    let s = generate_synthetic(2, &SynthParams { directors: 8, clusters: 2, actors: 30, ..SynthParams::default() }).unwrap();
    let view = denormalize(&s.database, &s.schema, "directors").unwrap();
    let kg = build_kg(&view).unwrap();
    let (m, _) = train_transh(&kg, &TransHConfig { dim: 6, epochs: 3, ..TransHConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    m.save(p("e1"), p("r1")).unwrap();
    let back = TransHModel::load(p("e1"), p("r1")).unwrap();
    back.save(p("e2"), p("r2")).unwrap();
    assert_eq!(bytes(&p("e1")), bytes(&p("e2")));
    assert_eq!(bytes(&p("r1")), bytes(&p("r2")));
    let (wv, en) = back.constraint_violations();
    assert!(wv < 1e-5 && en <= 1.0 + 1e-5);

    kg.save(p("t1")).unwrap();
    let again = TripleStore::load(p("t1")).unwrap();
    assert_eq!(again, kg);
    again.save(p("t2")).unwrap();
    assert_eq!(bytes(&p("t1")), bytes(&p("t2")));
}

#[test]
fn sequence_model_survives_save_load_save() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    let m = seq_model(3);
    m.save(&a).unwrap();
    let back = SeqModel::load(&a).unwrap();
    assert_eq!(back, m);
    back.save(&b).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let mut text = Vec::new();
    back.write_text(&mut text).unwrap();
    assert!(String::from_utf8(text).unwrap().contains("actor-concat"));
}

#[test]
fn link_graph_corpus_and_tables_survive_round_trips() {
    let s = generate_synthetic(5, &SynthParams { directors: 12, clusters: 3, actors: 40, ..SynthParams::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);

    let g = s.link_graph(&LinkParams::default());
    g.save(p("l1")).unwrap();
    let back = LinkGraph::load(p("l1")).unwrap();
    back.save(p("l2")).unwrap();
    assert_eq!(bytes(&p("l1")), bytes(&p("l2")));

    let view = denormalize(&s.database, &s.schema, "directors").unwrap();
    let c = build_corpus(&view, &CorpusConfig::new(Strategy::Genre, 1)).unwrap();
    c.save(p("c1")).unwrap();
    let sentences = load_sentences(p("c1")).unwrap();
    assert_eq!(sentences, c.sentences);
    Corpus { sentences, ..c.clone() }.save(p("c2")).unwrap();
    assert_eq!(bytes(&p("c1")), bytes(&p("c2")));

    write_database(&s.schema, &s.database, p("d1")).unwrap();
    let db = load_database(&s.schema, p("d1")).unwrap();
    write_database(&s.schema, &db, p("d2")).unwrap();
    for t in &s.schema.tables {
        let f = format!("{}.csv", t.name);
        assert_eq!(bytes(&p("d1").join(&f)), bytes(&p("d2").join(&f)), "{f}");
    }
}

#[test]
fn corrupted_headers_are_reported() {
    let mut buf = Vec::new();
    small_store(1, 10, 8).write_to(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let bad = text.replacen("10 8", "10 x", 1);
    assert!(matches!(
        EmbeddingStore::read_from(bad.as_bytes()),
        Err(Error::Format(FormatError::BadHeader { .. }))
    ));
    // a header promising more rows than present
    let short = text.replacen("10 8", "11 8", 1);
    assert!(matches!(
        EmbeddingStore::read_from(short.as_bytes()),
        Err(Error::Format(FormatError::Truncated { .. }))
    ));

    let mut bin = Vec::new();
    seq_model(4).write_to(&mut bin).unwrap();
    let mut v2 = bin.clone();
    v2[8..12].copy_from_slice(&2u32.to_le_bytes());
    match SeqModel::read_from(v2.as_slice()) {
        Err(Error::Format(FormatError::Version { found, expected, .. })) => assert_eq!((found, expected), (2, 1)),
        other => panic!("expected a version error, got {other:?}"),
    }
    let mut magic = bin.clone();
    magic[0] = b'X';
    assert!(matches!(
        SeqModel::read_from(magic.as_slice()),
        Err(Error::Format(FormatError::BadHeader { .. }))
    ));
    assert!(matches!(
        SeqModel::read_from(&bin[..bin.len() - 3]),
        Err(Error::Format(FormatError::Truncated { .. }))
    ));

    assert!(matches!(
        LinkGraph::read_from("X=3\na\tp\n".as_bytes()),
        Err(Error::Format(FormatError::BadHeader { .. }))
    ));
}
