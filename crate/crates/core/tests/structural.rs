mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use relemb_core::corpus::{build_corpus, row_to_sentence, CorpusConfig, Strategy, Token};
use relemb_core::kg::build_kg;
use relemb_core::schema::{denormalize, load_schema, Schema};
use relemb_core::sgns::EmbeddingStore;
use support::*;

#[test]
fn denormalize_matches_nested_loop_join() {
    for seed in 0..50 {
        let (schema, db) = random_database(seed);
        let view = denormalize(&db, &schema, "directors").unwrap();
        let (cols, rows) = canonical_view(&view);
        let oracle = nested_loop_join(&schema, &db, "directors");
        assert_eq!(rows, oracle, "seed {seed}");
        assert_eq!(cols.len(), 15);
    }
}

#[test]
fn join_from_other_roots_matches_oracle() {
    let (schema, db) = random_database(7);
    for root in ["movies", "actors", "roles"] {
        let view = denormalize(&db, &schema, root).unwrap();
        assert_eq!(canonical_view(&view).1, nested_loop_join(&schema, &db, root), "{root}");
    }
}

#[test]
fn build_kg_matches_brute_force() {
    for seed in 0..10 {
        let (schema, db) = random_database(100 + seed);
        let view = denormalize(&db, &schema, "directors").unwrap();
        if view.is_empty() {
            continue;
        }
        let store = build_kg(&view).unwrap();
        let got: BTreeSet<(String, String, String)> = store
            .named()
            .map(|(h, r, t)| (h.to_string(), r.to_string(), t.to_string()))
            .collect();
        assert_eq!(got.len(), store.len(), "duplicates in store");
        assert_eq!(got, brute_force_triples(&view), "seed {seed}");
    }
}

#[test]
fn top_k_matches_exhaustive_sort() {
    let mut r = rng(3);
    for trial in 0..20 {
        let n = 30;
        let d = 4;
        let tokens: Vec<String> = (0..n).map(|i| format!("t{i:02}")).collect();
        let mut vectors = uniform_vec(&mut r, n * d, 1.0);
        // duplicated rows force exact ties
        let (a, b) = vectors.split_at_mut(5 * d);
        b[..d].copy_from_slice(&a[..d]);
        let store = EmbeddingStore::new(tokens.clone(), d, vectors.clone()).unwrap();
        let q = trial % n;
        let cos = |i: usize| {
            let (x, y) = (&vectors[q * d..(q + 1) * d], &vectors[i * d..(i + 1) * d]);
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            dot / (x.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt())
        };
        let mut all: Vec<(String, f64)> = (0..n).filter(|&i| i != q).map(|i| (tokens[i].clone(), cos(i))).collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got = store.top_k(&tokens[q], 10, |_| true).unwrap();
        let names: Vec<&String> = got.iter().map(|x| &x.0).collect();
        let want: Vec<&String> = all.iter().take(10).map(|x| &x.0).collect();
        assert_eq!(names, want);
        for ((_, g), (_, w)) in got.iter().zip(&all) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn shipped_schema_has_seven_tables_and_21_columns() {
    let s = Schema::imdb();
    assert_eq!(s.tables.len(), 7);
    assert_eq!(s.column_count(), 21);
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/imdb_schema.toml")).unwrap();
    assert_eq!(load_schema(&text).unwrap(), s);
}

#[test]
fn base_corpus_has_one_sentence_per_view_row() {
    let (schema, db) = random_database(11);
    let view = denormalize(&db, &schema, "directors").unwrap();
    let c = build_corpus(&view, &CorpusConfig::new(Strategy::Base, 0)).unwrap();
    assert_eq!(c.sentences.len() + c.stats.skipped_rows, view.len());
    for (s, row) in c.sentences.iter().zip(&view.rows) {
        assert_eq!(s.len(), row.iter().flatten().count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn token_rendering_round_trips(ns in "[a-z_]{1,8}", value in "\\PC{0,12}") {
        let t = Token::new(&ns, &value);
        let text = t.to_string();
        prop_assert!(!text.chars().any(char::is_whitespace));
        let back: Token = text.parse().unwrap();
        prop_assert_eq!(back.namespace(), ns.as_str());
        prop_assert_eq!(&back, &t);
    }

    #[test]
    fn distinct_values_render_distinctly(a in "\\PC{0,6}", b in "\\PC{0,6}") {
        prop_assume!(a != b);
        prop_assert_ne!(Token::new("x", &a).to_string(), Token::new("x", &b).to_string());
    }

    #[test]
    fn view_rows_reference_existing_directors(seed in 0u64..500) {
        let (schema, db) = random_database(seed);
        let view = denormalize(&db, &schema, "directors").unwrap();
        // every row names a director that exists
        let ids: BTreeSet<String> = db.rows("directors").iter().filter_map(|r| r[0].as_ref().map(|v| v.key())).collect();
        let c = view.column_index("directors.id").unwrap();
        for row in &view.rows {
            prop_assert!(ids.contains(&row[c].as_ref().unwrap().key()));
        }
        let specs: Vec<_> = view.columns.iter().map(|c| c.spec.clone()).collect();
        for row in &view.rows {
            let s = row_to_sentence(row, &specs).unwrap().unwrap();
            prop_assert_eq!(s.len(), row.iter().flatten().count());
        }
    }
}
