mod support;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use relemb_core::eval::{
    gold_list, grade, hit_rate_at_k, milne_witten, ndcg_at_k, paired_ttest, precision_at_k, Gain, LinkGraph,
};
use support::*;

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn graph(inlinks: &[(&str, &[&str])], w: usize) -> LinkGraph {
    let m: BTreeMap<String, BTreeSet<String>> = inlinks
        .iter()
        .map(|(e, ls)| (e.to_string(), ls.iter().map(|s| s.to_string()).collect()))
        .collect();
    LinkGraph::new(w, m).unwrap()
}

#[test]
fn milne_witten_worked_example() {
    let g = graph(&[("a", &["p1", "p2", "p3", "p4"]), ("b", &["p1", "p2"])], 16);
    let v = milne_witten("a", "b", &g).unwrap();
    assert!((v - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    assert_eq!(v, 0.6666666666666666);
    assert_eq!(format!("{v:.4}"), "0.6667");
    assert_eq!(milne_witten("b", "a", &g).unwrap(), v);
}

#[test]
fn milne_witten_matches_formula_on_random_graphs() {
    for inst in 0..50u64 {
        let mut r = rng(inst);
        let w = r.random_range(20..200);
        let n = r.random_range(3..12);
        let mut inl = BTreeMap::new();
        for e in names("e", n) {
            let size = r.random_range(0..=(w / 2).min(30));
            let pages: BTreeSet<String> = sample(&mut r, w, size).into_iter().map(|p| format!("p{p}")).collect();
            inl.insert(e, pages);
        }
        let g = LinkGraph::new(w, inl.clone()).unwrap();
        for (a, sa) in &inl {
            for (b, sb) in &inl {
                let got = milne_witten(a, b, &g).unwrap();
                let want = if a == b { 1.0 } else { mw_oracle(sa, sb, w) };
                assert!((got - want).abs() < 1e-12, "inst {inst} {a} {b}: {got} vs {want}");
            }
        }
        // gold list is the oracle's descending order over positive scores
        let q = "e0";
        let mut all: Vec<(f64, &String)> = inl
            .iter()
            .filter(|(e, _)| e.as_str() != q)
            .map(|(e, s)| (mw_oracle(&inl[q], s, w), e))
            .filter(|(v, _)| *v > 0.0)
            .collect();
        all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(y.1)));
        let want: Vec<String> = all.into_iter().map(|(_, e)| e.clone()).collect();
        assert_eq!(gold_list(q, &g, 100).unwrap(), want);
    }
}

#[test]
fn grade_matches_band_table() {
    for r in 0..=130usize {
        let rank = (r > 0).then_some(r);
        assert_eq!(grade(rank), grade_oracle(rank), "rank {r}");
    }
}

#[test]
fn ndcg_worked_example() {
    let gold = names("g", 3);
    let ranked = vec!["g0".to_string(), "x".to_string()];
    let v = ndcg_at_k(&ranked, &gold, 2, Gain::Linear);
    assert!((v - 0.6131471927654585).abs() < 1e-12, "{v}");
    assert!((v - 5.0 / (5.0 + 5.0 / 3f64.log2())).abs() < 1e-12);
}

#[test]
fn ranking_metrics_match_brute_force() {
    for inst in 0..50u64 {
        let mut r = rng(100 + inst);
        let pool = names("c", 150);
        let gold: Vec<String> = {
            let mut g = pool.clone();
            g.shuffle(&mut r);
            g.truncate(r.random_range(1..=110));
            g
        };
        let mut ranked = pool.clone();
        ranked.shuffle(&mut r);
        ranked.truncate(r.random_range(1..=100));
        let relevant: HashSet<&str> = gold.iter().take(20).map(String::as_str).collect();
        let relevant_vec: Vec<String> = gold.iter().take(20).cloned().collect();
        for k in [1, 2, 5, 10, 20, 50, 100] {
            for (gain, exp) in [(Gain::Linear, false), (Gain::Exponential, true)] {
                let got = ndcg_at_k(&ranked, &gold, k, gain);
                let want = ndcg_oracle(&ranked, &gold, k, exp);
                assert!((got - want).abs() < 1e-12, "inst {inst} k {k}: {got} vs {want}");
            }
            let got = precision_at_k(&ranked, &relevant, k);
            assert!((got - precision_oracle(&ranked, &relevant_vec, k)).abs() < 1e-12);
        }
        let ranks: Vec<usize> = (0..r.random_range(1..60)).map(|_| r.random_range(1..=100)).collect();
        for k in [1, 5, 10, 20] {
            let want = ranks.iter().filter(|&&x| x <= k).count() as f64 / ranks.len() as f64;
            assert!((hit_rate_at_k(&ranks, k) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn paired_ttest_matches_reference_values() {
    let (t, p) = paired_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 2.0, 4.0, 4.0, 6.0]).unwrap();
    assert!((t - -2.449489742783178).abs() < 1e-9, "{t}");
    assert!((p - 0.07048399691021993).abs() < 1e-9, "{p}");
    let (t, p) = paired_ttest(&[0.3, 0.1, 0.5, 0.2, 0.4, 0.6], &[0.2, 0.15, 0.35, 0.1, 0.45, 0.3]).unwrap();
    assert!((t - 1.7013926184468018).abs() < 1e-9, "{t}");
    assert!((p - 0.14960795291230716).abs() < 1e-9, "{p}");
}

#[test]
fn paired_ttest_matches_textbook_formula() {
    for inst in 0..50u64 {
        let mut r = rng(500 + inst);
        let n = r.random_range(3..70);
        let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|x| x + r.random_range(-0.3..0.25)).collect();
        let (t, p) = paired_ttest(&a, &b).unwrap();
        let (to, po) = paired_t_oracle(&a, &b);
        assert!((t - to).abs() < 1e-9 * to.abs().max(1.0), "inst {inst}: t {t} vs {to}");
        assert!((p - po).abs() < 1e-9, "inst {inst}: p {p} vs {po}");
    }
}
