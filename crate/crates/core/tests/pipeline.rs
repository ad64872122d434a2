use std::sync::Arc;

use grammask::bench::{config_report, record_traces};
use grammask::bundle::BundleError;
use grammask::fixtures::{named_grammars, synthetic_vocab, toy_vocab, JSON_GRAMMAR};
use grammask::generate::{generate, GenerateOptions};
use grammask::grammar::parse_grammar;
use grammask::vocab::Vocabulary;
use grammask::{compile, CompileOptions, CompiledGrammar, Matcher};
use tempfile::TempDir;

#[test]
fn saved_bundle_gives_identical_masks() {
    let dir = TempDir::new().unwrap();
    let v = Arc::new(toy_vocab());
    for (name, text) in named_grammars() {
        let cg = compile(&parse_grammar(&text).unwrap(), &v, CompileOptions::default()).unwrap();
        let path = dir.path().join(format!("{name}.gmc"));
        cg.save(&path).unwrap();
        let loaded = Arc::new(CompiledGrammar::load(&path).unwrap());
        assert_eq!(*loaded, cg);
        let (a, b) = (Matcher::new(Arc::new(cg), v.clone()).unwrap(), Matcher::new(loaded, v.clone()).unwrap());
        let mut out = [a.new_mask(), b.new_mask()];
        for (m, mask) in [a, b].iter_mut().zip(out.iter_mut()) {
            let g = generate(m, GenerateOptions { seed: 4, ..Default::default() });
            assert!(g.finished, "{name}");
            m.rollback(g.tokens.len() / 2).unwrap();
            m.fill_next_token_mask(mask);
        }
        assert_eq!(out[0], out[1], "{name}");
    }
}

#[test]
fn vocabulary_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let v = synthetic_vocab(2048, 3);
    let path = dir.path().join("vocab.json");
    std::fs::write(&path, v.to_json()).unwrap();
    let back = Vocabulary::load(&path).unwrap();
    assert_eq!(back, v);
    assert_eq!(back.content_hash(), v.content_hash());
}

#[test]
fn bundle_rejects_other_vocabulary() {
    let v = toy_vocab();
    let cg = Arc::new(compile(&parse_grammar(JSON_GRAMMAR).unwrap(), &v, CompileOptions::default()).unwrap());
    let other = Arc::new(synthetic_vocab(2048, 1));
    assert!(matches!(cg.check_vocab(&other), Err(BundleError::VocabMismatch { .. })));
    assert!(Matcher::new(cg, other).is_err());
}

#[test]
fn bench_counts_are_deterministic() {
    let v = Arc::new(synthetic_vocab(4096, 1));
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let full = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
    let opts = GenerateOptions { soft_budget: 16, max_tokens: 128, ..Default::default() };
    let traces = record_traces(&full, &v, 3, 11, opts).unwrap();
    assert_eq!(traces, record_traces(&full, &v, 3, 11, opts).unwrap());
    let (a, _) = config_report("full", &g, &v, CompileOptions::default(), &traces, 2, 10).unwrap();
    let (b, _) = config_report("full", &g, &v, CompileOptions::default(), &traces, 2, 10).unwrap();
    let counts = |r: &grammask::bench::ConfigReport| {
        (
            r.nodes,
            r.edges,
            r.cache_entries,
            r.cache_bytes,
            r.all_bitset_bytes,
            r.dependent_total,
            r.dependent_before_ctx,
            r.bytes_examined_per_entry,
        )
    };
    assert_eq!(counts(&a), counts(&b));
    assert_eq!(a.saved_chars_ratio, b.saved_chars_ratio);
    assert!(a.dependent_total < a.dependent_before_ctx);
}
