use std::sync::Arc;

use grammask::fixtures::{toy_vocab, PERSON_SCHEMA};
use grammask::generate::{generate, GenerateOptions};
use grammask::schema::{schema_to_grammar_with, SchemaOptions};
use grammask::vocab::Vocabulary;
use grammask::{compile, CompileOptions, CompiledGrammar, Matcher};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const SCHEMAS: &[&str] = &[
    PERSON_SCHEMA,
    r#"{"type":"array","items":{"type":["integer","boolean"]},"minItems":1,"maxItems":4}"#,
    r#"{"type":"object","properties":{"k":{"enum":["x",1,null]},"n":{"type":"number"}},"required":["k"],"additionalProperties":false}"#,
    r#"{"type":"object","properties":{"inner":{"type":"object","properties":{"v":{"const":true}},"required":["v"],"additionalProperties":false}},"additionalProperties":false}"#,
];

fn accepts(cg: &Arc<CompiledGrammar>, v: &Arc<Vocabulary>, text: &[u8]) -> bool {
    let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
    m.accept_bytes(text) && m.can_terminate()
}

/// `None` when the text only fails to parse because a number overflows f64,
/// which JSON syntax allows.
fn validate(schema: &Value, text: &[u8]) -> Option<bool> {
    match serde_json::from_slice::<Value>(text) {
        Ok(doc) => Some(jsonschema::is_valid(schema, &doc)),
        Err(e) if e.to_string().starts_with("number out of range") => None,
        Err(_) => Some(false),
    }
}

fn mutate(rng: &mut ChaCha8Rng, text: &[u8]) -> Vec<u8> {
    let mut out = text.to_vec();
    let pool = b"{}[],:\"01-.etrufalsn x\\";
    for _ in 0..rng.gen_range(1..=2) {
        let at = rng.gen_range(0..=out.len());
        match rng.gen_range(0..3) {
            0 if at < out.len() => {
                out.remove(at);
            }
            1 if at < out.len() => out[at] = pool[rng.gen_range(0..pool.len())],
            _ => out.insert(at, pool[rng.gen_range(0..pool.len())]),
        }
    }
    out
}

#[test]
fn generated_documents_validate() {
    let v = Arc::new(toy_vocab());
    let (mut total, mut overflow) = (0, 0);
    for (i, text) in SCHEMAS.iter().enumerate() {
        let schema: Value = serde_json::from_str(text).unwrap();
        for strict in [false, true] {
            let g = schema_to_grammar_with(text, SchemaOptions { strict_whitespace: strict }).unwrap();
            let cg = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
            for seed in 0..16 {
                let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
                let out =
                    generate(&mut m, GenerateOptions { seed: seed + 100 * i as u64, soft_budget: 32, max_tokens: 400 });
                assert!(out.finished, "schema {i} seed {seed}");
                match validate(&schema, &out.text) {
                    Some(ok) => assert!(ok, "schema {i}: {}", String::from_utf8_lossy(&out.text)),
                    None => overflow += 1,
                }
                total += 1;
            }
        }
    }
    assert!(total - overflow >= 100, "{total} {overflow}");
}

#[test]
fn matcher_never_accepts_invalid_mutants() {
    let v = Arc::new(toy_vocab());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut rejected_by_both, mut accepted) = (0, 0);
    for text in SCHEMAS {
        let schema: Value = serde_json::from_str(text).unwrap();
        let g = schema_to_grammar_with(text, SchemaOptions::default()).unwrap();
        let cg = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
        for seed in 0..25 {
            let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
            let doc = generate(&mut m, GenerateOptions { seed, soft_budget: 24, max_tokens: 400 }).text;
            for _ in 0..20 {
                let mutant = mutate(&mut rng, &doc);
                let Some(ok) = validate(&schema, &mutant) else { continue };
                if accepts(&cg, &v, &mutant) {
                    assert!(ok, "accepted invalid {:?}", String::from_utf8_lossy(&mutant));
                    accepted += 1;
                } else if !ok {
                    rejected_by_both += 1;
                }
            }
        }
    }
    assert!(rejected_by_both > 500 && accepted > 50, "{rejected_by_both} {accepted}");
}
