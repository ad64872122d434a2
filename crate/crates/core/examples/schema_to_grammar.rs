//! Turns a JSON schema into a grammar and samples documents from it.
//!
//!     cargo run --example schema_to_grammar -- [schema.json]

use std::sync::Arc;

use grammask::fixtures::{toy_vocab, PERSON_SCHEMA};
use grammask::generate::{generate, GenerateOptions};
use grammask::schema::{schema_to_grammar, schema_to_grammar_text};
use grammask::{compile, CompileOptions, Matcher};

fn main() {
    let schema = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).unwrap(),
        None => PERSON_SCHEMA.to_string(),
    };
    println!("{}", schema_to_grammar_text(&schema, false).unwrap());

    let v = Arc::new(toy_vocab());
    let g = schema_to_grammar(&schema).unwrap();
    let cg = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
    for seed in 0..5 {
        let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
        let out = generate(&mut m, GenerateOptions { seed, soft_budget: 24, ..Default::default() });
        println!("{}", String::from_utf8_lossy(&out.text));
    }
}
