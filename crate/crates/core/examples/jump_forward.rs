//! Finds the bytes the grammar forces next, so they can be appended without
//! sampling.
//!
//!     cargo run --example jump_forward

use std::sync::Arc;

use grammask::fixtures::toy_vocab;
use grammask::grammar::parse_grammar;
use grammask::{compile, CompileOptions, Matcher};

const GRAMMAR: &str = r#"
root ::= "{\"name\": \"" name "\", \"kind\": \"" kind "\"}"
name ::= [a-z]+
kind ::= "circle" | "square"
"#;

fn main() {
    let v = Arc::new(toy_vocab());
    let cg = Arc::new(compile(&parse_grammar(GRAMMAR).unwrap(), &v, CompileOptions::default()).unwrap());
    let mut m = Matcher::new(cg, v).unwrap();
    let mut text = Vec::new();
    for sampled in ["ab", "c\"", "s"] {
        let forced = m.find_jump_forward_bytes();
        println!("forced {:?}", String::from_utf8_lossy(&forced));
        assert!(m.accept_bytes(&forced));
        text.extend_from_slice(&forced);
        assert!(m.accept_bytes(sampled.as_bytes()));
        text.extend_from_slice(sampled.as_bytes());
        println!("sampled {sampled:?}");
    }
    let forced = m.find_jump_forward_bytes();
    println!("forced {:?}", String::from_utf8_lossy(&forced));
    assert!(m.accept_bytes(&forced));
    text.extend_from_slice(&forced);
    println!("{} (complete: {})", String::from_utf8_lossy(&text), m.can_terminate());
}
