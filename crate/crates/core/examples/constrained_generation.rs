//! Decodes with a mock model whose choices are restricted by the token mask,
//! then replays the tokens to print the allowed-token count at every step.
//!
//!     cargo run --release --example constrained_generation -- [seed]

use std::sync::Arc;

use grammask::fixtures::{synthetic_vocab, JSON_GRAMMAR};
use grammask::generate::{generate, GenerateOptions};
use grammask::grammar::parse_grammar;
use grammask::pda::{build_pda, oracle_accepts};
use grammask::{compile, CompileOptions, Matcher};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let v = Arc::new(synthetic_vocab(8192, 1));
    let g = parse_grammar(JSON_GRAMMAR).unwrap();
    let cg = Arc::new(compile(&g, &v, CompileOptions::default()).unwrap());
    let prefix = br#"{"items": ["#;

    let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
    assert!(m.accept_bytes(prefix));
    let out = generate(&mut m, GenerateOptions { seed, soft_budget: 24, max_tokens: 256 });

    let mut replay = Matcher::new(cg, v.clone()).unwrap();
    assert!(replay.accept_bytes(prefix));
    let mut mask = replay.new_mask();
    for (step, &id) in out.tokens.iter().enumerate() {
        replay.fill_next_token_mask(&mut mask);
        assert!(mask.get(id));
        let shown =
            if id == v.eos_id() { "<eos>".into() } else { format!("{:?}", String::from_utf8_lossy(v.token(id))) };
        println!("{step:>3} {:>6} {shown}", mask.count());
        assert!(replay.accept_token(id));
    }

    let mut text = prefix.to_vec();
    text.extend_from_slice(&out.text);
    println!("{}", String::from_utf8_lossy(&text));
    println!("finished: {}, valid: {}", out.finished, oracle_accepts(&build_pda(&g), &text).unwrap());
}
