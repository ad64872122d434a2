//! Rolls a matcher back, branches it, and shows that stacks are shared rather
//! than copied.
//!
//!     cargo run --example rollback_and_branch

use std::sync::Arc;

use grammask::fixtures::{toy_vocab, ARRAY_STRING_GRAMMAR};
use grammask::grammar::parse_grammar;
use grammask::{compile, CompileOptions, Matcher};

fn show(label: &str, m: &Matcher) {
    let mut mask = m.new_mask();
    m.fill_next_token_mask(&mut mask);
    println!(
        "{label:<24} stacks {:?} allowed {} live frames {}",
        m.stacks().iter().map(|s| s.iter().map(|n| n.index()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        mask.count(),
        m.arena_stats().live()
    );
}

fn main() {
    let v = Arc::new(toy_vocab());
    let g = parse_grammar(ARRAY_STRING_GRAMMAR).unwrap();
    let cg = Arc::new(compile(&g, &v, CompileOptions { merge: false, inline: false, ..Default::default() }).unwrap());
    let mut m = Matcher::new(cg, v).unwrap();
    show("start", &m);
    for chunk in ["[", "\"a", "\",", "\"b"] {
        assert!(m.accept_bytes(chunk.as_bytes()));
        show(&format!("after {chunk:?}"), &m);
    }
    m.rollback(2).unwrap();
    show("rollback 2", &m);

    let mut other = m.branch();
    assert!(other.accept_bytes(b"\"]"));
    show("branch after \"]", &other);
    show("original", &m);
    println!("branch finished: {}", other.can_terminate());
    drop(other);
    show("branch dropped", &m);
}
