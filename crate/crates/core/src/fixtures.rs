//! Bundled grammars and deterministic vocabularies for tests, examples and
//! benchmarks.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vocab::Vocabulary;

/// Arrays of strings and nested arrays. After `["a` the unmerged automaton
/// carries two parallel stacks (`elements` has two alternatives starting
/// with `value`).
pub const ARRAY_STRING_GRAMMAR: &str = include_str!("../grammars/array_string.ebnf");
/// Full JSON text.
pub const JSON_GRAMMAR: &str = include_str!("../grammars/json.ebnf");
/// Arithmetic expressions over non-negative integers.
pub const ARITH_GRAMMAR: &str = include_str!("../grammars/arith.ebnf");
/// Elements, attributes, character data and entity references.
pub const XML_GRAMMAR: &str = include_str!("../grammars/xml.ebnf");
/// A person record: required name and age, optional email, tags, active.
pub const PERSON_SCHEMA: &str = include_str!("../grammars/person.schema.json");

/// The five grammars used across the test suites, by short name. The last
/// one is compiled from [`PERSON_SCHEMA`].
pub fn named_grammars() -> Vec<(&'static str, String)> {
    vec![
        ("array_string", ARRAY_STRING_GRAMMAR.to_string()),
        ("json", JSON_GRAMMAR.to_string()),
        ("arith", ARITH_GRAMMAR.to_string()),
        ("xml", XML_GRAMMAR.to_string()),
        ("person_schema", crate::schema::schema_to_grammar_text(PERSON_SCHEMA, false).expect("bundled schema")),
    ]
}

/// Five bytes per grammar that reach deep into each language.
pub fn probe_alphabet(name: &str) -> [u8; 5] {
    match name {
        "array_string" => *b"[]\",a",
        "json" => *b"[]\",1",
        "arith" => *b"1+*()",
        "xml" => *b"<>a/ ",
        _ => *b"{}\":1",
    }
}

/// About 200 tokens: every printable ASCII byte, whitespace, a few UTF-8
/// pieces and multi-byte tokens that cross grammar boundaries in the
/// bundled grammars. Special tokens: `<pad>` (id 0) and `<eos>` (last id).
pub fn toy_vocab() -> Vocabulary {
    let mut tokens: Vec<Vec<u8>> = vec![b"<pad>".to_vec()];
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut push = |tokens: &mut Vec<Vec<u8>>, t: &[u8]| {
        if tokens.len() < 199 && seen.insert(t.to_vec()) {
            tokens.push(t.to_vec());
        }
    };
    for b in 0x20u8..0x7F {
        push(&mut tokens, &[b]);
    }
    for t in [&b"\n"[..], b"\t", b"\r", b"\xC3", b"\xA9", "é".as_bytes(), "€".as_bytes(), b"\xE2\x82"] {
        push(&mut tokens, t);
    }
    let multi: &[&str] = &[
        "[\"", "\"]", "\",", ",\"", "[]", "[[", "]]", "],", "{\"", "\":", "\"}", "},", "}]", "\": ", "\", \"", "true",
        "false", "null", "tr", "ue", "fa", "nu", "ll", "12", "0.", ".5", "e+", "-1", "00", "1e", "\\n", "\\\"",
        "\\u00", "ab", "abc", "a\"", "x\"", "\"a", "\"x", "\"\"", "  ", "\n ", " \"", ": ", ", ", "<a", "</", "/>",
        "</a>", "&amp;", "&", ";", "a=", "=\"", "\">", "<a>", "a/>", "na", "name", "age", "email", "tags", "active",
        "\"name\"", "\"age\":", "1+", "+1", "*(", ")*", "((", "))", "(1", "1)", "2*", "10", "99", "+(", ")+", "/2",
        "a b", "hello", " world", "xml", "</x", "x>", "<x", "\"a\"", "\"b\"", "\"c\"", "[\"a\"", "null,", "true,",
        "\"]}", "]}", "{}", "{\"a\":", " ]", "[ ",
    ];
    for t in multi {
        push(&mut tokens, t.as_bytes());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alphabet = b"ab\"[]{},:1 <>/=&;()+*-.e";
    while tokens.len() < 199 {
        let len = rng.gen_range(2..=4);
        let t: Vec<u8> = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        push(&mut tokens, &t);
    }
    tokens.push(b"<eos>".to_vec());
    let eos = (tokens.len() - 1) as u32;
    Vocabulary::new(tokens, [0], eos).expect("toy vocabulary is well formed")
}

const SYLLABLES: &[&str] = &[
    "re", "ad", "in", "ter", "con", "ing", "er", "at", "ion", "st", "ent", "com", "pro", "de", "ex", "ma", "per",
    "for", "al", "an", "ch", "th", "ou", "ar", "el", "or", "is", "es", "un", "qu", "ti", "ver", "val", "ue", "na",
    "me", "ty", "pe", "id", "ob", "ject", "ar", "ray", "str", "num", "ber", "list", "key", "data", "item", "user",
    "time", "lo", "ca", "po", "si", "mo", "no", "ba", "sh", "ow", "ig", "ht",
];

const SUFFIXES: &[&str] = &["", "s", "ed", "er", "ers", "ing", "ly", "ion", "ions", "al", "ness", "able", "ment"];

/// A deterministic byte-level vocabulary shaped like a BPE vocabulary of the
/// given size: all 256 single bytes, numbers up to 999, JSON punctuation
/// clusters, whitespace runs, some UTF-8 pieces and a long tail of
/// prefix-sharing word pieces with and without a leading space.
/// Specials: `<|endoftext|>` (eos, last id) and `<|pad|>` (second to last).
pub fn synthetic_vocab(size: usize, seed: u64) -> Vocabulary {
    assert!(size >= 2048, "synthetic vocabularies need room for the fixed part");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut tokens: Vec<Vec<u8>> = Vec::with_capacity(size);
    let target = size - 2;
    let mut push = |tokens: &mut Vec<Vec<u8>>, t: Vec<u8>| {
        if tokens.len() < target && !t.is_empty() && seen.insert(t.clone()) {
            tokens.push(t);
        }
    };
    for b in 0..=255u8 {
        push(&mut tokens, vec![b]);
    }
    for n in 0..1000 {
        push(&mut tokens, n.to_string().into_bytes());
    }
    let punct: &[&str] = &[
        "{\"", "\":", "\",", "\"}", "\"]", "[\"", "},", "],", "\":\"", "\": \"", "\", \"", "\":[", "\":{", "\": [",
        "\": {", "}}", "]]", "[[", "{}", "[]", "\"\"", "\":\"\"", "},{", "}, {", "\"},", "\"],", "\":[\"", "\",\"",
        "\", ", "\": ", ", ", ": ", "\\n", "\\\"", "\\u", "\\\\", "\\t", ".\"", ",\"", " \"", " {", " [", " }", " ]",
        "{\n", "[\n", "\n}", "\n]", ",\n", "\":\n", "\"\n", "()", "();", "});", "->", "=>", "==", "!=", "<=", ">=",
        "&&", "||", "::", "//", "/*", "*/", "...", "'s", "'t",
    ];
    for p in punct {
        push(&mut tokens, p.as_bytes().to_vec());
    }
    for n in 1..=16 {
        push(&mut tokens, vec![b' '; n]);
        push(&mut tokens, [&b"\n"[..], &vec![b' '; n]].concat());
        if n <= 4 {
            push(&mut tokens, vec![b'\t'; n]);
            push(&mut tokens, vec![b'\n'; n]);
        }
    }
    for c in ['é', 'è', 'à', 'ü', 'ö', 'ñ', 'ç', '中', '文', '日', '本', '€', '…', '“', '”', '→'] {
        let mut buf = [0u8; 4];
        let enc = c.encode_utf8(&mut buf).as_bytes().to_vec();
        push(&mut tokens, enc.clone());
        push(&mut tokens, enc[..enc.len() - 1].to_vec());
        push(&mut tokens, [&b" "[..], &enc].concat());
    }
    for w in ["true", "false", "null", " true", " false", " null", "true,", "null,", "false,"] {
        push(&mut tokens, w.as_bytes().to_vec());
    }
    while tokens.len() < target {
        let parts = rng.gen_range(1..=3);
        let mut stem = String::new();
        for _ in 0..parts {
            stem.push_str(SYLLABLES.choose(&mut rng).unwrap());
        }
        let variants = rng.gen_range(1..=5);
        for _ in 0..variants {
            let mut word = stem.clone();
            word.push_str(SUFFIXES.choose(&mut rng).unwrap());
            if rng.gen_bool(0.15) {
                let mut c = word.chars();
                let first = c.next().unwrap().to_ascii_uppercase();
                word = std::iter::once(first).chain(c).collect();
            }
            let spaced = rng.gen_bool(0.5);
            push(&mut tokens, word.as_bytes().to_vec());
            if spaced {
                push(&mut tokens, format!(" {word}").into_bytes());
            }
            if rng.gen_bool(0.02) {
                push(&mut tokens, format!("\"{word}\"").into_bytes());
            }
        }
    }
    tokens.push(b"<|pad|>".to_vec());
    tokens.push(b"<|endoftext|>".to_vec());
    let eos = (tokens.len() - 1) as u32;
    Vocabulary::new(tokens, [eos - 1], eos).expect("synthetic vocabulary is well formed")
}
