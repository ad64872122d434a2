use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use grammask::fixtures::{toy_vocab, ARRAY_STRING_GRAMMAR, JSON_GRAMMAR};
use grammask::grammar::parse_grammar;
use grammask::pda::{build_pda, oracle_accepts};
use grammask::{compile, CompileOptions, Matcher};
use serde_json::Value;
use tempfile::TempDir;

fn grammask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grammask")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &TempDir, name: &str, data: &[u8]) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, data).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes_and_offsets() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "json.ebnf", JSON_GRAMMAR.as_bytes());
    let ok = grammask(&["check", s(&g), s(&write(&dir, "ok", br#"["a"]"#))]);
    assert_eq!(ok.status.code(), Some(0));
    let eoi = grammask(&["--json", "check", s(&g), s(&write(&dir, "eoi", br#"["a""#))]);
    assert_eq!(eoi.status.code(), Some(1));
    let v = json(&eoi);
    assert_eq!((v["offset"].as_u64(), v["end_of_input"].as_bool()), (Some(4), Some(true)));
    let bad = grammask(&["check", s(&g), s(&write(&dir, "bad", b"[x"))]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("offset 1"));
    let missing = grammask(&["check", s(&g), "/nonexistent/input"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn compile_is_deterministic_and_records_passes() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "a.ebnf", ARRAY_STRING_GRAMMAR.as_bytes());
    let (a, b, c) = (dir.path().join("a.gmc"), dir.path().join("b.gmc"), dir.path().join("c.gmc"));
    assert!(grammask(&["compile", s(&g), "--vocab", "toy", "-o", s(&a)]).status.success());
    assert!(grammask(&["compile", s(&g), "--vocab", "toy", "-o", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let out =
        grammask(&["--json", "compile", s(&g), "--vocab", "toy", "-o", s(&c), "--no-inline", "--no-merge", "--stats"]);
    let v = json(&out);
    assert_eq!((v["merge"].as_bool(), v["inline"].as_bool()), (Some(false), Some(false)));
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len() as u64, v["cache_entries"].as_u64().unwrap());
    let bytes: u64 = entries.iter().map(|e| e["bytes"].as_u64().unwrap()).sum();
    assert_eq!(bytes, v["cache_bytes"].as_u64().unwrap());
}

#[test]
fn mask_matches_library() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "a.ebnf", ARRAY_STRING_GRAMMAR.as_bytes());
    let bundle = dir.path().join("a.gmc");
    assert!(grammask(&["compile", s(&g), "--vocab", "toy", "-o", s(&bundle)]).status.success());
    let v = Arc::new(toy_vocab());
    let cg = Arc::new(compile(&parse_grammar(ARRAY_STRING_GRAMMAR).unwrap(), &v, CompileOptions::default()).unwrap());
    for prefix in ["", "[", "[\"ab", "[\"a\","] {
        let mut m = Matcher::new(cg.clone(), v.clone()).unwrap();
        assert!(m.accept_bytes(prefix.as_bytes()));
        let mut mask = m.new_mask();
        m.fill_next_token_mask(&mut mask);
        let out = grammask(&["mask", s(&bundle), "--vocab", "toy", "--prefix", prefix]);
        assert!(out.status.success());
        assert_eq!(stdout(&out).trim(), mask.to_hex(), "prefix {prefix:?}");
    }
    let rejected = grammask(&["mask", s(&bundle), "--vocab", "toy", "--prefix", "x"]);
    assert_eq!(rejected.status.code(), Some(1));
}

#[test]
fn vocab_mismatch_names_the_hash() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "a.ebnf", ARRAY_STRING_GRAMMAR.as_bytes());
    let bundle = dir.path().join("a.gmc");
    let built = grammask(&["--json", "compile", s(&g), "--vocab", "toy", "-o", s(&bundle)]);
    let hash = json(&built)["vocab_hash"].as_str().unwrap().to_string();
    let out = grammask(&["mask", s(&bundle), "--vocab", "synthetic:4096"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&hash));
}

#[test]
fn gen_is_forced_seeded_and_valid() {
    let dir = TempDir::new().unwrap();
    let forced = write(&dir, "a.ebnf", b"root ::= \"a\"");
    let fb = dir.path().join("a.gmc");
    assert!(grammask(&["compile", s(&forced), "--vocab", "toy", "-o", s(&fb)]).status.success());
    let out = grammask(&["gen", s(&fb), "--vocab", "toy"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "a\n");

    let g = write(&dir, "json.ebnf", JSON_GRAMMAR.as_bytes());
    let jb = dir.path().join("json.gmc");
    assert!(grammask(&["compile", s(&g), "--vocab", "toy", "-o", s(&jb)]).status.success());
    let p = build_pda(&parse_grammar(JSON_GRAMMAR).unwrap());
    for seed in ["1", "2", "3"] {
        let a = grammask(&["--json", "gen", s(&jb), "--vocab", "toy", "--seed", seed]);
        let b = grammask(&["--json", "gen", s(&jb), "--vocab", "toy", "--seed", seed]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
        let text = json(&a)["text"].as_str().unwrap().to_string();
        assert!(oracle_accepts(&p, text.as_bytes()).unwrap(), "{text}");
    }
    let capped = grammask(&["gen", s(&jb), "--vocab", "toy", "--max-tokens", "1"]);
    assert_eq!(capped.status.code(), Some(1));
}

#[test]
fn schema_compile_prints_grammar() {
    let dir = TempDir::new().unwrap();
    let schema = write(&dir, "s.json", br#"{"type":"boolean"}"#);
    let out = grammask(&["schema", "compile", s(&schema)]);
    assert!(out.status.success());
    let g = parse_grammar(&stdout(&out)).unwrap();
    let p = build_pda(&g);
    assert!(oracle_accepts(&p, b" true").unwrap());
    let strict = grammask(&["schema", "compile", s(&schema), "--strict-ws"]);
    let p = build_pda(&parse_grammar(&stdout(&strict)).unwrap());
    assert!(oracle_accepts(&p, b"false").unwrap());
    assert!(!oracle_accepts(&p, b" true").unwrap());
    let bad = grammask(&["schema", "compile", s(&write(&dir, "bad.json", br#"{"type":"string","pattern":"x"}"#))]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn pda_dump_formats() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "a.ebnf", ARRAY_STRING_GRAMMAR.as_bytes());
    let dot = grammask(&["pda", "dump", s(&g), "--dot"]);
    assert!(stdout(&dot).starts_with("digraph pda {"));
    let raw = grammask(&["pda", "dump", s(&g), "--no-merge", "--no-inline"]);
    let opt = grammask(&["pda", "dump", s(&g)]);
    let nodes = |o: &Output| stdout(o).lines().filter(|l| l.starts_with('n')).count();
    assert!(nodes(&opt) < nodes(&raw));
}

#[test]
fn bench_json_report() {
    let args = [
        "--json",
        "bench",
        "--vocab",
        "toy",
        "--iterations",
        "40",
        "--warmup",
        "5",
        "--traces",
        "2",
        "--rounds",
        "2",
        "--overlap",
        "--overlap-steps",
        "30",
    ];
    let a = json(&grammask(&args));
    let b = json(&grammask(&args));
    let configs = a["configs"].as_array().unwrap();
    let names: Vec<&str> = configs.iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["baseline", "+merge", "+cache", "+inline", "+ctx"]);
    for (x, y) in configs.iter().zip(b["configs"].as_array().unwrap()) {
        for key in ["dependent_total", "cache_bytes", "saved_chars_ratio", "cache_ratio", "nodes"] {
            assert_eq!(x[key], y[key], "{key}");
        }
        assert!(x["mask_latency"]["mean_us"].as_f64().unwrap() > 0.0);
        for key in ["cache_ratio", "saved_chars_ratio", "mean_dependent_fraction"] {
            let r = x[key].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&r), "{key} {r}");
        }
    }
    let o = &a["overlap"];
    assert_eq!(o["identical_outputs"].as_bool(), Some(true));
    assert!(o["overlapped_tpot_us"].as_f64().unwrap() > 0.0);
    let single =
        json(&grammask(&["--json", "bench", "--vocab", "toy", "--iterations", "10", "--traces", "1", "--no-ctx"]));
    assert_eq!(single["configs"].as_array().unwrap().len(), 1);
    assert_eq!(single["configs"][0]["ctx_expansion"].as_bool(), Some(false));
}
