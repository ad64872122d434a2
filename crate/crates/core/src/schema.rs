//! JSON Schema subset → grammar.
//!
//! Supported: `type` (a name or a list of names), `properties` with
//! `required` and `additionalProperties: false`, `items`, `enum`/`const`
//! over scalars, `minItems`/`maxItems`. Annotation keywords are ignored.
//! Everything else is rejected with the list of offending keywords.
//!
//! Properties are emitted in schema order. Strings accept well-formed UTF-8
//! only, numbers and whitespace follow the JSON lexical grammar, and
//! `integer` means the JSON integer syntax (no fraction or exponent).

use std::collections::HashSet;
use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::bytes::write_literal_byte;
use crate::grammar::{parse_grammar, Grammar, GrammarError};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed schema JSON: {0}")]
    Malformed(String),
    #[error("unsupported keywords at {path}: {}", .keywords.join(", "))]
    Unsupported { path: String, keywords: Vec<String> },
    #[error("invalid schema at {path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

const KEYWORDS: &[&str] =
    &["type", "properties", "required", "additionalProperties", "items", "enum", "const", "minItems", "maxItems"];
const ANNOTATIONS: &[&str] = &["title", "description", "$schema", "$comment", "$id", "examples", "default"];

#[derive(Clone, Copy, Debug, Default)]
pub struct SchemaOptions {
    /// No whitespace between JSON tokens.
    pub strict_whitespace: bool,
}

pub fn schema_to_grammar(schema_json: &str) -> Result<Grammar, SchemaError> {
    schema_to_grammar_with(schema_json, SchemaOptions::default())
}

pub fn schema_to_grammar_with(schema_json: &str, opts: SchemaOptions) -> Result<Grammar, SchemaError> {
    Ok(parse_grammar(&schema_to_grammar_text(schema_json, opts.strict_whitespace)?)?)
}

/// The grammar text that [`schema_to_grammar`] parses.
pub fn schema_to_grammar_text(schema_json: &str, strict_whitespace: bool) -> Result<String, SchemaError> {
    let schema: Value = serde_json::from_str(schema_json).map_err(|e| SchemaError::Malformed(e.to_string()))?;
    let mut em = Emitter { rules: Vec::new(), names: HashSet::new(), shared: Vec::new(), ws: !strict_whitespace };
    em.names.insert("root".into());
    let body = em.schema(&schema, "root", "#")?;
    let mut out = format!("root ::= {} {body} {}\n", em.ws(), em.ws());
    for (name, body) in &em.rules {
        writeln!(out, "{name} ::= {body}").unwrap();
    }
    for name in &em.shared {
        out.push_str(shared_rule(name, em.ws));
        out.push('\n');
    }
    Ok(out)
}

struct Emitter {
    rules: Vec<(String, String)>,
    names: HashSet<String>,
    shared: Vec<&'static str>,
    ws: bool,
}

fn shared_rule(name: &str, ws: bool) -> &'static str {
    match (name, ws) {
        ("ws", _) => "ws ::= [ \\t\\n\\r]*",
        ("string", _) => {
            "string ::= \"\\\"\" ( [ !#-\\[\\]-~] | [\\u0080-\\uDBFF\\uDFFF] | \"\\\\\" ( [\"\\\\/bfnrt] | \"u\" [0-9a-fA-F]{4} ) )* \"\\\"\""
        }
        ("number", _) => "number ::= \"-\"? ( \"0\" | [1-9] [0-9]* ) ( \".\" [0-9]+ )? ( [eE] [-+]? [0-9]+ )?",
        ("integer", _) => "integer ::= \"-\"? ( \"0\" | [1-9] [0-9]* )",
        ("any", true) => "any ::= anyobject | anyarray | string | number | \"true\" | \"false\" | \"null\"",
        ("any", false) => "any ::= anyobject | anyarray | string | number | \"true\" | \"false\" | \"null\"",
        ("anyobject", true) => {
            "anyobject ::= \"{\" ws ( string ws \":\" ws any ws ( \",\" ws string ws \":\" ws any ws )* )? \"}\""
        }
        ("anyobject", false) => "anyobject ::= \"{\" ( string \":\" any ( \",\" string \":\" any )* )? \"}\"",
        ("anyarray", true) => "anyarray ::= \"[\" ws ( any ws ( \",\" ws any ws )* )? \"]\"",
        ("anyarray", false) => "anyarray ::= \"[\" ( any ( \",\" any )* )? \"]\"",
        _ => unreachable!("unknown shared rule {name}"),
    }
}

fn literal(bytes: &[u8]) -> String {
    let mut s = String::from("\"");
    for b in bytes {
        write_literal_byte(&mut s, *b).unwrap();
    }
    s.push('"');
    s
}

fn invalid<T>(path: &str, message: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError::Invalid { path: path.to_string(), message: message.into() })
}

fn type_matches(v: &Value, ty: &str) -> bool {
    match ty {
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.as_f64().is_some_and(|f| f.fract() == 0.0) && !v.to_string().contains(['.', 'e', 'E']),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

impl Emitter {
    fn ws(&mut self) -> &'static str {
        if self.ws {
            self.use_shared("ws");
            "ws"
        } else {
            ""
        }
    }

    fn use_shared(&mut self, name: &'static str) -> &'static str {
        if !self.shared.contains(&name) {
            self.shared.push(name);
            match name {
                "any" => {
                    for dep in ["anyobject", "anyarray", "string", "number"] {
                        self.use_shared(dep);
                    }
                }
                "anyobject" | "anyarray" => {
                    self.use_shared("any");
                    self.use_shared("string");
                    if self.ws {
                        self.use_shared("ws");
                    }
                }
                _ => {}
            }
        }
        name
    }

    fn fresh_name(&mut self, base: &str) -> String {
        let clean: String = base.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        let mut name = clean.clone();
        let mut n = 2;
        while self.names.contains(&name) || ["ws", "string", "number", "integer", "any"].contains(&name.as_str()) {
            name = format!("{clean}{n}");
            n += 1;
        }
        self.names.insert(name.clone());
        name
    }

    fn rule(&mut self, base: &str, body: String) -> String {
        let name = self.fresh_name(base);
        self.rules.push((name.clone(), body));
        name
    }

    /// Returns a grammar expression for `schema`.
    fn schema(&mut self, schema: &Value, name: &str, path: &str) -> Result<String, SchemaError> {
        let obj = match schema {
            Value::Bool(true) => return Ok(self.use_shared("any").to_string()),
            Value::Object(obj) => obj,
            _ => return invalid(path, "a schema must be an object or `true`"),
        };
        let unsupported: Vec<String> = obj
            .keys()
            .filter(|k| !KEYWORDS.contains(&k.as_str()) && !ANNOTATIONS.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unsupported.is_empty() {
            return Err(SchemaError::Unsupported { path: path.to_string(), keywords: unsupported });
        }

        let types: Option<Vec<String>> = match obj.get("type") {
            None => None,
            Some(Value::String(t)) => Some(vec![t.clone()]),
            Some(Value::Array(items)) if !items.is_empty() => Some(
                items
                    .iter()
                    .map(|t| t.as_str().map(str::to_string).ok_or(()))
                    .collect::<Result<_, _>>()
                    .or_else(|_| invalid(path, "`type` entries must be strings"))?,
            ),
            Some(_) => return invalid(path, "`type` must be a string or a non-empty array"),
        };

        let enumerated: Option<Vec<Value>> = match (obj.get("enum"), obj.get("const")) {
            (Some(_), Some(_)) => return invalid(path, "`enum` and `const` together"),
            (Some(Value::Array(values)), None) => Some(values.clone()),
            (Some(_), None) => return invalid(path, "`enum` must be an array"),
            (None, Some(v)) => Some(vec![v.clone()]),
            (None, None) => None,
        };
        if let Some(values) = enumerated {
            let mut alts = Vec::new();
            for v in &values {
                if v.is_object() || v.is_array() {
                    return invalid(path, "only scalar `enum`/`const` values are supported");
                }
                if let Some(types) = &types {
                    if !types.iter().any(|t| type_matches(v, t)) {
                        continue;
                    }
                }
                let text = serde_json::to_string(v).unwrap();
                let lit = literal(text.as_bytes());
                if !alts.contains(&lit) {
                    alts.push(lit);
                }
            }
            if alts.is_empty() {
                return invalid(path, "no `enum` value satisfies `type`");
            }
            return Ok(format!("( {} )", alts.join(" | ")));
        }

        let Some(types) = types else {
            return Ok(self.use_shared("any").to_string());
        };
        let mut alts = Vec::new();
        for ty in &types {
            let alt = match ty.as_str() {
                "string" => self.use_shared("string").to_string(),
                "number" => self.use_shared("number").to_string(),
                "integer" => self.use_shared("integer").to_string(),
                "boolean" => "( \"true\" | \"false\" )".to_string(),
                "null" => "\"null\"".to_string(),
                "object" => self.object(obj, name, path)?,
                "array" => self.array(obj, name, path)?,
                other => return invalid(path, format!("unknown type `{other}`")),
            };
            alts.push(alt);
        }
        Ok(if alts.len() == 1 { alts.pop().unwrap() } else { format!("( {} )", alts.join(" | ")) })
    }

    fn object(&mut self, obj: &Map<String, Value>, name: &str, path: &str) -> Result<String, SchemaError> {
        let closed = match obj.get("additionalProperties") {
            None => false,
            Some(Value::Bool(false)) => true,
            Some(_) => return invalid(path, "only `additionalProperties: false` is supported"),
        };
        let props = match obj.get("properties") {
            None => None,
            Some(Value::Object(p)) => Some(p),
            Some(_) => return invalid(path, "`properties` must be an object"),
        };
        let required: Vec<&str> = match obj.get("required") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().ok_or(()))
                .collect::<Result<_, _>>()
                .or_else(|_| invalid(path, "`required` must list strings"))?,
            Some(_) => return invalid(path, "`required` must be an array"),
        };
        let Some(props) = props else {
            if closed {
                return Ok("( \"{\" ".to_string() + self.ws() + " \"}\" )");
            }
            if !required.is_empty() {
                return invalid(path, "`required` without `properties`");
            }
            return Ok(self.use_shared("anyobject").to_string());
        };
        if !closed {
            return invalid(path, "objects with `properties` need `additionalProperties: false`");
        }
        for r in &required {
            if !props.contains_key(*r) {
                return invalid(path, format!("required property `{r}` is not declared"));
            }
        }

        let ws = self.ws();
        let mut members = Vec::new();
        for (key, sub) in props {
            let sub_name = format!("{name}-{key}");
            let sub_path = format!("{path}/properties/{key}");
            let value = self.schema(sub, &sub_name, &sub_path)?;
            let value_rule = self.rule(&sub_name, value);
            let key_lit = literal(serde_json::to_string(key).unwrap().as_bytes());
            members.push((format!("{key_lit} {ws} \":\" {ws} {value_rule} {ws}"), required.contains(&key.as_str())));
        }

        // tail(i, emitted): members i.. where `emitted` says whether a
        // comma is needed before the next one.
        let n = members.len();
        let mut tails: Vec<[Option<String>; 2]> = vec![[None, None]; n + 1];
        for i in (0..n).rev() {
            for emitted in [false, true] {
                let (member, req) = &members[i];
                let item = if emitted { format!("\",\" {ws} {member}") } else { member.clone() };
                let after = match &tails[i + 1][1] {
                    Some(rule) => format!("{item} {rule}"),
                    None => item,
                };
                let body = if *req {
                    after
                } else {
                    match &tails[i + 1][emitted as usize] {
                        Some(rule) => format!("( {after} ) | {rule}"),
                        None => format!("( {after} )?"),
                    }
                };
                let rule = self.rule(&format!("{name}-tail{i}{}", if emitted { "c" } else { "" }), body);
                tails[i][emitted as usize] = Some(rule);
            }
        }
        match &tails[0][0] {
            Some(first) => Ok(format!("( \"{{\" {ws} {first} \"}}\" )")),
            None => Ok(format!("( \"{{\" {ws} \"}}\" )")),
        }
    }

    fn array(&mut self, obj: &Map<String, Value>, name: &str, path: &str) -> Result<String, SchemaError> {
        let count = |key: &str| -> Result<Option<u64>, SchemaError> {
            match obj.get(key) {
                None => Ok(None),
                Some(v) => {
                    v.as_u64().map(Some).ok_or(()).or_else(|_| invalid(path, format!("`{key}` must be a count")))
                }
            }
        };
        let min = count("minItems")?.unwrap_or(0);
        let max = count("maxItems")?;
        if let Some(max) = max {
            if max < min {
                return invalid(path, "`maxItems` < `minItems`");
            }
        }
        let ws = self.ws();
        let item_name = format!("{name}-item");
        let item = match obj.get("items") {
            None => self.use_shared("any").to_string(),
            Some(sub) => {
                let expr = self.schema(sub, &item_name, &format!("{path}/items"))?;
                self.rule(&item_name, expr)
            }
        };
        if max == Some(0) {
            return Ok(format!("( \"[\" {ws} \"]\" )"));
        }
        let more_min = min.saturating_sub(1);
        let more = match max {
            Some(max) => format!("{{{more_min},{}}}", max - 1),
            None => format!("{{{more_min},}}"),
        };
        let list = format!("{item} {ws} ( \",\" {ws} {item} {ws} ){more}");
        Ok(if min == 0 { format!("( \"[\" {ws} ( {list} )? \"]\" )") } else { format!("( \"[\" {ws} {list} \"]\" )") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pda::{build_pda, oracle_accepts};

    fn accepts(schema: &str, input: &str) -> bool {
        let g = schema_to_grammar(schema).unwrap();
        let p = build_pda(&g);
        oracle_accepts(&p, input.as_bytes()).unwrap()
    }

    #[test]
    fn boolean_schema() {
        let s = r#"{"type":"boolean"}"#;
        assert!(accepts(s, "true") && accepts(s, "false"));
        assert!(!accepts(s, "null") && !accepts(s, "tru") && !accepts(s, "1"));
    }

    #[test]
    fn enum_of_strings() {
        let s = r#"{"enum":["x","y"]}"#;
        assert!(accepts(s, "\"x\"") && accepts(s, "\"y\""));
        assert!(!accepts(s, "\"z\"") && !accepts(s, "x"));
    }

    #[test]
    fn required_integer_property() {
        let s =
            r#"{"type":"object","properties":{"a":{"type":"integer"}},"required":["a"],"additionalProperties":false}"#;
        assert!(accepts(s, r#"{"a": -3}"#));
        assert!(!accepts(s, r#"{"a": 1.5}"#));
        assert!(!accepts(s, "{}"));
    }

    #[test]
    fn optional_properties_and_commas() {
        let s = r#"{"type":"object","properties":{"a":{"type":"null"},"b":{"type":"null"},"c":{"type":"null"}},"additionalProperties":false}"#;
        for ok in
            ["{}", r#"{"a":null}"#, r#"{"b":null}"#, r#"{"a":null,"c":null}"#, r#"{ "a" : null , "b":null,"c":null }"#]
        {
            assert!(accepts(s, ok), "{ok}");
        }
        for bad in [r#"{,"a":null}"#, r#"{"a":null,}"#, r#"{"b":null,"a":null}"#, r#"{"a":null "b":null}"#] {
            assert!(!accepts(s, bad), "{bad}");
        }
    }

    #[test]
    fn array_bounds() {
        let s = r#"{"type":"array","items":{"type":"integer"},"minItems":1,"maxItems":2}"#;
        assert!(accepts(s, "[1]") && accepts(s, "[1, 2]"));
        assert!(!accepts(s, "[]") && !accepts(s, "[1,2,3]"));
    }

    #[test]
    fn strings_are_strict_utf8() {
        let s = r#"{"type":"string"}"#;
        assert!(accepts(s, "\"é\\n\\u00e9\""));
        let g = schema_to_grammar(s).unwrap();
        let p = build_pda(&g);
        assert!(!oracle_accepts(&p, b"\"\xC3\"").unwrap());
        assert!(!accepts(s, "\"\n\""));
    }

    #[test]
    fn strict_whitespace() {
        let s = r#"{"type":"array","items":{"type":"null"}}"#;
        let g = schema_to_grammar_with(s, SchemaOptions { strict_whitespace: true }).unwrap();
        let p = build_pda(&g);
        assert!(oracle_accepts(&p, b"[null,null]").unwrap());
        assert!(!oracle_accepts(&p, b"[null, null]").unwrap());
    }

    #[test]
    fn errors() {
        match schema_to_grammar(r#"{"type":"string","pattern":"a+","format":"email"}"#) {
            Err(SchemaError::Unsupported { keywords, .. }) => assert_eq!(keywords, vec!["pattern", "format"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(schema_to_grammar("{"), Err(SchemaError::Malformed(_))));
        assert!(matches!(
            schema_to_grammar(r#"{"type":"object","properties":{"a":{}}}"#),
            Err(SchemaError::Invalid { .. })
        ));
        assert!(matches!(schema_to_grammar(r#"{"enum":[[1]]}"#), Err(SchemaError::Invalid { .. })));
    }
}
