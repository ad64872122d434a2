//! A small JSON reader for vocabulary files.
//!
//! Standard JSON plus one extension: `\xHH` inside strings is a raw byte.
//! Token strings therefore decode to [`Piece`]s rather than `String`, so a
//! token can hold a lone byte such as 0xC3 that is not valid UTF-8 by itself.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Piece {
    Char(char),
    Byte(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Json {
    Null,
    Bool(bool),
    Number(f64),
    Str(Vec<Piece>),
    Array(Vec<Json>),
    Object(BTreeMap<String, Json>),
}

impl Json {
    pub(crate) fn as_plain_string(pieces: &[Piece]) -> String {
        pieces
            .iter()
            .map(|p| match p {
                Piece::Char(c) => *c,
                Piece::Byte(b) => *b as char,
            })
            .collect()
    }
}

#[derive(Debug)]
pub(crate) struct JsonError {
    pub offset: usize,
    pub message: String,
}

pub(crate) fn parse(text: &str) -> Result<Json, JsonError> {
    let mut r = Reader { s: text.as_bytes(), text, pos: 0 };
    r.ws();
    let v = r.value(0)?;
    r.ws();
    if r.pos != r.s.len() {
        return r.err("trailing characters");
    }
    Ok(v)
}

struct Reader<'a> {
    s: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err<T>(&self, message: &str) -> Result<T, JsonError> {
        Err(JsonError { offset: self.pos, message: message.to_string() })
    }

    fn ws(&mut self) {
        while matches!(self.s.get(self.pos), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.s[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn value(&mut self, depth: usize) -> Result<Json, JsonError> {
        if depth > 128 {
            return self.err("nesting too deep");
        }
        match self.s.get(self.pos) {
            Some(b'{') => {
                self.pos += 1;
                let mut map = BTreeMap::new();
                self.ws();
                if self.eat("}") {
                    return Ok(Json::Object(map));
                }
                loop {
                    self.ws();
                    if self.s.get(self.pos) != Some(&b'"') {
                        return self.err("expected object key");
                    }
                    self.pos += 1;
                    let key = Json::as_plain_string(&self.string()?);
                    self.ws();
                    if !self.eat(":") {
                        return self.err("expected `:`");
                    }
                    self.ws();
                    let v = self.value(depth + 1)?;
                    map.insert(key, v);
                    self.ws();
                    if self.eat("}") {
                        return Ok(Json::Object(map));
                    }
                    if !self.eat(",") {
                        return self.err("expected `,` or `}`");
                    }
                }
            }
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                self.ws();
                if self.eat("]") {
                    return Ok(Json::Array(items));
                }
                loop {
                    self.ws();
                    items.push(self.value(depth + 1)?);
                    self.ws();
                    if self.eat("]") {
                        return Ok(Json::Array(items));
                    }
                    if !self.eat(",") {
                        return self.err("expected `,` or `]`");
                    }
                }
            }
            Some(b'"') => {
                self.pos += 1;
                Ok(Json::Str(self.string()?))
            }
            Some(b't') if self.eat("true") => Ok(Json::Bool(true)),
            Some(b'f') if self.eat("false") => Ok(Json::Bool(false)),
            Some(b'n') if self.eat("null") => Ok(Json::Null),
            Some(b'-' | b'0'..=b'9') => self.number(),
            _ => self.err("expected a value"),
        }
    }

    fn number(&mut self) -> Result<Json, JsonError> {
        let start = self.pos;
        while matches!(self.s.get(self.pos), Some(b'-' | b'+' | b'.' | b'e' | b'E' | b'0'..=b'9')) {
            self.pos += 1;
        }
        match self.text[start..self.pos].parse::<f64>() {
            Ok(n) => Ok(Json::Number(n)),
            Err(_) => {
                self.pos = start;
                self.err("malformed number")
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, JsonError> {
        let digits = self.text.get(self.pos..self.pos + 4);
        match digits.and_then(|d| u32::from_str_radix(d, 16).ok()) {
            Some(v) if digits.is_some_and(|d| d.bytes().all(|b| b.is_ascii_hexdigit())) => {
                self.pos += 4;
                Ok(v)
            }
            _ => self.err("expected 4 hex digits"),
        }
    }

    /// Reads a string body; the opening quote is already consumed.
    fn string(&mut self) -> Result<Vec<Piece>, JsonError> {
        let mut out = Vec::new();
        loop {
            let Some(&b) = self.s.get(self.pos) else {
                return self.err("unterminated string");
            };
            match b {
                b'"' => {
                    self.pos += 1;
                    return Ok(out);
                }
                b'\\' => {
                    self.pos += 1;
                    let Some(&e) = self.s.get(self.pos) else {
                        return self.err("unterminated escape");
                    };
                    self.pos += 1;
                    let piece = match e {
                        b'"' => Piece::Char('"'),
                        b'\\' => Piece::Char('\\'),
                        b'/' => Piece::Char('/'),
                        b'b' => Piece::Char('\u{8}'),
                        b'f' => Piece::Char('\u{c}'),
                        b'n' => Piece::Char('\n'),
                        b'r' => Piece::Char('\r'),
                        b't' => Piece::Char('\t'),
                        b'x' => {
                            let hex = self.text.get(self.pos..self.pos + 2);
                            match hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                                Some(v) if hex.is_some_and(|h| h.bytes().all(|c| c.is_ascii_hexdigit())) => {
                                    self.pos += 2;
                                    Piece::Byte(v)
                                }
                                _ => return self.err("expected 2 hex digits after \\x"),
                            }
                        }
                        b'u' => {
                            let hi = self.hex4()?;
                            let cp = if (0xD800..0xDC00).contains(&hi) {
                                if !self.eat("\\u") {
                                    return self.err("unpaired surrogate");
                                }
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return self.err("unpaired surrogate");
                                }
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            } else {
                                hi
                            };
                            match char::from_u32(cp) {
                                Some(c) => Piece::Char(c),
                                None => return self.err("unpaired surrogate"),
                            }
                        }
                        _ => return self.err("unknown escape"),
                    };
                    out.push(piece);
                }
                0x00..=0x1F => return self.err("control character in string"),
                _ => {
                    let c = self.text[self.pos..].chars().next().unwrap();
                    self.pos += c.len_utf8();
                    out.push(Piece::Char(c));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_byte_escape() {
        let v = parse(r#"["\xC3", "\u00e9", "\ud83d\ude00"]"#).unwrap();
        let Json::Array(items) = v else { panic!() };
        assert_eq!(items[0], Json::Str(vec![Piece::Byte(0xC3)]));
        assert_eq!(items[1], Json::Str(vec![Piece::Char('é')]));
        assert_eq!(items[2], Json::Str(vec![Piece::Char('😀')]));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("{\"a\": }").is_err());
        assert!(parse("[1, 2").is_err());
        assert!(parse("\"\\ud800\"").is_err());
        assert!(parse("[] x").is_err());
    }

    #[test]
    fn agrees_with_serde_on_standard_json() {
        let text = r#"{"b": [1, -2.5e3, true, null], "a": {"x": "y\n"}}"#;
        let ours = parse(text).unwrap();
        let theirs: serde_json::Value = serde_json::from_str(text).unwrap();
        fn convert(v: &serde_json::Value) -> Json {
            match v {
                serde_json::Value::Null => Json::Null,
                serde_json::Value::Bool(b) => Json::Bool(*b),
                serde_json::Value::Number(n) => Json::Number(n.as_f64().unwrap()),
                serde_json::Value::String(s) => Json::Str(s.chars().map(Piece::Char).collect()),
                serde_json::Value::Array(a) => Json::Array(a.iter().map(convert).collect()),
                serde_json::Value::Object(o) => Json::Object(o.iter().map(|(k, v)| (k.clone(), convert(v))).collect()),
            }
        }
        assert_eq!(ours, convert(&theirs));
    }
}
