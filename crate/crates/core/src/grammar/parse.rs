//! Parser for the textual grammar format.
//!
//! ```text
//! grammar   ::= rule*
//! rule      ::= name "::=" choice
//! choice    ::= sequence ("|" sequence)*
//! sequence  ::= postfix*
//! postfix   ::= primary ("*" | "+" | "?" | "{" int ("," int?)? "}")*
//! primary   ::= string | class | name | "(" choice ")"
//! string    ::= '"' (char | escape)* '"'
//! class     ::= "[" "^"? (item ("-" item)?)* "]"
//! escape    ::= \" \\ \n \t \r \xHH \uXXXX  (plus \] \[ \- \^ inside classes)
//! name      ::= [A-Za-z_] [A-Za-z0-9_-]*
//! ```
//!
//! A rule runs until the next `name ::=`, so rule bodies may span lines.
//! `#` starts a comment. `\xHH` always denotes a raw byte; other characters
//! and `\uXXXX` denote code points and are encoded as UTF-8.

use std::collections::HashMap;

use regex_syntax::utf8::Utf8Sequences;

use super::{Grammar, GrammarError, Rule, RuleExpr, RuleId};
use crate::bytes::ByteSet;

/// Parses grammar text. The first rule named `root`, or else the first rule,
/// becomes the root.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut parser = Parser { src: text.as_bytes(), pos: 0, line: 1, col: 1 };
    let defs = parser.grammar()?;
    if defs.is_empty() {
        return Err(GrammarError::Empty);
    }

    let mut ids: HashMap<&str, RuleId> = HashMap::new();
    for (i, def) in defs.iter().enumerate() {
        if ids.insert(def.name.as_str(), RuleId(i as u32)).is_some() {
            return Err(GrammarError::DuplicateRule { name: def.name.clone(), line: def.line, column: def.col });
        }
    }
    let mut rules = Vec::with_capacity(defs.len());
    for def in &defs {
        rules.push(Rule { name: def.name.clone(), body: resolve(&def.body, &ids)? });
    }
    let root = ids.get("root").copied().unwrap_or(RuleId(0));
    Grammar::new(rules, root)
}

#[derive(Debug)]
enum Ast {
    Expr(RuleExpr),
    Ref { name: String, line: usize, col: usize },
    Seq(Vec<Ast>),
    Alt(Vec<Ast>),
    Rep { inner: Box<Ast>, min: u32, max: Option<u32> },
}

struct RuleDef {
    name: String,
    line: usize,
    col: usize,
    body: Ast,
}

fn resolve(ast: &Ast, ids: &HashMap<&str, RuleId>) -> Result<RuleExpr, GrammarError> {
    Ok(match ast {
        Ast::Expr(e) => e.clone(),
        Ast::Ref { name, line, col } => match ids.get(name.as_str()) {
            Some(id) => RuleExpr::RuleRef(*id),
            None => return Err(GrammarError::UndefinedRule { name: name.clone(), line: *line, column: *col }),
        },
        Ast::Seq(items) => RuleExpr::Sequence(items.iter().map(|a| resolve(a, ids)).collect::<Result<_, _>>()?),
        Ast::Alt(items) => RuleExpr::Choice(items.iter().map(|a| resolve(a, ids)).collect::<Result<_, _>>()?),
        Ast::Rep { inner, min, max } => RuleExpr::Repeat { expr: Box::new(resolve(inner, ids)?), min: *min, max: *max },
    })
}

/// One side of a class range: a code point, or a raw byte from `\xHH`.
#[derive(Clone, Copy)]
enum ClassAtom {
    Char(u32),
    Byte(u8),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, GrammarError> {
        Err(GrammarError::Syntax { line: self.line, column: self.col, message: message.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if b & 0xC0 != 0x80 {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_trivia(&mut self) {
        while let Some(b) = self.peek() {
            match b {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'#' => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn grammar(&mut self) -> Result<Vec<RuleDef>, GrammarError> {
        let mut defs = Vec::new();
        loop {
            self.skip_trivia();
            if self.peek().is_none() {
                return Ok(defs);
            }
            let (line, col) = (self.line, self.col);
            let name = match self.ident() {
                Some(name) => name,
                None => return self.err("expected rule name"),
            };
            self.skip_trivia();
            if !self.src[self.pos..].starts_with(b"::=") {
                return self.err(format!("expected `::=` after `{name}`"));
            }
            for _ in 0..3 {
                self.bump();
            }
            let body = self.choice()?;
            defs.push(RuleDef { name, line, col, body });
        }
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        match self.peek() {
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                self.bump();
            }
            _ => return None,
        }
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b == b'_' || b == b'-' {
                self.bump();
            } else {
                break;
            }
        }
        Some(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    /// True when the upcoming input is `name ::=`, i.e. the next rule starts.
    fn at_rule_start(&self) -> bool {
        let mut i = self.pos;
        match self.src.get(i) {
            Some(b) if b.is_ascii_alphabetic() || *b == b'_' => i += 1,
            _ => return false,
        }
        while matches!(self.src.get(i), Some(b) if b.is_ascii_alphanumeric() || *b == b'_' || *b == b'-') {
            i += 1;
        }
        loop {
            match self.src.get(i) {
                Some(b' ' | b'\t' | b'\r' | b'\n') => i += 1,
                Some(b'#') => {
                    while !matches!(self.src.get(i), None | Some(b'\n')) {
                        i += 1;
                    }
                }
                _ => break,
            }
        }
        self.src[i..].starts_with(b"::=")
    }

    fn choice(&mut self) -> Result<Ast, GrammarError> {
        let mut alts = vec![self.sequence()?];
        loop {
            self.skip_trivia();
            if self.peek() == Some(b'|') {
                self.bump();
                alts.push(self.sequence()?);
            } else {
                break;
            }
        }
        Ok(if alts.len() == 1 { alts.pop().unwrap() } else { Ast::Alt(alts) })
    }

    fn sequence(&mut self) -> Result<Ast, GrammarError> {
        let mut items = Vec::new();
        loop {
            self.skip_trivia();
            match self.peek() {
                None | Some(b'|') | Some(b')') => break,
                Some(_) if self.at_rule_start() => break,
                Some(_) => items.push(self.postfix()?),
            }
        }
        Ok(match items.len() {
            0 => Ast::Expr(RuleExpr::Empty),
            1 => items.pop().unwrap(),
            _ => Ast::Seq(items),
        })
    }

    fn postfix(&mut self) -> Result<Ast, GrammarError> {
        let mut node = self.primary()?;
        loop {
            let (min, max) = match self.peek() {
                Some(b'*') => (0, None),
                Some(b'+') => (1, None),
                Some(b'?') => (0, Some(1)),
                Some(b'{') => {
                    self.bump();
                    let bounds = self.bounds()?;
                    node = Ast::Rep { inner: Box::new(node), min: bounds.0, max: bounds.1 };
                    continue;
                }
                _ => return Ok(node),
            };
            self.bump();
            node = Ast::Rep { inner: Box::new(node), min, max };
        }
    }

    fn number(&mut self) -> Result<u32, GrammarError> {
        self.skip_trivia();
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.bump();
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse() {
            Ok(n) => Ok(n),
            Err(_) => self.err("repetition count too large"),
        }
    }

    fn bounds(&mut self) -> Result<(u32, Option<u32>), GrammarError> {
        let min = self.number()?;
        self.skip_trivia();
        let max = match self.peek() {
            Some(b'}') => Some(min),
            Some(b',') => {
                self.bump();
                self.skip_trivia();
                if self.peek() == Some(b'}') {
                    None
                } else {
                    Some(self.number()?)
                }
            }
            _ => return self.err("expected `,` or `}` in repetition"),
        };
        self.skip_trivia();
        if self.bump() != Some(b'}') {
            return self.err("expected `}`");
        }
        if let Some(max) = max {
            if max < min {
                return Err(GrammarError::InvalidRepeat { min, max });
            }
        }
        Ok((min, max))
    }

    fn primary(&mut self) -> Result<Ast, GrammarError> {
        match self.peek() {
            Some(b'"') => {
                self.bump();
                let bytes = self.string_body()?;
                Ok(Ast::Expr(if bytes.is_empty() { RuleExpr::Empty } else { RuleExpr::Literal(bytes) }))
            }
            Some(b'[') => {
                self.bump();
                self.class()
            }
            Some(b'(') => {
                self.bump();
                let inner = self.choice()?;
                self.skip_trivia();
                if self.bump() != Some(b')') {
                    return self.err("expected `)`");
                }
                Ok(inner)
            }
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let (line, col) = (self.line, self.col);
                let name = self.ident().unwrap();
                Ok(Ast::Ref { name, line, col })
            }
            Some(b) => self.err(format!("unexpected character `{}`", b as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn hex(&mut self, digits: usize) -> Result<u32, GrammarError> {
        let mut v = 0u32;
        for _ in 0..digits {
            let d = match self.peek().and_then(|b| (b as char).to_digit(16)) {
                Some(d) => d,
                None => return self.err("expected hex digit"),
            };
            self.bump();
            v = v * 16 + d;
        }
        Ok(v)
    }

    /// Reads one UTF-8 encoded character from the source.
    fn source_char(&mut self) -> Result<u32, GrammarError> {
        let rest = &self.src[self.pos..];
        let len = match rest[0] {
            b if b < 0x80 => 1,
            b if b >> 5 == 0b110 => 2,
            b if b >> 4 == 0b1110 => 3,
            _ => 4,
        };
        let s = match rest.get(..len).and_then(|s| std::str::from_utf8(s).ok()) {
            Some(s) => s,
            None => return self.err("invalid UTF-8 in grammar text"),
        };
        let c = s.chars().next().unwrap() as u32;
        for _ in 0..len {
            self.bump();
        }
        Ok(c)
    }

    fn unicode_escape(&mut self) -> Result<u32, GrammarError> {
        let hi = self.hex(4)?;
        if (0xD800..0xDC00).contains(&hi) {
            if self.peek() == Some(b'\\') && self.peek_at(1) == Some(b'u') {
                self.bump();
                self.bump();
                let lo = self.hex(4)?;
                if (0xDC00..0xE000).contains(&lo) {
                    return Ok(0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00));
                }
            }
            return self.err("unpaired surrogate in \\u escape");
        }
        if (0xDC00..0xE000).contains(&hi) {
            return self.err("unpaired surrogate in \\u escape");
        }
        Ok(hi)
    }

    fn escape(&mut self, in_class: bool) -> Result<ClassAtom, GrammarError> {
        let c = match self.bump() {
            Some(c) => c,
            None => return self.err("unterminated escape"),
        };
        Ok(match c {
            b'n' => ClassAtom::Char('\n' as u32),
            b't' => ClassAtom::Char('\t' as u32),
            b'r' => ClassAtom::Char('\r' as u32),
            b'"' | b'\\' => ClassAtom::Char(c as u32),
            b']' | b'[' | b'-' | b'^' if in_class => ClassAtom::Char(c as u32),
            b'x' => ClassAtom::Byte(self.hex(2)? as u8),
            b'u' => ClassAtom::Char(self.unicode_escape()?),
            other => return self.err(format!("unknown escape `\\{}`", other as char)),
        })
    }

    fn string_body(&mut self) -> Result<Vec<u8>, GrammarError> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None | Some(b'\n') => return self.err("unterminated string literal"),
                Some(b'"') => {
                    self.bump();
                    return Ok(out);
                }
                Some(b'\\') => {
                    self.bump();
                    match self.escape(false)? {
                        ClassAtom::Byte(b) => out.push(b),
                        ClassAtom::Char(c) => push_utf8(&mut out, c),
                    }
                }
                Some(_) => {
                    let c = self.source_char()?;
                    push_utf8(&mut out, c);
                }
            }
        }
    }

    fn class_atom(&mut self) -> Result<ClassAtom, GrammarError> {
        match self.peek() {
            None | Some(b'\n') => self.err("unterminated character class"),
            Some(b'\\') => {
                self.bump();
                self.escape(true)
            }
            Some(_) => Ok(ClassAtom::Char(self.source_char()?)),
        }
    }

    fn class(&mut self) -> Result<Ast, GrammarError> {
        let negated = if self.peek() == Some(b'^') {
            self.bump();
            true
        } else {
            false
        };
        let mut bytes = ByteSet::EMPTY;
        let mut wide: Vec<(u32, u32)> = Vec::new();
        loop {
            if self.peek() == Some(b']') {
                self.bump();
                break;
            }
            let lo = self.class_atom()?;
            let hi = if self.peek() == Some(b'-') && self.peek_at(1) != Some(b']') {
                self.bump();
                self.class_atom()?
            } else {
                lo
            };
            match (lo, hi) {
                (ClassAtom::Byte(a), ClassAtom::Byte(b)) => {
                    if a > b {
                        return self.err("inverted class range");
                    }
                    bytes.insert_range(a, b);
                }
                (ClassAtom::Char(a), ClassAtom::Char(b)) => {
                    if a > b {
                        return self.err("inverted class range");
                    }
                    if a < 0x80 {
                        bytes.insert_range(a as u8, b.min(0x7F) as u8);
                    }
                    if b >= 0x80 {
                        wide.push((a.max(0x80), b));
                    }
                }
                (ClassAtom::Byte(a), ClassAtom::Char(b)) | (ClassAtom::Char(b), ClassAtom::Byte(a)) if b < 0x80 => {
                    let (lo, hi) = (a.min(b as u8), a.max(b as u8));
                    bytes.insert_range(lo, hi);
                }
                _ => return self.err("class range mixes raw bytes with non-ASCII characters"),
            }
        }
        lower_class(bytes, wide, negated).or_else(|m| self.err(m))
    }
}

fn push_utf8(out: &mut Vec<u8>, c: u32) {
    let ch = char::from_u32(c).unwrap_or(char::REPLACEMENT_CHARACTER);
    let mut buf = [0u8; 4];
    out.extend_from_slice(ch.encode_utf8(&mut buf).as_bytes());
}

/// Lowers a class over bytes plus non-ASCII code point ranges to byte-level
/// expressions.
///
/// A negated class that only excludes bytes/ASCII stays a single negated
/// byte class, so it also accepts any lone byte >= 0x80. A negated class
/// that excludes non-ASCII code points is complemented over the code point
/// space and encoded as UTF-8 sequences.
fn lower_class(bytes: ByteSet, mut wide: Vec<(u32, u32)>, negated: bool) -> Result<Ast, String> {
    if wide.is_empty() {
        return Ok(Ast::Expr(RuleExpr::ByteClass { set: bytes, negated }));
    }
    let mut alts = Vec::new();
    if negated {
        if bytes.iter().any(|b| b >= 0x80) {
            return Err("negated class mixes raw bytes >= 0x80 with non-ASCII characters".into());
        }
        let ascii = ByteSet::from_range(0, 0x7F).intersect(&bytes.complement());
        if !ascii.is_empty() {
            alts.push(RuleExpr::class(ascii));
        }
        wide.sort();
        let mut next = 0x80u32;
        let mut keep = Vec::new();
        for (lo, hi) in wide {
            if lo > next {
                keep.push((next, lo - 1));
            }
            next = next.max(hi + 1);
        }
        if next <= 0x10FFFF {
            keep.push((next, 0x10FFFF));
        }
        wide = keep;
    } else if !bytes.is_empty() {
        alts.push(RuleExpr::class(bytes));
    }
    for (lo, hi) in wide {
        let (Some(lo), Some(hi)) = (scalar_at_or_after(lo), scalar_at_or_before(hi)) else { continue };
        if lo > hi {
            continue;
        }
        for seq in Utf8Sequences::new(lo, hi) {
            let parts: Vec<RuleExpr> =
                seq.as_slice().iter().map(|r| RuleExpr::class(ByteSet::from_range(r.start, r.end))).collect();
            alts.push(if parts.len() == 1 { parts.into_iter().next().unwrap() } else { RuleExpr::Sequence(parts) });
        }
    }
    Ok(Ast::Expr(match alts.len() {
        0 => RuleExpr::class(ByteSet::EMPTY),
        1 => alts.pop().unwrap(),
        _ => RuleExpr::Choice(alts),
    }))
}

fn scalar_at_or_after(c: u32) -> Option<char> {
    if (0xD800..0xE000).contains(&c) {
        char::from_u32(0xE000)
    } else {
        char::from_u32(c)
    }
}

fn scalar_at_or_before(c: u32) -> Option<char> {
    if (0xD800..0xE000).contains(&c) {
        char::from_u32(0xD7FF)
    } else {
        char::from_u32(c.min(0x10FFFF))
    }
}
