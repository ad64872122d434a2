//! Tokenizer vocabularies as raw byte strings.
//!
//! File format:
//!
//! ```json
//! {"byte_level": false, "eos_id": 3, "special": [3], "tokens": ["a", "b", "ab", "<eos>"]}
//! ```
//!
//! Token strings take the usual JSON escapes plus `\xHH` for a raw byte. With
//! `"byte_level": true` each character is first mapped back through the
//! byte-level BPE table (`Ġ` is a space, and so on).

pub mod byte_level;
mod json;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use json::{Json, Piece};

pub type TokenId = u32;

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("malformed vocabulary: {0}")]
    Malformed(String),
    #[error("special token id {0} listed twice")]
    DuplicateId(u32),
    #[error("vocabulary has no eos token")]
    MissingEos,
    #[error("token id {id} is out of range for {size} tokens")]
    OutOfRange { id: u32, size: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    special: Vec<bool>,
    eos_id: TokenId,
}

impl Vocabulary {
    /// `eos_id` is always treated as special.
    pub fn new(
        tokens: Vec<Vec<u8>>,
        special: impl IntoIterator<Item = TokenId>,
        eos_id: TokenId,
    ) -> Result<Self, VocabError> {
        let size = tokens.len();
        if eos_id as usize >= size {
            return Err(VocabError::OutOfRange { id: eos_id, size });
        }
        let mut flags = vec![false; size];
        for id in special {
            match flags.get_mut(id as usize) {
                None => return Err(VocabError::OutOfRange { id, size }),
                Some(true) => return Err(VocabError::DuplicateId(id)),
                Some(f) => *f = true,
            }
        }
        flags[eos_id as usize] = true;
        Ok(Vocabulary { tokens, special: flags, eos_id })
    }

    pub fn from_json(text: &str) -> Result<Self, VocabError> {
        let root =
            json::parse(text).map_err(|e| VocabError::Malformed(format!("{} at byte {}", e.message, e.offset)))?;
        let Json::Object(mut obj) = root else {
            return Err(VocabError::Malformed("top level must be an object".into()));
        };
        let byte_level = match obj.remove("byte_level") {
            None => false,
            Some(Json::Bool(b)) => b,
            Some(_) => return Err(VocabError::Malformed("`byte_level` must be a boolean".into())),
        };
        let eos_id = match obj.remove("eos_id") {
            None | Some(Json::Null) => return Err(VocabError::MissingEos),
            Some(v) => id_of(&v, "eos_id")?,
        };
        let special = match obj.remove("special") {
            None => Vec::new(),
            Some(Json::Array(items)) => items.iter().map(|v| id_of(v, "special")).collect::<Result<Vec<_>, _>>()?,
            Some(_) => return Err(VocabError::Malformed("`special` must be an array".into())),
        };
        let Some(Json::Array(raw)) = obj.remove("tokens") else {
            return Err(VocabError::Malformed("`tokens` must be an array of strings".into()));
        };
        let mut tokens = Vec::with_capacity(raw.len() + 1);
        for (i, item) in raw.iter().enumerate() {
            let Json::Str(pieces) = item else {
                return Err(VocabError::Malformed(format!("token {i} is not a string")));
            };
            // Special tokens keep their literal spelling.
            let remap = byte_level && !special.contains(&(i as u32)) && eos_id != i as u32;
            tokens.push(
                decode_pieces(pieces, remap)
                    .map_err(|c| VocabError::Malformed(format!("token {i}: {c:?} is not in the byte-level table")))?,
            );
        }
        // An eos id one past the token list names an implicit `<eos>` entry.
        if eos_id as usize == tokens.len() {
            tokens.push(b"<eos>".to_vec());
        }
        Vocabulary::new(tokens, special, eos_id)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the vocabulary file format (never byte-level remapped).
    pub fn to_json(&self) -> String {
        let mut out = String::from("{\"byte_level\": false, \"eos_id\": ");
        write!(out, "{}, \"special\": [", self.eos_id).unwrap();
        let specials: Vec<String> = self.special_ids().map(|i| i.to_string()).collect();
        out.push_str(&specials.join(", "));
        out.push_str("], \"tokens\": [");
        for (i, tok) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('"');
            escape_token(&mut out, tok);
            out.push('"');
        }
        out.push_str("]}\n");
        out
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, id: TokenId) -> &[u8] {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.special[id as usize]
    }

    pub fn special_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.special.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i as TokenId)
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    /// Number of tokens that take part in grammar matching.
    pub fn non_special_count(&self) -> usize {
        self.special.iter().filter(|s| !**s).count()
    }

    /// First 8 bytes of a SHA-256 over ids, special flags and token bytes.
    pub fn content_hash(&self) -> [u8; 8] {
        let mut h = Sha256::new();
        h.update((self.tokens.len() as u64).to_le_bytes());
        h.update(self.eos_id.to_le_bytes());
        for (tok, special) in self.tokens.iter().zip(&self.special) {
            h.update([*special as u8]);
            h.update((tok.len() as u32).to_le_bytes());
            h.update(tok);
        }
        let digest = h.finalize();
        digest[..8].try_into().unwrap()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<u8> {
        ids.iter().filter(|id| !self.is_special(**id)).flat_map(|id| self.token(*id).iter().copied()).collect()
    }
}

fn id_of(v: &Json, field: &str) -> Result<TokenId, VocabError> {
    match v {
        Json::Number(n) if *n >= 0.0 && n.fract() == 0.0 && *n <= u32::MAX as f64 => Ok(*n as TokenId),
        _ => Err(VocabError::Malformed(format!("`{field}` must hold non-negative integers"))),
    }
}

fn decode_pieces(pieces: &[Piece], byte_level: bool) -> Result<Vec<u8>, char> {
    let mut out = Vec::with_capacity(pieces.len());
    for p in pieces {
        match *p {
            Piece::Byte(b) => out.push(b),
            Piece::Char(c) if byte_level => out.push(byte_level::char_to_byte(c).ok_or(c)?),
            Piece::Char(c) => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    Ok(out)
}

fn escape_token(out: &mut String, bytes: &[u8]) {
    for chunk in bytes.utf8_chunks() {
        for c in chunk.valid().chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                '\r' => out.push_str("\\r"),
                c if (c as u32) < 0x20 || c == '\u{7f}' => write!(out, "\\u{:04x}", c as u32).unwrap(),
                c => out.push(c),
            }
        }
        for b in chunk.invalid() {
            write!(out, "\\x{b:02X}").unwrap();
        }
    }
}

/// Non-special tokens in lexicographic byte order, with the longest common
/// prefix between each token and its predecessor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortedVocabIndex {
    order: Vec<TokenId>,
    lcp: Vec<u32>,
    /// Position of each token in `order`; `u32::MAX` for special tokens.
    rank: Vec<u32>,
    total_len: u64,
    total_lcp: u64,
}

pub fn build_sorted_index(v: &Vocabulary) -> SortedVocabIndex {
    let mut order: Vec<TokenId> = (0..v.size() as TokenId).filter(|id| !v.is_special(*id)).collect();
    // stable: duplicates keep ascending id order
    order.sort_by(|a, b| v.token(*a).cmp(v.token(*b)));
    let mut lcp = Vec::with_capacity(order.len());
    let mut rank = vec![u32::MAX; v.size()];
    let mut total_len = 0u64;
    let mut total_lcp = 0u64;
    for (k, id) in order.iter().enumerate() {
        let tok = v.token(*id);
        let l = if k == 0 { 0 } else { common_prefix(v.token(order[k - 1]), tok) };
        lcp.push(l as u32);
        rank[*id as usize] = k as u32;
        total_len += tok.len() as u64;
        total_lcp += l as u64;
    }
    SortedVocabIndex { order, lcp, rank, total_len, total_lcp }
}

pub(crate) fn common_prefix(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

impl SortedVocabIndex {
    pub fn order(&self) -> &[TokenId] {
        &self.order
    }

    pub fn lcp(&self) -> &[u32] {
        &self.lcp
    }

    pub fn rank(&self, id: TokenId) -> Option<u32> {
        self.rank.get(id as usize).copied().filter(|r| *r != u32::MAX)
    }

    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    /// Bytes a prefix-sharing traversal has to examine: Σ len − Σ lcp.
    pub fn examined_bytes(&self) -> u64 {
        self.total_len - self.total_lcp
    }

    /// Fraction of token bytes still examined under prefix sharing.
    pub fn saved_chars_ratio(&self) -> f64 {
        if self.total_len == 0 {
            1.0
        } else {
            self.examined_bytes() as f64 / self.total_len as f64
        }
    }
}

/// Frequency table of token lengths, handy for reports.
pub fn length_histogram(v: &Vocabulary) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for id in 0..v.size() as TokenId {
        if !v.is_special(id) {
            *h.entry(v.token(id).len()).or_insert(0) += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[&str]) -> Vocabulary {
        let mut t: Vec<Vec<u8>> = tokens.iter().map(|s| s.as_bytes().to_vec()).collect();
        t.push(b"<eos>".to_vec());
        let eos = (t.len() - 1) as u32;
        Vocabulary::new(t, [], eos).unwrap()
    }

    #[test]
    fn load_small_file() {
        let v = Vocabulary::from_json(r#"{"eos_id": 3, "special": [3], "tokens": ["a", "b", "ab", "<eos>"]}"#).unwrap();
        assert_eq!(v.size(), 4);
        assert!(v.is_special(3));
        assert_eq!(v.token(2), b"ab");
        let implicit = Vocabulary::from_json(r#"{"eos_id": 3, "special": [3], "tokens": ["a", "b", "ab"]}"#).unwrap();
        assert_eq!(implicit.size(), 4);
        assert_eq!(implicit.eos_id(), 3);
    }

    #[test]
    fn byte_level_space() {
        let v = Vocabulary::from_json(r#"{"byte_level": true, "eos_id": 1, "tokens": ["Ġa", "<|end|>"]}"#).unwrap();
        assert_eq!(v.token(0), &[0x20, 0x61]);
        assert_eq!(v.token(1), b"<|end|>");
    }

    #[test]
    fn sub_utf8_fragment() {
        let v = Vocabulary::from_json(r#"{"eos_id": 1, "tokens": ["\xC3", "<eos>"]}"#).unwrap();
        assert_eq!(v.token(0), &[0xC3]);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(Vocabulary::from_json("{\"tokens\": [\"a\"]}"), Err(VocabError::MissingEos)));
        assert!(matches!(
            Vocabulary::from_json(r#"{"eos_id": 1, "special": [1, 1], "tokens": ["a", "b"]}"#),
            Err(VocabError::DuplicateId(1))
        ));
        assert!(matches!(
            Vocabulary::from_json(r#"{"eos_id": 9, "tokens": ["a"]}"#),
            Err(VocabError::OutOfRange { id: 9, .. })
        ));
        assert!(matches!(Vocabulary::from_json("[1,2]"), Err(VocabError::Malformed(_))));
        assert!(matches!(
            Vocabulary::from_json(r#"{"byte_level": true, "eos_id": 1, "tokens": [" a", "e"]}"#),
            Err(VocabError::Malformed(_))
        ));
    }

    #[test]
    fn json_round_trip_with_raw_bytes() {
        let v =
            Vocabulary::new(vec![vec![0xC3], "é\"\n".as_bytes().to_vec(), vec![0x00, b'x'], b"<eos>".to_vec()], [3], 3)
                .unwrap();
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.content_hash(), v.content_hash());
    }

    #[test]
    fn read_ready_reader() {
        let v = vocab(&["ready", "zoo", "read", "reader"]);
        let idx = build_sorted_index(&v);
        let words: Vec<&[u8]> = idx.order().iter().map(|i| v.token(*i)).collect();
        assert_eq!(words, vec![&b"read"[..], b"reader", b"ready", b"zoo"]);
        assert_eq!(idx.lcp(), &[0, 4, 4, 0]);
    }

    #[test]
    fn saved_ratio_arithmetic() {
        let idx = build_sorted_index(&vocab(&["read", "ready", "reader"]));
        assert!((idx.saved_chars_ratio() - 7.0 / 15.0).abs() < 1e-12);
        let idx = build_sorted_index(&vocab(&["a", "ab", "abc"]));
        assert_eq!(idx.saved_chars_ratio(), 0.5);
        let idx = build_sorted_index(&vocab(&["x", "yy", "zzz"]));
        assert_eq!(idx.saved_chars_ratio(), 1.0);
    }

    #[test]
    fn trivial_orders() {
        let idx = build_sorted_index(&vocab(&["q"]));
        assert_eq!((idx.order(), idx.lcp()), (&[0u32][..], &[0u32][..]));
        let idx = build_sorted_index(&vocab(&["b", "a"]));
        assert_eq!((idx.order(), idx.lcp()), (&[1u32, 0][..], &[0u32, 0][..]));
    }

    #[test]
    fn duplicates_keep_id_order() {
        let idx = build_sorted_index(&vocab(&["b", "a", "b", "a"]));
        assert_eq!(idx.order(), &[1, 3, 0, 2]);
        assert_eq!(idx.lcp(), &[0, 1, 0, 1]);
    }
}
