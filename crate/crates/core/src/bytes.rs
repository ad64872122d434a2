//! 256-bit byte sets used for character classes and PDA edge labels.

use std::fmt;

/// A set of byte values, stored as a 256-bit bitmap.
///
/// The range view returned by [`ByteSet::ranges`] is always sorted, disjoint
/// and maximal, so two equal sets always print and serialize identically.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ByteSet([u64; 4]);

impl ByteSet {
    pub const EMPTY: ByteSet = ByteSet([0; 4]);
    pub const FULL: ByteSet = ByteSet([u64::MAX; 4]);

    pub fn single(b: u8) -> Self {
        let mut s = Self::EMPTY;
        s.insert(b);
        s
    }

    pub fn from_range(lo: u8, hi: u8) -> Self {
        let mut s = Self::EMPTY;
        s.insert_range(lo, hi);
        s
    }

    pub fn from_ranges<I: IntoIterator<Item = (u8, u8)>>(ranges: I) -> Self {
        let mut s = Self::EMPTY;
        for (lo, hi) in ranges {
            s.insert_range(lo, hi);
        }
        s
    }

    #[inline]
    pub fn contains(&self, b: u8) -> bool {
        (self.0[(b >> 6) as usize] >> (b & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, b: u8) {
        self.0[(b >> 6) as usize] |= 1 << (b & 63);
    }

    pub fn insert_range(&mut self, lo: u8, hi: u8) {
        if lo > hi {
            return;
        }
        for b in lo..=hi {
            self.insert(b);
        }
    }

    pub fn remove(&mut self, b: u8) {
        self.0[(b >> 6) as usize] &= !(1 << (b & 63));
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Self {
        ByteSet([!self.0[0], !self.0[1], !self.0[2], !self.0[3]])
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a |= *b;
        }
        out
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a &= *b;
        }
        out
    }

    /// The only member, if the set has exactly one.
    pub fn single_member(&self) -> Option<u8> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0u16..256).map(|b| b as u8).filter(move |b| self.contains(*b))
    }

    /// Sorted, disjoint, maximal inclusive ranges.
    pub fn ranges(&self) -> Vec<(u8, u8)> {
        let mut out = Vec::new();
        let mut start: Option<u8> = None;
        for b in 0u16..256 {
            let b = b as u8;
            match (self.contains(b), start) {
                (true, None) => start = Some(b),
                (false, Some(s)) => {
                    out.push((s, b - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, 0xFF));
        }
        out
    }

    pub fn words(&self) -> [u64; 4] {
        self.0
    }

    pub fn from_words(words: [u64; 4]) -> Self {
        ByteSet(words)
    }
}

/// Writes a byte as it would appear inside a grammar character class.
pub(crate) fn write_class_byte(f: &mut impl fmt::Write, b: u8) -> fmt::Result {
    match b {
        b']' | b'\\' | b'^' | b'-' | b'[' => write!(f, "\\{}", b as char),
        b'\n' => f.write_str("\\n"),
        b'\t' => f.write_str("\\t"),
        b'\r' => f.write_str("\\r"),
        0x20..=0x7E => f.write_char(b as char),
        _ => write!(f, "\\x{b:02X}"),
    }
}

/// Writes a byte as it would appear inside a grammar string literal.
pub(crate) fn write_literal_byte(f: &mut impl fmt::Write, b: u8) -> fmt::Result {
    match b {
        b'"' => f.write_str("\\\""),
        b'\\' => f.write_str("\\\\"),
        b'\n' => f.write_str("\\n"),
        b'\t' => f.write_str("\\t"),
        b'\r' => f.write_str("\\r"),
        0x20..=0x7E => f.write_char(b as char),
        _ => write!(f, "\\x{b:02X}"),
    }
}

impl fmt::Display for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (lo, hi) in self.ranges() {
            write_class_byte(f, lo)?;
            if hi > lo {
                if hi > lo + 1 {
                    f.write_str("-")?;
                }
                write_class_byte(f, hi)?;
            }
        }
        f.write_str("]")
    }
}

impl fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ByteSet{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_maximal() {
        let s = ByteSet::from_ranges([(b'a', b'c'), (b'd', b'f'), (0xF0, 0xFF)]);
        assert_eq!(s.ranges(), vec![(b'a', b'f'), (0xF0, 0xFF)]);
        assert_eq!(s.len(), 6 + 16);
    }

    #[test]
    fn complement_of_quote_and_backslash() {
        let mut s = ByteSet::from_ranges([(b'"', b'"'), (b'\\', b'\\')]);
        s = s.complement();
        assert_eq!(s.ranges(), vec![(0x00, 0x21), (0x23, 0x5B), (0x5D, 0xFF)]);
    }

    #[test]
    fn display_round_trips_through_escapes() {
        let s = ByteSet::from_ranges([(0x00, 0x1F), (b'-', b'-'), (b']', b']')]);
        assert_eq!(s.to_string(), "[\\x00-\\x1F\\-\\]]");
        let two = ByteSet::from_ranges([(b'a', b'b')]);
        assert_eq!(two.to_string(), "[ab]");
    }
}
