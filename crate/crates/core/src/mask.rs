use std::fmt::Write as _;

use crate::vocab::TokenId;

/// One bit per vocabulary id, packed into little-endian u32 words: id `i`
/// is bit `i % 32` of word `i / 32`. Bits past the vocabulary size stay
/// zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TokenMask {
    words: Vec<u32>,
    size: usize,
}

impl TokenMask {
    pub fn new(size: usize) -> Self {
        TokenMask { words: vec![0; size.div_ceil(32)], size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn clear_all(&mut self) {
        self.words.fill(0);
    }

    pub fn set_all(&mut self) {
        self.words.fill(u32::MAX);
        let tail = self.size % 32;
        if tail != 0 {
            *self.words.last_mut().unwrap() = (1u32 << tail) - 1;
        }
    }

    #[inline]
    pub fn get(&self, id: TokenId) -> bool {
        (id as usize) < self.size && self.words[id as usize / 32] >> (id % 32) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, id: TokenId) {
        self.words[id as usize / 32] |= 1 << (id % 32);
    }

    #[inline]
    pub fn unset(&mut self, id: TokenId) {
        self.words[id as usize / 32] &= !(1 << (id % 32));
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros();
                w &= w - 1;
                Some(i as u32 * 32 + b)
            })
        })
    }

    /// ORs in a bitset stored one bit per id in bytes, least significant
    /// bit first.
    pub(crate) fn or_byte_bits(&mut self, bits: &[u8]) {
        for (w, chunk) in self.words.iter_mut().zip(bits.chunks(4)) {
            let mut buf = [0u8; 4];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w |= u32::from_le_bytes(buf);
        }
    }

    pub fn union_with(&mut self, other: &TokenMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersect_with(&mut self, other: &TokenMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    /// Adds every id below the size that is not set in `other`.
    pub fn union_complement_of(&mut self, other: &TokenMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= !*b;
        }
        let tail = self.size % 32;
        if tail != 0 {
            *self.words.last_mut().unwrap() &= (1u32 << tail) - 1;
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    /// Lowercase hex of the little-endian byte image.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.words.len() * 8);
        for b in self.to_le_bytes() {
            write!(s, "{b:02x}").unwrap();
        }
        s
    }
}

impl std::fmt::Debug for TokenMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter_ones()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_layout() {
        let mut m = TokenMask::new(40);
        m.set(0);
        m.set(33);
        assert_eq!(m.words(), &[1, 2]);
        assert_eq!(m.to_hex(), "0100000002000000");
        assert_eq!(m.iter_ones().collect::<Vec<_>>(), vec![0, 33]);
        m.set_all();
        assert_eq!(m.count(), 40);
        assert!(!m.get(40));
        m.unset(5);
        assert!(!m.get(5) && m.get(6));
        let mut z = TokenMask::new(40);
        z.union_complement_of(&m);
        assert_eq!(z.iter_ones().collect::<Vec<_>>(), vec![5]);
        z.intersect_with(&m);
        assert_eq!(z.count(), 0);
    }

    #[test]
    fn byte_bits_fold_into_words() {
        let mut m = TokenMask::new(20);
        m.or_byte_bits(&[0b1000_0001, 0, 0b0000_1000]);
        assert_eq!(m.iter_ones().collect::<Vec<_>>(), vec![0, 7, 19]);
    }
}
