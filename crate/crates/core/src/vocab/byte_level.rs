//! The printable-character remapping used by byte-level BPE vocabularies.
//!
//! Every byte gets a visible code point: printable Latin-1 bytes map to
//! themselves, the remaining 68 bytes map to U+0100.. in byte order.

use std::sync::OnceLock;

fn is_self_mapped(b: u8) -> bool {
    matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF)
}

/// Byte → display character.
pub fn byte_to_char(b: u8) -> char {
    table().0[b as usize]
}

/// Display character → byte, for characters in the table.
pub fn char_to_byte(c: char) -> Option<u8> {
    let cp = c as u32;
    if cp < 0x100 {
        let b = cp as u8;
        return is_self_mapped(b).then_some(b);
    }
    table().1.get(cp as usize - 0x100).copied().flatten()
}

fn table() -> &'static ([char; 256], Vec<Option<u8>>) {
    static TABLE: OnceLock<([char; 256], Vec<Option<u8>>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut forward = ['\0'; 256];
        let mut shifted = vec![None; 68];
        let mut n = 0u32;
        for b in 0..=255u8 {
            if is_self_mapped(b) {
                forward[b as usize] = b as char;
            } else {
                forward[b as usize] = char::from_u32(0x100 + n).unwrap();
                shifted[n as usize] = Some(b);
                n += 1;
            }
        }
        (forward, shifted)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_decoder_values() {
        // Frozen from a reference byte decoder.
        let cases = [
            ('Ġ', 0x20),
            ('Ċ', 0x0A),
            ('ĉ', 0x09),
            ('Ã', 0xC3),
            ('©', 0xA9),
            ('ł', 0xA0),
            ('Ń', 0xAD),
            ('ġ', 0x7F),
            ('Ŀ', 0x9D),
            ('!', 0x21),
            ('Ā', 0x00),
        ];
        for (c, b) in cases {
            assert_eq!(char_to_byte(c), Some(b), "{c}");
            assert_eq!(byte_to_char(b), c);
        }
    }

    #[test]
    fn bijective() {
        for b in 0..=255u8 {
            assert_eq!(char_to_byte(byte_to_char(b)), Some(b));
        }
        assert_eq!(char_to_byte(' '), None);
        assert_eq!(char_to_byte('\u{144}'), None);
    }
}
