//! Bit-vector conversions for the CLI's integer convention: a hex string
//! denotes a big-endian value v, and bit i of the circuit (input or
//! output) is bit (len - 1 - i) of v. So the first circuit bit is the
//! value's most significant bit, and a 5-bit vector [1,0,1,0,1] prints as
//! "15" (0b10101).

/// Errors converting between hex strings and bit vectors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitsError {
    #[error("invalid hex digit {0:?}")]
    InvalidHexDigit(char),
    #[error("empty hex string for a {0}-bit vector")]
    Empty(usize),
    #[error("value does not fit in {len} bit(s): excess high bits are set")]
    Overflow { len: usize },
}

/// Renders bits as ceil(len/4) hex digits, first bit most significant.
/// Empty input renders as the empty string.
pub fn to_hex(bits: &[bool]) -> String {
    let nibbles = bits.len().div_ceil(4);
    let mut out = String::with_capacity(nibbles);
    let mut acc: u8 = 0;
    let mut filled = nibbles * 4 - bits.len();
    for &bit in bits {
        acc = (acc << 1) | bit as u8;
        filled += 1;
        if filled == 4 {
            out.push(char::from_digit(acc as u32, 16).unwrap());
            acc = 0;
            filled = 0;
        }
    }
    out
}

/// Parses a hex string (optional 0x prefix) into exactly `len` bits.
/// Digits may be longer or shorter than ceil(len/4); any bits above the
/// requested length must be zero.
pub fn from_hex(hex: &str, len: usize) -> Result<Vec<bool>, BitsError> {
    let digits = hex.strip_prefix("0x").or_else(|| hex.strip_prefix("0X")).unwrap_or(hex);
    if digits.is_empty() {
        return if len == 0 {
            Ok(Vec::new())
        } else {
            Err(BitsError::Empty(len))
        };
    }
    let mut raw = Vec::with_capacity(digits.len() * 4);
    for c in digits.chars() {
        let nibble = c.to_digit(16).ok_or(BitsError::InvalidHexDigit(c))? as u8;
        for s in (0..4).rev() {
            raw.push((nibble >> s) & 1 != 0);
        }
    }
    take_low_bits(raw, len)
}

/// Interprets raw bytes as a big-endian value and takes its low `len`
/// bits, with the same overflow rule as [`from_hex`].
pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Vec<bool>, BitsError> {
    let mut raw = Vec::with_capacity(bytes.len() * 8);
    for byte in bytes {
        for s in (0..8).rev() {
            raw.push((byte >> s) & 1 != 0);
        }
    }
    take_low_bits(raw, len)
}

fn take_low_bits(raw: Vec<bool>, len: usize) -> Result<Vec<bool>, BitsError> {
    if raw.len() >= len {
        if raw[..raw.len() - len].iter().any(|&b| b) {
            return Err(BitsError::Overflow { len });
        }
        Ok(raw[raw.len() - len..].to_vec())
    } else {
        let mut out = vec![false; len - raw.len()];
        out.extend(raw);
        Ok(out)
    }
}
