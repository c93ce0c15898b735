//! Dual-rail (1-of-2) encoding of single bits and words.
//!
//! A bit travels on two wires: rail 1 high means logic one, rail 0 high
//! means logic zero, both low is the spacer separating successive codewords
//! and both high is a forbidden state that can be observed but never
//! produced by the encoder.

use std::fmt;

use thiserror::Error;

/// The observed state of one rail pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DualRailValue {
    pub rail1: bool,
    pub rail0: bool,
}

/// Classification of a rail pair. Every [`DualRailValue`] maps to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    Zero,
    One,
    Spacer,
    Illegal,
}

impl DualRailValue {
    pub const SPACER: Self = Self { rail1: false, rail0: false };
    pub const VALID_ONE: Self = Self { rail1: true, rail0: false };
    pub const VALID_ZERO: Self = Self { rail1: false, rail0: true };
    pub const ILLEGAL: Self = Self { rail1: true, rail0: true };

    pub fn new(rail1: bool, rail0: bool) -> Self {
        Self { rail1, rail0 }
    }

    pub fn class(self) -> PairClass {
        decode_pair(self)
    }

    pub fn is_valid(self) -> bool {
        matches!(self.class(), PairClass::Zero | PairClass::One)
    }

    pub fn is_spacer(self) -> bool {
        self == Self::SPACER
    }
}

impl fmt::Display for DualRailValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.class() {
            PairClass::Zero => "0",
            PairClass::One => "1",
            PairClass::Spacer => "S",
            PairClass::Illegal => "X",
        };
        f.write_str(s)
    }
}

pub fn encode_bit(bit: bool) -> DualRailValue {
    if bit {
        DualRailValue::VALID_ONE
    } else {
        DualRailValue::VALID_ZERO
    }
}

pub fn decode_pair(v: DualRailValue) -> PairClass {
    match (v.rail1, v.rail0) {
        (false, false) => PairClass::Spacer,
        (true, false) => PairClass::One,
        (false, true) => PairClass::Zero,
        (true, true) => PairClass::Illegal,
    }
}

/// Aggregate state of a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordClass {
    Valid,
    Spacer,
    Partial,
}

/// An ordered bus of rail pairs, least-significant bit at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DualRailWord {
    pairs: Vec<DualRailValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("word width must be between 1 and 64 bits, got {0}")]
    Width(usize),
    #[error("value {value} does not fit in {width} bits")]
    Range { value: u64, width: usize },
}

/// Why a word could not be decoded to an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeFailure {
    Partial { index: usize },
    Illegal { index: usize },
}

impl fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeFailure::Partial { index } => write!(f, "spacer at pair {index}"),
            DecodeFailure::Illegal { index } => write!(f, "illegal state at pair {index}"),
        }
    }
}

impl DualRailWord {
    pub fn from_pairs(pairs: Vec<DualRailValue>) -> Self {
        assert!(!pairs.is_empty(), "dual-rail word needs at least one pair");
        Self { pairs }
    }

    pub fn spacer(width: usize) -> Self {
        Self::from_pairs(vec![DualRailValue::SPACER; width])
    }

    pub fn width(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[DualRailValue] {
        &self.pairs
    }

    pub fn class(&self) -> WordClass {
        if self.pairs.iter().all(|p| p.is_valid()) {
            WordClass::Valid
        } else if self.pairs.iter().all(|p| p.is_spacer()) {
            WordClass::Spacer
        } else {
            WordClass::Partial
        }
    }
}

pub fn encode_word(value: u64, width: usize) -> Result<DualRailWord, EncodeError> {
    if width == 0 || width > 64 {
        return Err(EncodeError::Width(width));
    }
    if width < 64 && value >> width != 0 {
        return Err(EncodeError::Range { value, width });
    }
    let pairs = (0..width).map(|i| encode_bit((value >> i) & 1 == 1)).collect();
    Ok(DualRailWord { pairs })
}

/// Decodes a fully valid word. Illegal pairs take precedence over spacers
/// when reporting, since they indicate a broken circuit rather than an
/// incomplete one.
pub fn decode_word(word: &DualRailWord) -> Result<u64, DecodeFailure> {
    if let Some(index) = word.pairs.iter().position(|p| p.class() == PairClass::Illegal) {
        return Err(DecodeFailure::Illegal { index });
    }
    let mut value = 0u64;
    for (i, p) in word.pairs.iter().enumerate() {
        match p.class() {
            PairClass::One => value |= 1 << i,
            PairClass::Zero => {}
            PairClass::Spacer => return Err(DecodeFailure::Partial { index: i }),
            PairClass::Illegal => unreachable!(),
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_bit_rails() {
        assert_eq!(encode_bit(true), DualRailValue::new(true, false));
        assert_eq!(encode_bit(false), DualRailValue::new(false, true));
        for b in [false, true] {
            let c = decode_pair(encode_bit(b));
            assert_eq!(c, if b { PairClass::One } else { PairClass::Zero });
        }
    }

    #[test]
    fn decode_pair_is_total() {
        assert_eq!(decode_pair(DualRailValue::new(false, false)), PairClass::Spacer);
        assert_eq!(decode_pair(DualRailValue::new(true, true)), PairClass::Illegal);
        assert_eq!(decode_pair(DualRailValue::new(false, true)), PairClass::Zero);
        assert_eq!(decode_pair(DualRailValue::new(true, false)), PairClass::One);
    }

    #[test]
    fn encode_word_lsb_first() {
        let w = encode_word(5, 4).unwrap();
        let expect =
            [DualRailValue::VALID_ONE, DualRailValue::VALID_ZERO, DualRailValue::VALID_ONE, DualRailValue::VALID_ZERO];
        assert_eq!(w.pairs(), &expect);
        assert_eq!(w.class(), WordClass::Valid);
        assert_eq!(encode_word(0, 1).unwrap().pairs(), &[DualRailValue::VALID_ZERO]);
    }

    #[test]
    fn encode_word_range() {
        assert_eq!(encode_word(16, 4), Err(EncodeError::Range { value: 16, width: 4 }));
        assert_eq!(encode_word(0, 0), Err(EncodeError::Width(0)));
        assert!(encode_word(u64::MAX, 64).is_ok());
    }

    #[test]
    fn exhaustive_round_trip_up_to_eight_bits() {
        for w in 1..=8 {
            for v in 0..(1u64 << w) {
                let word = encode_word(v, w).unwrap();
                assert!(word.pairs().iter().all(|p| p.is_valid()));
                assert_eq!(decode_word(&word), Ok(v));
            }
        }
    }

    #[test]
    fn decode_word_reports() {
        let one = DualRailValue::VALID_ONE;
        assert_eq!(decode_word(&DualRailWord::from_pairs(vec![one, one])), Ok(3));
        let partial = DualRailWord::from_pairs(vec![one, DualRailValue::SPACER]);
        assert_eq!(partial.class(), WordClass::Partial);
        assert_eq!(decode_word(&partial), Err(DecodeFailure::Partial { index: 1 }));
        let bad = DualRailWord::from_pairs(vec![DualRailValue::ILLEGAL]);
        assert_eq!(decode_word(&bad), Err(DecodeFailure::Illegal { index: 0 }));
        assert_eq!(DualRailWord::spacer(3).class(), WordClass::Spacer);
    }
}
