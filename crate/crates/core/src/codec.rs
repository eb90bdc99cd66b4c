//! Bijective base-2 ("dyadic") numerals and message bit accounting.
//!
//! Dyadic numerals use the digits 1 and 2 with ordinary binary position
//! weights and no leading-zero concept: 1, 2, 3, 4, 5, 6, ... are written
//! "1", "2", "11", "12", "21", "22", ... Every positive integer has exactly
//! one representation, and the code of `n` is `floor(log2(n + 1))` digits
//! long. All bit-complexity metrics in this crate charge election payloads
//! at that length.

use thiserror::Error;

use crate::protocol::Message;

/// Number of bits charged for the type tag of every message class.
pub const FRAMING_BITS: u64 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("dyadic numerals encode positive integers only (got 0)")]
    NotPositive,
    #[error("empty dyadic string")]
    Empty,
    #[error("illegal dyadic digit {0:?} (alphabet is {{1, 2}})")]
    BadDigit(char),
}

/// A finite digit string over {1, 2}, most-significant digit first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicString(String);

impl DyadicString {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> u64 {
        self.0.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for DyadicString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Encodes a positive integer as a dyadic numeral.
pub fn dyadic_encode(n: u64) -> Result<DyadicString, CodecError> {
    if n == 0 {
        return Err(CodecError::NotPositive);
    }
    let mut n = n;
    let mut digits = Vec::new();
    while n > 0 {
        if n % 2 == 0 {
            digits.push(b'2');
            n = n / 2 - 1;
        } else {
            digits.push(b'1');
            n /= 2;
        }
    }
    digits.reverse();
    Ok(DyadicString(String::from_utf8(digits).unwrap()))
}

/// Decodes a dyadic numeral back to the unique positive integer it denotes.
pub fn dyadic_decode(s: &str) -> Result<u64, CodecError> {
    if s.is_empty() {
        return Err(CodecError::Empty);
    }
    let mut n: u64 = 0;
    for c in s.chars() {
        let d = match c {
            '1' => 1,
            '2' => 2,
            other => return Err(CodecError::BadDigit(other)),
        };
        n = n * 2 + d;
    }
    Ok(n)
}

/// Length of the dyadic code of `n`, i.e. `floor(log2(n + 1))`.
///
/// This is the λ(n) used by the bound evaluators wherever the analysis
/// speaks of "log n" bits, so that simulator charges and analytic bounds
/// count the same quantity.
pub fn dyadic_len(n: u64) -> u64 {
    debug_assert!(n >= 1);
    u64::from((n + 1).ilog2())
}

/// Bit cost of one pass of a message: a fixed 2-bit type tag plus, for
/// election messages, the dyadic code of the carried name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageBits {
    pub framing: u64,
    pub payload: u64,
}

impl MessageBits {
    pub fn total(&self) -> u64 {
        self.framing + self.payload
    }
}

pub fn message_bits(msg: &Message) -> MessageBits {
    let payload = match msg {
        Message::Wakeup | Message::Sleepwell => 0,
        Message::Election(name) => dyadic_len(name.value()),
    };
    MessageBits {
        framing: FRAMING_BITS,
        payload,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Name;

    /// Independent oracle: enumerate strings over {1, 2} in
    /// length-then-lexicographic order; the n-th string (1-based) is the
    /// dyadic code of n.
    fn enumeration_oracle(n: u64) -> String {
        let mut queue: std::collections::VecDeque<String> = std::collections::VecDeque::new();
        queue.push_back(String::new());
        let mut count = 0;
        loop {
            let s = queue.pop_front().unwrap();
            if !s.is_empty() {
                count += 1;
                if count == n {
                    return s;
                }
            }
            queue.push_back(format!("{s}1"));
            queue.push_back(format!("{s}2"));
        }
    }

    #[test]
    fn paper_sequence() {
        let expect = ["1", "2", "11", "12", "21", "22"];
        for (i, want) in expect.iter().enumerate() {
            assert_eq!(dyadic_encode(i as u64 + 1).unwrap().as_str(), *want);
        }
    }

    #[test]
    fn encode_100_matches_enumeration_oracle() {
        // 100th string in length-lex order, frozen from the oracle.
        assert_eq!(enumeration_oracle(100), "211212");
        assert_eq!(dyadic_encode(100).unwrap().as_str(), "211212");
    }

    #[test]
    fn encode_matches_oracle_small_range() {
        for n in 1..=512 {
            assert_eq!(dyadic_encode(n).unwrap().as_str(), enumeration_oracle(n));
        }
    }

    #[test]
    fn decode_examples() {
        assert_eq!(dyadic_decode("22").unwrap(), 6);
        assert_eq!(dyadic_decode("1").unwrap(), 1);
        // 7th string in length-lex order.
        assert_eq!(enumeration_oracle(7), "111");
        assert_eq!(dyadic_decode("111").unwrap(), 7);
    }

    #[test]
    fn decode_errors() {
        assert_eq!(dyadic_decode(""), Err(CodecError::Empty));
        assert_eq!(dyadic_decode("120"), Err(CodecError::BadDigit('0')));
        assert_eq!(dyadic_encode(0), Err(CodecError::NotPositive));
    }

    #[test]
    fn length_law() {
        for n in 1..=100_000u64 {
            assert_eq!(dyadic_encode(n).unwrap().len(), dyadic_len(n));
        }
    }

    #[test]
    fn message_bit_accounting() {
        assert_eq!(
            message_bits(&Message::Wakeup),
            MessageBits { framing: 2, payload: 0 }
        );
        assert_eq!(
            message_bits(&Message::Sleepwell),
            MessageBits { framing: 2, payload: 0 }
        );
        assert_eq!(
            message_bits(&Message::Election(Name::new(6).unwrap())),
            MessageBits { framing: 2, payload: 2 }
        );
        // floor(log2(1001)) = 9
        assert_eq!(
            message_bits(&Message::Election(Name::new(1000).unwrap())),
            MessageBits { framing: 2, payload: 9 }
        );
    }
}
