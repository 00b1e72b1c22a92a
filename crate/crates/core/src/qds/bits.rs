use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Classical bit string of up to 64 bits. Bit `i` is `(value >> i) & 1`;
/// the text form lists bits most-significant first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Bits {
    value: u64,
    width: u32,
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Bits {
    pub fn new(value: u64, width: usize) -> Result<Self> {
        if width > 64 {
            return Err(Error::invalid(format!("bit strings hold at most 64 bits, asked for {width}")));
        }
        let width = width as u32;
        if value & !mask(width) != 0 {
            return Err(Error::invalid(format!("value {value} does not fit in {width} bits")));
        }
        Ok(Bits { value, width })
    }

    pub fn random(width: usize, rng: &mut dyn RngCore) -> Self {
        let width = width.min(64) as u32;
        Bits { value: rng.next_u64() & mask(width), width }
    }

    /// All strings of the given width in increasing numeric order.
    pub fn all(width: usize) -> impl Iterator<Item = Bits> {
        let width = width.min(63) as u32;
        (0..1u64 << width).map(move |value| Bits { value, width })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> usize {
        self.width as usize
    }

    pub fn bit(self, i: usize) -> bool {
        (self.value >> i) & 1 == 1
    }

    pub fn xor(self, other: Bits) -> Result<Bits> {
        if self.width != other.width {
            return Err(Error::invalid("xor of bit strings of different widths"));
        }
        Ok(Bits { value: self.value ^ other.value, width: self.width })
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            write!(f, "{}", (self.value >> i) & 1)?;
        }
        Ok(())
    }
}

impl From<Bits> for String {
    fn from(b: Bits) -> String {
        b.to_string()
    }
}

impl TryFrom<String> for Bits {
    type Error = Error;

    fn try_from(s: String) -> Result<Bits> {
        if s.len() > 64 || s.chars().any(|c| c != '0' && c != '1') {
            return Err(Error::invalid(format!("`{s}` is not a bit string")));
        }
        let value = s.chars().fold(0u64, |acc, c| (acc << 1) | u64::from(c == '1'));
        Bits::new(value, s.len())
    }
}
