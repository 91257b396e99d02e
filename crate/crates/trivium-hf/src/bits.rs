//! Key, IV and keystream bit containers with the hex convention used by the
//! whole crate: bit 1 (k1 / IV1 / z0) is the most significant bit of the
//! first hex digit.

use crate::{Error, Result};
use rand::Rng;

fn bits_to_hex(bits: &[bool]) -> String {
    let mut out = String::with_capacity(bits.len().div_ceil(4));
    for chunk in bits.chunks(4) {
        let mut v = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            if b {
                v |= 1 << (3 - i);
            }
        }
        out.push(char::from_digit(v as u32, 16).unwrap());
    }
    out
}

fn hex_to_bits(hex: &str, nbits: usize) -> Result<Vec<bool>> {
    let digits: Vec<u8> = hex
        .chars()
        .map(|c| {
            c.to_digit(16)
                .map(|d| d as u8)
                .ok_or_else(|| Error::Parse(format!("invalid hex digit `{c}`")))
        })
        .collect::<Result<_>>()?;
    if digits.len() != nbits.div_ceil(4) {
        return Err(Error::Parse(format!(
            "expected {} hex digits for {} bits, got {}",
            nbits.div_ceil(4),
            nbits,
            digits.len()
        )));
    }
    let mut bits = Vec::with_capacity(nbits);
    for i in 0..nbits {
        bits.push(digits[i / 4] >> (3 - i % 4) & 1 == 1);
    }
    // padding bits in the last digit must be zero
    for i in nbits..digits.len() * 4 {
        if digits[i / 4] >> (3 - i % 4) & 1 == 1 {
            return Err(Error::Parse("nonzero padding bits".into()));
        }
    }
    Ok(bits)
}

macro_rules! bits80 {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Copy, PartialEq, Eq, Debug)]
        pub struct $name {
            bits: [bool; 80],
        }

        impl $name {
            pub const LEN: usize = 80;

            pub fn zero() -> Self {
                Self { bits: [false; 80] }
            }

            pub fn from_bits(bits: [bool; 80]) -> Self {
                Self { bits }
            }

            /// 1-based access, e.g. `key.bit(1)` is k1.
            pub fn bit(&self, i: usize) -> bool {
                assert!((1..=80).contains(&i));
                self.bits[i - 1]
            }

            pub fn set_bit(&mut self, i: usize, v: bool) {
                assert!((1..=80).contains(&i));
                self.bits[i - 1] = v;
            }

            pub fn bits(&self) -> &[bool; 80] {
                &self.bits
            }

            pub fn random<R: Rng>(rng: &mut R) -> Self {
                let mut bits = [false; 80];
                for b in bits.iter_mut() {
                    *b = rng.gen();
                }
                Self { bits }
            }

            pub fn to_hex(&self) -> String {
                bits_to_hex(&self.bits)
            }

            pub fn from_hex(hex: &str) -> Result<Self> {
                let v = hex_to_bits(hex, 80)?;
                let mut bits = [false; 80];
                bits.copy_from_slice(&v);
                Ok(Self { bits })
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.to_hex())
            }
        }
    };
}

bits80!(Key, "The 80-bit secret key (k1..k80).");
bits80!(Iv, "The 80-bit public initial vector (IV1..IV80).");

/// Keystream bits z0, z1, ...
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Keystream {
    bits: Vec<bool>,
}

impl Keystream {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// 0-based access: `ks.bit(0)` is z0.
    pub fn bit(&self, m: usize) -> bool {
        self.bits[m]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn to_hex(&self) -> String {
        bits_to_hex(&self.bits)
    }

    pub fn from_hex(hex: &str, nbits: usize) -> Result<Self> {
        Ok(Self {
            bits: hex_to_bits(hex, nbits)?,
        })
    }

    /// True iff z_{m+period} = z_m for every m where both sides are observed.
    pub fn has_period(&self, period: usize) -> bool {
        self.bits.len() > period
            && (0..self.bits.len() - period).all(|m| self.bits[m] == self.bits[m + period])
    }
}

impl std::fmt::Display for Keystream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}
