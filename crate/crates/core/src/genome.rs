//! Bit-string genomes and the fixed-point gene codec.
//!
//! A [`Chromosome`] is stored as one `bool` per locus and travels over the
//! wire (and into the journal) as an ASCII string of `'0'`/`'1'` characters.
//! Genes are read most-significant bit first.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{EvoError, Result};

/// Fixed-length binary genome.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Chromosome {
    bits: Vec<bool>,
}

impl Chromosome {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Chromosome { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Chromosome { bits: vec![false; len] }
    }

    pub fn ones(len: usize) -> Self {
        Chromosome { bits: vec![true; len] }
    }

    /// Uniform i.i.d. bits.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Chromosome {
            bits: (0..len).map(|_| rng.random::<bool>()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Integer value of `width` bits starting at `start`, big-endian.
    pub fn read_code(&self, start: usize, width: usize) -> Result<u64> {
        if width == 0 || width > 64 {
            return Err(EvoError::encoding(format!("gene width {width} not in 1..=64")));
        }
        let end = start
            .checked_add(width)
            .filter(|&end| end <= self.bits.len())
            .ok_or_else(|| {
                EvoError::encoding(format!(
                    "bits [{start}, {}) outside chromosome of length {}",
                    start.saturating_add(width),
                    self.bits.len()
                ))
            })?;
        Ok(self.bits[start..end]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b)))
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chromosome({self})")
    }
}

impl FromStr for Chromosome {
    type Err = EvoError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(EvoError::encoding(format!(
                    "character {other:?} at position {i} is not a binary digit"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Chromosome::from_bits)
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Chromosome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Maps a `bits_per_gene`-wide unsigned code linearly onto `[range_min, range_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCodec")]
pub struct GeneCodec {
    bits_per_gene: u32,
    range_min: f64,
    range_max: f64,
}

#[derive(Deserialize)]
struct RawCodec {
    bits_per_gene: u32,
    range_min: f64,
    range_max: f64,
}

impl TryFrom<RawCodec> for GeneCodec {
    type Error = EvoError;

    fn try_from(raw: RawCodec) -> Result<Self> {
        GeneCodec::new(raw.bits_per_gene, raw.range_min, raw.range_max)
    }
}

/// Widest gene whose codes are all exactly representable as `f64`.
pub const MAX_BITS_PER_GENE: u32 = 53;

impl GeneCodec {
    pub fn new(bits_per_gene: u32, range_min: f64, range_max: f64) -> Result<Self> {
        if !(1..=MAX_BITS_PER_GENE).contains(&bits_per_gene) {
            return Err(EvoError::config(format!(
                "bits_per_gene must be in 1..={MAX_BITS_PER_GENE}, got {bits_per_gene}"
            )));
        }
        if !range_min.is_finite() || !range_max.is_finite() || range_max <= range_min {
            return Err(EvoError::config(format!(
                "gene range requires finite min < max, got [{range_min}, {range_max}]"
            )));
        }
        Ok(GeneCodec {
            bits_per_gene,
            range_min,
            range_max,
        })
    }

    /// 20 bits over `[-511, 512]`, the Griewank benchmark encoding.
    pub fn griewank() -> Self {
        GeneCodec {
            bits_per_gene: 20,
            range_min: -511.0,
            range_max: 512.0,
        }
    }

    pub fn bits_per_gene(&self) -> u32 {
        self.bits_per_gene
    }

    pub fn range_min(&self) -> f64 {
        self.range_min
    }

    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    /// `2^bits_per_gene - 1`.
    pub fn max_code(&self) -> u64 {
        (1u64 << self.bits_per_gene) - 1
    }

    /// `(max - min) * code / max_code + min`.
    ///
    /// Codes `0` and `max_code` land exactly on the range endpoints.
    pub fn decode(&self, code: u64) -> Result<f64> {
        let max_code = self.max_code();
        if code > max_code {
            return Err(EvoError::encoding(format!(
                "code {code} exceeds max code {max_code} for {}-bit genes",
                self.bits_per_gene
            )));
        }
        if code == 0 {
            return Ok(self.range_min);
        }
        if code == max_code {
            return Ok(self.range_max);
        }
        // Single division over the combined numerator: exact for integer
        // ranges, so the only rounding is the final quotient.
        let span = self.range_max - self.range_min;
        let max = max_code as f64;
        let x = (span * code as f64 + self.range_min * max) / max;
        Ok(x.clamp(self.range_min, self.range_max))
    }

    /// Nearest code for `value`, clamped into the representable range.
    pub fn encode_nearest(&self, value: f64) -> u64 {
        let max_code = self.max_code();
        let t = (value - self.range_min) / (self.range_max - self.range_min);
        let code = (t * max_code as f64).round();
        if code.is_nan() || code <= 0.0 {
            0
        } else if code >= max_code as f64 {
            max_code
        } else {
            code as u64
        }
    }
}
