//! Packed `{-1, +1}` hash codes. Bit value 1 stores `+1`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// `sign` with `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Number of positions where two `+-1` codes differ.
pub fn hamming_distance(a: &[i8], b: &[i8]) -> Result<usize> {
    if a.len() != b.len() {
        return invalid(format!("code lengths differ: {} vs {}", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodes {
    bits: usize,
    words: usize,
    data: Vec<u64>,
}

impl BinaryCodes {
    pub fn empty(bits: usize) -> Self {
        Self { bits, words: bits.div_ceil(64), data: Vec::new() }
    }

    /// Signs of an `n x P` real matrix, one code per row.
    pub fn from_real(m: &DMatrix<f64>) -> Self {
        let mut out = Self::empty(m.ncols());
        for i in 0..m.nrows() {
            out.push_signs(m.row(i).iter().map(|&v| sign(v)));
        }
        out
    }

    pub fn from_signs(codes: &[Vec<i8>]) -> Result<Self> {
        let bits = codes.first().map(|c| c.len()).unwrap_or(0);
        let mut out = Self::empty(bits);
        for (i, c) in codes.iter().enumerate() {
            if c.len() != bits {
                return invalid(format!("code {i} has {} bits, expected {bits}", c.len()));
            }
            if c.iter().any(|&v| v != 1 && v != -1) {
                return invalid(format!("code {i} has an entry other than +1/-1"));
            }
            out.push_signs(c.iter().copied());
        }
        Ok(out)
    }

    /// Rebuilds codes from packed words, `ceil(bits / 64)` per code.
    pub fn from_words(bits: usize, data: Vec<u64>) -> Result<Self> {
        let words = bits.div_ceil(64);
        if (words == 0 && !data.is_empty()) || (words > 0 && data.len() % words != 0) {
            return invalid(format!("{} words do not split into {bits}-bit codes", data.len()));
        }
        let tail = bits % 64;
        if tail != 0 && data.iter().skip(words - 1).step_by(words).any(|w| w >> tail != 0) {
            return invalid("padding bits must be zero");
        }
        Ok(Self { bits, words, data })
    }

    pub fn words(&self) -> &[u64] {
        &self.data
    }

    fn push_signs(&mut self, signs: impl Iterator<Item = i8>) {
        let start = self.data.len();
        self.data.resize(start + self.words, 0);
        for (p, s) in signs.enumerate() {
            if s > 0 {
                self.data[start + p / 64] |= 1u64 << (p % 64);
            }
        }
    }

    pub fn len(&self) -> usize {
        if self.words == 0 {
            0
        } else {
            self.data.len() / self.words
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    fn words_of(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    pub fn get(&self, i: usize, p: usize) -> i8 {
        if self.words_of(i)[p / 64] >> (p % 64) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn code(&self, i: usize) -> Vec<i8> {
        (0..self.bits).map(|p| self.get(i, p)).collect()
    }

    pub fn hamming(&self, i: usize, other: &BinaryCodes, j: usize) -> u32 {
        self.words_of(i)
            .iter()
            .zip(other.words_of(j))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Hamming distance from code `i` of `self` to every code of `db`.
    pub fn distances_to(&self, i: usize, db: &BinaryCodes) -> Vec<u32> {
        (0..db.len()).map(|j| self.hamming(i, db, j)).collect()
    }

    /// Every bit of every code negated.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        let tail = self.bits % 64;
        for (k, w) in out.data.iter_mut().enumerate() {
            *w = !*w;
            if tail != 0 && k % self.words == self.words - 1 {
                *w &= (1u64 << tail) - 1;
            }
        }
        out
    }

    /// One line per code, `1` for `+1` and `0` for `-1`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * (self.bits + 1));
        for i in 0..self.len() {
            for p in 0..self.bits {
                s.push(if self.get(i, p) > 0 { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut bits = None;
        let mut out = Self::empty(0);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let b = *bits.get_or_insert_with(|| {
                out = Self::empty(line.len());
                line.len()
            });
            if line.len() != b || line.chars().any(|c| c != '0' && c != '1') {
                return Err(Error::Format(format!("codes line {}: expected {b} characters of 0/1", lineno + 1)));
            }
            out.push_signs(line.chars().map(|c| if c == '1' { 1 } else { -1 }));
        }
        Ok(out)
    }
}
