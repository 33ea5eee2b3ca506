//! Amino-acid alphabet and substitution scores.

use std::fmt;

use thiserror::Error;

/// The 20 canonical one-letter residue codes.
pub const CANONICAL: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// Whether `X` is accepted as a residue. With `allow_x`, `X` scores 0
/// against everything in substitution lookups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ResiduePolicy {
    pub allow_x: bool,
}

impl ResiduePolicy {
    pub fn accepts(&self, r: u8) -> bool {
        CANONICAL.contains(&r) || (self.allow_x && r == b'X')
    }

    /// Returns the first illegal residue and its 0-based offset.
    pub fn first_illegal(&self, seq: &str) -> Option<(usize, char)> {
        seq.bytes().enumerate().find(|(_, b)| !self.accepts(*b)).map(|(i, b)| (i, b as char))
    }
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("substitution matrix: {0}")]
    Malformed(String),
}

/// Square substitution table indexed by residue letter.
#[derive(Clone)]
pub struct SubstitutionTable {
    index: [u8; 256],
    size: usize,
    scores: Vec<i32>,
}

const NONE: u8 = u8::MAX;

impl fmt::Debug for SubstitutionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubstitutionTable").field("size", &self.size).finish()
    }
}

impl SubstitutionTable {
    /// Parses the NCBI text layout: `#` comments, a header row of letters,
    /// then one row per letter.
    pub fn parse(text: &str) -> Result<Self, MatrixError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<u8> = lines
            .next()
            .ok_or_else(|| MatrixError::Malformed("missing header".into()))?
            .split_whitespace()
            .map(|t| t.as_bytes()[0])
            .collect();
        let size = header.len();
        let mut index = [NONE; 256];
        for (i, &c) in header.iter().enumerate() {
            index[c as usize] = i as u8;
        }
        let mut scores = vec![0i32; size * size];
        let mut seen = 0;
        for line in lines {
            let mut toks = line.split_whitespace();
            let row = toks.next().unwrap().as_bytes()[0];
            let r = index[row as usize];
            if r == NONE {
                return Err(MatrixError::Malformed(format!("row {} not in header", row as char)));
            }
            let vals: Vec<i32> = toks
                .map(|t| t.parse::<i32>())
                .collect::<Result<_, _>>()
                .map_err(|e| MatrixError::Malformed(e.to_string()))?;
            if vals.len() != size {
                return Err(MatrixError::Malformed(format!(
                    "row {} has {} values, expected {size}",
                    row as char,
                    vals.len()
                )));
            }
            scores[r as usize * size..(r as usize + 1) * size].copy_from_slice(&vals);
            seen += 1;
        }
        if seen != size {
            return Err(MatrixError::Malformed(format!("{seen} rows for {size} columns")));
        }
        Ok(Self { index, size, scores })
    }

    /// The shipped BLOSUM62 table with `X` neutralised to 0.
    pub fn blosum62() -> Self {
        let mut t = Self::parse(crate::data::BLOSUM62).expect("bundled BLOSUM62 parses");
        t.neutralise(b'X');
        t
    }

    fn neutralise(&mut self, r: u8) {
        let i = self.index[r as usize];
        if i == NONE {
            return;
        }
        let i = i as usize;
        for j in 0..self.size {
            self.scores[i * self.size + j] = 0;
            self.scores[j * self.size + i] = 0;
        }
    }

    #[inline]
    pub fn score(&self, a: u8, b: u8) -> i32 {
        let (i, j) = (self.index[a as usize], self.index[b as usize]);
        if i == NONE || j == NONE {
            return 0;
        }
        self.scores[i as usize * self.size + j as usize]
    }

    /// Smallest score between two canonical residues.
    pub fn min_canonical(&self) -> i32 {
        let mut m = i32::MAX;
        for &a in CANONICAL {
            for &b in CANONICAL {
                m = m.min(self.score(a, b));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blosum62_lookups() {
        let t = SubstitutionTable::blosum62();
        assert_eq!(t.score(b'A', b'A'), 4);
        assert_eq!(t.score(b'W', b'W'), 11);
        assert_eq!(t.score(b'W', b'C'), -2);
        assert_eq!(t.score(b'X', b'W'), 0);
        assert_eq!(t.min_canonical(), -4);
        for &a in CANONICAL {
            for &b in CANONICAL {
                assert_eq!(t.score(a, b), t.score(b, a));
            }
        }
    }

    #[test]
    fn policy() {
        let strict = ResiduePolicy::default();
        assert_eq!(strict.first_illegal("ACDB"), Some((3, 'B')));
        assert_eq!(strict.first_illegal("ACX"), Some((2, 'X')));
        assert_eq!(ResiduePolicy { allow_x: true }.first_illegal("ACX"), None);
    }
}
