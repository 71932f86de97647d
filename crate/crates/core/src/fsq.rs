//! Finite scalar quantization.
//!
//! Each latent dimension `i` is bounded to `(L_i/2)·tanh(z_i + s_i) − o_i`,
//! rounded to the nearest integer digit and clamped into the digit range. A
//! codeword is then indexed by a mixed-radix number with the first dimension
//! as least significant digit, so the codebook is `0..∏ L_i` with no learned
//! parameters.
//!
//! Odd levels use `s_i = o_i = 0` and digits `−⌊L/2⌋..=⌊L/2⌋`. Even levels use
//! `o_i = 1/2` with `s_i = atanh(1/L_i)`, which maps `z = 0` onto digit 0 and
//! gives digits `−L/2..=L/2 − 1`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FsqLevels {
    levels: Vec<u32>,
    shift: Vec<f64>,
    offset: Vec<f64>,
    size: u32,
}

/// Lattice point of an FSQ codebook, one signed digit per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword(pub Vec<i32>);

impl Codeword {
    pub fn digits(&self) -> &[i32] {
        &self.0
    }
}

/// Mixed-radix index of a codeword, always below the codebook size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CodeIndex(pub u32);

impl FsqLevels {
    /// Levels with the default shift/offset convention.
    pub fn new(levels: &[u32]) -> Result<Self> {
        let (shift, offset) = levels
            .iter()
            .map(|&l| {
                if l % 2 == 0 && l >= 2 {
                    (libm::atanh(1.0 / l as f64), 0.5)
                } else {
                    (0.0, 0.0)
                }
            })
            .unzip();
        Self::with_shift_offset(levels, shift, offset)
    }

    pub fn with_shift_offset(levels: &[u32], shift: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidLevels("at least one dimension is required".into()));
        }
        if let Some(l) = levels.iter().find(|&&l| l < 2) {
            return Err(Error::InvalidLevels(alloc::format!("level {l} is below 2")));
        }
        if shift.len() != levels.len() || offset.len() != levels.len() {
            return Err(Error::InvalidLevels("shift/offset length differs from levels".into()));
        }
        if shift.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLevels("shift/offset must be finite".into()));
        }
        let size = levels
            .iter()
            .try_fold(1u32, |acc, &l| acc.checked_mul(l))
            .ok_or_else(|| Error::InvalidLevels("codebook size overflows u32".into()))?;
        Ok(FsqLevels { levels: levels.to_vec(), shift, offset, size })
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn dims(&self) -> usize {
        self.levels.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// `K = ∏ L_i`.
    pub fn codebook_size(&self) -> u32 {
        self.size
    }

    /// Inclusive digit range of dimension `dim`.
    pub fn digit_range(&self, dim: usize) -> (i32, i32) {
        let l = self.levels[dim] as i32;
        let lo = -(l / 2);
        (lo, lo + l - 1)
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), found: z.len() });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// The bounded value `(L_i/2)·tanh(z_i + s_i) − o_i` per dimension.
    pub fn bound(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        Ok(z.iter().enumerate().map(|(i, &v)| self.bound_one(i, v)).collect())
    }

    fn bound_one(&self, dim: usize, z: f64) -> f64 {
        let half = self.levels[dim] as f64 / 2.0;
        half * libm::tanh(z + self.shift[dim]) - self.offset[dim]
    }

    fn round_one(&self, dim: usize, bounded: f64) -> i32 {
        let (lo, hi) = self.digit_range(dim);
        // round() is half-away-from-zero
        (libm::round(bounded) as i32).clamp(lo, hi)
    }

    pub fn quantize(&self, z: &[f64]) -> Result<Codeword> {
        self.quantize_with_residual(z).map(|(c, _)| c)
    }

    /// Quantizes and also returns the straight-through residual `z̃ − round(z̃)`.
    pub fn quantize_with_residual(&self, z: &[f64]) -> Result<(Codeword, Vec<f64>)> {
        self.check_input(z)?;
        let mut digits = Vec::with_capacity(z.len());
        let mut residual = Vec::with_capacity(z.len());
        for (i, &v) in z.iter().enumerate() {
            let b = self.bound_one(i, v);
            let d = self.round_one(i, b);
            digits.push(d);
            residual.push(b - d as f64);
        }
        Ok((Codeword(digits), residual))
    }

    /// Latent value whose bounded image is exactly `target`.
    ///
    /// `target` must lie strictly inside the open bounded range of the dimension.
    pub fn unbound(&self, dim: usize, target: f64) -> f64 {
        let half = self.levels[dim] as f64 / 2.0;
        libm::atanh((target + self.offset[dim]) / half) - self.shift[dim]
    }

    /// Real-valued latent that quantizes back onto `c`.
    pub fn embed(&self, c: &Codeword) -> Result<Vec<f64>> {
        self.check_codeword(c)?;
        Ok(c.0.iter().enumerate().map(|(i, &d)| self.unbound(i, d as f64)).collect())
    }

    fn check_codeword(&self, c: &Codeword) -> Result<()> {
        if c.0.len() != self.dims() {
            return Err(Error::DimensionMismatch { expected: self.dims(), found: c.0.len() });
        }
        for (dim, &digit) in c.0.iter().enumerate() {
            let (lo, hi) = self.digit_range(dim);
            if digit < lo || digit > hi {
                return Err(Error::DigitOutOfRange { dim, digit });
            }
        }
        Ok(())
    }

    /// `idx = Σ_i (d_i + ⌊L_i/2⌋)·∏_{j<i} L_j`.
    pub fn encode_index(&self, c: &Codeword) -> Result<CodeIndex> {
        self.check_codeword(c)?;
        let mut idx = 0u32;
        let mut radix = 1u32;
        for (dim, &d) in c.0.iter().enumerate() {
            let (lo, _) = self.digit_range(dim);
            idx += (d - lo) as u32 * radix;
            // wraps only after the last digit, where the value is unused
            radix = radix.wrapping_mul(self.levels[dim]);
        }
        Ok(CodeIndex(idx))
    }

    pub fn decode_index(&self, index: CodeIndex) -> Result<Codeword> {
        if index.0 >= self.size {
            return Err(Error::IndexOutOfRange { index: index.0 as u64, size: self.size as u64 });
        }
        let mut rest = index.0;
        let digits = self
            .levels
            .iter()
            .enumerate()
            .map(|(dim, &l)| {
                let (lo, _) = self.digit_range(dim);
                let d = (rest % l) as i32 + lo;
                rest /= l;
                d
            })
            .collect();
        Ok(Codeword(digits))
    }

    /// All codewords in index order.
    pub fn codewords(&self) -> impl Iterator<Item = Codeword> + '_ {
        (0..self.size).map(move |i| self.decode_index(CodeIndex(i)).expect("index below size"))
    }
}

impl fmt::Display for FsqLevels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for FsqLevels {
    type Err = Error;

    /// Parses a comma-separated level list such as `"7,5,5,5,5"`.
    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidLevels(alloc::format!("cannot parse {:?}", part.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        FsqLevels::new(&levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn reference_levels() -> FsqLevels {
        FsqLevels::new(&[7, 5, 5, 5, 5]).unwrap()
    }

    #[test]
    fn codebook_sizes() {
        assert_eq!(reference_levels().codebook_size(), 4375);
        assert_eq!(FsqLevels::new(&[2]).unwrap().codebook_size(), 2);
        assert_eq!(FsqLevels::new(&[3, 3]).unwrap().codebook_size(), 9);
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(matches!(FsqLevels::new(&[1]), Err(Error::InvalidLevels(_))));
        assert!(matches!(FsqLevels::new(&[]), Err(Error::InvalidLevels(_))));
        assert!(matches!(FsqLevels::new(&[65536, 65536]), Err(Error::InvalidLevels(_))));
        assert!("7,x".parse::<FsqLevels>().is_err());
    }

    #[test]
    fn parse_and_display() {
        let l: FsqLevels = " 7, 5,5,5,5".parse().unwrap();
        assert_eq!(l, reference_levels());
        assert_eq!(l.to_string(), "7,5,5,5,5");
    }

    #[test]
    fn quantize_origin_and_saturation() {
        let l = reference_levels();
        assert_eq!(l.quantize(&[0.0; 5]).unwrap().0, vec![0, 0, 0, 0, 0]);
        assert_eq!(l.quantize(&[100.0; 5]).unwrap().0, vec![3, 2, 2, 2, 2]);
        assert_eq!(l.quantize(&[-100.0; 5]).unwrap().0, vec![-3, -2, -2, -2, -2]);
    }

    #[test]
    fn quantize_errors() {
        let l = reference_levels();
        assert_eq!(
            l.quantize(&[0.0; 4]),
            Err(Error::DimensionMismatch { expected: 5, found: 4 })
        );
        assert_eq!(l.quantize(&[0.0, f64::NAN, 0.0, 0.0, 0.0]), Err(Error::NonFinite));
        assert_eq!(l.quantize(&[0.0, f64::INFINITY, 0.0, 0.0, 0.0]), Err(Error::NonFinite));
    }

    #[test]
    fn residual_is_bounded_minus_digit() {
        let l = reference_levels();
        let z = [0.1, -0.4, 0.9, 0.0, -2.0];
        let (c, r) = l.quantize_with_residual(&z).unwrap();
        let b = l.bound(&z).unwrap();
        for i in 0..5 {
            assert!((b[i] - c.0[i] as f64 - r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn index_examples() {
        let l = reference_levels();
        let cases = [
            (vec![-3, -2, -2, -2, -2], 0),
            (vec![0, 0, 0, 0, 0], 2187),
            (vec![3, 2, 2, 2, 2], 4374),
        ];
        for (digits, idx) in cases {
            assert_eq!(l.encode_index(&Codeword(digits.clone())).unwrap(), CodeIndex(idx));
            assert_eq!(l.decode_index(CodeIndex(idx)).unwrap(), Codeword(digits));
        }
    }

    #[test]
    fn index_errors() {
        let l = reference_levels();
        assert_eq!(
            l.encode_index(&Codeword(vec![4, 0, 0, 0, 0])),
            Err(Error::DigitOutOfRange { dim: 0, digit: 4 })
        );
        assert!(matches!(
            l.decode_index(CodeIndex(4375)),
            Err(Error::IndexOutOfRange { index: 4375, size: 4375 })
        ));
    }

    #[test]
    fn even_levels() {
        let l = FsqLevels::new(&[2, 4]).unwrap();
        assert_eq!(l.digit_range(0), (-1, 0));
        assert_eq!(l.digit_range(1), (-2, 1));
        assert_eq!(l.quantize(&[0.0, 0.0]).unwrap().0, vec![0, 0]);
        assert_eq!(l.quantize(&[50.0, 50.0]).unwrap().0, vec![0, 1]);
        assert_eq!(l.quantize(&[-50.0, -50.0]).unwrap().0, vec![-1, -2]);
        for (i, c) in l.codewords().enumerate() {
            assert_eq!(l.encode_index(&c).unwrap().0 as usize, i);
            assert_eq!(l.quantize(&l.embed(&c).unwrap()).unwrap(), c);
        }
    }
}
