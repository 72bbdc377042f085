//! Sign codes and the packed word layout used for Hamming search.
//!
//! Layout: bit `b` of a code is stored LSB-first inside consecutive 64-bit
//! words; a set bit means +1. Bits past the code length in the last word of a
//! row must be zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sign convention used everywhere, including coordinate updates: sgn(0) = +1.
#[inline]
pub(crate) fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// L x m matrix with entries in {-1, +1}; one column per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    data: DMatrix<i8>,
}

impl SignMatrix {
    pub fn new(data: DMatrix<i8>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(
                "sign matrix needs at least one row and one column".into(),
            ));
        }
        if !data.iter().all(|&v| v == 1 || v == -1) {
            return Err(Error::InvalidInput(
                "sign matrix entries must be -1 or +1".into(),
            ));
        }
        Ok(Self { data })
    }

    /// Builds from a real matrix whose entries are already exactly +-1.0.
    pub(crate) fn from_real_unchecked(m: &DMatrix<f64>) -> Self {
        Self {
            data: m.map(|v| if v >= 0.0 { 1i8 } else { -1i8 }),
        }
    }

    /// Code length in bits.
    pub fn l(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<i8> {
        &self.data
    }

    pub fn to_real(&self) -> DMatrix<f64> {
        self.data.map(f64::from)
    }

    pub fn column(&self, i: usize) -> Vec<i8> {
        self.data.column(i).iter().copied().collect()
    }
}

/// Rounds a real matrix to signs; zero rounds up.
pub fn sign(m: &DMatrix<f64>) -> Result<SignMatrix> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput(
            "sign: input needs at least one row and one column".into(),
        ));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("sign: non-finite entry".into()));
    }
    Ok(SignMatrix {
        data: m.map(|v| if v >= 0.0 { 1i8 } else { -1i8 }),
    })
}

/// m codes of L bits each, one row of ceil(L/64) words per code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCodes {
    l: usize,
    m: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

impl PackedCodes {
    pub fn pack(b: &SignMatrix) -> PackedCodes {
        let l = b.l();
        let m = b.m();
        let wpc = l.div_ceil(64);
        let mut words = vec![0u64; wpc * m];
        for i in 0..m {
            let row = &mut words[i * wpc..(i + 1) * wpc];
            for bit in 0..l {
                if b.data[(bit, i)] == 1 {
                    row[bit / 64] |= 1u64 << (bit % 64);
                }
            }
        }
        PackedCodes {
            l,
            m,
            words_per_code: wpc,
            words,
        }
    }

    /// Rebuilds codes from raw words, enforcing the padding invariant.
    pub fn from_words(l: usize, m: usize, words: Vec<u64>) -> Result<PackedCodes> {
        if l == 0 || m == 0 {
            return Err(Error::InvalidInput(
                "packed codes need at least one bit and one code".into(),
            ));
        }
        let wpc = l.div_ceil(64);
        if words.len() != wpc * m {
            return Err(Error::CorruptCodes(format!(
                "expected {} words for {} codes of {} bits, got {}",
                wpc * m,
                m,
                l,
                words.len()
            )));
        }
        let out = PackedCodes {
            l,
            m,
            words_per_code: wpc,
            words,
        };
        out.check_padding()?;
        Ok(out)
    }

    fn check_padding(&self) -> Result<()> {
        if !self.l.is_multiple_of(64) {
            let mask = !0u64 << (self.l % 64);
            for i in 0..self.m {
                if self.row(i)[self.words_per_code - 1] & mask != 0 {
                    return Err(Error::CorruptCodes(format!(
                        "code {i} has nonzero bits past length {}",
                        self.l
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact inverse of [`PackedCodes::pack`].
    pub fn unpack(&self) -> Result<SignMatrix> {
        self.check_padding()?;
        let data = DMatrix::from_fn(self.l, self.m, |bit, i| {
            if self.row(i)[bit / 64] >> (bit % 64) & 1 == 1 {
                1i8
            } else {
                -1i8
            }
        });
        Ok(SignMatrix { data })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_code..(i + 1) * self.words_per_code]
    }

    /// XOR + popcount distance between code `i` here and code `j` there.
    pub fn hamming(&self, i: usize, other: &PackedCodes, j: usize) -> u32 {
        debug_assert_eq!(self.l, other.l);
        self.row(i)
            .iter()
            .zip(other.row(j))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(rows: usize, cols: usize, vals: &[i8]) -> SignMatrix {
        SignMatrix::new(DMatrix::from_row_slice(rows, cols, vals)).unwrap()
    }

    #[test]
    fn sign_rounds_zero_up() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, -0.2, 0.0, 3.1]);
        let s = sign(&m).unwrap();
        assert_eq!(
            s.data().as_slice(),
            sm(2, 2, &[1, -1, 1, 1]).data().as_slice()
        );
    }

    #[test]
    fn sign_of_negatives_is_all_minus() {
        let m = DMatrix::from_element(3, 4, -0.7);
        let s = sign(&m).unwrap();
        assert!(s.data().iter().all(|&v| v == -1));
    }

    #[test]
    fn sign_is_idempotent() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -5.0, 0.0, 2.0, -0.3, 7.0]);
        let s1 = sign(&m).unwrap();
        let s2 = sign(&s1.to_real()).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn sign_rejects_nan() {
        let mut m = DMatrix::zeros(1, 1);
        m[(0, 0)] = f64::NAN;
        assert!(sign(&m).is_err());
    }

    #[test]
    fn pack_layout_is_lsb_first() {
        // column (+1, -1, +1), L = 3 -> 0b101
        let b = sm(3, 1, &[1, -1, 1]);
        let p = PackedCodes::pack(&b);
        assert_eq!(p.row(0), &[0b101u64]);
    }

    #[test]
    fn self_distance_is_zero() {
        let b = sm(3, 1, &[1, -1, 1]);
        let p = PackedCodes::pack(&b);
        assert_eq!(p.hamming(0, &p, 0), 0);
    }

    #[test]
    fn unpack_inverts_layout() {
        let p = PackedCodes::from_words(3, 1, vec![5]).unwrap();
        let b = p.unpack().unwrap();
        assert_eq!(b, sm(3, 1, &[1, -1, 1]));
    }

    #[test]
    fn word_boundary_all_set() {
        let p = PackedCodes::from_words(64, 1, vec![!0u64]).unwrap();
        let b = p.unpack().unwrap();
        assert!(b.data().iter().all(|&v| v == 1));
    }

    #[test]
    fn nonzero_padding_is_rejected() {
        let err = PackedCodes::from_words(3, 1, vec![0b1101]).unwrap_err();
        assert!(matches!(err, Error::CorruptCodes(_)));
    }

    #[test]
    fn sign_matrix_rejects_other_values() {
        assert!(SignMatrix::new(DMatrix::from_row_slice(1, 2, &[1i8, 0])).is_err());
    }
}
