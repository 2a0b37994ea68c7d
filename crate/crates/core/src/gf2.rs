//! Dense linear algebra over GF(2).
//!
//! Rows are packed into 64-bit words and eliminated with word-level XOR.
//! Row reduction always produces the reduced row-echelon form, from which
//! the particular solution and null-space basis are read off directly.

use std::fmt;

use thiserror::Error;

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("entry {value} at position {position} is not a bit")]
    NotABit { position: usize, value: u8 },
    #[error("system is inconsistent")]
    Inconsistent,
    #[error("solution space holds 2^{nullity} vectors, more than the limit {limit}")]
    LimitExceeded { nullity: usize, limit: u64 },
}

/// A packed vector over GF(2). Bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Vector {
    len: usize,
    words: Vec<u64>,
}

impl Gf2Vector {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    /// Builds a vector from 0/1 entries.
    pub fn from_bits(bits: &[u8]) -> Result<Self, Gf2Error> {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => v.set(i, true),
                value => return Err(Gf2Error::NotABit { position: i, value }),
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len={})", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range (len={})", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &Gf2Vector) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &Gf2Vector) -> bool {
        assert_eq!(self.len, other.len, "length mismatch in dot");
        let ones: u32 = self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum();
        ones % 2 == 1
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Entries as 0/1 bytes.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }
}

impl fmt::Debug for Gf2Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf2Vector(")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        write!(f, ")")
    }
}

/// Row-major packed bit matrix. Each row occupies `stride` words; padding
/// bits past `cols` are zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self { rows, cols, stride, words: vec![0; rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of 0/1 entries; all rows must have equal length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, Gf2Error> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Gf2Error::DimensionMismatch { expected: cols, actual: row.len() });
            }
            for (c, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m.set(r, c, true),
                    value => return Err(Gf2Error::NotABit { position: r * cols + c, value }),
                }
            }
        }
        Ok(m)
    }

    /// Parses rows written as strings of '0'/'1', e.g. `["110", "011"]`.
    pub fn parse_rows(rows: &[&str]) -> Result<Self, Gf2Error> {
        let bits: Vec<Vec<u8>> = rows.iter().map(|r| r.bytes().map(|c| c.wrapping_sub(b'0')).collect()).collect();
        Self::from_rows(&bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of range");
        (self.words[r * self.stride + c / WORD] >> (c % WORD)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of range");
        let w = &mut self.words[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row(&self, r: usize) -> Gf2Vector {
        Gf2Vector { len: self.cols, words: self.row_words(r).to_vec() }
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    fn row_is_zero(&self, r: usize) -> bool {
        self.row_words(r).iter().all(|&w| w == 0)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.stride {
            self.words.swap(a * self.stride + w, b * self.stride + w);
        }
    }

    /// `row[dst] ^= row[src]`, touching only words from `from_word` onward.
    fn xor_row_into(&mut self, src: usize, dst: usize, from_word: usize) {
        let s = self.stride;
        let (src_start, dst_start) = (src * s, dst * s);
        if src < dst {
            let (head, tail) = self.words.split_at_mut(dst_start);
            let src_row = &head[src_start..src_start + s];
            for w in from_word..s {
                tail[w] ^= src_row[w];
            }
        } else {
            let (head, tail) = self.words.split_at_mut(src_start);
            let dst_row = &mut head[dst_start..dst_start + s];
            for w in from_word..s {
                dst_row[w] ^= tail[w];
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Matrix-vector product over GF(2).
    pub fn mul_vec(&self, x: &Gf2Vector) -> Result<Gf2Vector, Gf2Error> {
        if x.len() != self.cols {
            return Err(Gf2Error::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        let mut out = Gf2Vector::zeros(self.rows);
        for r in 0..self.rows {
            let ones: u32 = self.row_words(r).iter().zip(&x.words).map(|(a, b)| (a & b).count_ones()).sum();
            out.set(r, ones % 2 == 1);
        }
        Ok(out)
    }

    /// Copy with `b` appended as an extra last column.
    fn augmented(&self, b: &Gf2Vector) -> Self {
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    aug.set(r, c, true);
                }
            }
            if b.get(r) {
                aug.set(r, self.cols, true);
            }
        }
        aug
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                write!(f, "{}", self.get(r, c) as u8)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Result of [`row_reduce`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReduction {
    /// Reduced row-echelon form; nonzero rows come first.
    pub reduced: Gf2Matrix,
    pub rank: usize,
    /// Strictly increasing pivot column of each nonzero row.
    pub pivot_cols: Vec<usize>,
}

/// Gauss-Jordan elimination to reduced row-echelon form.
pub fn row_reduce(a: &Gf2Matrix) -> RowReduction {
    let mut m = a.clone();
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..m.cols {
        if rank == m.rows {
            break;
        }
        let Some(pivot) = (rank..m.rows).find(|&r| m.get(r, col)) else {
            continue;
        };
        m.swap_rows(rank, pivot);
        let from_word = col / WORD;
        for r in 0..m.rows {
            if r != rank && m.get(r, col) {
                m.xor_row_into(rank, r, from_word);
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    debug_assert!((rank..m.rows).all(|r| m.row_is_zero(r)));
    RowReduction { reduced: m, rank, pivot_cols }
}

/// Solution set of `A x = b` over GF(2).
///
/// The null-space basis has one vector per free (non-pivot) column, in
/// increasing column order. Basis vector `j` has a one at `free_cols[j]` and
/// zeros at every other free column, so the coefficients of any solution are
/// read off from its free-column bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2SolutionSet {
    pub n_vars: usize,
    pub rank: usize,
    pub nullity: usize,
    pub consistent: bool,
    pub particular: Option<Gf2Vector>,
    pub basis: Vec<Gf2Vector>,
    pub free_cols: Vec<usize>,
}

impl Gf2SolutionSet {
    /// Number of solutions, `None` if inconsistent or too large for a `u64`.
    pub fn solution_count(&self) -> Option<u64> {
        if !self.consistent {
            return Some(0);
        }
        (self.nullity < 64).then(|| 1u64 << self.nullity)
    }

    /// Solution at canonical position `index`.
    ///
    /// Canonical order is lexicographic over basis coefficients
    /// `(c_0, ..., c_{d-1})` with `c_0` most significant, so
    /// `c_j = (index >> (d - 1 - j)) & 1`. Index 0 is the particular solution.
    pub fn solution_at(&self, index: u64) -> Option<Gf2Vector> {
        let particular = self.particular.as_ref()?;
        let d = self.nullity;
        if d < 64 && index >> d != 0 {
            return None;
        }
        let mut x = particular.clone();
        for (j, v) in self.basis.iter().enumerate() {
            let shift = d - 1 - j;
            if shift < 64 && (index >> shift) & 1 == 1 {
                x.xor_assign(v);
            }
        }
        Some(x)
    }

    /// Inverse of [`solution_at`](Self::solution_at): canonical index of `x`,
    /// or `None` if `x` is not a solution.
    pub fn index_of(&self, x: &Gf2Vector) -> Option<u64> {
        let particular = self.particular.as_ref()?;
        if x.len() != self.n_vars || self.nullity > 64 {
            return None;
        }
        let mut offset = x.clone();
        offset.xor_assign(particular);
        let mut index = 0u64;
        for (j, (&f, v)) in self.free_cols.iter().zip(&self.basis).enumerate() {
            if offset.get(f) {
                index |= 1 << (self.nullity - 1 - j);
                offset.xor_assign(v);
            }
        }
        offset.is_zero().then_some(index)
    }
}

/// Solves `A x = b` over GF(2) by reducing the augmented matrix.
pub fn solve_affine(a: &Gf2Matrix, b: &Gf2Vector) -> Result<Gf2SolutionSet, Gf2Error> {
    if b.len() != a.rows() {
        return Err(Gf2Error::DimensionMismatch { expected: a.rows(), actual: b.len() });
    }
    let n = a.cols();
    let RowReduction { reduced, pivot_cols, .. } = row_reduce(&a.augmented(b));
    let consistent = pivot_cols.last() != Some(&n);
    let pivots: Vec<usize> = pivot_cols.into_iter().filter(|&c| c < n).collect();
    let rank = pivots.len();

    let mut is_pivot = vec![false; n];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let free_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();

    let basis = free_cols
        .iter()
        .map(|&f| {
            let mut v = Gf2Vector::zeros(n);
            v.set(f, true);
            for (r, &p) in pivots.iter().enumerate() {
                if reduced.get(r, f) {
                    v.set(p, true);
                }
            }
            v
        })
        .collect();

    let particular = consistent.then(|| {
        let mut x = Gf2Vector::zeros(n);
        for (r, &p) in pivots.iter().enumerate() {
            if reduced.get(r, n) {
                x.set(p, true);
            }
        }
        x
    });

    Ok(Gf2SolutionSet { n_vars: n, rank, nullity: n - rank, consistent, particular, basis, free_cols })
}

/// All `2^nullity` solutions in canonical order (see
/// [`Gf2SolutionSet::solution_at`]). Refuses when the count exceeds `limit`.
pub fn enumerate_solutions(s: &Gf2SolutionSet, limit: u64) -> Result<Vec<Gf2Vector>, Gf2Error> {
    if !s.consistent {
        return Err(Gf2Error::Inconsistent);
    }
    let count = match s.solution_count() {
        Some(c) if c <= limit => c,
        _ => return Err(Gf2Error::LimitExceeded { nullity: s.nullity, limit }),
    };
    Ok((0..count).map(|i| s.solution_at(i).expect("index below count")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(s: &str) -> Gf2Vector {
        Gf2Vector::from_bits(&s.bytes().map(|c| c - b'0').collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_has_full_rank() {
        let r = row_reduce(&Gf2Matrix::identity(3));
        assert_eq!(r.rank, 3);
        assert_eq!(r.pivot_cols, vec![0, 1, 2]);
        assert_eq!(r.reduced, Gf2Matrix::identity(3));
    }

    #[test]
    fn dependent_rows_lose_rank() {
        let a = Gf2Matrix::parse_rows(&["110", "011", "101"]).unwrap();
        // oracle: third row is the XOR of the first two, and no single row is zero
        let sum: Vec<bool> = (0..3).map(|c| a.get(0, c) ^ a.get(1, c)).collect();
        assert_eq!(sum, (0..3).map(|c| a.get(2, c)).collect::<Vec<_>>());
        assert_eq!(row_reduce(&a).rank, 2);
    }

    #[test]
    fn zero_matrix() {
        let a = Gf2Matrix::zeros(2, 4);
        let r = row_reduce(&a);
        assert_eq!(r.rank, 0);
        assert!(r.pivot_cols.is_empty());
        let s = solve_affine(&a, &Gf2Vector::zeros(2)).unwrap();
        assert_eq!(s.nullity, 4);
    }

    #[test]
    fn unique_solution() {
        let s = solve_affine(&Gf2Matrix::identity(3), &vec_of("101")).unwrap();
        assert!(s.consistent);
        assert_eq!(s.nullity, 0);
        assert_eq!(s.particular, Some(vec_of("101")));
        assert_eq!(enumerate_solutions(&s, 1).unwrap(), vec![vec_of("101")]);
    }

    #[test]
    fn contradictory_rows() {
        let a = Gf2Matrix::parse_rows(&["110", "110"]).unwrap();
        let s = solve_affine(&a, &vec_of("01")).unwrap();
        assert!(!s.consistent);
        assert!(s.particular.is_none());
        assert_eq!(enumerate_solutions(&s, 10), Err(Gf2Error::Inconsistent));
    }

    #[test]
    fn one_equation_two_unknowns() {
        let a = Gf2Matrix::parse_rows(&["11"]).unwrap();
        let s = solve_affine(&a, &vec_of("0")).unwrap();
        assert_eq!(s.nullity, 1);
        let sols = enumerate_solutions(&s, 4).unwrap();
        assert_eq!(sols, vec![vec_of("00"), vec_of("11")]);
    }

    #[test]
    fn nullity_three_gives_eight() {
        let a = Gf2Matrix::parse_rows(&["11000", "00110"]).unwrap();
        let s = solve_affine(&a, &vec_of("10")).unwrap();
        assert_eq!(s.nullity, 3);
        let sols = enumerate_solutions(&s, 8).unwrap();
        assert_eq!(sols.len(), 8);
        for (i, x) in sols.iter().enumerate() {
            assert_eq!(a.mul_vec(x).unwrap(), vec_of("10"));
            assert_eq!(s.index_of(x), Some(i as u64));
        }
    }

    #[test]
    fn limit_is_enforced() {
        let s = solve_affine(&Gf2Matrix::zeros(1, 5), &Gf2Vector::zeros(1)).unwrap();
        assert_eq!(enumerate_solutions(&s, 31), Err(Gf2Error::LimitExceeded { nullity: 5, limit: 31 }));
    }

    #[test]
    fn rhs_length_checked() {
        let err = solve_affine(&Gf2Matrix::identity(3), &vec_of("10")).unwrap_err();
        assert_eq!(err, Gf2Error::DimensionMismatch { expected: 3, actual: 2 });
    }

    #[test]
    fn index_of_rejects_non_solutions() {
        let a = Gf2Matrix::parse_rows(&["11"]).unwrap();
        let s = solve_affine(&a, &vec_of("0")).unwrap();
        assert_eq!(s.index_of(&vec_of("10")), None);
    }

    #[test]
    fn wide_rows_cross_word_boundaries() {
        // 130 columns: x_i + x_{i+1} = 1 chain, nullity 1
        let n = 130;
        let mut a = Gf2Matrix::zeros(n - 1, n);
        for i in 0..n - 1 {
            a.set(i, i, true);
            a.set(i, i + 1, true);
        }
        let mut b = Gf2Vector::zeros(n - 1);
        for i in 0..n - 1 {
            b.set(i, true);
        }
        let s = solve_affine(&a, &b).unwrap();
        assert_eq!(s.nullity, 1);
        for x in enumerate_solutions(&s, 2).unwrap() {
            assert_eq!(a.mul_vec(&x).unwrap(), b);
            assert_eq!(x.weight(), n / 2);
        }
    }
}
