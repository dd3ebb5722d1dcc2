//! Bit-packed dense linear algebra over GF(2).
//!
//! Matrices are at most 64x64 so that one row fits a machine word; every
//! elimination step is then a single XOR. All operations are pure.

use crate::error::{Error, Result};

/// Dense matrix over GF(2). Bit `j` of `data[i]` is the entry `(i, j)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

#[inline]
fn col_mask(cols: usize) -> u64 {
    if cols == 64 {
        u64::MAX
    } else {
        (1u64 << cols) - 1
    }
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!((1..=64).contains(&rows) && (1..=64).contains(&cols));
        BitMatrix { rows, cols, data: vec![0; rows] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i] = 1 << i;
        }
        m
    }

    /// Shift matrix with ones on the superdiagonal; the nilpotent generator
    /// of the upper-triangular Toeplitz algebra.
    pub fn shift(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            m.data[i] = 1 << (i + 1);
        }
        m
    }

    /// Build from packed rows (bit `j` of `rows[i]` = entry `(i, j)`).
    pub fn from_rows(rows: &[u64], cols: usize) -> Self {
        let mask = col_mask(cols);
        assert!(rows.iter().all(|&r| r & !mask == 0), "stray bits beyond column count");
        BitMatrix { rows: rows.len(), cols, data: rows.to_vec() }
    }

    pub fn from_bits(rows: usize, cols: usize, entries: &[&[u8]]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, r) in entries.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                if b != 0 {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> u64 {
        self.data[i]
    }

    pub fn row_words(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i] >> j & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        if v {
            self.data[i] |= 1 << j;
        } else {
            self.data[i] &= !(1 << j);
        }
    }

    pub fn set_row(&mut self, i: usize, word: u64) {
        debug_assert_eq!(word & !col_mask(self.cols), 0);
        self.data[i] = word;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&r| r == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| self.data[i] == 1 << i)
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            let mut r = self.data[i];
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                t.data[j] |= 1 << i;
                r &= r - 1;
            }
        }
        t
    }

    pub fn add(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a ^ b).collect();
        BitMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = BitMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let mut r = self.data[i];
            let mut acc = 0u64;
            while r != 0 {
                let k = r.trailing_zeros() as usize;
                acc ^= other.data[k];
                r &= r - 1;
            }
            out.data[i] = acc;
        }
        out
    }

    pub fn pow(&self, mut e: usize) -> BitMatrix {
        assert_eq!(self.rows, self.cols);
        let mut base = self.clone();
        let mut acc = BitMatrix::identity(self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Dimension of the row space.
    pub fn rank(&self) -> usize {
        rank_of_rows(&self.data)
    }

    /// Reduced row echelon form together with the row-operation matrix:
    /// `R = rowops * M`, `rowops` invertible. Pivot scan is left-to-right,
    /// top-to-bottom. Returns `(R, rowops, pivot_columns)`.
    pub fn rref(&self) -> (BitMatrix, BitMatrix, Vec<usize>) {
        let mut r = self.clone();
        let mut ops = BitMatrix::identity(self.rows);
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for col in 0..self.cols {
            let Some(p) = (next_row..self.rows).find(|&i| r.get(i, col)) else {
                continue;
            };
            r.data.swap(next_row, p);
            ops.data.swap(next_row, p);
            for i in 0..self.rows {
                if i != next_row && r.get(i, col) {
                    r.data[i] ^= r.data[next_row];
                    ops.data[i] ^= ops.data[next_row];
                }
            }
            pivots.push(col);
            next_row += 1;
            if next_row == self.rows {
                break;
            }
        }
        (r, ops, pivots)
    }

    /// Reduced column echelon form along with the column-operation matrix:
    /// `R = M * colops`, `colops` invertible, zero columns last. The RCEF is
    /// the unique representative of `{M * C : C invertible}`.
    pub fn rcef(&self) -> (BitMatrix, BitMatrix) {
        let (r_t, ops_t, _) = self.transpose().rref();
        (r_t.transpose(), ops_t.transpose())
    }

    pub fn invert(&self) -> Result<BitMatrix> {
        if self.rows != self.cols {
            return Err(Error::SingularMatrix);
        }
        let (r, ops, _) = self.rref();
        if !r.is_identity() {
            return Err(Error::SingularMatrix);
        }
        Ok(ops)
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Solve `M x = b` for the packed column vector `b` (bit `i` = entry `i`).
    /// Returns a packed solution or `None` when `b` is outside the column space.
    pub fn solve(&self, b: u64) -> Option<u64> {
        debug_assert_eq!(b & !col_mask(self.rows), 0);
        // Augment with b as an extra column and eliminate.
        let mut rows: Vec<u64> = (0..self.rows)
            .map(|i| self.data[i] | ((b >> i & 1) << self.cols))
            .collect();
        let mut x = 0u64;
        let mut next_row = 0;
        let mut pivots = Vec::new();
        for col in 0..self.cols {
            let Some(p) = (next_row..self.rows).find(|&i| rows[i] >> col & 1 == 1) else {
                continue;
            };
            rows.swap(next_row, p);
            for i in 0..self.rows {
                if i != next_row && rows[i] >> col & 1 == 1 {
                    rows[i] ^= rows[next_row];
                }
            }
            pivots.push((next_row, col));
            next_row += 1;
        }
        // Inconsistent if a zero row has the augmented bit set.
        for row in &rows[next_row..] {
            if row >> self.cols & 1 == 1 {
                return None;
            }
        }
        for &(r, c) in &pivots {
            if rows[r] >> self.cols & 1 == 1 {
                x |= 1 << c;
            }
        }
        Some(x)
    }

    /// True iff `M^e = 0` and `M^(e-1) != 0`, i.e. `M` is nilpotent of
    /// maximal index for its size (`e` must equal the row count).
    pub fn is_nilpotent_max_index(&self, e: usize) -> bool {
        assert_eq!(self.rows, self.cols);
        assert_eq!(e, self.rows);
        let p = self.pow(e - 1);
        !p.is_zero() && p.mul(self).is_zero()
    }

    /// For `M` nilpotent of maximal index, an invertible `P` whose columns
    /// are `(M^(l-1) v, ..., M v, v)` so that `P^-1 M P` is the shift matrix.
    /// The seed `v` starts at the last standard basis vector and falls back
    /// to scanning the basis for one with `M^(l-1) v != 0`.
    pub fn nilpotent_conjugator(&self) -> Result<BitMatrix> {
        let l = self.rows;
        if !self.is_nilpotent_max_index(l) {
            return Err(Error::PreconditionViolated("matrix is not nilpotent of maximal index"));
        }
        let top = self.pow(l - 1);
        let tt = top.transpose();
        let seed_order = std::iter::once(l - 1).chain(0..l - 1);
        for s in seed_order {
            // column of M^(l-1) at index s = row s of its transpose
            if tt.data[s] == 0 {
                continue;
            }
            let mut p = BitMatrix::zeros(l, l);
            let mut v = 1u64 << s; // packed column vector
            // columns right-to-left: v, Mv, ..., M^(l-1) v
            for k in (0..l).rev() {
                for i in 0..l {
                    if v >> i & 1 == 1 {
                        p.data[i] |= 1 << k;
                    }
                }
                v = mul_col(self, v);
            }
            if p.is_invertible() {
                let check = p.invert()?.mul(self).mul(&p);
                if check == BitMatrix::shift(l) {
                    return Ok(p);
                }
            }
        }
        Err(Error::PreconditionViolated("no seed vector yields an invertible conjugator"))
    }
}

/// `M * v` for a packed column vector.
#[inline]
fn mul_col(m: &BitMatrix, v: u64) -> u64 {
    let mut out = 0u64;
    for i in 0..m.rows() {
        if (m.row(i) & v).count_ones() & 1 == 1 {
            out |= 1 << i;
        }
    }
    out
}

/// Rank of a family of packed row vectors.
pub fn rank_of_rows(rows: &[u64]) -> usize {
    let mut basis: [u64; 64] = [0; 64];
    let mut rank = 0;
    for &row in rows {
        let mut x = row;
        while x != 0 {
            let p = 63 - x.leading_zeros() as usize;
            if basis[p] == 0 {
                basis[p] = x;
                rank += 1;
                break;
            }
            x ^= basis[p];
        }
    }
    rank
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, "{}", u8::from(self.get(i, j)))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> BitMatrix {
        let mask = col_mask(cols);
        let rows: Vec<u64> = (0..rows).map(|_| rng.gen::<u64>() & mask).collect();
        BitMatrix::from_rows(&rows, cols)
    }

    pub(crate) fn random_invertible(rng: &mut impl Rng, n: usize) -> BitMatrix {
        loop {
            let m = random_matrix(rng, n, n);
            if m.is_invertible() {
                return m;
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(BitMatrix::identity(3).rank(), 3);
        assert_eq!(BitMatrix::zeros(3, 3).rank(), 0);
        // hand-eliminated: rows (010), (100), (000) -> two pivots
        let m = BitMatrix::from_bits(3, 3, &[&[0, 1, 0], &[1, 0, 0], &[0, 0, 0]]);
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn rank_equals_transpose_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
            let m = random_matrix(&mut rng, r, c);
            assert_eq!(m.rank(), m.transpose().rank());
        }
    }

    #[test]
    fn rcef_examples() {
        let id = BitMatrix::identity(4);
        let (r, c) = id.rcef();
        assert_eq!(r, id);
        assert_eq!(c, id);

        let m = BitMatrix::from_bits(2, 2, &[&[1, 1], &[0, 0]]);
        let (r, c) = m.rcef();
        assert_eq!(r, BitMatrix::from_bits(2, 2, &[&[1, 0], &[0, 0]]));
        assert_eq!(m.mul(&c), r);
        assert!(c.is_invertible());
    }

    #[test]
    fn rcef_idempotent_and_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let (r, c) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
            let m = random_matrix(&mut rng, r, c);
            let (r, c) = m.rcef();
            assert_eq!(m.mul(&c), r);
            assert!(c.is_invertible());
            assert_eq!(r.rcef().0, r, "idempotence");
            let g = random_invertible(&mut rng, m.cols());
            assert_eq!(m.mul(&g).rcef().0, r, "uniqueness under column action");
        }
    }

    #[test]
    fn invert_examples() {
        assert_eq!(BitMatrix::identity(5).invert().unwrap(), BitMatrix::identity(5));
        let m = BitMatrix::from_bits(2, 2, &[&[1, 1], &[0, 1]]);
        assert_eq!(m.invert().unwrap(), m); // self-inverse over GF(2)
        assert!(matches!(
            BitMatrix::zeros(2, 2).invert(),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn invert_random_product_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=8);
            let m = random_invertible(&mut rng, n);
            let inv = m.invert().unwrap();
            assert!(m.mul(&inv).is_identity());
            assert!(inv.mul(&m).is_identity());
        }
    }

    #[test]
    fn solve_examples() {
        let id = BitMatrix::identity(4);
        assert_eq!(id.solve(0b1011), Some(0b1011));
        let m = BitMatrix::from_bits(2, 2, &[&[1, 1], &[1, 1]]);
        assert_eq!(m.solve(0b01), None);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
            let a = random_matrix(&mut rng, r, c);
            let x = rng.gen::<u64>() & col_mask(a.cols());
            // build a consistent b = A x, then solving must verify by substitution
            let b = super::mul_col(&a, x);
            let sol = a.solve(b).expect("consistent system");
            assert_eq!(super::mul_col(&a, sol), b);
        }
    }

    #[test]
    fn nilpotent_max_index() {
        let n = BitMatrix::shift(3);
        assert!(n.is_nilpotent_max_index(3));
        assert!(!BitMatrix::identity(3).is_nilpotent_max_index(3));
        assert!(!n.pow(2).is_nilpotent_max_index(3));
    }

    #[test]
    fn conjugator_examples() {
        let n = BitMatrix::shift(4);
        assert_eq!(n.nilpotent_conjugator().unwrap(), BitMatrix::identity(4));

        // l = 3, M = N + N^2
        let n3 = BitMatrix::shift(3);
        let m = n3.add(&n3.pow(2));
        let p = m.nilpotent_conjugator().unwrap();
        assert_eq!(p.invert().unwrap().mul(&m).mul(&p), n3);

        // l = 4, N^3 has index 2, not maximal
        assert!(BitMatrix::shift(4).pow(3).nilpotent_conjugator().is_err());
    }

    #[test]
    fn conjugator_exhaustive_small_and_random() {
        // every nilpotent-max-index conjugate of N for sizes <= 4, randomized above
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for l in 2..=6 {
            let n = BitMatrix::shift(l);
            let trials = if l <= 4 { 400 } else { 150 };
            for _ in 0..trials {
                let g = random_invertible(&mut rng, l);
                let m = g.invert().unwrap().mul(&n).mul(&g);
                assert!(m.is_nilpotent_max_index(l));
                let p = m.nilpotent_conjugator().unwrap();
                assert_eq!(p.invert().unwrap().mul(&m).mul(&p), n);
            }
        }
    }
}
