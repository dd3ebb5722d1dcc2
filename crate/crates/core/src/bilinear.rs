//! Bilinear forms over GF(2), subspaces of the form space with canonical
//! echelon bases, the rank-one generator set, and decompositions.
//!
//! A form on `K^m x K^n` is stored flattened row-major into a single word:
//! bit `i*n + j` is the matrix entry `(i, j)`. All in-scope form spaces have
//! `m*n <= 36`, so one word always suffices.

use crate::error::{Error, Result};
use crate::gf2::{rank_of_rows, BitMatrix};

/// A bilinear form `(a, b) -> aᵀ M b` with `M` an `m x n` bit matrix,
/// flattened row-major into `bits`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct BilinearForm {
    pub m: usize,
    pub n: usize,
    pub bits: u64,
}

impl BilinearForm {
    pub fn zero(m: usize, n: usize) -> Self {
        assert!(m * n <= 64);
        BilinearForm { m, n, bits: 0 }
    }

    pub fn from_matrix(mat: &BitMatrix) -> Self {
        let (m, n) = (mat.rows(), mat.cols());
        assert!(m * n <= 64);
        let mut bits = 0u64;
        for i in 0..m {
            bits |= mat.row(i) << (i * n);
        }
        BilinearForm { m, n, bits }
    }

    pub fn from_bits(m: usize, n: usize, bits: u64) -> Self {
        assert!(m * n <= 64);
        BilinearForm { m, n, bits }
    }

    pub fn matrix(&self) -> BitMatrix {
        let mask = if self.n == 64 { u64::MAX } else { (1 << self.n) - 1 };
        let rows: Vec<u64> = (0..self.m).map(|i| (self.bits >> (i * self.n)) & mask).collect();
        BitMatrix::from_rows(&rows, self.n)
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn add(&self, other: &BilinearForm) -> BilinearForm {
        debug_assert_eq!((self.m, self.n), (other.m, other.n));
        BilinearForm { m: self.m, n: self.n, bits: self.bits ^ other.bits }
    }

    /// Matrix rank of the representing matrix.
    pub fn rank(&self) -> usize {
        let mask = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let mut rows = [0u64; 8];
        debug_assert!(self.m <= 8);
        for (i, r) in rows.iter_mut().take(self.m).enumerate() {
            *r = (self.bits >> (i * self.n)) & mask;
        }
        rank_of_rows(&rows[..self.m])
    }
}

/// A rank-one form `(a, b) -> (alpha . a)(beta . b)`; its matrix is the outer
/// product of the two nonzero row vectors. Over GF(2) the pair itself is
/// canonical since the only unit is 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct RankOneForm {
    pub m: usize,
    pub n: usize,
    pub alpha: u64,
    pub beta: u64,
}

impl RankOneForm {
    pub fn new(m: usize, n: usize, alpha: u64, beta: u64) -> Self {
        assert!(alpha != 0 && beta != 0);
        RankOneForm { m, n, alpha, beta }
    }

    pub fn form(&self) -> BilinearForm {
        let mut bits = 0u64;
        for i in 0..self.m {
            if self.alpha >> i & 1 == 1 {
                bits |= self.beta << (i * self.n);
            }
        }
        BilinearForm { m: self.m, n: self.n, bits }
    }

    /// Recover `(alpha, beta)` from a flattened form of rank exactly one.
    pub fn from_form(f: &BilinearForm) -> Option<RankOneForm> {
        if f.rank() != 1 {
            return None;
        }
        let mask = if f.n == 64 { u64::MAX } else { (1u64 << f.n) - 1 };
        let mut alpha = 0u64;
        let mut beta = 0u64;
        for i in 0..f.m {
            let row = (f.bits >> (i * f.n)) & mask;
            if row != 0 {
                alpha |= 1 << i;
                beta = row;
            }
        }
        Some(RankOneForm { m: f.m, n: f.n, alpha, beta })
    }
}

/// All `(2^m - 1)(2^n - 1)` rank-one forms in lexicographic order:
/// `alpha` ascending as an integer, then `beta`.
pub fn enumerate_rank_one(m: usize, n: usize) -> Vec<RankOneForm> {
    assert!((1..=8).contains(&m) && (1..=8).contains(&n));
    let mut out = Vec::with_capacity(((1 << m) - 1) * ((1 << n) - 1));
    for alpha in 1..1u64 << m {
        for beta in 1..1u64 << n {
            out.push(RankOneForm { m, n, alpha, beta });
        }
    }
    out
}

/// A subspace of the form space, stored as the unique reduced echelon basis
/// of the flattened vectors. Pivot of a row is its most significant bit;
/// rows are kept sorted by descending pivot and fully reduced, so two
/// subspaces are equal iff their row lists are equal.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Subspace {
    m: usize,
    n: usize,
    rows: Vec<u64>,
}

impl Subspace {
    pub fn empty(m: usize, n: usize) -> Self {
        assert!(m * n <= 64);
        Subspace { m, n, rows: Vec::new() }
    }

    pub fn from_forms(m: usize, n: usize, forms: &[BilinearForm]) -> Self {
        let mut s = Subspace::empty(m, n);
        for f in forms {
            debug_assert_eq!((f.m, f.n), (m, n));
            s.insert(f.bits);
        }
        s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Echelon rows, descending by pivot. Equal subspaces have equal keys.
    pub fn key(&self) -> &[u64] {
        &self.rows
    }

    /// Canonical representative of `x + S`: zero iff the form lies in `S`.
    #[inline]
    pub fn reduce(&self, mut x: u64) -> u64 {
        for &row in &self.rows {
            let pivot = 63 - row.leading_zeros() as usize;
            if x >> pivot & 1 == 1 {
                x ^= row;
            }
        }
        x
    }

    pub fn contains(&self, x: u64) -> bool {
        self.reduce(x) == 0
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.rows.iter().all(|&r| self.contains(r))
    }

    /// Adjoin a vector; returns false when it was already in the span.
    pub fn insert(&mut self, x: u64) -> bool {
        let x = self.reduce(x);
        if x == 0 {
            return false;
        }
        let pivot = 63 - x.leading_zeros() as usize;
        for row in &mut self.rows {
            if *row >> pivot & 1 == 1 {
                *row ^= x;
            }
        }
        let pos = self.rows.partition_point(|&r| (63 - r.leading_zeros() as usize) > pivot);
        self.rows.insert(pos, x);
        true
    }

    pub fn join(&self, other: &Subspace) -> Subspace {
        debug_assert_eq!((self.m, self.n), (other.m, other.n));
        let mut s = self.clone();
        for &r in &other.rows {
            s.insert(r);
        }
        s
    }

    pub fn basis_forms(&self) -> Vec<BilinearForm> {
        self.rows.iter().map(|&b| BilinearForm::from_bits(self.m, self.n, b)).collect()
    }

    /// Iterate all `2^dim` member bit patterns (includes zero).
    pub fn elements(&self) -> impl Iterator<Item = u64> + '_ {
        let dim = self.rows.len();
        (0u64..1 << dim).map(move |sel| {
            let mut x = 0u64;
            let mut s = sel;
            while s != 0 {
                let t = s.trailing_zeros() as usize;
                x ^= self.rows[t];
                s &= s - 1;
            }
            x
        })
    }
}

/// Canonical coset representative of a form modulo a subspace.
pub fn reduce_mod(phi: &BilinearForm, s: &Subspace) -> BilinearForm {
    debug_assert_eq!((phi.m, phi.n), (s.m, s.n));
    BilinearForm::from_bits(phi.m, phi.n, s.reduce(phi.bits))
}

/// Whether the rank-one forms of `s` span the whole of `s`. `gens` must
/// contain every rank-one form of the ambient space (or at least all those
/// lying in `s`). Scans `gens` with membership tests and accumulates the
/// span, stopping as soon as it is full.
pub fn has_rank_one_basis(s: &Subspace, gens: &[RankOneForm]) -> bool {
    let want = s.dim();
    if want == 0 {
        return true;
    }
    let mut span = Subspace::empty(s.m, s.n);
    for g in gens {
        let bits = g.form().bits;
        if s.contains(bits) && span.insert(bits) && span.dim() == want {
            return true;
        }
    }
    false
}

/// The rank-one forms of `s`, in generator order.
pub fn rank_one_members(s: &Subspace, gens: &[RankOneForm]) -> Vec<RankOneForm> {
    gens.iter().filter(|g| s.contains(g.form().bits)).copied().collect()
}

/// A decomposition of a target: `r` independent rank-one forms and, per
/// target coordinate `h`, the combination row expressing it exactly.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub terms: Vec<RankOneForm>,
    /// `coeff_rows[h]` has bit `t` set iff term `t` contributes to output `h`.
    pub coeff_rows: Vec<u64>,
}

impl Decomposition {
    /// Column `t` of the coefficient matrix: which outputs term `t` feeds.
    pub fn term_coeffs(&self, t: usize) -> u64 {
        let mut c = 0u64;
        for (h, row) in self.coeff_rows.iter().enumerate() {
            if row >> t & 1 == 1 {
                c |= 1 << h;
            }
        }
        c
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }
}

/// Select a rank-one basis of `v` greedily in generator order and solve for
/// the coefficients expressing each form of `target_basis` over it.
pub fn extract_decomposition(
    v: &Subspace,
    target_basis: &[BilinearForm],
    gens: &[RankOneForm],
) -> Result<Decomposition> {
    let r = v.dim();
    let mut terms = Vec::with_capacity(r);
    let mut span = Subspace::empty(v.m(), v.n());
    for g in gens {
        let bits = g.form().bits;
        if v.contains(bits) && span.insert(bits) {
            terms.push(*g);
            if terms.len() == r {
                break;
            }
        }
    }
    if terms.len() < r {
        return Err(Error::NotDecomposable);
    }
    for f in target_basis {
        if !v.contains(f.bits) {
            return Err(Error::NotDecomposable);
        }
    }
    // columns of the system are the flattened terms
    let mn = v.m() * v.n();
    let mut sys = BitMatrix::zeros(mn, r);
    for (t, term) in terms.iter().enumerate() {
        let bits = term.form().bits;
        for i in 0..mn {
            if bits >> i & 1 == 1 {
                sys.set(i, t, true);
            }
        }
    }
    let mut coeff_rows = Vec::with_capacity(target_basis.len());
    for f in target_basis {
        let x = sys.solve(f.bits).ok_or(Error::NotDecomposable)?;
        coeff_rows.push(x);
    }
    Ok(Decomposition { terms, coeff_rows })
}

/// Re-check a decomposition against the target basis: every term has rank
/// one, the terms are independent, and every combination row reproduces its
/// target form exactly.
pub fn verify_decomposition(target_basis: &[BilinearForm], d: &Decomposition) -> bool {
    if d.coeff_rows.len() != target_basis.len() {
        return false;
    }
    let flats: Vec<u64> = d.terms.iter().map(|t| t.form().bits).collect();
    if d.terms.iter().any(|t| t.alpha == 0 || t.beta == 0 || t.form().rank() != 1) {
        return false;
    }
    if rank_of_rows(&flats) != flats.len() {
        return false;
    }
    for (f, row) in target_basis.iter().zip(&d.coeff_rows) {
        let mut acc = 0u64;
        for (t, &flat) in flats.iter().enumerate() {
            if row >> t & 1 == 1 {
                acc ^= flat;
            }
        }
        if acc != f.bits {
            return false;
        }
    }
    true
}

/// Counts `p_t = #{phi in S : rank(phi) = t}` for `t` up to `min(m, n)`.
/// A complete invariant prefilter for the group action.
pub fn rank_distribution(s: &Subspace) -> Result<Vec<usize>> {
    if s.dim() > 20 {
        return Err(Error::DimensionTooLarge(s.dim()));
    }
    let mut counts = vec![0usize; s.m().min(s.n()) + 1];
    for bits in s.elements() {
        let f = BilinearForm::from_bits(s.m(), s.n(), bits);
        counts[f.rank()] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn karatsuba_rank_ones() -> Vec<RankOneForm> {
        // a0*b0, a1*b1, (a0+a1)(b0+b1)
        vec![
            RankOneForm::new(2, 2, 0b01, 0b01),
            RankOneForm::new(2, 2, 0b10, 0b10),
            RankOneForm::new(2, 2, 0b11, 0b11),
        ]
    }

    pub(crate) fn degree_one_product_basis() -> Vec<BilinearForm> {
        // coordinates of (a0 + a1 X)(b0 + b1 X): a0b0, a0b1 + a1b0, a1b1
        let e = |i: usize, j: usize| RankOneForm::new(2, 2, 1 << i, 1 << j).form();
        vec![e(0, 0), e(0, 1).add(&e(1, 0)), e(1, 1)]
    }

    #[test]
    fn flatten_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let m = rng.gen_range(1..=8);
            let n = rng.gen_range(1..=8);
            let mask: u64 = if m * n == 64 { u64::MAX } else { (1 << (m * n)) - 1 };
            let f = BilinearForm::from_bits(m, n, rng.gen::<u64>() & mask);
            assert_eq!(BilinearForm::from_matrix(&f.matrix()), f);
        }
    }

    #[test]
    fn rank_one_counts() {
        assert_eq!(enumerate_rank_one(2, 2).len(), 9);
        assert_eq!(enumerate_rank_one(3, 3).len(), 49);
        for m in 1..=6 {
            for n in 1..=6 {
                let g = enumerate_rank_one(m, n);
                assert_eq!(g.len(), ((1 << m) - 1) * ((1 << n) - 1));
                assert!(g.iter().all(|f| f.form().rank() == 1));
            }
        }
    }

    #[test]
    fn rank_one_round_trip() {
        for g in enumerate_rank_one(3, 4) {
            assert_eq!(RankOneForm::from_form(&g.form()), Some(g));
        }
    }

    #[test]
    fn subspace_from_collapses_duplicates() {
        assert_eq!(Subspace::from_forms(2, 2, &[]).dim(), 0);
        let f = RankOneForm::new(2, 2, 1, 1).form();
        assert_eq!(Subspace::from_forms(2, 2, &[f, f]).dim(), 1);
        let kar: Vec<BilinearForm> = karatsuba_rank_ones().iter().map(|r| r.form()).collect();
        assert_eq!(Subspace::from_forms(2, 2, &kar).dim(), 3);
    }

    #[test]
    fn reduce_mod_cosets() {
        let phi0 = degree_one_product_basis()[0];
        let phi1 = degree_one_product_basis()[1];
        let s = Subspace::from_forms(2, 2, &[phi0]);
        assert!(reduce_mod(&phi0, &s).is_zero());
        let empty = Subspace::empty(2, 2);
        assert_eq!(reduce_mod(&phi1, &empty), phi1);
        assert_eq!(reduce_mod(&phi1.add(&phi0), &s), reduce_mod(&phi1, &s));
    }

    #[test]
    fn rank_one_basis_examples() {
        let gens = enumerate_rank_one(2, 2);
        let kar: Vec<BilinearForm> = karatsuba_rank_ones().iter().map(|r| r.form()).collect();
        assert!(has_rank_one_basis(&Subspace::from_forms(2, 2, &kar), &gens));

        let id2 = BilinearForm::from_matrix(&BitMatrix::identity(2));
        assert!(!has_rank_one_basis(&Subspace::from_forms(2, 2, &[id2]), &gens));

        // span{I3, N3} holds no rank-one form at all
        let gens3 = enumerate_rank_one(3, 3);
        let id3 = BilinearForm::from_matrix(&BitMatrix::identity(3));
        let n3 = BilinearForm::from_matrix(&BitMatrix::shift(3));
        let s = Subspace::from_forms(3, 3, &[id3, n3]);
        assert_eq!(rank_one_members(&s, &gens3).len(), 0);
        assert!(!has_rank_one_basis(&s, &gens3));
    }

    #[test]
    fn rank_one_basis_random_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let gens = enumerate_rank_one(3, 3);
        for _ in 0..300 {
            let k = rng.gen_range(1..=3);
            let forms: Vec<BilinearForm> =
                (0..k).map(|_| gens[rng.gen_range(0..gens.len())].form()).collect();
            let s = Subspace::from_forms(3, 3, &forms);
            assert!(has_rank_one_basis(&s, &gens));
        }
    }

    #[test]
    fn karatsuba_decomposition() {
        let gens = enumerate_rank_one(2, 2);
        let target = degree_one_product_basis();
        let v = Subspace::from_forms(
            2,
            2,
            &karatsuba_rank_ones().iter().map(|r| r.form()).collect::<Vec<_>>(),
        );
        let d = extract_decomposition(&v, &target, &gens).unwrap();
        assert!(verify_decomposition(&target, &d));
        // greedy generator order picks a0b0, a1b1, (a0+a1)(b0+b1)
        assert_eq!(d.terms[0], RankOneForm::new(2, 2, 1, 1));
        assert_eq!(d.terms[1], RankOneForm::new(2, 2, 2, 2));
        assert_eq!(d.terms[2], RankOneForm::new(2, 2, 3, 3));
        // column vectors match the mod-2 coefficients of the three products
        assert_eq!(d.term_coeffs(0), 0b011);
        assert_eq!(d.term_coeffs(1), 0b110);
        assert_eq!(d.term_coeffs(2), 0b010);

        // flipping one coefficient must fail verification
        let mut bad = d.clone();
        bad.coeff_rows[1] ^= 1;
        assert!(!verify_decomposition(&target, &bad));
    }

    #[test]
    fn schoolbook_decomposition_has_rank_four() {
        let gens = enumerate_rank_one(2, 2);
        let target = degree_one_product_basis();
        let e = |i: usize, j: usize| RankOneForm::new(2, 2, 1 << i, 1 << j).form();
        let v = Subspace::from_forms(2, 2, &[e(0, 0), e(0, 1), e(1, 0), e(1, 1)]);
        assert_eq!(v.dim(), 4);
        let d = extract_decomposition(&v, &target, &gens).unwrap();
        assert_eq!(d.rank(), 4);
        assert!(verify_decomposition(&target, &d));
    }

    #[test]
    fn decomposition_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let gens = enumerate_rank_one(3, 3);
        let target = vec![gens[0].form(), gens[12].form().add(&gens[3].form())];
        let t = Subspace::from_forms(3, 3, &target);
        for _ in 0..200 {
            // grow a random rank-one superspace of T that stays rank-one-spanned
            let mut v = Subspace::empty(3, 3);
            v.insert(gens[0].form().bits);
            v.insert(gens[12].form().bits);
            v.insert(gens[3].form().bits);
            while rng.gen_bool(0.5) {
                v.insert(gens[rng.gen_range(0..gens.len())].form().bits);
            }
            if !v.contains_subspace(&t) || !has_rank_one_basis(&v, &gens) {
                continue;
            }
            let d = extract_decomposition(&v, &target, &gens).unwrap();
            assert!(verify_decomposition(&target, &d));
        }
    }

    #[test]
    fn rank_distribution_examples() {
        let zero = Subspace::empty(2, 2);
        assert_eq!(rank_distribution(&zero).unwrap(), vec![1, 0, 0]);

        // matrix product 2x2x2 target: the space is the 2x2 matrices
        // tensored with the identity, so ranks double: 9 rank-one 2x2
        // matrices give 9 elements of rank 2, the 6 invertible ones give 6
        // of rank 4
        let t = crate::targets::matrix_product(2, 2, 2).unwrap();
        assert_eq!(rank_distribution(&t.space).unwrap(), vec![1, 0, 9, 0, 6]);
    }
}
