//! Classification of rank-one-generated subspaces up to the two-sided
//! group action: computation by extension, canonical forms, restriction to
//! rectangular form spaces, and a checksummed on-disk store.
//!
//! A class is canonicalized through its full rank-one content: stacking
//! every rank-one member as a row pair `(alpha, beta)`, reducing each side
//! to its unique column echelon form and sorting the paired rows yields a
//! complete invariant of the orbit, with no basis enumeration at all.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bilinear::{enumerate_rank_one, BilinearForm, RankOneForm, Subspace};
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// Canonical class key: the lexicographically minimal ordered rank-one
/// basis, with both sides rewritten through the echelon transform their
/// column sequence induces.
pub type ContentKey = Vec<(u64, u64)>;

/// One classification class of dimension `d`, stored as a canonical basis:
/// row `t` of `(U, V)` is the rank-one generator `alpha_t x beta_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmegaClass {
    pub d: usize,
    pub u_rows: Vec<u64>,
    pub v_rows: Vec<u64>,
    /// Rank distribution of the spanned subspace (index = rank).
    pub dist: Vec<usize>,
}

impl OmegaClass {
    pub fn forms(&self) -> Vec<RankOneForm> {
        self.u_rows
            .iter()
            .zip(&self.v_rows)
            .map(|(&a, &b)| RankOneForm::new(self.d, self.d, a, b))
            .collect()
    }

    pub fn subspace(&self) -> Subspace {
        let forms: Vec<BilinearForm> = self.forms().iter().map(RankOneForm::form).collect();
        Subspace::from_forms(self.d, self.d, &forms)
    }

    fn sort_key(&self) -> (Vec<u64>, Vec<u64>) {
        (self.u_rows.clone(), self.v_rows.clone())
    }
}

/// Raw `(U, V)` pair of a rank-one family in the given order, without any
/// canonicalization: row `t` holds the two linear forms of family member `t`.
pub fn uv_pair(forms: &[RankOneForm]) -> (BitMatrix, BitMatrix) {
    let m = forms[0].m;
    let n = forms[0].n;
    let u: Vec<u64> = forms.iter().map(|f| f.alpha).collect();
    let v: Vec<u64> = forms.iter().map(|f| f.beta).collect();
    (BitMatrix::from_rows(&u, m), BitMatrix::from_rows(&v, n))
}

/// Incremental echelon transform: an invertible matrix `e` (rows packed in
/// words) together with the number of pivots fixed so far. Feeding columns
/// one at a time keeps already-produced values stable: later pivot rows
/// start with a zero prefix, so earlier transformed columns never change.
/// The emitted value of a processed column is its coordinate vector over
/// the pivot subsequence, a quantity intrinsic to the column sequence.
#[derive(Clone, Copy)]
struct EchelonTransform {
    e: [u64; 8],
    dim: u8,
    npiv: u8,
}

impl EchelonTransform {
    fn identity(dim: usize) -> Self {
        let mut e = [0u64; 8];
        for (i, row) in e.iter_mut().enumerate().take(dim) {
            *row = 1 << i;
        }
        EchelonTransform { e, dim: dim as u8, npiv: 0 }
    }

    /// Current image of a vector under the transform.
    #[inline]
    fn image(&self, v: u64) -> u64 {
        let mut out = 0u64;
        for i in 0..self.dim as usize {
            out |= (((self.e[i] & v).count_ones() & 1) as u64) << i;
        }
        out
    }

    /// Absorb a vector as the next processed column; afterwards its image
    /// is a unit vector (or keeps its span-expressed value if dependent).
    fn absorb(&mut self, v: u64) {
        let img = self.image(v);
        let fresh = img >> self.npiv;
        if fresh == 0 {
            return;
        }
        let p = self.npiv as usize + fresh.trailing_zeros() as usize;
        self.e.swap(self.npiv as usize, p);
        let pivot_row = self.e[self.npiv as usize];
        for i in 0..self.dim as usize {
            if i != self.npiv as usize && (self.e[i] & v).count_ones() & 1 == 1 {
                self.e[i] ^= pivot_row;
            }
        }
        self.npiv += 1;
    }
}

/// Echelonized span with at most eight rows, copyable.
#[derive(Clone, Copy)]
struct SmallSpan {
    rows: [u64; 8],
    len: u8,
}

impl SmallSpan {
    fn empty() -> Self {
        SmallSpan { rows: [0; 8], len: 0 }
    }

    #[inline]
    fn reduce(&self, mut x: u64) -> u64 {
        for &row in &self.rows[..self.len as usize] {
            let p = 63 - row.leading_zeros() as usize;
            if x >> p & 1 == 1 {
                x ^= row;
            }
        }
        x
    }

    #[inline]
    fn contains(&self, x: u64) -> bool {
        self.reduce(x) == 0
    }

    fn insert(&mut self, x: u64) -> bool {
        let x = self.reduce(x);
        if x == 0 {
            return false;
        }
        self.rows[self.len as usize] = x;
        self.len += 1;
        // keep descending-pivot order
        let mut i = self.len as usize - 1;
        while i > 0 && self.rows[i - 1].leading_zeros() > self.rows[i].leading_zeros() {
            self.rows.swap(i - 1, i);
            i -= 1;
        }
        true
    }
}

/// Full key rows pack the emitted coordinates and two counting labels (how
/// many members share the row's left and right linear forms) into one
/// comparable word; the labels steer chunky members towards the forced
/// tail below.
type FullRow = u64;

const KEY_NODE_BUDGET: usize = 1 << 21;
const MAX_MEMBERS: usize = 256;

struct KeySearch {
    alphas: [u64; MAX_MEMBERS],
    betas: [u64; MAX_MEMBERS],
    flats: [u64; MAX_MEMBERS],
    labels: [u16; MAX_MEMBERS],
    count: usize,
    d: usize,
    best: [FullRow; 8],
    have_best: bool,
    nodes: usize,
}

#[derive(Clone, Copy)]
struct KeyState {
    eu: EchelonTransform,
    ev: EchelonTransform,
    span: SmallSpan,
    chosen: [u64; 4],
    depth: usize,
}

impl KeyState {
    #[inline]
    fn is_chosen(&self, i: usize) -> bool {
        self.chosen[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn choose(&mut self, i: usize) {
        self.chosen[i / 64] |= 1 << (i % 64);
    }
}

impl KeySearch {
    /// Emitted row of a candidate under the current transforms: dependent
    /// sides show their pivot coordinates, fresh sides the next unit.
    #[inline]
    fn row_of(&self, idx: usize, st: &KeyState) -> FullRow {
        let ia = st.eu.image(self.alphas[idx]);
        let a = if ia >> st.eu.npiv == 0 { ia } else { 1 << st.eu.npiv };
        let ib = st.ev.image(self.betas[idx]);
        let b = if ib >> st.ev.npiv == 0 { ib } else { 1 << st.ev.npiv };
        a << 40 | b << 32 | (self.labels[idx] as u64) << 16
    }

    fn run(&mut self, m: usize, n: usize) {
        let st = KeyState {
            eu: EchelonTransform::identity(m),
            ev: EchelonTransform::identity(n),
            span: SmallSpan::empty(),
            chosen: [0; 4],
            depth: 0,
        };
        let mut prefix = [0 as FullRow; 8];
        self.grow(st, &mut prefix);
    }

    /// A live node's prefix never exceeds the best key (lexicographically):
    /// best updates only come from the node's own descendants, which share
    /// its prefix. Pruning therefore just compares against the current best
    /// per branch iteration.
    fn grow(&mut self, st: KeyState, prefix: &mut [FullRow; 8]) {
        self.nodes += 1;
        assert!(
            self.nodes <= KEY_NODE_BUDGET,
            "canonical key search exceeded its node budget (pathological symmetry)"
        );
        if st.depth == self.d {
            if !self.have_best || prefix[..self.d] < self.best[..self.d] {
                self.best[..self.d].copy_from_slice(&prefix[..self.d]);
                self.have_best = true;
            }
            return;
        }
        // pass one: minimal base row (emits plus counting labels)
        let mut min_base = FullRow::MAX;
        let mut base_ties = [0usize; MAX_MEMBERS];
        let mut base_count = 0usize;
        let mut eligible_count = 0usize;
        for i in 0..self.count {
            if st.is_chosen(i) || st.span.contains(self.flats[i]) {
                continue;
            }
            eligible_count += 1;
            let row = self.row_of(i, &st);
            match row.cmp(&min_base) {
                std::cmp::Ordering::Less => {
                    min_base = row;
                    base_ties[0] = i;
                    base_count = 1;
                }
                std::cmp::Ordering::Equal => {
                    base_ties[base_count] = i;
                    base_count += 1;
                }
                std::cmp::Ordering::Greater => {}
            }
        }
        debug_assert!(eligible_count > 0, "members span the subspace");
        let min_row = min_base;
        let ties = &base_ties[..base_count];
        let tie_count = base_count;

        // forced tail: when the tie class is the whole eligible set, every
        // member shares one left form `a`, and the intersection of the right
        // pivot span with the eligible right span lies inside the right span
        // of the already-chosen members carrying `a`, then (by the modular
        // law) pivot-dependency implies form-dependency forever after, so
        // every order emits the same fresh-unit rows and one representative
        // order suffices; same with the sides exchanged.
        let branch_count = if tie_count == eligible_count && self.tail_forced(&st, &ties[..tie_count])
        {
            1
        } else {
            tie_count
        };

        for &idx in &ties[..branch_count] {
            if self.have_best
                && prefix[..st.depth] == self.best[..st.depth]
                && min_row > self.best[st.depth]
            {
                return;
            }
            let mut st2 = st;
            st2.eu.absorb(self.alphas[idx]);
            st2.ev.absorb(self.betas[idx]);
            st2.span.insert(self.flats[idx]);
            st2.choose(idx);
            st2.depth += 1;
            prefix[st.depth] = min_row;
            self.grow(st2, prefix);
        }
    }

    fn tail_forced(&self, st: &KeyState, ties: &[usize]) -> bool {
        let a0 = self.alphas[ties[0]];
        if ties.iter().all(|&i| self.alphas[i] == a0) {
            let chosen_same: SmallSpanIter<'_> = SmallSpanIter {
                search: self,
                st,
                side_alpha: true,
                value: a0,
            };
            if tail_check(&st.ev, ties.iter().map(|&i| self.betas[i]), chosen_same.collect_rows()) {
                return true;
            }
        }
        let b0 = self.betas[ties[0]];
        if ties.iter().all(|&i| self.betas[i] == b0) {
            let chosen_same = SmallSpanIter { search: self, st, side_alpha: false, value: b0 };
            if tail_check(&st.eu, ties.iter().map(|&i| self.alphas[i]), chosen_same.collect_rows()) {
                return true;
            }
        }
        false
    }
}

struct SmallSpanIter<'a> {
    search: &'a KeySearch,
    st: &'a KeyState,
    side_alpha: bool,
    value: u64,
}

impl SmallSpanIter<'_> {
    /// Span of the opposite-side forms of the chosen members carrying the
    /// anchored value.
    fn collect_rows(&self) -> SmallSpan {
        let mut span = SmallSpan::empty();
        for i in 0..self.search.count {
            if !self.st.is_chosen(i) {
                continue;
            }
            if self.side_alpha && self.search.alphas[i] == self.value {
                span.insert(self.search.betas[i]);
            }
            if !self.side_alpha && self.search.betas[i] == self.value {
                span.insert(self.search.alphas[i]);
            }
        }
        span
    }
}

/// Whether `(pivot span of et) ∩ span(gens)` is contained in `inside`:
/// the kernel of "fresh part of the image" over the span of `gens` must
/// reduce to zero against `inside`.
fn tail_check(et: &EchelonTransform, gens: impl Iterator<Item = u64>, inside: SmallSpan) -> bool {
    let mut basis = [0u64; 8];
    let mut blen = 0usize;
    let mut ech = SmallSpan::empty();
    for g in gens {
        if ech.insert(g) {
            basis[blen] = g;
            blen += 1;
        }
    }
    // triangulate (fresh image, coefficient) pairs; kernel combos are the
    // intersection with the pivot span
    let mut piv_img = [0u64; 8];
    let mut piv_coef = [0u64; 8];
    let mut piv_len = 0usize;
    for (i, &b) in basis.iter().enumerate().take(blen) {
        let mut img = et.image(b) >> et.npiv;
        let mut coef = 1u64 << i;
        for p in 0..piv_len {
            let pb = 63 - piv_img[p].leading_zeros() as usize;
            if img >> pb & 1 == 1 {
                img ^= piv_img[p];
                coef ^= piv_coef[p];
            }
        }
        if img == 0 {
            // kernel element: expand to a vector and test containment
            let mut x = 0u64;
            let mut c = coef;
            while c != 0 {
                let t = c.trailing_zeros() as usize;
                x ^= basis[t];
                c &= c - 1;
            }
            if !inside.contains(x) {
                return false;
            }
        } else {
            piv_img[piv_len] = img;
            piv_coef[piv_len] = coef;
            piv_len += 1;
            // keep pivots sorted by leading bit, descending
            let mut q = piv_len - 1;
            while q > 0 && piv_img[q - 1].leading_zeros() > piv_img[q].leading_zeros() {
                piv_img.swap(q - 1, q);
                piv_coef.swap(q - 1, q);
                q -= 1;
            }
        }
    }
    true
}

/// Canonical key of a subspace from its full list of rank-one members:
/// the lexicographically minimal ordered rank-one basis, each element
/// written as its coordinates over the pivot subsequences of both sides.
/// Complete (equal keys exhibit an equivalence) and invariant (orders
/// realizing the minimum correspond under any equivalence).
pub fn content_key(members: &[RankOneForm], m: usize, n: usize) -> ContentKey {
    let mut scratch = KeySearch::new();
    let packed = scratch.key_of(members.iter().map(|f| (f.alpha, f.beta)), m, n);
    unpack_key(packed)
}

/// Keys pack into one word: byte pair `2t, 2t+1` holds row `t`.
pub(crate) fn unpack_key(packed: u128) -> ContentKey {
    let d = (packed >> 120) as usize;
    (0..d)
        .map(|t| {
            let a = (packed >> (16 * t)) as u64 & 0xff;
            let b = (packed >> (16 * t + 8)) as u64 & 0xff;
            (a, b)
        })
        .collect()
}

impl KeySearch {
    pub(crate) fn new() -> Box<KeySearch> {
        Box::new(KeySearch {
            alphas: [0; MAX_MEMBERS],
            betas: [0; MAX_MEMBERS],
            flats: [0; MAX_MEMBERS],
            labels: [0; MAX_MEMBERS],
            count: 0,
            d: 0,
            best: [0; 8],
            have_best: false,
            nodes: 0,
        })
    }

    /// Canonical key of the span of the given rank-one pairs, packed.
    pub(crate) fn key_of(
        &mut self,
        members: impl Iterator<Item = (u64, u64)>,
        m: usize,
        n: usize,
    ) -> u128 {
        self.count = 0;
        for (a, b) in members {
            self.alphas[self.count] = a;
            self.betas[self.count] = b;
            self.count += 1;
        }
        assert!(self.count > 0 && self.count <= MAX_MEMBERS);
        for i in 0..self.count {
            self.flats[i] = RankOneForm::new(m, n, self.alphas[i], self.betas[i]).form().bits;
        }
        for i in 0..self.count {
            let ca = (0..self.count).filter(|&j| self.alphas[j] == self.alphas[i]).count() as u16;
            let cb = (0..self.count).filter(|&j| self.betas[j] == self.betas[i]).count() as u16;
            self.labels[i] = ca.min(255) << 8 | cb.min(255);
        }
        self.d = crate::gf2::rank_of_rows(&self.flats[..self.count]);
        assert!(self.d <= 8);
        self.have_best = false;
        self.nodes = 0;
        self.run(m, n);
        let mut packed = (self.d as u128) << 120;
        for (t, &row) in self.best[..self.d].iter().enumerate() {
            packed |= ((row >> 40) as u128) << (16 * t);
            packed |= ((row >> 32 & 0xff) as u128) << (16 * t + 8);
        }
        packed
    }
}

/// Rank-one members of a subspace by scanning its own elements
/// (cheaper than a generator sweep once the dimension is moderate).
pub fn rank_one_content(s: &Subspace) -> Vec<RankOneForm> {
    let mut out = Vec::new();
    for bits in s.elements() {
        if bits == 0 {
            continue;
        }
        let f = BilinearForm::from_bits(s.m(), s.n(), bits);
        if let Some(r1) = RankOneForm::from_form(&f) {
            out.push(r1);
        }
    }
    out
}

/// Canonical key of a rank-one-spanned subspace.
pub fn canonical_key(s: &Subspace) -> ContentKey {
    content_key(&rank_one_content(s), s.m(), s.n())
}

/// Canonical `(U, V)` basis pair of a rank-one-spanned subspace: the rows
/// of the canonical key. Equal on every subspace of one orbit.
pub fn canonical_pair(s: &Subspace) -> (BitMatrix, BitMatrix) {
    let key = canonical_key(s);
    let forms = key_rows(&key, s.m(), s.n());
    uv_pair(&forms)
}

fn key_rows(key: &ContentKey, m: usize, n: usize) -> Vec<RankOneForm> {
    key.iter().map(|&(a, b)| RankOneForm::new(m, n, a, b)).collect()
}

/// The one-dimensional base of the classification chain.
pub fn omega_base() -> Vec<OmegaClass> {
    vec![OmegaClass { d: 1, u_rows: vec![1], v_rows: vec![1], dist: vec![1, 1] }]
}

/// Extend the classification one dimension up: embed every class, adjoin
/// one rank-one form per coset, and deduplicate by the canonical key.
pub fn omega_extend(prev: &[OmegaClass], d: usize) -> Vec<OmegaClass> {
    assert!(d >= 2 && d <= 8, "desk-scale classification only");
    assert!(prev.iter().all(|c| c.d == d - 1));
    let gens = enumerate_rank_one(d, d);
    // per-parent data up front; the heavy canonicalization work is then
    // split at (parent, candidate-coset) granularity so it balances
    struct ParentCtx {
        base: Vec<(u64, u64)>,
        elems: Vec<u64>,
        cosets: Vec<u64>,
    }
    let parents: Vec<ParentCtx> = prev
        .iter()
        .map(|parent| {
            let forms: Vec<BilinearForm> = parent
                .u_rows
                .iter()
                .zip(&parent.v_rows)
                .map(|(&a, &b)| RankOneForm::new(d, d, a, b).form())
                .collect();
            let w = Subspace::from_forms(d, d, &forms);
            let base: Vec<(u64, u64)> =
                rank_one_content(&w).iter().map(|f| (f.alpha, f.beta)).collect();
            let elems: Vec<u64> = w.elements().collect();
            let mut seen = HashSet::new();
            let mut cosets = Vec::new();
            for g in &gens {
                let bits = g.form().bits;
                let red = w.reduce(bits);
                if red != 0 && seen.insert(red) {
                    cosets.push(red);
                }
            }
            ParentCtx { base, elems, cosets }
        })
        .collect();
    let work: Vec<(usize, usize)> = parents
        .iter()
        .enumerate()
        .flat_map(|(p, ctx)| (0..ctx.cosets.len()).step_by(64).map(move |c| (p, c)))
        .collect();
    let keys: HashSet<u128> = work
        .par_iter()
        .fold(
            || (HashSet::new(), KeySearch::new()),
            |(mut local, mut scratch), &(p, c0)| {
                let ctx = &parents[p];
                let mut fresh: Vec<(u64, u64)> = Vec::new();
                for &bits in &ctx.cosets[c0..(c0 + 64).min(ctx.cosets.len())] {
                    fresh.clear();
                    for &x in &ctx.elems {
                        let f = BilinearForm::from_bits(d, d, x ^ bits);
                        if let Some(r1) = RankOneForm::from_form(&f) {
                            fresh.push((r1.alpha, r1.beta));
                        }
                    }
                    let key = scratch
                        .key_of(ctx.base.iter().copied().chain(fresh.iter().copied()), d, d);
                    local.insert(key);
                }
                (local, scratch)
            },
        )
        .map(|(local, _)| local)
        .reduce(HashSet::new, |mut a, mut b| {
            if a.len() < b.len() {
                std::mem::swap(&mut a, &mut b);
            }
            a.extend(b);
            a
        });
    drop(parents);

    let mut sorted_keys: Vec<u128> = keys.into_iter().collect();
    sorted_keys.sort_unstable();
    let mut classes: Vec<OmegaClass> = sorted_keys
        .into_par_iter()
        .map(|packed| {
            let key = unpack_key(packed);
            let forms = key_rows(&key, d, d);
            let (u, v) = uv_pair(&forms);
            let flat: Vec<BilinearForm> = forms.iter().map(RankOneForm::form).collect();
            let s = Subspace::from_forms(d, d, &flat);
            let dist = crate::bilinear::rank_distribution(&s).expect("desk-scale dimension");
            OmegaClass {
                d,
                u_rows: u.row_words().to_vec(),
                v_rows: v.row_words().to_vec(),
                dist,
            }
        })
        .collect();
    classes.sort_by_key(OmegaClass::sort_key);
    classes
}

/// Keep the classes fitting a rectangular `m x n` form space and reshape
/// them there; the result is a full set of orbit representatives of the
/// `d`-dimensional rank-one-spanned subspaces of that space.
pub fn restrict(classes: &[OmegaClass], m: usize, n: usize) -> Vec<Subspace> {
    classes
        .iter()
        .filter(|c| {
            let d = c.d;
            BitMatrix::from_rows(&c.u_rows, d).rank() <= m.min(d)
                && BitMatrix::from_rows(&c.v_rows, d).rank() <= n.min(d)
        })
        .map(|c| {
            let forms: Vec<BilinearForm> = c
                .u_rows
                .iter()
                .zip(&c.v_rows)
                .map(|(&a, &b)| {
                    debug_assert!(a < 1 << m && b < 1 << n, "echelon support fits the target");
                    RankOneForm::new(m, n, a, b).form()
                })
                .collect();
            let s = Subspace::from_forms(m, n, &forms);
            debug_assert_eq!(s.dim(), c.d);
            s
        })
        .collect()
}

/// Store of classification tables: an optional directory of checksummed
/// text files plus an in-memory cache.
pub struct OmegaStore {
    dir: Option<PathBuf>,
    cache: Mutex<std::collections::HashMap<usize, Arc<Vec<OmegaClass>>>>,
}

impl OmegaStore {
    pub fn in_memory() -> Self {
        OmegaStore { dir: None, cache: Mutex::new(Default::default()) }
    }

    pub fn at_dir(dir: impl AsRef<Path>) -> Self {
        OmegaStore { dir: Some(dir.as_ref().to_path_buf()), cache: Mutex::new(Default::default()) }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn file_path(&self, d: usize) -> Option<PathBuf> {
        self.dir.as_ref().map(|p| p.join(format!("omega_{d}.txt")))
    }

    pub fn insert(&self, d: usize, classes: Vec<OmegaClass>) {
        self.cache.lock().unwrap().insert(d, Arc::new(classes));
    }

    pub fn has(&self, d: usize) -> bool {
        if self.cache.lock().unwrap().contains_key(&d) {
            return true;
        }
        self.file_path(d).map(|p| p.exists()).unwrap_or(false)
    }

    pub fn load(&self, d: usize) -> Result<Arc<Vec<OmegaClass>>> {
        if let Some(hit) = self.cache.lock().unwrap().get(&d) {
            return Ok(hit.clone());
        }
        let path = self.file_path(d).filter(|p| p.exists()).ok_or(Error::MissingOmega { d })?;
        let classes = Arc::new(read_omega_file(&path, d)?);
        self.cache.lock().unwrap().insert(d, classes.clone());
        Ok(classes)
    }

    /// Write one table to the directory (no-op for in-memory stores).
    pub fn save(&self, d: usize, classes: &[OmegaClass]) -> Result<Option<PathBuf>> {
        let Some(path) = self.file_path(d) else {
            return Ok(None);
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, render_omega_file(d, classes))?;
        Ok(Some(path))
    }

    /// Compute (or load) every table up to `d_max`, chaining extensions and
    /// persisting when a directory is attached.
    pub fn compute_up_to(&mut self, d_max: usize) -> Result<()> {
        let mut prev: Option<Arc<Vec<OmegaClass>>> = None;
        for d in 1..=d_max {
            if self.has(d) {
                prev = Some(self.load(d)?);
                continue;
            }
            let classes = match d {
                1 => omega_base(),
                _ => {
                    let parents = match prev {
                        Some(ref p) => p.clone(),
                        None => self.load(d - 1)?,
                    };
                    omega_extend(&parents, d)
                }
            };
            self.save(d, &classes)?;
            self.insert(d, classes);
            prev = Some(self.load(d)?);
        }
        Ok(())
    }
}

fn render_omega_file(d: usize, classes: &[OmegaClass]) -> String {
    let mut body = String::new();
    writeln!(body, "omega d={} field=GF2 count={}", d, classes.len()).unwrap();
    for c in classes {
        let hex = |rows: &[u64]| rows.iter().map(|r| format!("{r:x}")).collect::<Vec<_>>().join(",");
        let dist = c.dist.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        writeln!(body, "U={};V={};p={}", hex(&c.u_rows), hex(&c.v_rows), dist).unwrap();
    }
    let digest = Sha256::digest(body.as_bytes());
    writeln!(body, "sha256={:x}", digest).unwrap();
    body
}

fn read_omega_file(path: &Path, d: usize) -> Result<Vec<OmegaClass>> {
    let text = std::fs::read_to_string(path)?;
    let Some(sha_pos) = text.rfind("sha256=") else {
        return Err(Error::CorruptFile("missing checksum line".into()));
    };
    let (body, sha_line) = text.split_at(sha_pos);
    let want = sha_line.trim_start_matches("sha256=").trim();
    let got = format!("{:x}", Sha256::digest(body.as_bytes()));
    if want != got {
        return Err(Error::CorruptFile(format!("checksum mismatch in {}", path.display())));
    }
    let mut lines = body.lines();
    let header = lines.next().ok_or_else(|| Error::CorruptFile("empty file".into()))?;
    let expect_header = format!("omega d={d} field=GF2 count=");
    let count: usize = header
        .strip_prefix(&expect_header)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::CorruptFile(format!("bad header `{header}`")))?;
    let mut classes = Vec::with_capacity(count);
    for line in lines {
        let mut parts = line.split(';');
        let u = parse_rows(parts.next(), "U=")?;
        let v = parse_rows(parts.next(), "V=")?;
        let p = parts
            .next()
            .and_then(|s| s.strip_prefix("p="))
            .ok_or_else(|| Error::CorruptFile(format!("bad class line `{line}`")))?;
        let dist: Vec<usize> = p
            .split(',')
            .map(|t| t.parse().map_err(|_| Error::CorruptFile(format!("bad count `{t}`"))))
            .collect::<Result<_>>()?;
        if u.len() != d || v.len() != d {
            return Err(Error::CorruptFile(format!("row count mismatch in `{line}`")));
        }
        classes.push(OmegaClass { d, u_rows: u, v_rows: v, dist });
    }
    if classes.len() != count {
        return Err(Error::CorruptFile(format!(
            "expected {count} classes, found {}",
            classes.len()
        )));
    }
    Ok(classes)
}

fn parse_rows(part: Option<&str>, prefix: &str) -> Result<Vec<u64>> {
    let s = part
        .and_then(|s| s.strip_prefix(prefix))
        .ok_or_else(|| Error::CorruptFile(format!("missing `{prefix}` field")))?;
    s.split(',')
        .map(|t| u64::from_str_radix(t, 16).map_err(|_| Error::CorruptFile(format!("bad hex `{t}`"))))
        .collect()
}

/// Structural re-check of a stored table: counts, checksum (done on load),
/// independent rank-one rows, and pairwise-distinct canonical keys on a
/// sample of class pairs.
pub fn verify_table(classes: &[OmegaClass], d: usize, sample_pairs: usize, seed: u64) -> Result<()> {
    for c in classes {
        if c.d != d {
            return Err(Error::CorruptFile("dimension mismatch".into()));
        }
        let s = c.subspace();
        if s.dim() != d {
            return Err(Error::CorruptFile("stored rows are not independent".into()));
        }
        let dist = crate::bilinear::rank_distribution(&s).expect("desk-scale");
        if dist != c.dist {
            return Err(Error::CorruptFile("stored rank distribution mismatch".into()));
        }
    }
    // distinctness: exhaustive when small, sampled otherwise
    let n = classes.len();
    let check = |i: usize, j: usize| -> Result<()> {
        if canonical_key(&classes[i].subspace()) == canonical_key(&classes[j].subspace()) {
            return Err(Error::CorruptFile(format!("classes {i} and {j} are isomorphic")));
        }
        Ok(())
    };
    if n * (n - 1) / 2 <= sample_pairs {
        for i in 0..n {
            for j in i + 1..n {
                check(i, j)?;
            }
        }
    } else {
        // deterministic linear-congruential sampling
        let mut state = seed | 1;
        for _ in 0..sample_pairs {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let i = (state >> 33) as usize % n;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % n;
            if i != j {
                check(i.min(j), i.max(j))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{apply_subspace, RpAutomorphism};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn omega_upto(d: usize) -> Vec<Vec<OmegaClass>> {
        let mut all = vec![omega_base()];
        for dd in 2..=d {
            let next = omega_extend(all.last().unwrap(), dd);
            all.push(next);
        }
        all
    }

    #[test]
    fn small_cardinalities() {
        let all = omega_upto(4);
        assert_eq!(all[0].len(), 1);
        assert_eq!(all[1].len(), 3);
        assert_eq!(all[2].len(), 9);
        assert_eq!(all[3].len(), 31);
    }

    #[test]
    fn base_class_is_unit_pair() {
        let base = omega_base();
        assert_eq!(base[0].u_rows, vec![1]);
        assert_eq!(base[0].v_rows, vec![1]);
    }

    #[test]
    fn dimension_two_classes_match_displayed_pairs() {
        let all = omega_upto(2);
        let mut reps: Vec<(Vec<u64>, Vec<u64>)> =
            all[1].iter().map(|c| (c.u_rows.clone(), c.v_rows.clone())).collect();
        reps.sort();
        // left line, diagonal, right line
        let mut want = vec![
            (vec![1, 1], vec![1, 2]),
            (vec![1, 2], vec![1, 2]),
            (vec![1, 2], vec![1, 1]),
        ];
        want.sort();
        assert_eq!(reps, want);
    }

    #[test]
    fn raw_uv_pair_matches_worked_example() {
        // six rank-one forms of a 3x4 form space, in presentation order
        let f = |a: u64, b: u64| RankOneForm::new(3, 4, a, b);
        let forms = [f(1, 3), f(4, 1), f(2, 1), f(2, 2), f(2, 4), f(2, 8)];
        let (u, v) = uv_pair(&forms);
        assert_eq!(u.row_words(), &[1, 4, 2, 2, 2, 2]);
        assert_eq!(v.row_words(), &[3, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn canonical_key_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let all = omega_upto(3);
        for class in &all[2] {
            let s = class.subspace();
            let key = canonical_key(&s);
            for _ in 0..100 {
                let sigma = random_auto(&mut rng, 3, 3);
                let img = apply_subspace(&sigma, &s);
                assert_eq!(canonical_key(&img), key);
            }
        }
    }

    #[test]
    fn canonical_pair_of_diagonal_plane() {
        let forms = [
            RankOneForm::new(2, 2, 1, 1).form(),
            RankOneForm::new(2, 2, 2, 2).form(),
        ];
        let s = Subspace::from_forms(2, 2, &forms);
        let (u, v) = canonical_pair(&s);
        assert!(u.is_identity() && v.is_identity());
    }

    #[test]
    fn poset_consistency_up_to_four() {
        // deleting one basis row of a class lands on a class one level down
        let all = omega_upto(4);
        for d in 2..=4usize {
            let parent_keys: std::collections::BTreeSet<ContentKey> = all[d - 2]
                .iter()
                .map(|c| {
                    // embed in the d-dimensional form space
                    let forms: Vec<BilinearForm> = c
                        .forms()
                        .iter()
                        .map(|f| RankOneForm::new(d, d, f.alpha, f.beta).form())
                        .collect();
                    canonical_key(&Subspace::from_forms(d, d, &forms))
                })
                .collect();
            for class in &all[d - 1] {
                let forms = class.forms();
                let mut hit = false;
                for skip in 0..forms.len() {
                    let sub: Vec<BilinearForm> = forms
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, f)| f.form())
                        .collect();
                    let key = canonical_key(&Subspace::from_forms(d, d, &sub));
                    if parent_keys.contains(&key) {
                        hit = true;
                        break;
                    }
                }
                assert!(hit, "class of dimension {d} with no predecessor");
            }
        }
    }

    #[test]
    fn restrict_examples() {
        let all = omega_upto(3);
        // d = 2 into a 2x2 space: every class survives
        assert_eq!(restrict(&all[1], 2, 2).len(), 3);
        // restriction to the full square space is the identity
        assert_eq!(restrict(&all[2], 3, 3).len(), all[2].len());
        // the all-left-line class of dimension 3 does not fit two columns
        let into22 = restrict(&all[2], 2, 2);
        assert!(into22.len() < all[2].len());
        for s in &into22 {
            assert_eq!(s.dim(), 3);
            assert_eq!((s.m(), s.n()), (2, 2));
        }
    }

    #[test]
    fn store_round_trip() {
        let tmp = tempdir();
        let mut store = OmegaStore::at_dir(&tmp);
        store.compute_up_to(3).unwrap();
        drop(store);
        let store2 = OmegaStore::at_dir(&tmp);
        let classes = store2.load(3).unwrap();
        assert_eq!(classes.len(), 9);
        verify_table(&classes, 3, 1000, 7).unwrap();
        assert!(matches!(store2.load(5), Err(Error::MissingOmega { d: 5 })));

        // corrupt one byte: load must fail the checksum
        let path = tmp.join("omega_3.txt");
        let mut bytes = std::fs::read(&path).unwrap();
        let idx = bytes.iter().position(|&b| b == b'U').unwrap() + 2;
        bytes[idx] = if bytes[idx] == b'1' { b'2' } else { b'1' };
        std::fs::write(&path, bytes).unwrap();
        let store3 = OmegaStore::at_dir(&tmp);
        assert!(matches!(store3.load(3), Err(Error::CorruptFile(_))));
        std::fs::remove_dir_all(&tmp).unwrap();
    }

    fn tempdir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!("omega-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn random_auto(rng: &mut impl Rng, m: usize, n: usize) -> RpAutomorphism {
        loop {
            let x = BitMatrix::from_rows(
                &(0..m).map(|_| rng.gen::<u64>() & ((1 << m) - 1)).collect::<Vec<_>>(),
                m,
            );
            let y = BitMatrix::from_rows(
                &(0..n).map(|_| rng.gen::<u64>() & ((1 << n) - 1)).collect::<Vec<_>>(),
                n,
            );
            if x.is_invertible() && y.is_invertible() {
                return RpAutomorphism::new(x, y).unwrap();
            }
        }
    }
}

