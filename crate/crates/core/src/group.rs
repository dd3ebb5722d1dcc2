//! Rank-preserving automorphisms of the form space and the group machinery
//! the searches rely on: BFS closures, orbit partitions, setwise stabilizers,
//! coset transversals and pencil normalization.
//!
//! All groups in scope are small enough to materialize; plain BFS is exact
//! and keeps everything testable. Caps guard against runaway closures.

use std::collections::HashSet;
use std::sync::Arc;

use crate::bilinear::{BilinearForm, Subspace};
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

/// Default cap on materialized closures.
pub const DEFAULT_CAP: usize = 1 << 20;

/// A pair `(X, Y)` of invertible matrices acting on a form's matrix by
/// `M -> Xᵀ M Y`. The action is a right action:
/// `(phi . a) . b = phi . (a * b)` with `a * b = (Xa Xb, Ya Yb)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RpAutomorphism {
    x: BitMatrix,
    y: BitMatrix,
    xt: BitMatrix,
}

impl RpAutomorphism {
    pub fn new(x: BitMatrix, y: BitMatrix) -> Result<Self> {
        if !x.is_invertible() || !y.is_invertible() {
            return Err(Error::PreconditionViolated("automorphism parts must be invertible"));
        }
        let xt = x.transpose();
        Ok(RpAutomorphism { x, y, xt })
    }

    pub fn identity(m: usize, n: usize) -> Self {
        RpAutomorphism {
            x: BitMatrix::identity(m),
            y: BitMatrix::identity(n),
            xt: BitMatrix::identity(m),
        }
    }

    pub fn x(&self) -> &BitMatrix {
        &self.x
    }

    pub fn y(&self) -> &BitMatrix {
        &self.y
    }

    /// Packed `(X, Y)` bit pattern; sides are at most 8x8 in scope.
    pub fn key(&self) -> u128 {
        debug_assert!(self.x.rows() <= 8 && self.y.rows() <= 8);
        let mut xk = 0u64;
        for i in 0..self.x.rows() {
            xk |= self.x.row(i) << (8 * i);
        }
        let mut yk = 0u64;
        for i in 0..self.y.rows() {
            yk |= self.y.row(i) << (8 * i);
        }
        (xk as u128) << 64 | yk as u128
    }

    pub fn compose(&self, after: &RpAutomorphism) -> RpAutomorphism {
        let x = self.x.mul(&after.x);
        let y = self.y.mul(&after.y);
        let xt = x.transpose();
        RpAutomorphism { x, y, xt }
    }

    pub fn inverse(&self) -> RpAutomorphism {
        let x = self.x.invert().expect("invertible by construction");
        let y = self.y.invert().expect("invertible by construction");
        let xt = x.transpose();
        RpAutomorphism { x, y, xt }
    }

    /// Image of a flattened form under `M -> Xᵀ M Y`.
    pub fn apply_bits(&self, bits: u64, m: usize, n: usize) -> u64 {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        // t = Xᵀ M, row i = sum of rows k of M with X[k][i] = 1
        let mut t = [0u64; 8];
        for k in 0..m {
            let mrow = (bits >> (k * n)) & mask;
            if mrow == 0 {
                continue;
            }
            let mut xr = self.x.row(k);
            while xr != 0 {
                let i = xr.trailing_zeros() as usize;
                t[i] ^= mrow;
                xr &= xr - 1;
            }
        }
        // rows of t * Y
        let mut out = 0u64;
        for (i, &ti) in t.iter().enumerate().take(m) {
            let mut r = ti;
            let mut acc = 0u64;
            while r != 0 {
                let j = r.trailing_zeros() as usize;
                acc ^= self.y.row(j);
                r &= r - 1;
            }
            out |= acc << (i * n);
        }
        out
    }
}

/// `phi . sigma` on forms; rank is preserved.
pub fn apply(sigma: &RpAutomorphism, phi: &BilinearForm) -> BilinearForm {
    BilinearForm::from_bits(phi.m, phi.n, sigma.apply_bits(phi.bits, phi.m, phi.n))
}

/// Image subspace, re-echelonized; dimension is preserved.
pub fn apply_subspace(sigma: &RpAutomorphism, s: &Subspace) -> Subspace {
    let mut out = Subspace::empty(s.m(), s.n());
    for &row in s.key() {
        out.insert(sigma.apply_bits(row, s.m(), s.n()));
    }
    debug_assert_eq!(out.dim(), s.dim());
    out
}

/// Does `sigma` map `s` onto itself (as a set)?
pub fn stabilizes_subspace(sigma: &RpAutomorphism, s: &Subspace) -> bool {
    s.key().iter().all(|&row| s.contains(sigma.apply_bits(row, s.m(), s.n())))
}

/// Materialized closure of a generated group, sorted by element key.
#[derive(Debug)]
pub struct GroupClosure {
    pub elems: Vec<RpAutomorphism>,
    keys: HashSet<u128>,
}

impl GroupClosure {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn contains(&self, sigma: &RpAutomorphism) -> bool {
        self.keys.contains(&sigma.key())
    }
}

/// A subgroup of `GL_m x GL_n` given by generators, with an optional
/// materialized closure shared across search workers.
#[derive(Clone, Debug)]
pub struct GeneratedGroup {
    m: usize,
    n: usize,
    generators: Vec<RpAutomorphism>,
    closure: Option<Arc<GroupClosure>>,
}

impl GeneratedGroup {
    pub fn from_generators(m: usize, n: usize, generators: Vec<RpAutomorphism>) -> Self {
        GeneratedGroup { m, n, generators, closure: None }
    }

    pub fn trivial(m: usize, n: usize) -> Self {
        GeneratedGroup { m, n, generators: vec![], closure: None }.closed(16).unwrap()
    }

    /// Build a group directly from an element list known to be closed.
    pub fn from_elements(m: usize, n: usize, mut elems: Vec<RpAutomorphism>) -> Self {
        elems.sort_by_key(RpAutomorphism::key);
        elems.dedup_by_key(|e| e.key());
        let keys = elems.iter().map(RpAutomorphism::key).collect();
        GeneratedGroup {
            m,
            n,
            generators: elems.clone(),
            closure: Some(Arc::new(GroupClosure { elems, keys })),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[RpAutomorphism] {
        &self.generators
    }

    /// BFS closure under right multiplication by the generators.
    pub fn closed(mut self, cap: usize) -> Result<Self> {
        if self.closure.is_some() {
            return Ok(self);
        }
        let id = RpAutomorphism::identity(self.m, self.n);
        let mut keys = HashSet::new();
        keys.insert(id.key());
        let mut elems = vec![id];
        let mut head = 0;
        while head < elems.len() {
            let cur = elems[head].clone();
            head += 1;
            for g in &self.generators {
                let next = cur.compose(g);
                if keys.insert(next.key()) {
                    if elems.len() + 1 > cap {
                        return Err(Error::CapExceeded { cap });
                    }
                    elems.push(next);
                }
            }
        }
        elems.sort_by_key(RpAutomorphism::key);
        self.closure = Some(Arc::new(GroupClosure { elems, keys }));
        Ok(self)
    }

    pub fn closure(&self) -> Option<&GroupClosure> {
        self.closure.as_deref()
    }

    pub fn elements(&self) -> &[RpAutomorphism] {
        &self.closure.as_deref().expect("closure not materialized").elems
    }

    pub fn size(&self) -> usize {
        self.elements().len()
    }

    pub fn is_trivial(&self) -> bool {
        self.closure.as_deref().map(|c| c.len() == 1).unwrap_or(self.generators.is_empty())
    }

    /// Subgroup of the elements that permute the given set of forms.
    pub fn setwise_stabilizer(&self, forms: &[BilinearForm]) -> GeneratedGroup {
        let mut set: Vec<u64> = forms.iter().map(|f| f.bits).collect();
        set.sort_unstable();
        let kept: Vec<RpAutomorphism> = self
            .elements()
            .iter()
            .filter(|sigma| {
                let mut img: Vec<u64> =
                    forms.iter().map(|f| sigma.apply_bits(f.bits, self.m, self.n)).collect();
                img.sort_unstable();
                img == set
            })
            .cloned()
            .collect();
        GeneratedGroup::from_elements(self.m, self.n, kept)
    }

    /// Subgroup of the elements mapping the subspace onto itself.
    pub fn subspace_stabilizer_within(&self, s: &Subspace) -> GeneratedGroup {
        let kept: Vec<RpAutomorphism> = self
            .elements()
            .iter()
            .filter(|sigma| stabilizes_subspace(sigma, s))
            .cloned()
            .collect();
        GeneratedGroup::from_elements(self.m, self.n, kept)
    }
}

/// One representative per left coset `g H` of `h` in `g`, ordered by the
/// representative's key (the minimum over its coset).
pub fn left_transversal(g: &GeneratedGroup, h: &GeneratedGroup) -> Result<Vec<RpAutomorphism>> {
    let gc = g.closure().ok_or(Error::PreconditionViolated("closure required"))?;
    let hc = h.closure().ok_or(Error::PreconditionViolated("closure required"))?;
    if !hc.elems.iter().all(|e| gc.contains(e)) {
        return Err(Error::NotSubgroup);
    }
    let mut seen: HashSet<u128> = HashSet::with_capacity(gc.len());
    let mut reps = Vec::new();
    for e in &gc.elems {
        if seen.contains(&e.key()) {
            continue;
        }
        for hh in &hc.elems {
            seen.insert(e.compose(hh).key());
        }
        reps.push(e.clone());
    }
    debug_assert_eq!(reps.len() * hc.len(), gc.len());
    Ok(reps)
}

/// Partition of `points` into orbits under the materialized group, acting
/// by `act`. Orbits come out sorted by their minimal member, each orbit
/// listing only members that occur among the input points.
pub fn orbits_of_points<F>(points: &[u64], group: &GeneratedGroup, act: F) -> Vec<Vec<u64>>
where
    F: Fn(&RpAutomorphism, u64) -> u64,
{
    let point_set: HashSet<u64> = points.iter().copied().collect();
    let mut seen: HashSet<u64> = HashSet::with_capacity(points.len());
    let mut orbits = Vec::new();
    let mut ordered = points.to_vec();
    ordered.sort_unstable();
    for &p in &ordered {
        if seen.contains(&p) {
            continue;
        }
        let mut members: Vec<u64> = group
            .elements()
            .iter()
            .map(|g| act(g, p))
            .filter(|q| point_set.contains(q))
            .collect();
        members.sort_unstable();
        members.dedup();
        for &q in &members {
            seen.insert(q);
        }
        orbits.push(members);
    }
    orbits.sort_by_key(|o| o[0]);
    orbits
}

/// Orbit of a subspace under the materialized group, deduplicated by
/// echelon key and sorted.
pub fn subspace_orbit(s: &Subspace, group: &GeneratedGroup) -> Vec<Subspace> {
    let mut out: Vec<Subspace> = group.elements().iter().map(|g| apply_subspace(g, s)).collect();
    out.sort_by(|a, b| a.key().cmp(b.key()));
    out.dedup_by(|a, b| a.key() == b.key());
    out
}

/// Orbit of a subspace under group *generators* only (BFS), for groups too
/// large to materialize, e.g. the full `GL_m x GL_n`.
pub fn subspace_orbit_bfs(s: &Subspace, gens: &[RpAutomorphism], cap: usize) -> Result<Vec<Subspace>> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(s.key().to_vec());
    let mut queue = vec![s.clone()];
    let mut head = 0;
    while head < queue.len() {
        let cur = queue[head].clone();
        head += 1;
        for g in gens {
            let img = apply_subspace(g, &cur);
            if !seen.contains(img.key()) {
                if seen.len() + 1 > cap {
                    return Err(Error::CapExceeded { cap });
                }
                seen.insert(img.key().to_vec());
                queue.push(img);
            }
        }
    }
    queue.sort_by(|a, b| a.key().cmp(b.key()));
    Ok(queue)
}

/// Map a pair of square forms to the normal pair `(I, N)`, `N` the shift:
/// possible exactly when `M0` is invertible and `M0^-1 M1` is nilpotent of
/// maximal index. The returned automorphism is re-verified by direct
/// multiplication before being handed out.
pub fn pencil_normalize(m0: &BitMatrix, m1: &BitMatrix) -> Option<RpAutomorphism> {
    let l = m0.rows();
    debug_assert_eq!(m0.cols(), l);
    let inv0 = m0.invert().ok()?;
    let z = inv0.mul(m1);
    if !z.is_nilpotent_max_index(l) {
        return None;
    }
    let y = z.nilpotent_conjugator().ok()?;
    let x = m0.mul(&y).invert().ok()?.transpose();
    let sigma = RpAutomorphism::new(x, y).ok()?;
    let id = sigma.xt.mul(m0).mul(&sigma.y);
    let shift = sigma.xt.mul(m1).mul(&sigma.y);
    assert!(id.is_identity() && shift == BitMatrix::shift(l), "pencil normalization self-check");
    Some(sigma)
}

/// Full-rank factorization `M = U S V` with `U`, `V` invertible and `S` the
/// rank-`s` rectangular identity.
fn rank_factorization(m: &BitMatrix) -> (BitMatrix, BitMatrix) {
    let (r, rowops, _) = m.rref();
    let (_, colops) = r.rcef();
    let u = rowops.invert().expect("row ops invertible");
    let v = colops.invert().expect("col ops invertible");
    (u, v)
}

fn rect_rank_identity(rows: usize, cols: usize, s: usize) -> BitMatrix {
    let mut sig = BitMatrix::zeros(rows, cols);
    for i in 0..s {
        sig.set(i, i, true);
    }
    sig
}

/// An automorphism taking the single form `a` to `b` (equal ranks assumed).
fn single_map(a: &BilinearForm, b: &BilinearForm) -> Option<RpAutomorphism> {
    let (ma, mb) = (a.matrix(), b.matrix());
    let s = ma.rank();
    if s != mb.rank() {
        return None;
    }
    let (ua, va) = rank_factorization(&ma);
    let (ub, vb) = rank_factorization(&mb);
    debug_assert_eq!(ua.mul(&rect_rank_identity(a.m, a.n, s)).mul(&va), ma);
    let x = ub.mul(&ua.invert().ok()?).transpose();
    let y = va.invert().ok()?.mul(&vb);
    let sigma = RpAutomorphism::new(x, y).ok()?;
    debug_assert_eq!(apply(&sigma, a), *b);
    Some(sigma)
}

/// Basis of `{X : X za = zb X}` as packed matrices (row-major words), via
/// the linear system over the matrix entries.
fn intertwiner_space(za: &BitMatrix, zb: &BitMatrix) -> Vec<Vec<u64>> {
    let mm = za.rows();
    let vars = mm * mm;
    assert!(vars <= 64);
    // equation (i,j): sum_k X[i][k] za[k][j] + sum_k zb[i][k] X[k][j] = 0
    let mut eqs: Vec<u64> = Vec::with_capacity(vars);
    for i in 0..mm {
        for j in 0..mm {
            let mut row = 0u64;
            for k in 0..mm {
                if za.get(k, j) {
                    row ^= 1 << (i * mm + k);
                }
                if zb.get(i, k) {
                    row ^= 1 << (k * mm + j);
                }
            }
            eqs.push(row);
        }
    }
    // kernel of the equation matrix acting on the var space
    let sys = BitMatrix::from_rows(&eqs, vars);
    let (r, _, pivots) = sys.rref();
    let pivot_set: HashSet<usize> = pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..vars {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut vecbits = 1u64 << free;
        for (idx, &pc) in pivots.iter().enumerate() {
            if r.row(idx) >> free & 1 == 1 {
                vecbits |= 1 << pc;
            }
        }
        let rows: Vec<u64> = (0..mm).map(|i| (vecbits >> (i * mm)) & ((1 << mm) - 1)).collect();
        basis.push(rows);
    }
    basis
}

/// Invertible `W` with `W za W^-1 = zb`, if one exists. Uses the nilpotent
/// normal form when both sides are nilpotent of maximal index, otherwise
/// enumerates the intertwiner space (capped).
fn conjugating_matrix(za: &BitMatrix, zb: &BitMatrix, cap: usize) -> Result<Option<BitMatrix>> {
    let l = za.rows();
    if za == zb {
        return Ok(Some(BitMatrix::identity(l)));
    }
    if za.is_nilpotent_max_index(l) && zb.is_nilpotent_max_index(l) {
        let pa = za.nilpotent_conjugator()?;
        let pb = zb.nilpotent_conjugator()?;
        let w = pb.mul(&pa.invert()?);
        debug_assert_eq!(w.mul(za).mul(&w.invert()?), *zb);
        return Ok(Some(w));
    }
    let basis = intertwiner_space(za, zb);
    if basis.len() > 22 {
        return Err(Error::CapExceeded { cap });
    }
    let total = 1usize << basis.len();
    if total > cap {
        return Err(Error::CapExceeded { cap });
    }
    for sel in 1..total as u64 {
        let mut rows = vec![0u64; l];
        let mut s = sel;
        while s != 0 {
            let t = s.trailing_zeros() as usize;
            for (i, r) in rows.iter_mut().enumerate() {
                *r ^= basis[t][i];
            }
            s &= s - 1;
        }
        let w = BitMatrix::from_rows(&rows, l);
        if w.is_invertible() && w.mul(za) == zb.mul(&w) {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// An automorphism taking the ordered pair `(a0, a1)` to `(b0, b1)`.
/// Requires an invertible form among `{a0, a1, a0 + a1}` (matched on the
/// `b` side); singular pencils are out of scope and report a cap error.
fn ordered_pair_map(
    a0: &BilinearForm,
    a1: &BilinearForm,
    b0: &BilinearForm,
    b1: &BilinearForm,
    cap: usize,
) -> Result<Option<RpAutomorphism>> {
    if a0.rank() != b0.rank() || a1.rank() != b1.rank() {
        return Ok(None);
    }
    // replace (p, q) by an equivalent ordered pair with invertible first form
    let candidates: [(BilinearForm, BilinearForm, BilinearForm, BilinearForm); 3] = [
        (*a0, *a1, *b0, *b1),
        (*a1, *a0, *b1, *b0),
        (a0.add(a1), *a1, b0.add(b1), *b1),
    ];
    let l = a0.m;
    for (ca0, ca1, cb0, cb1) in candidates {
        let ma0 = ca0.matrix();
        let mb0 = cb0.matrix();
        if !ma0.is_invertible() {
            continue;
        }
        if !mb0.is_invertible() {
            return Ok(None); // rank mismatch on the replacement pair
        }
        let za = ca1.matrix().mul(&ma0.invert()?);
        let zb = cb1.matrix().mul(&mb0.invert()?);
        let Some(w) = conjugating_matrix(&za, &zb, cap)? else {
            return Ok(None);
        };
        // sigma_a: (ca0, ca1) -> (I, za); tau: conjugation by w; then back
        let sigma_a = RpAutomorphism::new(BitMatrix::identity(l), ma0.invert()?)?;
        let tau = RpAutomorphism::new(w.transpose(), w.invert()?)?;
        let sigma_b = RpAutomorphism::new(BitMatrix::identity(l), mb0.invert()?)?;
        let sigma = sigma_a.compose(&tau).compose(&sigma_b.inverse());
        if apply(&sigma, a0) == *b0 && apply(&sigma, a1) == *b1 {
            return Ok(Some(sigma));
        }
        return Ok(None);
    }
    Err(Error::CapExceeded { cap })
}

/// All automorphisms fixing both forms of an ordered pair pointwise,
/// via the centralizer of `b1 b0^-1` (needs an invertible form in the
/// pencil of the pair, possibly after the `b0 + b1` replacement).
fn ordered_pair_stabilizer(
    b0: &BilinearForm,
    b1: &BilinearForm,
    cap: usize,
) -> Result<Vec<RpAutomorphism>> {
    let candidates: [(BilinearForm, BilinearForm); 3] =
        [(*b0, *b1), (*b1, *b0), (b0.add(b1), *b1)];
    for (c0, c1) in candidates {
        let m0 = c0.matrix();
        if !m0.is_invertible() {
            continue;
        }
        let z = c1.matrix().mul(&m0.invert()?);
        let basis = intertwiner_space(&z, &z);
        if basis.len() > 22 || (1usize << basis.len()) > cap {
            return Err(Error::CapExceeded { cap });
        }
        let l = b0.m;
        let inv0 = m0.invert()?;
        let mut out = Vec::new();
        for sel in 1..(1u64 << basis.len()) {
            let mut rows = vec![0u64; l];
            let mut s = sel;
            while s != 0 {
                let t = s.trailing_zeros() as usize;
                for (i, r) in rows.iter_mut().enumerate() {
                    *r ^= basis[t][i];
                }
                s &= s - 1;
            }
            let w = BitMatrix::from_rows(&rows, l);
            if !w.is_invertible() {
                continue;
            }
            // X = Wᵀ, Y = m0^-1 W^-1 m0 fixes c0; centralizer fixes c1 too
            let y = inv0.mul(&w.invert()?).mul(&m0);
            let sigma = RpAutomorphism::new(w.transpose(), y)?;
            if apply(&sigma, b0) == *b0 && apply(&sigma, b1) == *b1 {
                out.push(sigma);
            }
        }
        return Ok(out);
    }
    Err(Error::CapExceeded { cap })
}

/// Search for an automorphism mapping one small set of forms onto another
/// (`k <= 3`). `Ok(None)` means a definite "no mapping exists"; an error
/// means the instance falls outside the supported pencil shapes.
pub fn set_map_search(
    src: &[BilinearForm],
    dst: &[BilinearForm],
    cap: usize,
) -> Result<Option<RpAutomorphism>> {
    let k = src.len();
    assert!(k >= 1 && k <= 3 && dst.len() == k);
    let mut src_ranks: Vec<usize> = src.iter().map(BilinearForm::rank).collect();
    let mut dst_ranks: Vec<usize> = dst.iter().map(BilinearForm::rank).collect();
    src_ranks.sort_unstable();
    dst_ranks.sort_unstable();
    if src_ranks != dst_ranks {
        return Ok(None);
    }
    match k {
        1 => Ok(single_map(&src[0], &dst[0])),
        2 => {
            for (i, j) in [(0, 1), (1, 0)] {
                if let Some(sigma) = ordered_pair_map(&src[0], &src[1], &dst[i], &dst[j], cap)? {
                    return Ok(Some(sigma));
                }
            }
            Ok(None)
        }
        _ => {
            // anchor the two largest ranks first, then sweep the pair stabilizer
            let mut order: Vec<usize> = (0..3).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(dst[i].rank()));
            let (d0, d1, d2) = (order[0], order[1], order[2]);
            let stab = ordered_pair_stabilizer(&dst[d0], &dst[d1], cap)?;
            for perm in permutations3() {
                let (s0, s1, s2) = (perm[d0], perm[d1], perm[d2]);
                if src[s0].rank() != dst[d0].rank()
                    || src[s1].rank() != dst[d1].rank()
                    || src[s2].rank() != dst[d2].rank()
                {
                    continue;
                }
                let Some(sigma0) = ordered_pair_map(&src[s0], &src[s1], &dst[d0], &dst[d1], cap)?
                else {
                    continue;
                };
                let moved = apply(&sigma0, &src[s2]);
                for gamma in &stab {
                    if apply(gamma, &moved) == dst[d2] {
                        let sigma = sigma0.compose(gamma);
                        debug_assert!({
                            let mut img: Vec<u64> =
                                src.iter().map(|f| apply(&sigma, f).bits).collect();
                            let mut want: Vec<u64> = dst.iter().map(|f| f.bits).collect();
                            img.sort_unstable();
                            want.sort_unstable();
                            img == want
                        });
                        return Ok(Some(sigma));
                    }
                }
            }
            Ok(None)
        }
    }
}

fn permutations3() -> [[usize; 3]; 6] {
    [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ]
}

/// Generators of `GL_m(F2)`: one transvection and a full cycle.
pub fn gl_generators(m: usize) -> Vec<BitMatrix> {
    if m == 1 {
        return vec![BitMatrix::identity(1)];
    }
    let mut transvection = BitMatrix::identity(m);
    transvection.set(0, 1, true);
    let mut cycle = BitMatrix::zeros(m, m);
    for i in 0..m {
        cycle.set(i, (i + 1) % m, true);
    }
    vec![transvection, cycle]
}

/// Iterate all invertible `m x m` matrices (ascending packed key).
/// Only feasible for `m <= 5`.
pub fn enumerate_gl(m: usize) -> impl Iterator<Item = BitMatrix> {
    assert!(m <= 5, "GL enumeration is desk-scale only up to 5x5");
    let mask = (1u64 << m) - 1;
    (0u64..1 << (m * m)).filter_map(move |code| {
        let rows: Vec<u64> = (0..m).map(|i| (code >> (i * m)) & mask).collect();
        let mat = BitMatrix::from_rows(&rows, m);
        mat.is_invertible().then_some(mat)
    })
}

/// Order of `GL_m(F2)`.
pub fn gl_order(m: usize) -> usize {
    let mut o = 1usize;
    for i in 0..m {
        o *= (1usize << m) - (1 << i);
    }
    o
}

fn kernel_basis(a: &BitMatrix) -> Vec<u64> {
    let (r, _, pivots) = a.rref();
    let pivot_set: HashSet<usize> = pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..a.cols() {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = 1u64 << free;
        for (idx, &pc) in pivots.iter().enumerate() {
            if r.row(idx) >> free & 1 == 1 {
                v |= 1 << pc;
            }
        }
        basis.push(v);
    }
    basis
}

/// All automorphisms fixing a single form, materialized: for each `X` in
/// `GL_m`, the invertible solutions `Y` of `(Xᵀ M) Y = M`. Exact but only
/// feasible while `|GL_m| * |solution space|` stays under the cap.
pub fn form_stabilizer(f: &BilinearForm, cap: usize) -> Result<Vec<RpAutomorphism>> {
    let m = f.matrix();
    let (rows, cols) = (m.rows(), m.cols());
    if gl_order(rows) > cap {
        return Err(Error::CapExceeded { cap });
    }
    let mt = m.transpose();
    let mut out = Vec::new();
    for x in enumerate_gl(rows) {
        let a = x.transpose().mul(&m);
        // columns of M as right-hand sides; common kernel of A
        let ker = kernel_basis(&a);
        let free_bits = ker.len() * cols;
        if free_bits > 22 {
            return Err(Error::CapExceeded { cap });
        }
        let mut parts = Vec::with_capacity(cols);
        let at = a.transpose();
        let mut consistent = true;
        for c in 0..cols {
            // column c of M = row c of Mᵀ
            match a.solve(col_of(&mt, c)) {
                Some(p) => parts.push(p),
                None => {
                    consistent = false;
                    break;
                }
            }
        }
        let _ = at;
        if !consistent {
            continue;
        }
        for combo in 0u64..1 << free_bits {
            let mut y = BitMatrix::zeros(cols, cols);
            for c in 0..cols {
                let mut col = parts[c];
                for (t, &kv) in ker.iter().enumerate() {
                    if combo >> (c * ker.len() + t) & 1 == 1 {
                        col ^= kv;
                    }
                }
                for i in 0..cols {
                    if col >> i & 1 == 1 {
                        y.set(i, c, true);
                    }
                }
            }
            if !y.is_invertible() {
                continue;
            }
            if out.len() + 1 > cap {
                return Err(Error::CapExceeded { cap });
            }
            debug_assert_eq!(x.transpose().mul(&m).mul(&y), m);
            out.push(RpAutomorphism::new(x.clone(), y)?);
        }
    }
    Ok(out)
}

fn col_of(mt: &BitMatrix, c: usize) -> u64 {
    mt.row(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::enumerate_rank_one;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_auto(rng: &mut impl Rng, m: usize, n: usize) -> RpAutomorphism {
        loop {
            let mask_m = (1u64 << m) - 1;
            let mask_n = (1u64 << n) - 1;
            let x = BitMatrix::from_rows(
                &(0..m).map(|_| rng.gen::<u64>() & mask_m).collect::<Vec<_>>(),
                m,
            );
            let y = BitMatrix::from_rows(
                &(0..n).map(|_| rng.gen::<u64>() & mask_n).collect::<Vec<_>>(),
                n,
            );
            if x.is_invertible() && y.is_invertible() {
                return RpAutomorphism::new(x, y).unwrap();
            }
        }
    }

    #[test]
    fn identity_fixes_forms() {
        let id = RpAutomorphism::identity(3, 3);
        for g in enumerate_rank_one(3, 3) {
            assert_eq!(apply(&id, &g.form()), g.form());
        }
    }

    #[test]
    fn swap_example() {
        // X = Y = the 2x2 swap maps a0b0 to a1b1
        let swap = BitMatrix::from_bits(2, 2, &[&[0, 1], &[1, 0]]);
        let sigma = RpAutomorphism::new(swap.clone(), swap).unwrap();
        let e00 = RankOne(0, 0);
        let e11 = RankOne(1, 1);
        assert_eq!(apply(&sigma, &e00), e11);

        fn RankOne(i: usize, j: usize) -> BilinearForm {
            crate::bilinear::RankOneForm::new(2, 2, 1 << i, 1 << j).form()
        }
    }

    #[test]
    fn action_law_and_rank_preservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let (m, n) = (rng.gen_range(2..=5), rng.gen_range(2..=5));
            let a = random_auto(&mut rng, m, n);
            let b = random_auto(&mut rng, m, n);
            let bits = rng.gen::<u64>() & ((1 << (m * n)) - 1);
            let phi = BilinearForm::from_bits(m, n, bits);
            assert_eq!(apply(&b, &apply(&a, &phi)), apply(&a.compose(&b), &phi));
            assert_eq!(apply(&a, &phi).rank(), phi.rank());
            assert_eq!(apply(&a.inverse(), &apply(&a, &phi)), phi);
        }
    }

    #[test]
    fn subspace_action_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let gens = enumerate_rank_one(3, 3);
        for _ in 0..300 {
            let forms: Vec<BilinearForm> =
                (0..rng.gen_range(1..=4)).map(|_| gens[rng.gen_range(0..gens.len())].form()).collect();
            let s = Subspace::from_forms(3, 3, &forms);
            let a = random_auto(&mut rng, 3, 3);
            let img = apply_subspace(&a, &s);
            assert_eq!(img.dim(), s.dim());
            assert_eq!(apply_subspace(&a.inverse(), &img).key(), s.key());
            assert_eq!(
                crate::bilinear::has_rank_one_basis(&img, &gens),
                crate::bilinear::has_rank_one_basis(&s, &gens)
            );
        }
    }

    #[test]
    fn closure_of_trivial_group() {
        let g = GeneratedGroup::trivial(3, 3);
        assert_eq!(g.size(), 1);
    }

    #[test]
    fn closure_is_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let gens: Vec<RpAutomorphism> = (0..2).map(|_| random_auto(&mut rng, 2, 2)).collect();
        let g = GeneratedGroup::from_generators(2, 2, gens.clone()).closed(1 << 12).unwrap();
        for e in g.elements() {
            for gen in &gens {
                assert!(g.closure().unwrap().contains(&e.compose(gen)));
            }
        }
    }

    #[test]
    fn gl_generator_closure_sizes() {
        for m in 2..=4 {
            let gens: Vec<RpAutomorphism> = gl_generators(m)
                .into_iter()
                .map(|x| RpAutomorphism::new(x, BitMatrix::identity(2)).unwrap())
                .collect();
            let g = GeneratedGroup::from_generators(m, 2, gens).closed(1 << 16).unwrap();
            assert_eq!(g.size(), gl_order(m));
        }
        assert_eq!(enumerate_gl(3).count(), gl_order(3));
    }

    #[test]
    fn transversal_lagrange() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let gens: Vec<RpAutomorphism> = (0..2).map(|_| random_auto(&mut rng, 2, 2)).collect();
        let g = GeneratedGroup::from_generators(2, 2, gens.clone()).closed(1 << 12).unwrap();
        let h = GeneratedGroup::from_generators(2, 2, vec![gens[0].clone()]).closed(1 << 12).unwrap();
        let t = left_transversal(&g, &h).unwrap();
        assert_eq!(t.len() * h.size(), g.size());
        let t_full = left_transversal(&g, &g).unwrap();
        assert_eq!(t_full.len(), 1);
    }

    #[test]
    fn pencil_normalize_examples() {
        for l in 2..=5 {
            let i = BitMatrix::identity(l);
            let n = BitMatrix::shift(l);
            let sigma = pencil_normalize(&i, &n).unwrap();
            assert!(sigma.x().is_identity() && sigma.y().is_identity());
            assert!(pencil_normalize(&i, &i).is_none());
        }
        // (R(N), R(N)(N + N^2)) for R = 1 + X at l = 3
        let n = BitMatrix::shift(3);
        let r = BitMatrix::identity(3).add(&n);
        let m1 = r.mul(&n.add(&n.pow(2)));
        assert!(pencil_normalize(&r, &m1).is_some());
    }

    #[test]
    fn pencil_normalize_random_conjugates() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for l in 2..=5 {
            for _ in 0..100 {
                let a = random_auto(&mut rng, l, l);
                let m0 = a.xt.mul(&BitMatrix::identity(l)).mul(a.y());
                let m1 = a.xt.mul(&BitMatrix::shift(l)).mul(a.y());
                let sigma = pencil_normalize(&m0, &m1).expect("conjugate pencil must normalize");
                let _ = sigma;
            }
        }
    }

    #[test]
    fn set_map_examples() {
        let l = 3;
        let i = BilinearForm::from_matrix(&BitMatrix::identity(l));
        let n = BilinearForm::from_matrix(&BitMatrix::shift(l));
        let n2 = BilinearForm::from_matrix(&BitMatrix::shift(l).pow(2));
        // src = dst
        let sigma = set_map_search(&[i, n], &[i, n], DEFAULT_CAP).unwrap().unwrap();
        assert_eq!(apply(&sigma, &i), i);
        // {I, N + N^2} -> {I, N}
        let nn2 = n.add(&n2);
        let sigma = set_map_search(&[i, nn2], &[i, n], DEFAULT_CAP).unwrap().unwrap();
        let mut img = [apply(&sigma, &i).bits, apply(&sigma, &nn2).bits];
        img.sort_unstable();
        let mut want = [i.bits, n.bits];
        want.sort_unstable();
        assert_eq!(img, want);
        // rank multiset mismatch
        assert!(set_map_search(&[n], &[i], DEFAULT_CAP).unwrap().is_none());
    }

    #[test]
    fn form_stabilizer_sizes() {
        // invertible anchor: stabilizer is a copy of GL_m
        let i3 = BilinearForm::from_matrix(&BitMatrix::identity(3));
        let st = form_stabilizer(&i3, 1 << 14).unwrap();
        assert_eq!(st.len(), gl_order(3));
        // rank-2 anchor in Bl(3,3): |GL3|^2 / #rank-2 matrices = 96
        let f = BilinearForm::from_matrix(&BitMatrix::from_bits(
            3,
            3,
            &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 0]],
        ));
        let st = form_stabilizer(&f, 1 << 14).unwrap();
        assert_eq!(st.len(), 96);
        for sigma in st.iter().take(8) {
            assert_eq!(apply(sigma, &f), f);
        }
    }
}
