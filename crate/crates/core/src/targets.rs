//! Constructors for the benchmark bilinear maps: full polynomial product,
//! short (truncated) product, circulant (cyclic) product and small matrix
//! products, together with their known structural data: stabilizer
//! generators, stems for the covering-sets search, and known ranks.

use crate::bilinear::BilinearForm;
use crate::bilinear::Subspace;
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::group::{GeneratedGroup, RpAutomorphism};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TargetId {
    /// Full product of two polynomials of degree `k - 1`.
    PolyProduct(usize),
    /// Product truncated modulo `X^l`.
    ShortProduct(usize),
    /// Product modulo `X^l - 1`.
    CirculantProduct(usize),
    /// `p x q` by `q x r` matrix product.
    MatProduct(usize, usize, usize),
}

impl std::fmt::Display for TargetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetId::PolyProduct(k) => write!(f, "poly:{k}"),
            TargetId::ShortProduct(l) => write!(f, "short:{l}"),
            TargetId::CirculantProduct(l) => write!(f, "circulant:{l}"),
            TargetId::MatProduct(p, q, r) => write!(f, "mat:{p}x{q}x{r}"),
        }
    }
}

/// One branch of a stem: a small family of forms inside the target space
/// such that, up to the stabilizer, every basis of the target contains a
/// subfamily spanning one of the branches.
#[derive(Clone, Debug)]
pub struct StemEntry {
    pub family: Vec<BilinearForm>,
}

impl StemEntry {
    pub fn k(&self) -> usize {
        self.family.len()
    }
}

/// A target bilinear map presented as a subspace of the form space with a
/// distinguished coordinate basis.
#[derive(Clone, Debug)]
pub struct TargetMap {
    pub id: TargetId,
    pub m: usize,
    pub n: usize,
    /// Coordinate forms of the map, in output order.
    pub basis: Vec<BilinearForm>,
    pub space: Subspace,
    pub stabilizer_gens: Vec<RpAutomorphism>,
    pub stem: Vec<StemEntry>,
    pub known_rank: Option<usize>,
}

impl TargetMap {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Materialize the stabilizer subgroup generated by the stored generators.
    pub fn stabilizer(&self, cap: usize) -> Result<GeneratedGroup> {
        GeneratedGroup::from_generators(self.m, self.n, self.stabilizer_gens.clone()).closed(cap)
    }

    /// Parse a CLI descriptor: `poly:2`, `short:4`, `circulant:5`, `mat:3x2x3`.
    pub fn parse(desc: &str) -> Result<TargetMap> {
        let bad = || Error::UnsupportedSize { target: "descriptor", detail: desc.to_string() };
        let (kind, arg) = desc.split_once(':').ok_or_else(bad)?;
        match kind {
            "poly" => poly_product(arg.parse().map_err(|_| bad())?),
            "short" => short_product(arg.parse().map_err(|_| bad())?),
            "circulant" => circulant_product(arg.parse().map_err(|_| bad())?),
            "mat" => {
                let dims: Vec<usize> =
                    arg.split('x').map(|s| s.parse().map_err(|_| bad())).collect::<Result<_>>()?;
                if dims.len() != 3 {
                    return Err(bad());
                }
                matrix_product(dims[0], dims[1], dims[2])
            }
            _ => Err(bad()),
        }
    }
}

fn form_mask(l: usize) -> u64 {
    if l == 64 {
        u64::MAX
    } else {
        (1 << l) - 1
    }
}

/// Upper-triangular Toeplitz matrix `sum_j c_j N^j` for the packed
/// coefficient word `c`.
fn toeplitz(l: usize, coeffs: u64) -> BitMatrix {
    let mask = form_mask(l);
    let rows: Vec<u64> = (0..l).map(|i| (coeffs << i) & mask).collect();
    BitMatrix::from_rows(&rows, l)
}

/// Product of two linear polynomials (`k = 2` only).
pub fn poly_product(k: usize) -> Result<TargetMap> {
    if k != 2 {
        return Err(Error::UnsupportedSize {
            target: "poly",
            detail: format!("k = {k}, only the degree-1 product is supported"),
        });
    }
    let e = |i: usize, j: usize| {
        crate::bilinear::RankOneForm::new(2, 2, 1 << i, 1 << j).form()
    };
    let basis = vec![e(0, 0), e(0, 1).add(&e(1, 0)), e(1, 1)];
    let space = Subspace::from_forms(2, 2, &basis);
    // the whole automorphism group is tiny, filter it directly
    let mut gens = Vec::new();
    for x in crate::group::enumerate_gl(2) {
        for y in crate::group::enumerate_gl(2) {
            let sigma = RpAutomorphism::new(x.clone(), y)?;
            if crate::group::stabilizes_subspace(&sigma, &space) {
                gens.push(sigma);
            }
        }
    }
    let stem = vec![StemEntry { family: basis.clone() }];
    Ok(TargetMap {
        id: TargetId::PolyProduct(2),
        m: 2,
        n: 2,
        basis,
        space,
        stabilizer_gens: gens,
        stem,
        known_rank: Some(3),
    })
}

/// Short product modulo `X^l`: the target space is the upper-triangular
/// Toeplitz algebra, with coordinate forms `Phi_j = N^j` (identity first).
pub fn short_product(l: usize) -> Result<TargetMap> {
    if !(2..=6).contains(&l) {
        return Err(Error::UnsupportedSize { target: "short", detail: format!("l = {l}") });
    }
    let basis: Vec<BilinearForm> =
        (0..l).map(|j| BilinearForm::from_matrix(&BitMatrix::shift(l).pow(j))).collect();
    let space = Subspace::from_forms(l, l, &basis);
    let gens = short_product_stabilizer(l)?;
    let stem = vec![StemEntry { family: vec![basis[0], basis[1]] }];
    let known_rank = match l {
        3 => Some(5),
        4 => Some(8),
        5 => Some(11),
        _ => None,
    };
    Ok(TargetMap {
        id: TargetId::ShortProduct(l),
        m: l,
        n: l,
        basis,
        space,
        stabilizer_gens: gens,
        stem,
        known_rank,
    })
}

/// Stabilizer generators of the short product space: three families indexed
/// by polynomials `R` in the shift matrix,
///   (I, R(N))                for R(0) = 1   (right multiplications),
///   (P(N)ᵀ, P(N)^-1)         for R(0) = 0, R'(0) = 1, with P the
///                            conjugator of R(N) to N,
///   (ᵀ(R(N)^-1), R(N))       for R(0) = 1   (pointwise part).
/// Their closure has cardinality 2^(3l-4).
pub fn short_product_stabilizer(l: usize) -> Result<Vec<RpAutomorphism>> {
    if !(2..=6).contains(&l) {
        return Err(Error::UnsupportedSize { target: "short", detail: format!("l = {l}") });
    }
    let mut gens = Vec::new();
    for coeffs in 0..1u64 << l {
        let r = toeplitz(l, coeffs);
        if coeffs & 1 == 1 {
            // R(0) = 1: invertible Toeplitz
            gens.push(RpAutomorphism::new(BitMatrix::identity(l), r.clone())?);
            gens.push(RpAutomorphism::new(r.invert()?.transpose(), r)?);
        } else if coeffs >> 1 & 1 == 1 {
            // R(0) = 0, R'(0) = 1: nilpotent of maximal index
            let p = r.nilpotent_conjugator()?;
            gens.push(RpAutomorphism::new(p.transpose(), p.invert()?)?);
        }
    }
    Ok(gens)
}

/// The intersection `stb(I) ∩ stb(N)` for the short product: the pointwise
/// family `(ᵀ(R(N)^-1), R(N))`, `R(0) = 1`, of size `2^(l-1)`.
pub fn short_stem_subgroup(l: usize) -> Result<GeneratedGroup> {
    let mut elems = Vec::new();
    for coeffs in (1..1u64 << l).step_by(2) {
        let r = toeplitz(l, coeffs);
        elems.push(RpAutomorphism::new(r.invert()?.transpose(), r)?);
    }
    Ok(GeneratedGroup::from_elements(l, l, elems))
}

/// Kronecker product with the left factor as the outer block structure.
pub fn kron(a: &BitMatrix, b: &BitMatrix) -> BitMatrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = BitMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            if a.get(i, j) {
                for ib in 0..br {
                    for jb in 0..bc {
                        if b.get(ib, jb) {
                            out.set(i * br + ib, j * bc + jb, true);
                        }
                    }
                }
            }
        }
    }
    out
}

/// `p x q` by `q x r` matrix product. Rows index the `a` entries in
/// row-major order, columns the `b` entries in column-major order, so the
/// coordinate forms are block matrices with identity blocks.
pub fn matrix_product(p: usize, q: usize, r: usize) -> Result<TargetMap> {
    if p * q > 6 || q * r > 6 || p == 0 || q == 0 || r == 0 {
        return Err(Error::UnsupportedSize {
            target: "mat",
            detail: format!("{p}x{q}x{r}: operand spaces must stay within 6 dimensions"),
        });
    }
    let (m, n) = (p * q, q * r);
    let mut basis = Vec::with_capacity(p * r);
    for i in 0..p {
        for j in 0..r {
            let mut bits = 0u64;
            for h in 0..q {
                bits |= 1 << ((i * q + h) * n + (j * q + h));
            }
            basis.push(BilinearForm::from_bits(m, n, bits));
        }
    }
    let space = Subspace::from_forms(m, n, &basis);
    let gens = matrix_product_stabilizer(p, q, r)?;
    debug_assert!(gens.iter().all(|g| crate::group::stabilizes_subspace(g, &space)));

    let stem = match (p, q, r) {
        (3, 2, 3) => stem_for_matprod_323(&basis),
        (2, 3, 2) => {
            // two branches: anchor pairs taken from the shapes every basis
            // must contain up to the stabilizer
            let phi = |i: usize, j: usize| basis[i * r + j];
            vec![
                StemEntry {
                    family: vec![
                        phi(0, 0).add(&phi(1, 1)),
                        phi(0, 0).add(&phi(0, 1)).add(&phi(1, 0)),
                    ],
                },
                StemEntry { family: vec![phi(0, 0).add(&phi(1, 1)), phi(0, 0)] },
            ]
        }
        // whole-space stem: the covering search degenerates to the
        // stabilizer-pruned search
        _ => vec![StemEntry { family: basis.clone() }],
    };
    let known_rank = match (p, q, r) {
        (2, 2, 2) => Some(7),
        (3, 2, 3) => Some(15),
        (2, 3, 2) => Some(11),
        _ => None,
    };
    Ok(TargetMap {
        id: TargetId::MatProduct(p, q, r),
        m,
        n,
        basis,
        space,
        stabilizer_gens: gens,
        stem,
        known_rank,
    })
}

/// Stabilizer generators of the matrix-product space: the pairs
/// `(P ⊗ ᵀR, Q ⊗ R^-1)` over generators of `GL_p`, `GL_q`, `GL_r`.
pub fn matrix_product_stabilizer(p: usize, q: usize, r: usize) -> Result<Vec<RpAutomorphism>> {
    if p * q > 6 || q * r > 6 || p == 0 || q == 0 || r == 0 {
        return Err(Error::UnsupportedSize {
            target: "mat",
            detail: format!("{p}x{q}x{r}"),
        });
    }
    let mut gens = Vec::new();
    let iq = BitMatrix::identity(q);
    let im = BitMatrix::identity(p * q);
    let in_ = BitMatrix::identity(q * r);
    for pg in crate::group::gl_generators(p) {
        gens.push(RpAutomorphism::new(kron(&pg, &iq), in_.clone())?);
    }
    for qg in crate::group::gl_generators(r) {
        gens.push(RpAutomorphism::new(im.clone(), kron(&qg, &iq))?);
    }
    for rg in crate::group::gl_generators(q) {
        let x = kron(&BitMatrix::identity(p), &rg.transpose());
        let y = kron(&BitMatrix::identity(r), &rg.invert()?);
        gens.push(RpAutomorphism::new(x, y)?);
    }
    Ok(gens)
}

/// The five-branch stem of the `3x2x3` product: every basis contains, up to
/// the stabilizer, a subfamily spanning one of these.
pub fn stem_for_matprod_323(basis: &[BilinearForm]) -> Vec<StemEntry> {
    let phi = |i: usize, j: usize| basis[i * 3 + j];
    let d = |i: usize| phi(i, i);
    vec![
        StemEntry { family: vec![d(0).add(&d(1)).add(&d(2))] },
        StemEntry { family: vec![d(0).add(&d(1)), phi(0, 1).add(&d(2))] },
        StemEntry { family: vec![d(0).add(&d(1)), d(1).add(&d(2))] },
        StemEntry { family: vec![d(0).add(&d(1)), d(2)] },
        StemEntry { family: vec![d(0), d(1), d(2)] },
    ]
}

/// Circulant (cyclic) product modulo `X^l - 1`. The coordinate form `Phi_i`
/// has matrix entries at `(j, k)` with `j + k = i (mod l)`.
pub fn circulant_product(l: usize) -> Result<TargetMap> {
    if !(3..=5).contains(&l) {
        return Err(Error::UnsupportedSize { target: "circulant", detail: format!("l = {l}") });
    }
    let mut basis = Vec::with_capacity(l);
    for i in 0..l {
        let mut bits = 0u64;
        for j in 0..l {
            let k = (i + l - j % l) % l;
            bits |= 1 << (j * l + k);
        }
        basis.push(BilinearForm::from_bits(l, l, bits));
    }
    let space = Subspace::from_forms(l, l, &basis);

    // candidate generators: unit multiplications on either side and the
    // exponent permutations; keep those that verifiably stabilize the space
    let mut gens = Vec::new();
    for u in 1..1u64 << l {
        let mu = circulant_matrix(l, u);
        if !mu.is_invertible() {
            continue;
        }
        let id = BitMatrix::identity(l);
        for sigma in [
            RpAutomorphism::new(mu.clone(), id.clone())?,
            RpAutomorphism::new(id, mu)?,
        ] {
            if crate::group::stabilizes_subspace(&sigma, &space) {
                gens.push(sigma);
            }
        }
    }
    for k in 2..l {
        if gcd(k, l) != 1 {
            continue;
        }
        let mut perm = BitMatrix::zeros(l, l);
        for j in 0..l {
            perm.set(j * k % l, j, true);
        }
        let sigma = RpAutomorphism::new(perm.clone(), perm)?;
        if crate::group::stabilizes_subspace(&sigma, &space) {
            gens.push(sigma);
        }
    }
    assert!(!gens.is_empty());

    // stem: a maximal-rank anchor always works when some basis element has
    // full rank; for odd l the remaining bases live in the hyperplane of
    // index-sum-zero elements plus the all-ones rank-one form
    let stem = if l % 2 == 1 {
        let mut h = basis[0];
        for b in &basis[1..l - 1] {
            h = h.add(b);
        }
        vec![StemEntry { family: vec![basis[l - 1]] }, StemEntry { family: vec![h] }]
    } else {
        vec![StemEntry { family: vec![basis[l - 1]] }]
    };
    let known_rank = match l {
        3 => Some(4),
        4 => Some(8),
        5 => Some(10),
        _ => None,
    };
    Ok(TargetMap {
        id: TargetId::CirculantProduct(l),
        m: l,
        n: l,
        basis,
        space,
        stabilizer_gens: gens,
        stem,
        known_rank,
    })
}

/// Matrix of multiplication by the packed polynomial `u` in `F2[X]/(X^l - 1)`.
fn circulant_matrix(l: usize, u: u64) -> BitMatrix {
    let mut m = BitMatrix::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            if u >> ((i + l - j) % l) & 1 == 1 {
                m.set(i, j, true);
            }
        }
    }
    m
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
