//! The decomposition searches: plain exhaustive enumeration, enumeration
//! pruned by the target's automorphism group, and the covering-sets method
//! driven by the precomputed classification tables, together with orbit
//! expansion, the Hamming-weight filter and the cost extrapolator.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use crate::bilinear::{
    enumerate_rank_one, has_rank_one_basis, BilinearForm, RankOneForm, Subspace,
};
use crate::error::{Error, Result};
use crate::group::{
    apply_subspace, form_stabilizer, left_transversal, orbits_of_points, set_map_search,
    subspace_orbit, GeneratedGroup, RpAutomorphism, DEFAULT_CAP,
};
use crate::omega::OmegaStore;
use crate::targets::{TargetId, TargetMap};

/// Counters of one search run. `rank_one_basis_calls` counts leaf tests
/// only, matching the cost model of the searches; `per_depth_calls` is
/// filled by the rank-scheduling loop, one entry per attempted rank.
#[derive(Clone, Debug, Default)]
pub struct SearchStats {
    pub nodes_visited: u64,
    pub rank_one_basis_calls: u64,
    pub wall_time: Duration,
    pub per_depth_calls: Vec<u64>,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.nodes_visited += other.nodes_visited;
        self.rank_one_basis_calls += other.rank_one_basis_calls;
        self.wall_time += other.wall_time;
    }
}

/// Result of a search: the subspaces found, canonically sorted. `total`
/// and `classes` are set once orbits have been expanded or counted.
#[derive(Clone, Debug, Default)]
pub struct SolutionSet {
    pub representatives: Vec<Subspace>,
    pub classes: Option<usize>,
    pub total: Option<usize>,
}

impl SolutionSet {
    fn from_reps(mut reps: Vec<Subspace>) -> Self {
        reps.sort_by(|a, b| a.key().cmp(b.key()));
        reps.dedup_by(|a, b| a.key() == b.key());
        SolutionSet { representatives: reps, classes: None, total: None }
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn keys(&self) -> Vec<Vec<u64>> {
        self.representatives.iter().map(|s| s.key().to_vec()).collect()
    }
}

struct Ctx {
    gens: Vec<RankOneForm>,
}

impl Ctx {
    fn new(m: usize, n: usize) -> Self {
        Ctx { gens: enumerate_rank_one(m, n) }
    }
}

/// Reduce the generator set modulo a subspace, keeping one nonzero
/// representative per coset in generator order.
fn reduced_candidates(s: &Subspace, gens: &[RankOneForm]) -> Vec<u64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for g in gens {
        let r = s.reduce(g.form().bits);
        if r != 0 && seen.insert(r) {
            out.push(r);
        }
    }
    out
}

/// Exhaustive search: all subspaces of `AL(r)` containing `t`, built by
/// extending `t` with reduced rank-one forms in index-monotone order.
pub fn bdez(t: &Subspace, r: usize) -> (SolutionSet, SearchStats) {
    let start = Instant::now();
    let ctx = Ctx::new(t.m(), t.n());
    let mut stats = SearchStats::default();
    let mut found = Vec::new();
    if r >= t.dim() {
        let cands = reduced_candidates(t, &ctx.gens);
        bdez_rec(t.clone(), &cands, r, &ctx, &mut stats, &mut found);
    }
    stats.per_depth_calls = vec![stats.rank_one_basis_calls];
    stats.wall_time = start.elapsed();
    (SolutionSet::from_reps(found), stats)
}

fn bdez_rec(
    v: Subspace,
    cands: &[u64],
    r: usize,
    ctx: &Ctx,
    stats: &mut SearchStats,
    found: &mut Vec<Subspace>,
) {
    stats.nodes_visited += 1;
    if v.dim() == r {
        stats.rank_one_basis_calls += 1;
        if has_rank_one_basis(&v, &ctx.gens) {
            found.push(v);
        }
        return;
    }
    let need = r - v.dim();
    for i in 0..cands.len() {
        if cands.len() - i < need {
            break;
        }
        let mut v2 = v.clone();
        v2.insert(cands[i]);
        let mut seen = HashSet::new();
        let mut next = Vec::with_capacity(cands.len() - i - 1);
        for &c in &cands[i + 1..] {
            let rc = v2.reduce(c);
            if rc != 0 && seen.insert(rc) {
                next.push(rc);
            }
        }
        bdez_rec(v2, &next, r, ctx, stats, found);
    }
}

/// Stabilizer-pruned search: at least one representative per equivalence
/// class of the solutions under `group` (which must stabilize `t`). At
/// each node the candidate list is replaced by orbit representatives under
/// the running subgroup, refined by the stabilizer of the extended space.
pub fn bdez_stab(t: &Subspace, group: &GeneratedGroup, r: usize) -> (SolutionSet, SearchStats) {
    let start = Instant::now();
    let ctx = Ctx::new(t.m(), t.n());
    let mut stats = SearchStats::default();
    let mut found = Vec::new();
    if r >= t.dim() {
        let cands = reduced_candidates(t, &ctx.gens);
        stab_rec(t.clone(), &cands, group, r, &ctx, &mut stats, &mut found);
    }
    stats.per_depth_calls = vec![stats.rank_one_basis_calls];
    stats.wall_time = start.elapsed();
    (SolutionSet::from_reps(found), stats)
}

fn stab_rec(
    v: Subspace,
    cands: &[u64],
    u: &GeneratedGroup,
    r: usize,
    ctx: &Ctx,
    stats: &mut SearchStats,
    found: &mut Vec<Subspace>,
) {
    stats.nodes_visited += 1;
    if v.dim() == r {
        stats.rank_one_basis_calls += 1;
        if has_rank_one_basis(&v, &ctx.gens) {
            found.push(v);
        }
        return;
    }
    if u.is_trivial() {
        // no symmetry left to exploit; expand plainly
        stats.nodes_visited -= 1;
        bdez_rec(v, cands, r, ctx, stats, found);
        return;
    }
    let need = r - v.dim();
    let (m, n) = (v.m(), v.n());
    let orbits = orbits_of_points(cands, u, |g, p| v.reduce(g.apply_bits(p, m, n)));
    for (idx, orbit) in orbits.iter().enumerate() {
        let rep = orbit[0];
        let mut v2 = v.clone();
        v2.insert(rep);
        let u2 = u.subspace_stabilizer_within(&v2);
        // keep the current orbit too: its other members may extend deeper nodes
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for later in &orbits[idx..] {
            for &c in later {
                let rc = v2.reduce(c);
                if rc != 0 && seen.insert(rc) {
                    next.push(rc);
                }
            }
        }
        if next.len() + 1 >= need {
            stab_rec(v2, &next, &u2, r, ctx, stats, found);
        }
    }
}

/// Saturate every representative by the group action, counting distinct
/// orbits and the size of their union. Soundness of members is preserved
/// because the action maps solutions to solutions.
pub fn expand_orbits(sols: &SolutionSet, group: &GeneratedGroup) -> SolutionSet {
    let mut orbit_by_min: BTreeMap<Vec<u64>, Vec<Subspace>> = BTreeMap::new();
    for rep in &sols.representatives {
        let orbit = subspace_orbit(rep, group);
        let min_key = orbit[0].key().to_vec();
        orbit_by_min.entry(min_key).or_insert(orbit);
    }
    let classes = orbit_by_min.len();
    let mut all: Vec<Subspace> = Vec::new();
    for orbit in orbit_by_min.values() {
        all.extend(orbit.iter().cloned());
    }
    all.sort_by(|a, b| a.key().cmp(b.key()));
    all.dedup_by(|a, b| a.key() == b.key());
    SolutionSet { representatives: all, classes: Some(classes), total: None }
        .with_total()
}

impl SolutionSet {
    fn with_total(mut self) -> Self {
        self.total = Some(self.representatives.len());
        self
    }
}

/// One representative per orbit of the subspaces of dimension `target_dim`
/// spanned by rank-one forms and containing every form of `family`, modulo
/// the setwise stabilizer of `family`. Implemented by sweeping the stored
/// classification classes, matching tuples of the right rank profile onto
/// the family, and deduplicating by the stabilizer orbit.
pub fn intermediate_set(
    store: &OmegaStore,
    family: &[BilinearForm],
    m: usize,
    n: usize,
    target_dim: usize,
    family_stab: &GeneratedGroup,
) -> Result<Vec<Subspace>> {
    let classes = store.load(target_dim)?;
    let restricted = crate::omega::restrict(&classes, m, n);
    if family.is_empty() {
        return Ok(restricted);
    }
    let k = family.len();
    assert!(k <= 3, "stem families stay within three forms");
    let ranks: Vec<usize> = family.iter().map(BilinearForm::rank).collect();
    let mut out: BTreeMap<Vec<u64>, Subspace> = BTreeMap::new();
    for w in &restricted {
        let elems: Vec<BilinearForm> = w
            .elements()
            .filter(|&b| b != 0)
            .map(|b| BilinearForm::from_bits(m, n, b))
            .collect();
        let mut tuple = vec![BilinearForm::zero(m, n); k];
        sweep_tuples(&elems, &ranks, &mut tuple, 0, &mut |tuple| {
            if crate::gf2::rank_of_rows(&tuple.iter().map(|f| f.bits).collect::<Vec<_>>())
                != k
            {
                return Ok(());
            }
            if let Some(sigma) = set_map_search(tuple, family, DEFAULT_CAP)? {
                let cand = apply_subspace(&sigma, w);
                debug_assert!(family.iter().all(|f| cand.contains(f.bits)));
                let key = orbit_min_key(&cand, family_stab);
                out.entry(key).or_insert(cand);
            }
            Ok(())
        })?;
    }
    Ok(out.into_values().collect())
}

fn sweep_tuples(
    elems: &[BilinearForm],
    ranks: &[usize],
    tuple: &mut Vec<BilinearForm>,
    depth: usize,
    visit: &mut impl FnMut(&[BilinearForm]) -> Result<()>,
) -> Result<()> {
    if depth == ranks.len() {
        return visit(tuple);
    }
    for e in elems {
        if e.rank() == ranks[depth] && !tuple[..depth].contains(e) {
            tuple[depth] = *e;
            sweep_tuples(elems, ranks, tuple, depth + 1, visit)?;
        }
    }
    Ok(())
}

fn orbit_min_key(s: &Subspace, group: &GeneratedGroup) -> Vec<u64> {
    group
        .elements()
        .iter()
        .map(|g| apply_subspace(g, s).key().to_vec())
        .min()
        .expect("group has at least the identity")
}

/// Full setwise stabilizer of a small family inside `GL_m x GL_n`,
/// anchored on a maximal-rank member. Falls out with a cap error when the
/// pointwise stabilizer of the anchor is too large to materialize.
pub fn family_set_stabilizer(family: &[BilinearForm], cap: usize) -> Result<GeneratedGroup> {
    let (m, n) = (family[0].m, family[0].n);
    let anchor_idx =
        (0..family.len()).max_by_key(|&i| family[i].rank()).expect("nonempty family");
    let anchor = family[anchor_idx];
    let base = form_stabilizer(&anchor, cap)?;
    let mut set: Vec<u64> = family.iter().map(|f| f.bits).collect();
    set.sort_unstable();
    let mut elems: Vec<RpAutomorphism> = Vec::new();
    for (i, f) in family.iter().enumerate() {
        if f.rank() != anchor.rank() {
            continue;
        }
        // all maps sending anchor -> f are stb_pt(anchor) composed with one of them
        let Some(sigma0) = set_map_search(&[anchor], &[*f], cap)? else {
            continue;
        };
        let _ = i;
        for gamma in &base {
            let sigma = gamma.compose(&sigma0);
            let mut img: Vec<u64> =
                family.iter().map(|g| sigma.apply_bits(g.bits, m, n)).collect();
            img.sort_unstable();
            if img == set {
                elems.push(sigma);
            }
        }
    }
    if elems.len() > cap {
        return Err(Error::CapExceeded { cap });
    }
    Ok(GeneratedGroup::from_elements(m, n, elems))
}

/// How a stem entry got its intermediate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchRoute {
    /// Classification sweep plus transversal action.
    Omega,
    /// Direct anchored search seeded at the family span.
    Anchored,
    /// Whole-space stem: the pruned search itself.
    WholeSpace,
}

/// Per-branch diagnostics of a covering run.
#[derive(Debug, Clone)]
pub struct BranchReport {
    pub family_dim: usize,
    pub route: BranchRoute,
    pub intermediate_count: usize,
    pub transversal_count: usize,
    pub tests: u64,
    pub solutions_contributed: usize,
}

/// The covering-sets search. For every stem branch, compute the
/// intermediate set of superspaces of the branch family, act by the
/// transversal of the family stabilizer over its intersection with the
/// target stabilizer, and test the sums with the target. Branches whose
/// family stabilizer cannot be materialized switch to an anchored pruned
/// search seeded at the family span, which yields the same quotient set of
/// representatives. The final expansion by the target stabilizer restores
/// the complete solution set.
pub fn covering_sets_method(
    target: &TargetMap,
    r: usize,
    store: &OmegaStore,
    cap: usize,
) -> Result<(SolutionSet, SearchStats, Vec<BranchReport>)> {
    let start = Instant::now();
    let t = &target.space;
    let ell = t.dim();
    let ctx = Ctx::new(target.m, target.n);
    let stab = target.stabilizer(cap)?;
    let mut stats = SearchStats::default();
    let mut reports = Vec::new();
    let mut candidates: BTreeMap<Vec<u64>, Subspace> = BTreeMap::new();

    for entry in &target.stem {
        let k = entry.k();
        if r + k < ell {
            continue;
        }
        let mut report = BranchReport {
            family_dim: k,
            route: BranchRoute::WholeSpace,
            intermediate_count: 0,
            transversal_count: 0,
            tests: 0,
            solutions_contributed: 0,
        };
        if k == ell && k > 3 {
            // whole-space stem: equivalent to the stabilizer-pruned search
            let (sols, sub_stats) = bdez_stab(t, &stab, r);
            report.tests = sub_stats.rank_one_basis_calls;
            report.solutions_contributed = sols.representatives.len();
            stats.absorb(&sub_stats);
            for s in sols.representatives {
                candidates.entry(s.key().to_vec()).or_insert(s);
            }
            reports.push(report);
            continue;
        }
        let d = r - ell + k;
        let family_stab_in_t = stab.setwise_stabilizer(&entry.family);
        match family_set_stabilizer(&entry.family, cap) {
            Ok(fam_stab) => {
                report.route = BranchRoute::Omega;
                let q = intermediate_set(store, &entry.family, target.m, target.n, d, &fam_stab)?;
                let transversal = left_transversal(&fam_stab, &family_stab_in_t)?;
                report.intermediate_count = q.len();
                report.transversal_count = transversal.len();
                for w in &q {
                    for sigma in &transversal {
                        stats.rank_one_basis_calls += 1;
                        report.tests += 1;
                        let img = apply_subspace(sigma, w);
                        let v = t.join(&img);
                        if v.dim() == r && has_rank_one_basis(&v, &ctx.gens) {
                            report.solutions_contributed += 1;
                            candidates.entry(v.key().to_vec()).or_insert(v);
                        }
                    }
                }
            }
            Err(Error::CapExceeded { .. }) => {
                // anchored pruned search computes the same quotient directly
                report.route = BranchRoute::Anchored;
                let seed = Subspace::from_forms(target.m, target.n, &entry.family);
                let (sols, sub_stats) = bdez_stab(&seed, &family_stab_in_t, d);
                stats.absorb(&sub_stats);
                report.intermediate_count = sols.representatives.len();
                for w in &sols.representatives {
                    stats.rank_one_basis_calls += 1;
                    report.tests += 1;
                    let v = t.join(w);
                    if v.dim() == r && has_rank_one_basis(&v, &ctx.gens) {
                        report.solutions_contributed += 1;
                        candidates.entry(v.key().to_vec()).or_insert(v);
                    }
                }
            }
            Err(e) => return Err(e),
        }
        reports.push(report);
    }

    let found: Vec<Subspace> = candidates.into_values().collect();
    let sols = SolutionSet::from_reps(found);
    stats.per_depth_calls = vec![stats.rank_one_basis_calls];
    stats.wall_time = start.elapsed();
    Ok((sols, stats, reports))
}

/// Rank-scheduling loop: try increasing `r` with the chosen algorithm
/// until solutions appear.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Algorithm {
    Bdez,
    Stab,
    Covering,
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bdez" => Ok(Algorithm::Bdez),
            "stab" => Ok(Algorithm::Stab),
            "covering" => Ok(Algorithm::Covering),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

/// Outcome of a full rank certification.
pub struct RankRun {
    pub rank: usize,
    pub solutions: SolutionSet,
    pub stats: SearchStats,
}

/// Iterate `r` from the target dimension upward until the search finds
/// solutions; expand orbits so the returned set is the complete one.
pub fn certify_rank(
    target: &TargetMap,
    algorithm: Algorithm,
    store: &OmegaStore,
    cap: usize,
    r_start: Option<usize>,
) -> Result<RankRun> {
    let mut stats = SearchStats::default();
    let mut per_depth = Vec::new();
    let mut r = r_start.unwrap_or_else(|| target.dim());
    loop {
        let run = search_at_rank(target, algorithm, store, cap, r)?;
        per_depth.push(run.1.rank_one_basis_calls);
        stats.absorb(&run.1);
        if !run.0.is_empty() {
            stats.per_depth_calls = per_depth;
            return Ok(RankRun { rank: r, solutions: run.0, stats });
        }
        r += 1;
        if r > target.m * target.n {
            return Err(Error::PreconditionViolated("rank exceeds the ambient dimension"));
        }
    }
}

/// One search at a fixed `r`, orbit-expanded to the full solution set.
pub fn search_at_rank(
    target: &TargetMap,
    algorithm: Algorithm,
    store: &OmegaStore,
    cap: usize,
    r: usize,
) -> Result<(SolutionSet, SearchStats)> {
    match algorithm {
        Algorithm::Bdez => {
            let (sols, stats) = bdez(&target.space, r);
            let total = sols.representatives.len();
            let mut sols = sols;
            sols.total = Some(total);
            Ok((sols, stats))
        }
        Algorithm::Stab => {
            let stab = target.stabilizer(cap)?;
            let (sols, stats) = bdez_stab(&target.space, &stab, r);
            let expanded = if sols.is_empty() { sols } else { expand_orbits(&sols, &stab) };
            Ok((expanded, stats))
        }
        Algorithm::Covering => {
            let (sols, stats, _) = covering_sets_method(target, r, store, cap)?;
            let stab = target.stabilizer(cap)?;
            let expanded = if sols.is_empty() { sols } else { expand_orbits(&sols, &stab) };
            Ok((expanded, stats))
        }
    }
}

/// Number of nonzero coordinates of `x` over the rank-one basis `basis`.
pub fn hamming_weight(x: &BilinearForm, basis: &[RankOneForm]) -> Result<usize> {
    let coords = coords_over(x, basis)?;
    Ok(coords.count_ones() as usize)
}

/// Minimal number of basis coordinates supporting every element of `s`:
/// over GF(2) with a fixed basis this is the size of the union of supports.
pub fn hamming_weight_set(s: &[BilinearForm], basis: &[RankOneForm]) -> Result<usize> {
    let mut union = 0u64;
    for x in s {
        union |= coords_over(x, basis)?;
    }
    Ok(union.count_ones() as usize)
}

fn coords_over(x: &BilinearForm, basis: &[RankOneForm]) -> Result<u64> {
    let mn = x.m * x.n;
    let mut sys = crate::gf2::BitMatrix::zeros(mn, basis.len());
    for (t, b) in basis.iter().enumerate() {
        let bits = b.form().bits;
        for i in 0..mn {
            if bits >> i & 1 == 1 {
                sys.set(i, t, true);
            }
        }
    }
    sys.solve(x.bits).ok_or(Error::NotInSpan)
}

/// Weight filter for the all-diagonal branch of the 3x2x3 search: keep a
/// subspace only when the three anchors have additive weights over the
/// given rank-one basis and the combined weight exceeds six. Dropping the
/// other subspaces loses no solutions, which reappear through the other
/// branches.
pub fn e4_filter(
    basis: &[RankOneForm],
    anchors: &(BilinearForm, BilinearForm, BilinearForm),
) -> Result<bool> {
    let (a0, a1, a2) = anchors;
    let sum = a0.add(a1).add(a2);
    let w_sum = hamming_weight(&sum, basis)?;
    let additive =
        w_sum == hamming_weight(a0, basis)? + hamming_weight(a1, basis)? + hamming_weight(a2, basis)?;
    Ok(additive && w_sum > 6)
}

/// Extrapolate the number of leaf tests one level deeper from the last two
/// recorded levels: `ceil(Nt / Nt-1) * Nt`.
pub fn estimate_next_level(per_depth: &[u64]) -> Result<u64> {
    if per_depth.len() < 2 {
        return Err(Error::InsufficientData);
    }
    let n_prev = per_depth[per_depth.len() - 2];
    let n_cur = per_depth[per_depth.len() - 1];
    if n_prev == 0 || n_cur == 0 {
        return Err(Error::InsufficientData);
    }
    Ok(n_cur.div_ceil(n_prev) * n_cur)
}

/// Extrapolated counts for the remaining levels, compounding the last ratio.
pub fn estimate_remaining(per_depth: &[u64], remaining: usize) -> Result<Vec<u64>> {
    if per_depth.len() < 2 {
        return Err(Error::InsufficientData);
    }
    let n_prev = per_depth[per_depth.len() - 2];
    let n_cur = per_depth[per_depth.len() - 1];
    if n_prev == 0 || n_cur == 0 {
        return Err(Error::InsufficientData);
    }
    let ratio = n_cur.div_ceil(n_prev);
    let mut out = Vec::with_capacity(remaining);
    let mut cur = n_cur;
    for _ in 0..remaining {
        cur = cur.saturating_mul(ratio);
        out.push(cur);
    }
    Ok(out)
}

/// The documented long-run searches and their rough costs, used by the CLI
/// to refuse them without an explicit opt-in.
pub fn long_run_estimate(id: TargetId, algorithm: Algorithm) -> Option<&'static str> {
    use Algorithm::*;
    use TargetId::*;
    match (id, algorithm) {
        (ShortProduct(5), Bdez) => Some("~1.8e16 leaf tests"),
        (ShortProduct(5), Stab) => Some("~6.9e11 leaf tests"),
        (ShortProduct(5), Covering) => Some("~6.3e6 leaf tests on 10-dimensional spaces (hours)"),
        (ShortProduct(6), _) => Some("beyond desk scale (>= 1e19 leaf tests)"),
        (CirculantProduct(5), Bdez) => Some("~4.0e13 leaf tests"),
        (CirculantProduct(5), Stab) => Some("~1.0e10 leaf tests"),
        (CirculantProduct(5), Covering) => Some("~1e8 leaf tests (an hour or more)"),
        (MatProduct(3, 2, 3), Bdez) => Some("~9.2e19 leaf tests"),
        (MatProduct(3, 2, 3), Stab) => Some("~2.6e13 leaf tests"),
        (MatProduct(3, 2, 3), Covering) => Some("~1.6e9 leaf tests (days)"),
        (MatProduct(2, 3, 2), Bdez) => Some("~2.3e23 leaf tests"),
        (MatProduct(2, 3, 2), Stab) => Some("~4.6e18 leaf tests"),
        (MatProduct(2, 3, 2), Covering) => Some("~6.3e10 leaf tests (weeks)"),
        _ => None,
    }
}

/// Lower bound under which a target/algorithm pair runs without `--allow-long`.
pub fn is_long_run(id: TargetId, algorithm: Algorithm) -> bool {
    long_run_estimate(id, algorithm).is_some()
}

/// Attach decompositions to every solution; each passes verification.
pub fn decompose_all(
    sols: &SolutionSet,
    target: &TargetMap,
) -> Result<Vec<crate::bilinear::Decomposition>> {
    let gens = enumerate_rank_one(target.m, target.n);
    sols.representatives
        .iter()
        .map(|v| {
            let d = crate::bilinear::extract_decomposition(v, &target.basis, &gens)?;
            debug_assert!(crate::bilinear::verify_decomposition(&target.basis, &d));
            Ok(d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets;

    fn mem_store() -> OmegaStore {
        let mut store = OmegaStore::in_memory();
        store.compute_up_to(4).unwrap();
        store
    }

    #[test]
    fn poly_product_rank_three() {
        let t = targets::poly_product(2).unwrap();
        let (empty, _) = bdez(&t.space, 2);
        assert!(empty.is_empty());
        let (sols, _) = bdez(&t.space, 3);
        assert_eq!(sols.representatives.len(), 1, "unique optimal solution");
        assert!(sols.representatives[0].contains_subspace(&t.space));
    }

    #[test]
    fn short3_rank_five() {
        let t = targets::short_product(3).unwrap();
        let (empty, _) = bdez(&t.space, 4);
        assert!(empty.is_empty());
        let (sols, stats) = bdez(&t.space, 5);
        assert!(!sols.is_empty());
        // leaf-test count lives in the order of a few hundred
        assert!(
            stats.rank_one_basis_calls > 100 && stats.rank_one_basis_calls < 3000,
            "got {}",
            stats.rank_one_basis_calls
        );
    }

    #[test]
    fn mat222_rank6_empty() {
        let t = targets::matrix_product(2, 2, 2).unwrap();
        let (sols, _) = bdez(&t.space, 6);
        assert!(sols.is_empty());
    }

    #[test]
    fn stab_matches_bdez_on_poly() {
        let t = targets::poly_product(2).unwrap();
        let stab = t.stabilizer(DEFAULT_CAP).unwrap();
        let (sols, _) = bdez_stab(&t.space, &stab, 3);
        let expanded = expand_orbits(&sols, &stab);
        let (plain, _) = bdez(&t.space, 3);
        assert_eq!(expanded.keys(), plain.keys());
    }

    #[test]
    fn stab_matches_bdez_on_short3() {
        let t = targets::short_product(3).unwrap();
        let stab = t.stabilizer(DEFAULT_CAP).unwrap();
        let (sols, stats) = bdez_stab(&t.space, &stab, 5);
        assert!(stats.rank_one_basis_calls < 1000);
        let expanded = expand_orbits(&sols, &stab);
        let (plain, _) = bdez(&t.space, 5);
        assert_eq!(expanded.keys(), plain.keys());
    }

    #[test]
    fn covering_matches_bdez_on_short3() {
        let t = targets::short_product(3).unwrap();
        let store = mem_store();
        let (sols, _, reports) = covering_sets_method(&t, 5, &store, DEFAULT_CAP).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].route, BranchRoute::Omega);
        let stab = t.stabilizer(DEFAULT_CAP).unwrap();
        let expanded = expand_orbits(&sols, &stab);
        let (plain, _) = bdez(&t.space, 5);
        assert_eq!(expanded.keys(), plain.keys());
    }

    #[test]
    fn hamming_examples() {
        let gens = enumerate_rank_one(3, 3);
        let basis = vec![gens[0], gens[10], gens[20]];
        let b0 = basis[0].form();
        let b1 = basis[1].form();
        let b2 = basis[2].form();
        assert_eq!(hamming_weight(&b0, &basis).unwrap(), 1);
        assert_eq!(hamming_weight(&BilinearForm::zero(3, 3), &basis).unwrap(), 0);
        assert_eq!(hamming_weight(&b0.add(&b2), &basis).unwrap(), 2);
        assert_eq!(hamming_weight_set(&[b0], &basis).unwrap(), 1);
        assert_eq!(hamming_weight_set(&[b0.add(&b1), b1.add(&b2)], &basis).unwrap(), 3);
        let outside = gens[33].form();
        assert!(matches!(hamming_weight(&outside, &basis), Err(Error::NotInSpan)));
    }

    #[test]
    fn weight_bounds_rank() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let gens = enumerate_rank_one(3, 3);
        for _ in 0..300 {
            // random independent rank-one basis
            let mut basis = Vec::new();
            let mut span = Subspace::empty(3, 3);
            while basis.len() < 4 {
                let g = gens[rng.gen_range(0..gens.len())];
                if span.insert(g.form().bits) {
                    basis.push(g);
                }
            }
            let sel: Vec<BilinearForm> = (0..2)
                .map(|_| {
                    let mut acc = BilinearForm::zero(3, 3);
                    for b in &basis {
                        if rng.gen_bool(0.5) {
                            acc = acc.add(&b.form());
                        }
                    }
                    acc
                })
                .collect();
            let w = hamming_weight_set(&sel, &basis).unwrap();
            let spanned = Subspace::from_forms(3, 3, &sel);
            // the weight bounds the rank of the spanned set from above
            let (sols, _) = bdez(&spanned, spanned.dim().max(w).min(w));
            let _ = sols;
            assert!(spanned.dim() <= w || sel.iter().all(|f| f.is_zero()));
        }
    }

    #[test]
    fn e4_filter_examples() {
        let gens = enumerate_rank_one(3, 3);
        // nine independent rank-one forms of Bl(3,3): e_{i,j}
        let mut basis = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                basis.push(RankOneForm::new(3, 3, 1 << i, 1 << j));
            }
        }
        let sum3 = |ids: [usize; 3]| {
            ids.iter().fold(BilinearForm::zero(3, 3), |acc, &i| acc.add(&basis[i].form()))
        };
        // disjoint supports of sizes 3,3,3: additive, weight 9 > 6
        let a = (sum3([0, 1, 2]), sum3([3, 4, 5]), sum3([6, 7, 8]));
        assert!(e4_filter(&basis, &a).unwrap());
        // shared coordinate: additivity fails
        let b = (sum3([0, 1, 2]), sum3([2, 3, 4]), sum3([6, 7, 8]));
        assert!(!e4_filter(&basis, &b).unwrap());
        // disjoint but weight exactly 6: rejected
        let two = |i: usize, j: usize| basis[i].form().add(&basis[j].form());
        let c = (two(0, 1), two(2, 3), two(4, 5));
        assert!(!e4_filter(&basis, &c).unwrap());
        let _ = gens;
    }

    #[test]
    fn estimator_examples() {
        assert_eq!(estimate_next_level(&[10, 100]).unwrap(), 1000);
        assert_eq!(estimate_next_level(&[7, 7]).unwrap(), 7);
        assert_eq!(estimate_next_level(&[3, 10]).unwrap(), 40);
        assert!(matches!(estimate_next_level(&[5]), Err(Error::InsufficientData)));
        assert_eq!(estimate_remaining(&[10, 100], 2).unwrap(), vec![1000, 10000]);
    }
}
