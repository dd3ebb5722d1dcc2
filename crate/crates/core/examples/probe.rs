use bilrank_core::group::apply_subspace;
use bilrank_core::search::covering_sets_method;
use bilrank_core::OmegaStore;
use std::collections::BTreeSet;

fn main() {
    let t = bilrank_core::targets::short_product(4).unwrap();
    let mut store = OmegaStore::in_memory();
    store.compute_up_to(6).unwrap();
    let (sols, _, _) = covering_sets_method(&t, 8, &store, 1 << 20).unwrap();
    let grp = t.stabilizer(1 << 20).unwrap();
    let expanded = bilrank_core::search::expand_orbits(&sols, &grp);
    let all = &expanded.representatives;
    println!("total: {}", all.len());

    // orbits under the pointwise stem subgroup (stb(I) ∩ stb(N))
    let u = bilrank_core::targets::short_stem_subgroup(4).unwrap();
    println!("stem subgroup size: {}", u.size());
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut classes = 0usize;
    for s in all {
        if seen.contains(s.key()) { continue; }
        for g in u.elements() {
            seen.insert(apply_subspace(g, s).key().to_vec());
        }
        classes += 1;
    }
    println!("classes mod stem subgroup: {classes}");
}
