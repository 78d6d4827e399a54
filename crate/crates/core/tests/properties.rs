use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::Index;
use rand::seq::SliceRandom;

use orbatlas::atlas::{verify_atlas, Atlas};
use orbatlas::bimodule::{find_isomorphism, tensor, Bimodule};
use orbatlas::catalog::{torsor_pair, z3_circle_fine_cover, z3_circle_groupoid};
use orbatlas::document::{load_atlas, Strictness};
use orbatlas::group::{small_groups, GroupRef};
use orbatlas::groupoid_model::atlas_from_groupoid;
use orbatlas::laws::{orbit_count, random_atlas_bimodule, random_torsor_pair, rng};

fn fixture(name: &str) -> Atlas {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    load_atlas(&p, Strictness::Strict).unwrap().value
}

fn atlases() -> Vec<Atlas> {
    let g = z3_circle_groupoid(true);
    vec![
        fixture("eq_a.json"),
        fixture("eq_b.json"),
        torsor_pair(),
        atlas_from_groupoid(&g, &z3_circle_fine_cover(&g)).unwrap(),
    ]
}

fn pick<T: Clone>(v: &[T], i: Index) -> T {
    v[i.index(v.len())].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Any single changed entry of a module action table fails verification.
    #[test]
    fn corrupted_action_entries_are_detected(which in 0usize..4, arrow in any::<Index>(), m in any::<Index>(), g in any::<Index>(), bump in 1usize..8, left in any::<bool>()) {
        let mut a = atlases().swap_remove(which);
        let e = arrow.index(a.arrow_count());
        let mut module = a.abst(e).clone();
        prop_assume!(module.size() > 1);
        let x = m.index(module.size());
        if left {
            let h = g.index(module.left().order());
            let v = (module.act_left(h, x) + bump) % module.size();
            prop_assume!(v != module.act_left(h, x));
            module.set_left_entry(h, x, v);
        } else {
            let k = g.index(module.right().order());
            let v = (module.act_right(x, k) + bump) % module.size();
            prop_assume!(v != module.act_right(x, k));
            module.set_right_entry(x, k, v);
        }
        a.set_abst(e, module);
        prop_assert!(!verify_atlas(&a).passed());
    }

    /// Any single changed entry of a composition table fails verification.
    #[test]
    fn corrupted_alpha_entries_are_detected(which in 0usize..4, cell in any::<Index>(), entry in any::<Index>(), bump in 1usize..8) {
        let mut a = atlases().swap_remove(which);
        let keys: Vec<(usize, usize)> = a.alpha_tables().keys().copied().collect();
        let (outer, inner) = pick(&keys, cell);
        let (ni, no) = (a.abst(inner).size(), a.abst(outer).size());
        let k = entry.index(ni * no);
        let (nu, lambda) = (k / ni, k % ni);
        let old = a.alpha(outer, inner, nu, lambda);
        let p = a.layer().poset();
        let composite = p.arrow(p.source(inner), p.target(outer)).unwrap();
        let size = a.abst(composite).size();
        prop_assume!(size > 1);
        let v = (old + bump) % size;
        prop_assume!(v != old);
        a.set_alpha_entry(outer, inner, nu, lambda, v);
        prop_assert!(!verify_atlas(&a).passed());
    }

    /// Relabelling module elements changes no invariant of the module.
    #[test]
    fn relabelling_is_invisible(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = random_atlas_bimodule(&mut r);
        let mut perm: Vec<usize> = (0..b.size()).collect();
        perm.shuffle(&mut rng(perm_seed));
        let c = b.relabel(&perm);
        prop_assert_eq!(b.classify(), c.classify());
        prop_assert!(find_isomorphism(&b, &c).unwrap().is_some());
        let regular_left = Bimodule::regular(b.left());
        prop_assert_eq!(tensor(&regular_left, &b).unwrap().len(), tensor(&regular_left, &c).unwrap().len());
    }

    /// Tensor size against the orbit oracle, for arbitrary seeds.
    #[test]
    fn tensor_size_matches_oracle(seed in any::<u64>(), group in any::<Index>()) {
        let groups = small_groups();
        let h: GroupRef = Arc::new(pick(&groups, group).1);
        let (n, m) = random_torsor_pair(&mut rng(seed), &h);
        let t = tensor(&n, &m).unwrap();
        prop_assert_eq!(t.len(), orbit_count(&n, &m));
        prop_assert_eq!(t.len() * h.order(), n.size() * m.size());
    }
}
