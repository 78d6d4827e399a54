//! Seeded random bimodules and the algebraic law suites run by `laws`.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bimodule::{extract_hom, hom_to_bimodule, induced_hom, tensor, Bimodule};
use crate::group::{homomorphisms, small_groups, FiniteGroup, GroupRef};
use crate::report::{CheckKey, CheckOutcome, Report};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn trivial() -> GroupRef {
    Arc::new(FiniteGroup::trivial())
}

fn shuffled(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// `copies` free right `H`-orbits, trivial group on the left, labels shuffled.
pub fn random_free_right(rng: &mut impl Rng, h: &GroupRef, copies: usize) -> Bimodule {
    let n = h.order();
    let b = Bimodule::from_fn(trivial(), h.clone(), copies * n, |_, m| m, |m, g| (m / n) * n + h.mul(m % n, g))
        .expect("right multiplication");
    b.relabel(&shuffled(rng, copies * n))
}

/// Cyclic subgroup generated by `g`.
fn cyclic_subgroup(h: &FiniteGroup, g: usize) -> Vec<usize> {
    let mut s = vec![h.identity()];
    let mut x = g;
    while x != h.identity() {
        s.push(x);
        x = h.mul(x, g);
    }
    s.sort_unstable();
    s
}

/// A left `H`-set made of `orbits` coset spaces `H/S` with `S` cyclic and
/// random; trivial group on the right.
pub fn random_left_set(rng: &mut impl Rng, h: &GroupRef, orbits: usize) -> Bimodule {
    // (offset of the orbit, its cosets as sorted element lists)
    let mut blocks: Vec<(usize, Vec<Vec<usize>>)> = Vec::new();
    let mut size = 0;
    for _ in 0..orbits {
        let s = cyclic_subgroup(h, rng.gen_range(0..h.order()));
        let mut cosets: Vec<Vec<usize>> = Vec::new();
        for x in h.elements() {
            let mut c: Vec<usize> = s.iter().map(|&t| h.mul(x, t)).collect();
            c.sort_unstable();
            if !cosets.contains(&c) {
                cosets.push(c);
            }
        }
        blocks.push((size, cosets.clone()));
        size += cosets.len();
    }
    let act = |g: usize, m: usize| {
        let (offset, cosets) = blocks.iter().rev().find(|(o, _)| *o <= m).expect("in some orbit");
        let mut image: Vec<usize> = cosets[m - offset].iter().map(|&x| h.mul(g, x)).collect();
        image.sort_unstable();
        offset + cosets.iter().position(|c| *c == image).expect("cosets are permuted")
    };
    let b = Bimodule::from_fn(h.clone(), trivial(), size, act, |m, _| m).expect("coset action");
    b.relabel(&shuffled(rng, size))
}

/// `N` free on the right over `h`, `M` any left `h`-set.
pub fn random_torsor_pair(rng: &mut impl Rng, h: &GroupRef) -> (Bimodule, Bimodule) {
    let copies = rng.gen_range(1..=3);
    let orbits = rng.gen_range(1..=3);
    (random_free_right(rng, h, copies), random_left_set(rng, h, orbits))
}

/// Orbits of `(x, y) ↦ (x·g, g⁻¹·y)` on `N × M`, by direct search.
pub fn orbit_count(n: &Bimodule, m: &Bimodule) -> usize {
    let h = n.right();
    let mut seen = HashSet::new();
    let mut count = 0;
    for x in 0..n.size() {
        for y in 0..m.size() {
            if seen.contains(&(x, y)) {
                continue;
            }
            count += 1;
            for g in h.elements() {
                seen.insert((n.act_right(x, g), m.act_left(h.inv(g), y)));
            }
        }
    }
    count
}

/// `pairs` random torsor pairs over every group of order at most 8.
pub fn tensor_size_law(seed: u64, pairs: usize) -> Vec<CheckOutcome> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for (name, g) in small_groups() {
        let h: GroupRef = Arc::new(g);
        let mut witness = None;
        for k in 0..pairs {
            let (n, m) = random_torsor_pair(&mut rng, &h);
            let t = tensor(&n, &m).expect("middle groups agree");
            let expected = n.size() * m.size() / h.order();
            let oracle = orbit_count(&n, &m);
            if t.len() != expected || t.len() != oracle {
                witness = Some(format!("pair {k}: tensor {} but |N||M|/|H| = {expected}, orbits {oracle}", t.len()));
                break;
            }
        }
        out.push(CheckOutcome::from_witness(CheckKey::LawTensorSize, format!("{name} x{pairs}"), witness));
    }
    out
}

/// `Ψ(H)` for an injective `ψ: G -> H` between random small groups, labels
/// shuffled.
pub fn random_atlas_bimodule(rng: &mut impl Rng) -> Bimodule {
    let groups = small_groups();
    loop {
        let (_, big) = groups.choose(rng).expect("nonempty");
        let (_, small) = groups.choose(rng).expect("nonempty");
        if big.order() % small.order() != 0 {
            continue;
        }
        let (big, small): (GroupRef, GroupRef) = (Arc::new(big.clone()), Arc::new(small.clone()));
        let inj: Vec<_> = homomorphisms(&small, &big).into_iter().filter(|p| p.is_injective()).collect();
        let Some(phi) = inj.choose(rng) else { continue };
        let b = hom_to_bimodule(phi);
        return b.relabel(&shuffled(rng, b.size()));
    }
}

/// `Λ_{h·m} = h Λ_m h⁻¹` and injectivity of every `Λ_m`.
pub fn induced_laws(b: &Bimodule, subject: &str) -> Vec<CheckOutcome> {
    let (left, right) = (b.left(), b.right());
    let mut conj = None;
    let mut inj = None;
    for m in 0..b.size() {
        let lam = match extract_hom(b, m) {
            Ok(l) => l,
            Err(e) => {
                conj = Some(format!("no induced homomorphism at {m}: {e}"));
                break;
            }
        };
        let images: HashSet<usize> = right.elements().map(|g| lam.apply(g)).collect();
        if inj.is_none() && (images.len() != right.order() || induced_hom(b, m).is_err()) {
            inj = Some(format!("Λ_{m} is not injective"));
        }
        for h in left.elements() {
            let hm = b.act_left(h, m);
            let Ok(other) = extract_hom(b, hm) else {
                conj.get_or_insert(format!("no induced homomorphism at {hm}"));
                continue;
            };
            if let Some(g) = right.elements().find(|&g| other.apply(g) != left.mul(left.mul(h, lam.apply(g)), left.inv(h))) {
                conj.get_or_insert(format!("Λ at {hm} differs from conjugate of Λ at {m} by {h} on {g}"));
            }
        }
    }
    vec![
        CheckOutcome::from_witness(CheckKey::LawInducedConjugacy, subject, conj),
        CheckOutcome::from_witness(CheckKey::LawInducedInjective, subject, inj),
    ]
}

/// `count` random atlas bimodules through [`induced_laws`], one line each law.
pub fn induced_law_suite(seed: u64, count: usize) -> Vec<CheckOutcome> {
    let mut rng = rng(seed);
    let mut conj = None;
    let mut inj = None;
    for k in 0..count {
        let b = random_atlas_bimodule(&mut rng);
        let r = induced_laws(&b, "random");
        if r[0].status != crate::report::Status::Pass {
            conj.get_or_insert(format!("module {k}: {}", r[0].detail));
        }
        if r[1].status != crate::report::Status::Pass {
            inj.get_or_insert(format!("module {k}: {}", r[1].detail));
        }
    }
    let subject = format!("random x{count}");
    vec![
        CheckOutcome::from_witness(CheckKey::LawInducedConjugacy, subject.clone(), conj),
        CheckOutcome::from_witness(CheckKey::LawInducedInjective, subject, inj),
    ]
}

pub fn law_report(seed: u64, count: usize) -> Report {
    let mut r = Report::new(format!("laws seed={seed}"));
    r.extend(tensor_size_law(seed, count));
    r.extend(induced_law_suite(seed.wrapping_add(1), count));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Status;

    #[test]
    fn generators_are_deterministic() {
        let h: GroupRef = Arc::new(FiniteGroup::dihedral(3));
        let a = random_torsor_pair(&mut rng(7), &h);
        let b = random_torsor_pair(&mut rng(7), &h);
        assert_eq!(a.0.right_table(), b.0.right_table());
        assert_eq!(a.1.left_table(), b.1.left_table());
    }

    #[test]
    fn random_left_sets_are_actions() {
        let mut r = rng(3);
        for (_, g) in small_groups() {
            let h: GroupRef = Arc::new(g);
            let m = random_left_set(&mut r, &h, 3);
            assert!(m.check_laws().is_ok());
            let n = random_free_right(&mut r, &h, 2);
            assert!(n.check_laws().is_ok());
        }
    }

    #[test]
    fn orbit_oracle_on_a_hand_case() {
        // Z/2 acting freely on two points against Z/2 acting trivially on three.
        let h: GroupRef = Arc::new(FiniteGroup::cyclic(2));
        let n = random_free_right(&mut rng(0), &h, 1);
        let m = Bimodule::from_fn(h.clone(), trivial(), 3, |_, y| y, |y, _| y).unwrap();
        assert_eq!(orbit_count(&n, &m), 3);
    }

    #[test]
    fn laws_hold() {
        let r = law_report(11, 20);
        assert!(r.passed(), "{}", r.render_human());
    }

    #[test]
    fn non_free_middle_breaks_the_size_formula() {
        let h: GroupRef = Arc::new(FiniteGroup::cyclic(2));
        let n = Bimodule::from_fn(trivial(), h.clone(), 1, |_, m| m, |m, _| m).unwrap();
        let m = Bimodule::from_fn(h.clone(), trivial(), 1, |_, y| y, |y, _| y).unwrap();
        assert_eq!(tensor(&n, &m).unwrap().len(), 1);
        assert_ne!(n.size() * m.size() / h.order(), 1);
    }

    #[test]
    fn conjugacy_law_detects_a_corrupted_entry() {
        let mut r = rng(5);
        let b = loop {
            let b = random_atlas_bimodule(&mut r);
            if b.right().order() > 1 {
                break b;
            }
        };
        assert!(induced_laws(&b, "good").iter().all(|o| o.status == Status::Pass));
        let g = (0..b.right().order()).find(|&g| g != b.right().identity()).unwrap();
        let mut bad = b.clone();
        let v = bad.act_right(0, g);
        bad.set_right_entry(0, g, (v + 1) % bad.size());
        assert!(induced_laws(&bad, "bad").iter().any(|o| o.status != Status::Pass));
    }
}
