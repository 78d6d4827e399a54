//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails the
//! test if any criterion failed. Time bounds hold for debug builds.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use orbatlas::atlas::{check_lemmas, verify_atlas, Atlas};
use orbatlas::catalog::torsor_pair;
use orbatlas::commands::{self, Options, EXIT_CHECK, EXIT_PASS};
use orbatlas::document::{load_atlas, load_groupoid, load_refinement, Strictness};
use orbatlas::equivalence::{
    build_morita_bundle, check_biprincipality, compose_refinements, find_atlas_isomorphism, identity_refinement,
    refinement_from_groupoid, roundtrip_check, verify_refinement,
};
use orbatlas::exec::Execution;
use orbatlas::fractions::{build_groupoid, fractions_report};
use orbatlas::group::{enumerate_automorphisms, small_groups, FiniteGroup, GroupRef};
use orbatlas::groupoid_model::{atlas_from_groupoid, morita_invariants};
use orbatlas::laws::{induced_law_suite, induced_laws, tensor_size_law};
use orbatlas::report::{CheckKey, CheckOutcome, Report, Status};

const SEED: u64 = 20240611;
const FIXTURE_BOUND: Duration = Duration::from_secs(1);
const TENSOR_BOUND: Duration = Duration::from_secs(5);
const LEMMA_BOUND: Duration = Duration::from_secs(10);

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn atlas(name: &str) -> Atlas {
    load_atlas(&path(name), Strictness::Strict).unwrap().value
}

fn failures(outcomes: &[CheckOutcome]) -> Vec<String> {
    outcomes
        .iter()
        .filter(|o| o.status == Status::Fail || o.status == Status::Breach)
        .map(|o| format!("{} {}: {}", o.key.as_str(), o.subject, o.detail))
        .collect()
}

/// Collects the problems found for one criterion.
#[derive(Default)]
struct Findings(Vec<String>);

impl Findings {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn report(&mut self, what: &str, r: &Report) {
        for f in failures(&r.outcomes) {
            self.0.push(format!("{what}: {f}"));
        }
    }

    fn within(&mut self, what: &str, elapsed: Duration, bound: Duration) {
        self.require(elapsed < bound, || format!("{what} took {elapsed:?}, bound {bound:?}"));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn fixture_reproduction() -> Findings {
    let mut f = Findings::default();
    let opts = Options::default();
    for (name, inertia) in [("eq_a.json", 3), ("eq_b.json", 2)] {
        let (v, dt) = timed(|| commands::validate(&path(name), opts));
        f.within(&format!("validate {name}"), dt, FIXTURE_BOUND);
        f.require(v.exit == EXIT_PASS, || format!("validate {name} exit {}", v.exit));

        let (g, dt) = timed(|| commands::groupoid(&path(name), opts));
        f.within(&format!("groupoid {name}"), dt, FIXTURE_BOUND);
        f.require(g.exit == EXIT_PASS, || format!("groupoid {name} exit {}", g.exit));

        let a = atlas(name);
        let gpd = build_groupoid(&a);
        for obj in 0..gpd.model.objects() {
            let iso = gpd.isotropy(obj).unwrap();
            // cyclic of order 3: some element has order 3
            let cyclic = iso.elements().any(|x| iso.element_order(x) == 3);
            f.require(iso.order() == 3 && cyclic, || {
                format!("{name}: isotropy at {} has order {}", gpd.model.object_name(obj), iso.order())
            });
        }
        let inv = morita_invariants(&gpd.model).unwrap();
        f.require(inv.isotropy.iter().all(|l| l == "Z/3"), || format!("{name}: isotropy labels {:?}", inv.isotropy));
        f.require(inv.inertia == inertia, || format!("{name}: inertia {} expected {inertia}", inv.inertia));
    }
    let (c, dt) = timed(|| commands::compare(&path("eq_a.json"), &path("eq_b.json"), opts));
    f.within("compare", dt, FIXTURE_BOUND);
    let verdict = c.report.find(CheckKey::MoritaVerdict).next().map(|o| o.detail.clone()).unwrap_or_default();
    f.require(c.exit == EXIT_CHECK && verdict.starts_with("differ"), || format!("compare: exit {}, `{verdict}`", c.exit));
    f
}

/// Automorphisms by brute force over all self-maps.
fn automorphism_oracle(g: &FiniteGroup) -> usize {
    let n = g.order();
    let mut count = 0;
    for code in 0..n.pow(n as u32) {
        let map: Vec<usize> = (0..n).map(|k| code / n.pow(k as u32) % n).collect();
        let mut seen = vec![false; n];
        let bijective = map.iter().all(|&y| !std::mem::replace(&mut seen[y], true));
        if bijective && (0..n).all(|a| (0..n).all(|b| map[g.mul(a, b)] == g.mul(map[a], map[b]))) {
            count += 1;
        }
    }
    count
}

fn automorphism_counts() -> Findings {
    let mut f = Findings::default();
    for (name, g, expected) in [("Z/2", FiniteGroup::cyclic(2), 1), ("Z/2xZ/2", FiniteGroup::klein4(), 6)] {
        let oracle = automorphism_oracle(&g);
        let got = enumerate_automorphisms(&(Arc::new(g) as GroupRef), 8).unwrap().len();
        f.require(got == expected && oracle == expected, || format!("|Aut({name})| = {got}, oracle {oracle}, expected {expected}"));
    }
    f
}

fn tensor_law() -> Findings {
    let mut f = Findings::default();
    let (outcomes, dt) = timed(|| tensor_size_law(SEED, 100));
    f.within("tensor law", dt, TENSOR_BOUND);
    f.require(outcomes.len() == small_groups().len(), || format!("{} groups checked", outcomes.len()));
    f.0.extend(failures(&outcomes));
    f
}

fn induced_hom_laws() -> Findings {
    let mut f = Findings::default();
    for name in ["eq_a.json", "eq_b.json"] {
        let a = atlas(name);
        for e in 0..a.arrow_count() {
            let subject = format!("{name} {}", a.layer().arrow_label(e));
            f.0.extend(failures(&induced_laws(a.abst(e), &subject)));
        }
    }
    f.0.extend(failures(&induced_law_suite(SEED, 100)));
    f
}

fn arrow(a: &Atlas, source: &str, target: &str) -> usize {
    let idx = |n: &str| a.layer().charts().iter().position(|c| c.name() == n).unwrap();
    a.layer().poset().arrow(idx(source), idx(target)).unwrap()
}

fn failed(a: &Atlas) -> Vec<CheckKey> {
    let mut r = check_lemmas(a);
    r.extend(fractions_report(a, Execution::default()).0.outcomes);
    r.failed_keys()
}

fn theorem_suite() -> Findings {
    let mut f = Findings::default();
    let t = Instant::now();
    for name in ["eq_a.json", "eq_b.json"] {
        let a = atlas(name);
        f.report(&format!("{name} lemmas"), &check_lemmas(&a));
        f.report(&format!("{name} fractions"), &fractions_report(&a, Execution::default()).0);
    }

    // One corrupted composition-cell entry on the identity of U1.
    let base = atlas("eq_a.json");
    let u1 = arrow(&base, "U1", "U1");
    let cell = |nu: usize, lambda: usize| {
        let mut a = base.clone();
        let v = (a.alpha(u1, u1, nu, lambda) + 1) % a.abst(u1).size();
        a.set_alpha_entry(u1, u1, nu, lambda, v);
        failed(&a)
    };
    let first = cell(0, 0);
    let second = cell(0, 1);
    // The circle fixtures have one concrete map per arrow, so the concrete
    // side is corrupted on the two-chart torsor atlas instead.
    let mut torsor = torsor_pair();
    let clean = failed(&torsor);
    f.require(clean.is_empty(), || format!("torsor atlas fails {clean:?} before mutation"));
    let v = (torsor.tilde_index(1, 0) + 1) % torsor.layer().con(1).len();
    torsor.set_tilde_entry(1, 0, v);
    let concrete = failed(&torsor);

    for (key, hits) in [
        (CheckKey::LemmaLeftCancel, &first),
        (CheckKey::LemmaRightCancel, &first),
        (CheckKey::LemmaInterpolation, &first),
        (CheckKey::CategoryLaws, &first),
        (CheckKey::FractionsWitnessIndependence, &first),
        (CheckKey::FractionsWeakCancellation, &second),
        (CheckKey::LemmaStrongCompatibility, &concrete),
        (CheckKey::FractionsOre, &concrete),
    ] {
        f.require(hits.contains(&key), || format!("mutation not detected by {}", key.as_str()));
    }
    f.within("suite", t.elapsed(), LEMMA_BOUND);
    f
}

fn extraction() -> Findings {
    let mut f = Findings::default();
    for (groupoid, fixture) in [("groupoid_G.json", "eq_a.json"), ("groupoid_H.json", "eq_b.json")] {
        let b = load_groupoid(&path(groupoid), Strictness::Strict).unwrap().value;
        let extracted = atlas_from_groupoid(&b.model, &b.covers["coarse"]).unwrap();
        f.report(&format!("verify {groupoid}"), &verify_atlas(&extracted));
        let iso = find_atlas_isomorphism(&extracted, &atlas(fixture)).unwrap();
        f.require(iso.is_some(), || format!("{groupoid} extraction is not isomorphic to {fixture}"));
    }
    f
}

fn roundtrip() -> Findings {
    let mut f = Findings::default();
    for name in ["eq_a.json", "eq_b.json"] {
        let r = roundtrip_check(&atlas(name));
        f.require(r.find(CheckKey::RoundtripInvariants).count() == 1, || format!("{name}: no invariant comparison"));
        f.report(name, &r);
    }
    f
}

fn certificates() -> Findings {
    let mut f = Findings::default();
    for name in ["identity_eq_a.json", "identity_eq_b.json"] {
        let id = load_refinement(&path(name), Strictness::Strict).unwrap().value;
        f.report(name, &verify_refinement(&id));
        match build_morita_bundle(&id, &id) {
            Ok(b) => f.report(&format!("{name} bundle"), &check_biprincipality(&b)),
            Err(e) => f.0.push(format!("{name} bundle: {e}")),
        }
    }
    for groupoid in ["groupoid_G.json", "groupoid_H.json"] {
        let b = load_groupoid(&path(groupoid), Strictness::Strict).unwrap().value;
        let refine = refinement_from_groupoid(&b.model, &b.covers["fine"], &b.covers["coarse"]).unwrap();
        f.report(&format!("{groupoid} fine to coarse"), &verify_refinement(&refine));
        let before = compose_refinements(&identity_refinement(refine.fine()), &refine);
        let after = compose_refinements(&refine, &identity_refinement(refine.coarse()));
        for (side, c) in [("identity then refinement", before), ("refinement then identity", after)] {
            match c {
                Ok(c) => f.report(&format!("{groupoid} {side}"), &verify_refinement(&c)),
                Err(e) => f.0.push(format!("{groupoid} {side}: {e}")),
            }
        }
    }
    let composed = load_refinement(&path("compose_G.json"), Strictness::Strict).unwrap().value;
    f.report("compose_G.json", &verify_refinement(&composed));
    f
}

fn run(n: usize, title: &str, check: fn() -> Findings, failed: &mut Vec<usize>) {
    let (found, dt) = timed(check);
    let status = if found.0.is_empty() { "PASS" } else { "FAIL" };
    // Written to the handle directly so the lines show without --nocapture.
    let mut out = std::io::stdout().lock();
    if n == 1 {
        writeln!(out).unwrap();
    }
    writeln!(out, "criterion {n} {status} {title} ({dt:.2?})").unwrap();
    for p in &found.0 {
        writeln!(out, "    {p}").unwrap();
    }
    if !found.0.is_empty() {
        failed.push(n);
    }
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    run(1, "fixture reproduction", fixture_reproduction, &mut failed);
    run(2, "automorphism counts", automorphism_counts, &mut failed);
    run(3, "torsor tensor size law", tensor_law, &mut failed);
    run(4, "induced homomorphism laws", induced_hom_laws, &mut failed);
    run(5, "lemma and fractions suite with mutations", theorem_suite, &mut failed);
    run(6, "extraction from groupoid models", extraction, &mut failed);
    run(7, "roundtrip invariants", roundtrip, &mut failed);
    run(8, "refinement certificates", certificates, &mut failed);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
