//! The command surface behind the `orbatlas` binary. Each command returns a
//! report, an exit code and optionally a document for standard output.

use std::path::Path;

use crate::atlas::{check_lemmas, verify_atlas_with};
use crate::document::{atlas_to_document, load_atlas, load_groupoid, load_refinement, to_json, DocumentError, Loaded, Strictness};
use crate::equivalence::{
    atlas_invariants, build_morita_bundle_with, check_biprincipality, compare_report, identity_refinement,
    roundtrip_check, verify_refinement_with,
};
use crate::exec::Execution;
use crate::fractions::fractions_report;
use crate::groupoid_model::{check_model_cover, extract};
use crate::laws::law_report;
use crate::report::{CheckKey, CheckOutcome, Report, Status};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_BREACH: i32 = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub strictness: Strictness,
    pub exec: Execution,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit: i32,
    /// A generated document, for commands that produce one.
    pub document: Option<String>,
}

impl Outcome {
    fn from_report(report: Report) -> Self {
        let exit = exit_code(&report);
        Outcome { report, exit, document: None }
    }
}

pub fn exit_code(report: &Report) -> i32 {
    if report.has_breach() {
        EXIT_BREACH
    } else if report.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK
    }
}

fn load_failure(command: &str, e: &DocumentError) -> Outcome {
    let mut report = Report::new(command);
    report.push(CheckOutcome::fail(CheckKey::DocumentLoad, "input", e.to_string()));
    Outcome { report, exit: EXIT_INPUT, document: None }
}

fn loaded<T>(report: &mut Report, path: &Path, l: &Loaded<T>) {
    report.push(CheckOutcome::pass(CheckKey::DocumentLoad, path.display().to_string()));
    for w in &l.warnings {
        report.push(CheckOutcome::info(CheckKey::DocumentUnknownField, path.display().to_string(), w.clone()));
    }
}

macro_rules! load_or_exit {
    ($command:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return load_failure($command, &e),
        }
    };
}

/// Marks failures of derived results as breaches when the atlas itself
/// verified: the axioms imply them, so the failure is a bug.
pub fn derived(outcomes: Vec<CheckOutcome>, atlas_ok: bool) -> impl Iterator<Item = CheckOutcome> {
    outcomes.into_iter().map(move |o| {
        if atlas_ok && o.status == Status::Fail {
            CheckOutcome { status: Status::Breach, ..o }
        } else {
            o
        }
    })
}

/// Chart, layer and atlas checks, then the derived lemmas.
pub fn validate(path: &Path, opts: Options) -> Outcome {
    let l = load_or_exit!("validate", load_atlas(path, opts.strictness));
    let mut report = Report::new(format!("validate {}", path.display()));
    loaded(&mut report, path, &l);
    let v = verify_atlas_with(&l.value, opts.exec);
    let ok = v.passed();
    report.extend(v.outcomes);
    report.extend(derived(check_lemmas(&l.value).outcomes, ok));
    Outcome::from_report(report)
}

/// Category of embeddings, Ore and cancellation, groupoid of fractions and
/// its summary. Failures on an atlas that verifies are breaches.
pub fn groupoid(path: &Path, opts: Options) -> Outcome {
    let l = load_or_exit!("groupoid", load_atlas(path, opts.strictness));
    let mut report = Report::new(format!("groupoid {}", path.display()));
    loaded(&mut report, path, &l);
    let v = verify_atlas_with(&l.value, opts.exec);
    if !v.passed() {
        report.push(CheckOutcome::fail(
            CheckKey::AtlasVerified,
            "atlas",
            format!("atlas does not verify: {}", v.failed_keys().iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")),
        ));
    }
    let (r, _) = fractions_report(&l.value, opts.exec);
    report.extend(derived(r.outcomes, v.passed()));
    Outcome::from_report(report)
}

/// Cover checks on a groupoid document and the extracted atlas as a document.
pub fn from_groupoid(path: &Path, cover: &str, opts: Options) -> Outcome {
    let l = load_or_exit!("from-groupoid", load_groupoid(path, opts.strictness));
    let mut report = Report::new(format!("from-groupoid {} --cover {cover}", path.display()));
    loaded(&mut report, path, &l);
    let Some(c) = l.value.covers.get(cover) else {
        let known: Vec<&str> = l.value.covers.keys().map(String::as_str).collect();
        report.push(CheckOutcome::fail(CheckKey::DocumentLoad, "cover", format!("no cover `{cover}`; known: {known:?}")));
        return Outcome { report, exit: EXIT_INPUT, document: None };
    };
    report.extend(check_model_cover(&l.value.model, c).outcomes);
    let mut document = None;
    match extract(&l.value.model, c) {
        Ok(x) => {
            let v = verify_atlas_with(&x.atlas, opts.exec);
            let fails = v.failed_keys();
            report.push(CheckOutcome::from_witness(
                CheckKey::ExtractVerify,
                cover,
                (!v.passed()).then(|| format!("failing checks: {}", fails.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", "))),
            ));
            let mut doc = atlas_to_document(&x.atlas);
            doc.description = Some(format!("Extracted from {} on cover {cover}.", file_name(path)));
            document = Some(to_json(&doc));
        }
        Err(e) => report.push(CheckOutcome::fail(CheckKey::ExtractVerify, cover, e.to_string())),
    }
    let exit = exit_code(&report);
    Outcome { report, exit, document }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Morita invariants of both groupoids of fractions; fails when they differ.
pub fn compare(a: &Path, b: &Path, opts: Options) -> Outcome {
    let la = load_or_exit!("compare", load_atlas(a, opts.strictness));
    let lb = load_or_exit!("compare", load_atlas(b, opts.strictness));
    let mut report = Report::new(format!("compare {} {}", a.display(), b.display()));
    loaded(&mut report, a, &la);
    loaded(&mut report, b, &lb);
    let ia = load_or_exit!("compare", atlas_invariants(&la.value).map_err(|e| DocumentError::Build {
        path: a.display().to_string(),
        message: e.to_string()
    }));
    let ib = load_or_exit!("compare", atlas_invariants(&lb.value).map_err(|e| DocumentError::Build {
        path: b.display().to_string(),
        message: e.to_string()
    }));
    report.extend(compare_report(&ia, &ib).outcomes);
    Outcome::from_report(report)
}

/// Refinement certificate checks, then bi-principality of the bundle
/// between the refinement and the identity refinement of its fine atlas.
pub fn refinement(path: &Path, opts: Options) -> Outcome {
    let l = load_or_exit!("refinement", load_refinement(path, opts.strictness));
    let mut report = Report::new(format!("refinement {}", path.display()));
    loaded(&mut report, path, &l);
    let data = &l.value;
    report.extend(verify_refinement_with(data, opts.exec).outcomes);
    if report.passed() {
        let id = identity_refinement(data.fine());
        match build_morita_bundle_with(data, &id, opts.exec) {
            Ok(b) => report.extend(check_biprincipality(&b).outcomes),
            Err(e) => report.push(CheckOutcome::fail(CheckKey::BundleSize, "bundle", e.to_string())),
        }
    }
    Outcome::from_report(report)
}

pub fn roundtrip(path: &Path, opts: Options) -> Outcome {
    let l = load_or_exit!("roundtrip", load_atlas(path, opts.strictness));
    let mut report = Report::new(format!("roundtrip {}", path.display()));
    loaded(&mut report, path, &l);
    report.extend(roundtrip_check(&l.value).outcomes);
    Outcome::from_report(report)
}

/// Randomized law suites; `count` cases per group and per law.
pub fn laws(seed: u64, count: usize) -> Outcome {
    Outcome::from_report(law_report(seed, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn fixture(name: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
    }

    #[test]
    fn validate_exit_codes() {
        let o = Options::default();
        assert_eq!(validate(&fixture("eq_a.json"), o).exit, EXIT_PASS);
        assert_eq!(validate(&fixture("eq_b.json"), o).exit, EXIT_PASS);
        let bad = validate(&fixture("eq_a_mutated.json"), o);
        assert_eq!(bad.exit, EXIT_CHECK);
        assert!(bad.report.failed_keys().contains(&CheckKey::AtlasModuleLaws));
        assert_eq!(validate(&fixture("missing.json"), o).exit, EXIT_INPUT);
    }

    #[test]
    fn compare_differs_on_inertia() {
        let o = compare(&fixture("eq_a.json"), &fixture("eq_b.json"), Options::default());
        assert_eq!(o.exit, EXIT_CHECK);
        let v = o.report.find(CheckKey::MoritaVerdict).next().unwrap();
        assert_eq!(v.detail, "differ: inertia 3 vs 2");
    }

    #[test]
    fn from_groupoid_emits_a_loadable_atlas() {
        let o = from_groupoid(&fixture("groupoid_H.json"), "coarse", Options::default());
        assert_eq!(o.exit, EXIT_PASS, "{}", o.report.render_human());
        let doc = o.document.unwrap();
        let parsed = crate::document::parse::<crate::document::AtlasDoc>("out", &doc, Strictness::Strict).unwrap();
        let atlas = parsed.value.into_atlas("out").unwrap();
        let eq_b = load_atlas(&fixture("eq_b.json"), Strictness::Strict).unwrap().value;
        assert!(crate::equivalence::find_atlas_isomorphism(&atlas, &eq_b).unwrap().is_some());
        assert_eq!(from_groupoid(&fixture("groupoid_H.json"), "nope", Options::default()).exit, EXIT_INPUT);
    }

    #[test]
    fn refinement_and_roundtrip_pass() {
        let o = Options::default();
        let r = refinement(&fixture("identity_eq_a.json"), o);
        assert_eq!(r.exit, EXIT_PASS, "{}", r.report.render_human());
        assert!(r.report.find(CheckKey::BundleRightPrincipal).count() > 0);
        assert_eq!(roundtrip(&fixture("eq_b.json"), o).exit, EXIT_PASS);
    }

    #[test]
    fn derived_failures_on_a_verified_atlas_are_breaches() {
        let bad = || vec![CheckOutcome::fail(CheckKey::FractionsOre, "x", "no square")];
        let mut r = Report::new("t");
        r.extend(derived(bad(), true));
        assert_eq!(exit_code(&r), EXIT_BREACH);
        let mut r = Report::new("t");
        r.extend(derived(bad(), false));
        assert_eq!(exit_code(&r), EXIT_CHECK);
    }

    #[test]
    fn mutated_atlas_fails_without_breach() {
        for o in [validate(&fixture("eq_a_mutated.json"), Options::default()), groupoid(&fixture("eq_a_mutated.json"), Options::default())] {
            assert_eq!(o.exit, EXIT_CHECK, "{}", o.report.render_human());
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let seq = Options { exec: Execution::Sequential, ..Options::default() };
        let par = Options { exec: Execution::Parallel, ..Options::default() };
        let a = groupoid(&fixture("eq_b.json"), seq).report.render_machine();
        let b = groupoid(&fixture("eq_b.json"), par).report.render_machine();
        assert_eq!(a, b);
    }
}
