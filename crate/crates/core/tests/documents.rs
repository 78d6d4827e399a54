use std::collections::BTreeMap;
use std::path::PathBuf;

use orbatlas::atlas::verify_atlas;
use orbatlas::catalog::{torsor_pair, z3_circle, z3_circle_cover, z3_circle_fine_cover, z3_circle_groupoid};
use orbatlas::document::{
    atlas_to_document, groupoid_to_document, load_atlas, load_groupoid, load_refinement, parse, refinement_to_document,
    to_json, AtlasDoc, DocumentError, Strictness,
};
use orbatlas::equivalence::{find_atlas_isomorphism, refinement_from_groupoid, verify_refinement};
use orbatlas::groupoid_model::{atlas_from_groupoid, validate_groupoid};
use orbatlas::report::CheckKey;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn atlas(name: &str) -> orbatlas::atlas::Atlas {
    load_atlas(&fixture(name), Strictness::Strict).unwrap().value
}

fn iso(a: &orbatlas::atlas::Atlas, b: &orbatlas::atlas::Atlas) -> bool {
    find_atlas_isomorphism(a, b).unwrap().is_some()
}

#[test]
fn eq_fixtures_match_the_catalog() {
    let (a, b) = (atlas("eq_a.json"), atlas("eq_b.json"));
    assert!(verify_atlas(&a).passed());
    assert!(verify_atlas(&b).passed());
    assert!(iso(&a, &z3_circle(false)));
    assert!(iso(&b, &z3_circle(true)));
    assert!(!iso(&a, &b));
    assert!(iso(&atlas("eq_a_permuted.json"), &a));
}

#[test]
fn eq_b_twist_is_on_u4_in_u2() {
    let b = atlas("eq_b.json");
    let p = b.layer().poset();
    let a = p.arrow(3, 1).unwrap();
    // right multiplication by the generator: a -> c, b -> a, c -> b
    assert_eq!((0..3).map(|m| b.abst(a).act_right(m, 1)).collect::<Vec<_>>(), vec![2, 0, 1]);
    let other = p.arrow(2, 1).unwrap();
    assert_eq!((0..3).map(|m| b.abst(other).act_right(m, 1)).collect::<Vec<_>>(), vec![1, 2, 0]);
}

#[test]
fn mutated_fixture_loads_and_fails_module_laws() {
    let r = verify_atlas(&atlas("eq_a_mutated.json"));
    assert!(!r.passed());
    assert!(r.failed_keys().contains(&CheckKey::AtlasModuleLaws));
    assert!(r.failures().any(|o| o.subject.contains("U3") && o.subject.contains("U1")));
}

#[test]
fn single_chart_fixture() {
    let a = atlas("single_chart_trivial.json");
    assert_eq!(a.layer().charts().len(), 1);
    assert!(verify_atlas(&a).passed());
}

#[test]
fn groupoid_fixtures_match_the_catalog() {
    for (name, twisted) in [("groupoid_G.json", false), ("groupoid_H.json", true)] {
        let g = load_groupoid(&fixture(name), Strictness::Strict).unwrap().value;
        let m = z3_circle_groupoid(twisted);
        assert!(validate_groupoid(&g.model).passed());
        assert_eq!(g.model.object_names(), m.object_names());
        assert_eq!(g.model.arrow_names(), m.arrow_names());
        assert_eq!(g.model.compose_table(), m.compose_table());
        assert_eq!(g.model.sheets(), m.sheets());
        for x in 0..m.arrows() {
            assert_eq!((g.model.source(x), g.model.target(x), g.model.inverse(x)), (m.source(x), m.target(x), m.inverse(x)));
        }
        assert_eq!(g.covers["coarse"], z3_circle_cover(&m));
        assert_eq!(g.covers["fine"], z3_circle_fine_cover(&m));
    }
    let t = load_groupoid(&fixture("trivial_groupoid.json"), Strictness::Strict).unwrap().value;
    assert_eq!((t.model.objects(), t.model.arrows()), (1, 1));
}

#[test]
fn extracted_atlas_fixture_matches_extraction() {
    let g = z3_circle_groupoid(false);
    let fresh = atlas_from_groupoid(&g, &z3_circle_cover(&g)).unwrap();
    let stored = atlas("atlas_from_G.json");
    assert!(verify_atlas(&stored).passed());
    assert!(iso(&stored, &fresh));
    assert!(iso(&stored, &atlas("eq_a.json")));
}

#[test]
fn written_atlases_reload_isomorphic() {
    for a in [z3_circle(true), torsor_pair(), atlas("eq_a.json")] {
        let text = to_json(&atlas_to_document(&a));
        let doc = parse::<AtlasDoc>("mem", &text, Strictness::Strict).unwrap().value;
        let back = doc.into_atlas("mem").unwrap();
        assert!(verify_atlas(&back).passed());
        assert!(iso(&a, &back));
    }
}

#[test]
fn refinement_fixtures_verify() {
    for name in ["identity_eq_a.json", "identity_eq_b.json", "refine_G_fine_coarse.json", "refine_H_fine_coarse.json", "compose_G.json"] {
        let r = load_refinement(&fixture(name), Strictness::Strict).unwrap().value;
        let report = verify_refinement(&r);
        assert!(report.passed(), "{name}: {:?}", report.failed_keys());
    }
}

#[test]
fn explicit_refinement_roundtrip() {
    let g = z3_circle_groupoid(true);
    let data = refinement_from_groupoid(&g, &z3_circle_fine_cover(&g), &z3_circle_cover(&g)).unwrap();
    let dir = std::env::temp_dir().join(format!("orbatlas-doc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("fine.json"), to_json(&atlas_to_document(data.fine()))).unwrap();
    std::fs::write(dir.join("coarse.json"), to_json(&atlas_to_document(data.coarse()))).unwrap();
    let doc = refinement_to_document(&data, "fine.json", "coarse.json");
    assert!(!doc.right_cells.is_empty());
    std::fs::write(dir.join("ref.json"), to_json(&doc)).unwrap();
    let back = load_refinement(&dir.join("ref.json"), Strictness::Strict).unwrap().value;
    assert!(verify_refinement(&back).passed());
    assert_eq!(back.pairs(), data.pairs());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn groupoid_documents_roundtrip() {
    let m = z3_circle_groupoid(true);
    let mut covers = BTreeMap::new();
    covers.insert("coarse".to_string(), z3_circle_cover(&m));
    let text = to_json(&groupoid_to_document(&m, &covers));
    let doc = parse::<orbatlas::document::GroupoidDoc>("mem", &text, Strictness::Strict).unwrap().value;
    let back = doc.into_model("mem").unwrap();
    assert_eq!(back.model.compose_table(), m.compose_table());
    assert_eq!(back.covers["coarse"], z3_circle_cover(&m));
}

const SMALL: &str = r#"{
  "kind": "atlas", "format_version": 1,
  "groups": {"E": "trivial"}, "quotient": ["q"],
  "charts": [{"name": "U", "group": "E", "samples": ["x"], "projection": ["q"], "action": "trivial"}]
}"#;

fn load_str(text: &str, s: Strictness) -> Result<orbatlas::atlas::Atlas, DocumentError> {
    parse::<AtlasDoc>("mem", text, s)?.value.into_atlas("mem")
}

#[test]
fn strict_mode_rejects_unknown_fields() {
    let text = SMALL.replace("\"action\": \"trivial\"", "\"action\": \"trivial\", \"colour\": 1");
    match load_str(&text, Strictness::Strict) {
        Err(DocumentError::UnknownField { field, .. }) => assert!(field.contains("colour"), "{field}"),
        other => panic!("{other:?}"),
    }
    let lenient = parse::<AtlasDoc>("mem", &text, Strictness::Lenient).unwrap();
    assert_eq!(lenient.warnings.len(), 1);
    assert!(lenient.value.into_atlas("mem").is_ok());
}

#[test]
fn strict_mode_sees_unknown_module_fields() {
    let text = std::fs::read_to_string(fixture("eq_a.json")).unwrap().replacen("\"elements\"", "\"colour\": 0, \"elements\"", 1);
    assert!(matches!(load_str(&text, Strictness::Strict), Err(DocumentError::UnknownField { .. })));
}

#[test]
fn parse_errors_carry_a_location() {
    let text = SMALL.replace("\"quotient\": [\"q\"],", "\"quotient\": [\"q\"]");
    match load_str(&text, Strictness::Strict) {
        Err(DocumentError::Parse { line, column, .. }) => assert_eq!((line, column), (4, 3)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn header_and_reference_errors() {
    let kind = SMALL.replace("\"kind\": \"atlas\"", "\"kind\": \"groupoid\"");
    assert!(matches!(load_str(&kind, Strictness::Strict), Err(DocumentError::Kind { .. })));
    let version = SMALL.replace("\"format_version\": 1", "\"format_version\": 7");
    assert!(matches!(load_str(&version, Strictness::Strict), Err(DocumentError::Version { found: 7, .. })));
    let reference = SMALL.replace("\"projection\": [\"q\"]", "\"projection\": [\"p\"]");
    match load_str(&reference, Strictness::Strict) {
        Err(DocumentError::Reference { message, .. }) => assert!(message.contains("`p`")),
        other => panic!("{other:?}"),
    }
    let group = SMALL.replace("\"trivial\"}", "\"cyclic:0\"}");
    assert!(matches!(load_str(&group, Strictness::Strict), Err(DocumentError::Reference { .. })));
}

#[test]
fn group_shorthands() {
    for (spec, order) in [("cyclic:5", 5), ("klein4", 4), ("dihedral:4", 8), ("symmetric:3", 6), ("quaternion", 8)] {
        let text = SMALL.replace("\"E\": \"trivial\"", &format!("\"E\": \"{spec}\""));
        let a = load_str(&text, Strictness::Strict).unwrap();
        assert_eq!(a.group(0).order(), order, "{spec}");
    }
}
