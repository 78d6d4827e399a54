use std::path::PathBuf;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn read(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixtures().join(name)).unwrap()).unwrap()
}

#[test]
fn every_fixture_matches_the_schema() {
    let schema = jsonschema::JSONSchema::compile(&read("schema.json")).expect("schema compiles");
    let mut seen = 0;
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name == "schema.json" || !name.ends_with(".json") {
            continue;
        }
        let doc = read(&name);
        if let Err(errors) = schema.validate(&doc) {
            let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
            panic!("{name}: {msgs:?}");
        }
        seen += 1;
    }
    assert!(seen >= 10);
}

#[test]
fn schema_rejects_unknown_fields() {
    let schema = jsonschema::JSONSchema::compile(&read("schema.json")).unwrap();
    let mut doc = read("eq_a.json");
    doc["charts"][0]["colour"] = serde_json::json!(1);
    assert!(!schema.is_valid(&doc));
}
