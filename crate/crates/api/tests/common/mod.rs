use crowdtone_api::schema;
use serde_json::Value;

/// Validation errors of `body` against the named shape, as strings.
pub fn schema_errors(shape: &str, body: &Value) -> Vec<String> {
    let s = schema::for_shape(shape).unwrap_or_else(|| panic!("no schema for {shape}"));
    let v = jsonschema::validator_for(&s).expect("schema compiles");
    v.iter_errors(body).map(|e| format!("{}: {e}", e.instance_path)).collect()
}

#[allow(dead_code)]
pub fn assert_shape(shape: &str, body: &Value) {
    let errs = schema_errors(shape, body);
    assert!(errs.is_empty(), "{shape} body invalid: {errs:?}\n{body:#}");
}
