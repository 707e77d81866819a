//! Published JSON schema for every request and response body.
//!
//! One document holds each shape under `$defs`; [`for_shape`] builds a
//! standalone schema for one of them.

use serde_json::{json, Value};

pub const V1: &str = include_str!("../schemas/v1.json");

/// Response shapes, by the names used in `$defs`.
pub const RESPONSE_SHAPES: &[&str] = &[
    "submit_response",
    "status",
    "pipeline_result",
    "task_document",
    "step_receipt",
    "worker_profile",
    "taxonomy",
    "expire_response",
    "clock",
    "error",
];

pub fn document() -> Value {
    serde_json::from_str(V1).expect("bundled schema is JSON")
}

/// Schema that validates a single shape. `None` for unknown names.
pub fn for_shape(shape: &str) -> Option<Value> {
    let doc = document();
    doc["$defs"].get(shape)?;
    Some(json!({
        "$schema": doc["$schema"],
        "$defs": doc["$defs"],
        "$ref": format!("#/$defs/{shape}"),
    }))
}
