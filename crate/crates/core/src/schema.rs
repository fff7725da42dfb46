//! JSON Schemas for the documents the engine emits, published by the service.

use serde_json::{json, Value};

use crate::SCHEMA_VERSION;

pub const NAMES: [&str; 5] = ["table-schema", "chart-spec", "dashboard", "decomposition-tree", "ask-response"];

fn defs() -> Value {
    json!({
        "columnType": {"enum": ["numerical", "temporal", "categorical"]},
        "factType": {"enum": ["value", "difference", "proportion", "trend", "categorization",
            "distribution", "rank", "association", "extreme", "outlier"]},
        "questionClass": {"enum": ["simple", "type-i", "type-ii"]},
        "annotation": {
            "type": "object",
            "required": ["kind", "targets"],
            "properties": {
                "kind": {"enum": ["value-label", "dashed-difference-line", "trend-line", "highlight-color",
                    "pointer", "rank-badge", "regression-line", "outlier-ring", "slice-emphasis"]},
                "targets": {"type": "array", "items": {"type": "string"}},
                "params": {"type": "object", "additionalProperties": {"type": "number"}}
            },
            "additionalProperties": false
        },
        "chartSpec": {
            "type": "object",
            "required": ["base", "fact_type", "question", "encodings", "data", "annotations", "caption", "relevance"],
            "properties": {
                "base": {"enum": ["bar", "line", "pie", "area", "scatter"]},
                "fact_type": {"$ref": "#/$defs/factType"},
                "question": {"type": "string"},
                "encodings": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["channel", "field"],
                        "properties": {
                            "channel": {"enum": ["x", "y", "angle", "color"]},
                            "field": {"type": "string"}
                        },
                        "additionalProperties": false
                    }
                },
                "data": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["key", "value"],
                        "properties": {
                            "key": {"type": "string"},
                            "value": {"type": "number"},
                            "x": {"type": "number"}
                        },
                        "additionalProperties": false
                    }
                },
                "annotations": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/annotation"}},
                "caption": {"type": "string", "minLength": 1},
                "relevance": {"type": "number"}
            },
            "additionalProperties": false
        },
        "dashboard": {
            "type": "object",
            "required": ["title", "sections"],
            "properties": {
                "title": {"type": "string"},
                "sections": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["sub_question", "charts"],
                        "properties": {
                            "sub_question": {"type": "string"},
                            "charts": {
                                "type": "array",
                                "items": {
                                    "type": "object",
                                    "required": ["x", "y", "w", "h", "chart"],
                                    "properties": {
                                        "x": {"type": "integer", "minimum": 0, "maximum": 11},
                                        "y": {"type": "integer", "minimum": 0},
                                        "w": {"enum": [4, 6]},
                                        "h": {"type": "integer", "minimum": 1},
                                        "chart": {"$ref": "#/$defs/chartSpec"}
                                    },
                                    "additionalProperties": false
                                }
                            }
                        },
                        "additionalProperties": false
                    }
                }
            },
            "additionalProperties": false
        },
        "tree": {
            "type": "object",
            "required": ["question", "class", "backend", "forced", "children"],
            "properties": {
                "question": {"type": "string"},
                "class": {"$ref": "#/$defs/questionClass"},
                "backend": {"type": ["string", "null"]},
                "forced": {"type": "boolean"},
                "children": {
                    "oneOf": [
                        {"type": "array", "maxItems": 0},
                        {"type": "array", "minItems": 2, "maxItems": 2, "items": {"$ref": "#/$defs/tree"}}
                    ]
                }
            },
            "additionalProperties": false
        }
    })
}

fn wrap(id: &str, root: Value) -> Value {
    let mut doc = json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$id": format!("urn:tabqa:{id}:{SCHEMA_VERSION}"),
        "$defs": defs(),
    });
    let obj = doc.as_object_mut().expect("object");
    for (k, v) in root.as_object().expect("root schema is an object") {
        obj.insert(k.clone(), v.clone());
    }
    doc
}

/// The schema document called `name`, one of [`NAMES`].
pub fn schema(name: &str) -> Option<Value> {
    let root = match name {
        "table-schema" => json!({
            "type": "object",
            "required": ["name", "columns", "row_count"],
            "properties": {
                "name": {"type": "string"},
                "columns": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["name", "type"],
                        "properties": {"name": {"type": "string"}, "type": {"$ref": "#/$defs/columnType"}},
                        "additionalProperties": false
                    }
                },
                "row_count": {"type": "integer", "minimum": 0}
            },
            "additionalProperties": false
        }),
        "chart-spec" => json!({"$ref": "#/$defs/chartSpec"}),
        "dashboard" => json!({"$ref": "#/$defs/dashboard"}),
        "decomposition-tree" => json!({"$ref": "#/$defs/tree"}),
        "ask-response" => json!({
            "type": "object",
            "required": ["schema_version", "tree", "dashboard", "unanswered"],
            "properties": {
                "schema_version": {"const": SCHEMA_VERSION},
                "tree": {"$ref": "#/$defs/tree"},
                "dashboard": {"$ref": "#/$defs/dashboard"},
                "unanswered": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["question", "reason"],
                        "properties": {"question": {"type": "string"}, "reason": {"type": "string"}},
                        "additionalProperties": false
                    }
                }
            },
            "additionalProperties": false
        }),
        _ => return None,
    };
    Some(wrap(name, root))
}

/// Every schema keyed by name, with the version.
pub fn index() -> Value {
    let mut m = serde_json::Map::new();
    for n in NAMES {
        m.insert(n.to_string(), schema(n).expect("known name"));
    }
    json!({"version": SCHEMA_VERSION, "schemas": m})
}
