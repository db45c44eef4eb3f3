//! Machine-readable run reports: stable key order (struct field order),
//! deterministic for a fixed seed modulo the timing fields.

use ddr_core::mesh::PolyMesh;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Serialize)]
pub struct Check {
    pub name: String,
    /// "pass" | "fail" | "info"
    pub status: String,
    pub value: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub mesh: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<serde_json::Value>>,
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(
        command: String,
        mesh: serde_json::Value,
        k: Option<usize>,
        seed: Option<u64>,
    ) -> RunReport {
        RunReport {
            command,
            mesh,
            k,
            seed,
            checks: Vec::new(),
            table: None,
            timings: BTreeMap::new(),
        }
    }

    pub fn check_tol(&mut self, name: &str, value: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            status: if value <= tol { "pass" } else { "fail" }.into(),
            value: serde_json::json!(value),
            tolerance: Some(tol),
        });
    }

    pub fn check_eq(&mut self, name: &str, value: i64, expect: i64) {
        self.checks.push(Check {
            name: name.into(),
            status: if value == expect { "pass" } else { "fail" }.into(),
            value: serde_json::json!({ "got": value, "expected": expect }),
            tolerance: None,
        });
    }

    pub fn check_bool(&mut self, name: &str, pass: bool, value: serde_json::Value) {
        self.checks.push(Check {
            name: name.into(),
            status: if pass { "pass" } else { "fail" }.into(),
            value,
            tolerance: None,
        });
    }

    pub fn info(&mut self, name: &str, value: serde_json::Value) {
        self.checks.push(Check {
            name: name.into(),
            status: "info".into(),
            value,
            tolerance: None,
        });
    }
}

pub fn mesh_descriptor(mesh: &PolyMesh, path: &str) -> serde_json::Value {
    serde_json::json!({
        "file": path,
        "vertices": mesh.vertices.len(),
        "edges": mesh.edges.len(),
        "faces": mesh.faces.len(),
        "elements": mesh.elements.len(),
        "b2": mesh.b2(),
        "h": mesh.h,
    })
}
