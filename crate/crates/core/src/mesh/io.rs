//! Mesh JSON schema: an object with `vertices` (coordinate triples), `faces`
//! (vertex loops, counter-clockwise w.r.t. the stored `face_normals` when
//! present, else w.r.t. the Newell normal of the loop) and `elements` (face
//! index lists). Edges are derived, never stored. An optional `metadata`
//! object carries entity counts and the void count for human consumption and
//! is ignored on load.

use super::{MeshError, PolyMesh};
use crate::Vec3;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct MeshJson {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
    pub elements: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face_normals: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<PolyMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    let raw: MeshJson = serde_json::from_str(&text)?;
    if let Some(ns) = &raw.face_normals {
        if ns.len() != raw.faces.len() {
            return Err(MeshError::BadIndex("face_normals length mismatch".into()));
        }
    }
    let vertices = raw
        .vertices
        .iter()
        .map(|p| Vec3::new(p[0], p[1], p[2]))
        .collect();
    let normals = raw
        .face_normals
        .map(|ns| ns.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect());
    PolyMesh::build(vertices, raw.faces, raw.elements, normals)
}

pub fn save_mesh(mesh: &PolyMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let json = MeshJson {
        vertices: mesh.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
        faces: mesh.faces.iter().map(|f| f.vertices.clone()).collect(),
        elements: mesh.elements.iter().map(|e| e.faces.clone()).collect(),
        face_normals: Some(
            mesh.faces
                .iter()
                .map(|f| [f.normal.x, f.normal.y, f.normal.z])
                .collect(),
        ),
        metadata: Some(serde_json::json!({
            "vertices": mesh.vertices.len(),
            "edges": mesh.edges.len(),
            "faces": mesh.faces.len(),
            "elements": mesh.elements.len(),
            "b2": mesh.b2(),
        })),
    };
    std::fs::write(
        path,
        serde_json::to_string_pretty(&json).map_err(MeshError::Parse)?,
    )?;
    Ok(())
}
