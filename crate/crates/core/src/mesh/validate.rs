//! Mesh validation: every structural invariant is checked and reported with
//! its worst-case violation magnitude; failures never panic.

use super::PolyMesh;
use crate::Vec3;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Worst violation magnitude over all entities (0 when exact).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub elements: usize,
    /// Euler characteristic V - E + F - C.
    pub euler_characteristic: i64,
    pub b2: usize,
    pub inscribed_ball_ratio: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Minimal inscribed-ball ratio accepted by default (reported, not enforced
/// beyond this sanity floor).
pub const DEFAULT_RHO: f64 = 0.05;

pub fn validate_mesh(mesh: &PolyMesh) -> ValidationReport {
    validate_mesh_with_rho(mesh, DEFAULT_RHO)
}

pub fn validate_mesh_with_rho(mesh: &PolyMesh, rho: f64) -> ValidationReport {
    let mut checks = Vec::new();

    // face planarity and counter-clockwise orientation w.r.t. n_F
    let mut worst_plane = 0.0_f64;
    let mut worst_ccw = 0.0_f64;
    for face in &mesh.faces {
        let p0 = mesh.vertices[face.vertices[0]];
        for &v in &face.vertices {
            worst_plane = worst_plane
                .max(((mesh.vertices[v] - p0).dot(&face.normal)).abs() / face.diameter.max(1e-300));
        }
        // counter-clockwise: the signed area w.r.t. n_F must be positive
        let mut signed = 0.0;
        let m = face.vertices.len();
        for i in 1..m - 1 {
            let a = mesh.vertices[face.vertices[i]] - p0;
            let b = mesh.vertices[face.vertices[i + 1]] - p0;
            signed += a.cross(&b).dot(&face.normal);
        }
        worst_ccw = worst_ccw.max(if signed > 0.0 { 0.0 } else { 1.0 });
    }
    checks.push(CheckResult {
        name: "face_planarity".into(),
        pass: worst_plane <= 1e-12,
        worst: worst_plane,
        tolerance: 1e-12,
        detail: "max |(x_V - x_F0) . n_F| / h_F over faces".into(),
    });
    checks.push(CheckResult {
        name: "face_ccw".into(),
        pass: worst_ccw == 0.0,
        worst: worst_ccw,
        tolerance: 0.0,
        detail: "face loops counter-clockwise w.r.t. n_F".into(),
    });

    // per-element closed-surface identity: sum_F omega_TF |F| n_F = 0
    let mut worst_closure = 0.0_f64;
    let mut worst_closure_elem = 0usize;
    for (t, el) in mesh.elements.iter().enumerate() {
        let mut s = Vec3::zeros();
        for (lf, &f) in el.faces.iter().enumerate() {
            s += mesh.faces[f].normal * (mesh.faces[f].area * el.omega_tf[lf] as f64);
        }
        let rel = s.norm() / (el.diameter * el.diameter);
        if rel > worst_closure {
            worst_closure = rel;
            worst_closure_elem = t;
        }
    }
    checks.push(CheckResult {
        name: "element_closure".into(),
        pass: worst_closure <= 1e-12,
        worst: worst_closure,
        tolerance: 1e-12,
        detail: format!("worst on element {worst_closure_elem}: |sum omega_TF int_F n_F| / h_T^2"),
    });

    // interior faces: exactly two incident elements with opposite signs
    let mut worst_pairing = 0.0_f64;
    for (f, incident) in mesh.face_elements.iter().enumerate() {
        if incident.len() == 2 {
            let s: f64 = incident.iter().map(|&t| mesh.omega_tf(t, f)).sum();
            worst_pairing = worst_pairing.max(s.abs());
        }
    }
    checks.push(CheckResult {
        name: "interior_face_signs".into(),
        pass: worst_pairing == 0.0,
        worst: worst_pairing,
        tolerance: 0.0,
        detail: "sum of omega_TF over the two incident elements".into(),
    });

    // closed polygon identity: sum_E |E| omega_FE n_FE = 0 per face
    let mut worst_polygon = 0.0_f64;
    for face in &mesh.faces {
        let mut s = Vec3::zeros();
        for (le, &e) in face.edges.iter().enumerate() {
            s += face.n_fe[le] * (face.omega_fe[le] as f64 * mesh.edges[e].length);
        }
        worst_polygon = worst_polygon.max(s.norm() / face.diameter);
    }
    checks.push(CheckResult {
        name: "face_edge_normals".into(),
        pass: worst_polygon <= 1e-12,
        worst: worst_polygon,
        tolerance: 1e-12,
        detail: "|sum_E |E| omega_FE n_FE| / h_F (outward in-plane normals close up)".into(),
    });

    // inscribed-ball estimate and interiority of x_Y
    let mut min_ratio = f64::INFINITY;
    let mut worst_inside = 0.0_f64;
    for el in mesh.elements.iter() {
        let mut r = f64::INFINITY;
        for (lf, &f) in el.faces.iter().enumerate() {
            let d = (el.center - mesh.faces[f].center).dot(&mesh.faces[f].normal)
                * (-(el.omega_tf[lf] as f64));
            r = r.min(d);
        }
        if r <= 0.0 {
            worst_inside = worst_inside.max(-r / el.diameter);
        }
        min_ratio = min_ratio.min(r / el.diameter);
    }
    for face in &mesh.faces {
        let mut r = f64::INFINITY;
        let m = face.vertices.len();
        for i in 0..m {
            let a = mesh.vertices[face.vertices[i]];
            let d = (face.center - a).dot(&face.n_fe[i]) * (face.omega_fe[i] as f64);
            // distance from x_F to the edge line, measured against the outward normal
            r = r.min(-d);
        }
        if r <= 0.0 {
            worst_inside = worst_inside.max(-r / face.diameter);
        }
        min_ratio = min_ratio.min(r / face.diameter);
    }
    checks.push(CheckResult {
        name: "interior_points".into(),
        pass: worst_inside == 0.0,
        worst: worst_inside,
        tolerance: 0.0,
        detail: "x_Y lies inside Y (signed distance to boundary planes)".into(),
    });
    checks.push(CheckResult {
        name: "inscribed_ball".into(),
        pass: min_ratio >= rho,
        worst: min_ratio,
        tolerance: rho,
        detail: "min over Y of (inscribed-ball estimate at x_Y) / h_Y".into(),
    });

    let euler = mesh.vertices.len() as i64 - mesh.edges.len() as i64 + mesh.faces.len() as i64
        - mesh.elements.len() as i64;

    ValidationReport {
        checks,
        vertices: mesh.vertices.len(),
        edges: mesh.edges.len(),
        faces: mesh.faces.len(),
        elements: mesh.elements.len(),
        euler_characteristic: euler,
        b2: mesh.b2(),
        inscribed_ball_ratio: min_ratio,
    }
}
