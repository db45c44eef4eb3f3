//! Polyhedral mesh data model.
//!
//! Orientation conventions:
//! - edge tangents point from the lower to the higher global vertex index;
//! - face loops are stored counter-clockwise with respect to the face normal
//!   `n_F` (Newell normal of the loop, or the stored normal on load);
//! - `omega_fe = +1` when the edge tangent runs along the face boundary in
//!   the clockwise sense, and `omega_fe * n_fe` points out of the face in its
//!   plane;
//! - `omega_tf = +1` when `n_F` is outward for the element.
//!
//! All derived data (edges, signs, frames, boundary shells) is computed at
//! construction; a `PolyMesh` is immutable afterwards and safe to share
//! across threads.

mod generators;
mod io;
mod validate;

pub use generators::{gen_hex_mesh, gen_voided_cube_mesh};
pub use io::{load_mesh, save_mesh, MeshJson};
pub use validate::{validate_mesh, CheckResult, ValidationReport};

use crate::Vec3;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("entity index out of range: {0}")]
    BadIndex(String),
    #[error("face {face} has fewer than 3 vertices")]
    DegenerateFace { face: usize },
    #[error("face {face} is non-planar: deviation {deviation:.3e} exceeds {tol:.3e}")]
    NonPlanarFace {
        face: usize,
        deviation: f64,
        tol: f64,
    },
    #[error("face {face} is incident to {count} elements (expected 1 or 2)")]
    NonManifoldFace { face: usize, count: usize },
    #[error("element {element} has an open or inconsistently oriented boundary")]
    OpenElementBoundary { element: usize },
    #[error("element {element} has non-positive volume")]
    DegenerateElement { element: usize },
}

/// Edge with tangent from `v[0]` to `v[1]` (always `v[0] < v[1]`).
#[derive(Clone, Debug)]
pub struct Edge {
    pub v: [usize; 2],
    pub center: Vec3,
    pub length: f64,
}

/// Planar oriented face: vertex loop counter-clockwise w.r.t. `normal`.
#[derive(Clone, Debug)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    /// Sign of each loop edge per the clockwise-tangent convention.
    pub omega_fe: Vec<i8>,
    /// In-plane unit normal to each loop edge, `omega_fe * n_fe` outward.
    pub n_fe: Vec<Vec3>,
    pub normal: Vec3,
    pub center: Vec3,
    pub diameter: f64,
    pub area: f64,
    /// In-plane orthonormal frame; `(axis_u, axis_v, normal)` is right-handed.
    pub axis_u: Vec3,
    pub axis_v: Vec3,
}

#[derive(Clone, Debug)]
pub struct Element {
    pub faces: Vec<usize>,
    pub omega_tf: Vec<i8>,
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub center: Vec3,
    pub diameter: f64,
    pub volume: f64,
}

/// One connected component of the inner boundary, enclosing a void.
#[derive(Clone, Debug)]
pub struct VoidShell {
    pub faces: Vec<usize>,
    /// A point strictly inside the void (vertex centroid of the shell).
    pub interior_point: Vec3,
}

#[derive(Clone, Debug)]
pub struct PolyMesh {
    pub vertices: Vec<Vec3>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    pub elements: Vec<Element>,
    /// Elements incident to each face (one or two).
    pub face_elements: Vec<Vec<usize>>,
    pub boundary_faces: Vec<usize>,
    /// Outward sign of `n_F` w.r.t. the domain, for boundary faces only.
    pub omega_bf: BTreeMap<usize, i8>,
    /// Outer boundary shell (faces).
    pub outer_shell: Vec<usize>,
    /// Inner shells, one per void.
    pub void_shells: Vec<VoidShell>,
    /// Global mesh size `max h_T`.
    pub h: f64,
}

impl PolyMesh {
    /// Builds the mesh from raw connectivity. `normals`, when given, fixes
    /// the side each face loop is read from (the loop is reversed if needed
    /// so that it is counter-clockwise w.r.t. the stored normal).
    pub fn build(
        vertices: Vec<Vec3>,
        face_loops: Vec<Vec<usize>>,
        element_faces: Vec<Vec<usize>>,
        normals: Option<Vec<Vec3>>,
    ) -> Result<PolyMesh, MeshError> {
        let nv = vertices.len();
        for (f, fl) in face_loops.iter().enumerate() {
            if fl.len() < 3 {
                return Err(MeshError::DegenerateFace { face: f });
            }
            if fl.iter().any(|&v| v >= nv) {
                return Err(MeshError::BadIndex(format!(
                    "face {f} refers to a missing vertex"
                )));
            }
        }
        for (t, ef) in element_faces.iter().enumerate() {
            if ef.iter().any(|&f| f >= face_loops.len()) {
                return Err(MeshError::BadIndex(format!(
                    "element {t} refers to a missing face"
                )));
            }
        }

        // Faces: orientation, planarity, frames.
        let mut faces = Vec::with_capacity(face_loops.len());
        for (f, mut fl) in face_loops.into_iter().enumerate() {
            let mut n = newell_normal(&vertices, &fl);
            if let Some(ns) = normals.as_ref() {
                if n.dot(&ns[f]) < 0.0 {
                    fl.reverse();
                    n = -n;
                }
            }
            faces.push(build_face(f, fl, n, &vertices)?);
        }

        // Edges, derived from face loops, ordered by sorted vertex pair.
        let mut pairs: Vec<[usize; 2]> = Vec::new();
        for face in &faces {
            let m = face.vertices.len();
            for i in 0..m {
                let (a, b) = (face.vertices[i], face.vertices[(i + 1) % m]);
                pairs.push([a.min(b), a.max(b)]);
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edge_id: BTreeMap<[usize; 2], usize> =
            pairs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let edges: Vec<Edge> = pairs
            .iter()
            .map(|p| Edge {
                v: *p,
                center: (vertices[p[0]] + vertices[p[1]]) * 0.5,
                length: (vertices[p[1]] - vertices[p[0]]).norm(),
            })
            .collect();

        // Per-face edge ids and the face-edge signs.
        for face in &mut faces {
            let m = face.vertices.len();
            for i in 0..m {
                let (a, b) = (face.vertices[i], face.vertices[(i + 1) % m]);
                let e = edge_id[&[a.min(b), a.max(b)]];
                face.edges.push(e);
                // tangent runs min -> max; the loop traverses a -> b in the
                // counter-clockwise sense, so the tangent is clockwise iff a > b
                let omega: i8 = if a < b { -1 } else { 1 };
                face.omega_fe.push(omega);
                let d = (vertices[b] - vertices[a]).normalize();
                let outward = d.cross(&face.normal).normalize();
                face.n_fe.push(outward * omega as f64);
            }
        }

        // Elements: consistent outward orientation, volume, centroid.
        let mut elements = Vec::with_capacity(element_faces.len());
        for (t, ef) in element_faces.into_iter().enumerate() {
            elements.push(build_element(t, ef, &faces, &vertices)?);
        }

        // Face-element incidence.
        let mut face_elements = vec![Vec::new(); faces.len()];
        for (t, el) in elements.iter().enumerate() {
            for &f in &el.faces {
                face_elements[f].push(t);
            }
        }
        for (f, incident) in face_elements.iter().enumerate() {
            match incident.len() {
                1 | 2 => {}
                n => return Err(MeshError::NonManifoldFace { face: f, count: n }),
            }
        }

        let mut boundary_faces: Vec<usize> = Vec::new();
        let mut omega_bf = BTreeMap::new();
        for (f, incident) in face_elements.iter().enumerate() {
            if incident.len() == 1 {
                boundary_faces.push(f);
                let t = incident[0];
                let local = elements[t].faces.iter().position(|&g| g == f).unwrap();
                omega_bf.insert(f, elements[t].omega_tf[local]);
            }
        }

        let (outer_shell, void_shells) = boundary_shells(&boundary_faces, &faces, &vertices);

        let h = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);

        Ok(PolyMesh {
            vertices,
            edges,
            faces,
            elements,
            face_elements,
            boundary_faces,
            omega_bf,
            outer_shell,
            void_shells,
            h,
        })
    }

    pub fn edge_tangent(&self, e: usize) -> Vec3 {
        let ed = &self.edges[e];
        (self.vertices[ed.v[1]] - self.vertices[ed.v[0]]) / ed.length
    }

    /// Jump sign of a vertex on an edge: +1 at the head, -1 at the tail.
    pub fn vertex_sign_on_edge(&self, e: usize, v: usize) -> f64 {
        if self.edges[e].v[1] == v {
            1.0
        } else {
            debug_assert_eq!(self.edges[e].v[0], v);
            -1.0
        }
    }

    /// Centroid-fan triangles of a face, oriented with the face normal.
    pub fn face_tris(&self, f: usize) -> Vec<[Vec3; 3]> {
        let face = &self.faces[f];
        let m = face.vertices.len();
        (0..m)
            .map(|i| {
                let a = self.vertices[face.vertices[i]];
                let b = self.vertices[face.vertices[(i + 1) % m]];
                [face.center, a, b]
            })
            .collect()
    }

    /// Center-fan tetrahedra of an element, positively oriented.
    pub fn elem_tets(&self, t: usize) -> Vec<[Vec3; 4]> {
        let el = &self.elements[t];
        let mut tets = Vec::new();
        for (lf, &f) in el.faces.iter().enumerate() {
            let outward = el.omega_tf[lf] as f64;
            for tri in self.face_tris(f) {
                let (a, b) = if outward > 0.0 {
                    (tri[1], tri[2])
                } else {
                    (tri[2], tri[1])
                };
                tets.push([el.center, tri[0], a, b]);
            }
        }
        tets
    }

    /// Number of voids (second Betti number of the domain).
    pub fn b2(&self) -> usize {
        self.void_shells.len()
    }

    pub fn omega_tf(&self, t: usize, f: usize) -> f64 {
        let local = self.elements[t]
            .faces
            .iter()
            .position(|&g| g == f)
            .expect("face of element");
        self.elements[t].omega_tf[local] as f64
    }

    #[doc(hidden)]
    pub fn flip_tf_sign_for_test(&mut self, t: usize, local_f: usize) {
        self.elements[t].omega_tf[local_f] *= -1;
    }
}

fn newell_normal(vertices: &[Vec3], fl: &[usize]) -> Vec3 {
    let mut n = Vec3::zeros();
    let m = fl.len();
    for i in 0..m {
        let p = vertices[fl[i]];
        let q = vertices[fl[(i + 1) % m]];
        n.x += (p.y - q.y) * (p.z + q.z);
        n.y += (p.z - q.z) * (p.x + q.x);
        n.z += (p.x - q.x) * (p.y + q.y);
    }
    n.normalize()
}

fn build_face(
    f: usize,
    fl: Vec<usize>,
    normal: Vec3,
    vertices: &[Vec3],
) -> Result<Face, MeshError> {
    let m = fl.len();
    let pts: Vec<Vec3> = fl.iter().map(|&v| vertices[v]).collect();
    let diameter = max_pairwise_distance(&pts);

    // planarity: deviation of every vertex from the Newell plane
    let p0 = pts[0];
    let deviation = pts
        .iter()
        .map(|p| ((p - p0).dot(&normal)).abs())
        .fold(0.0, f64::max);
    let tol = 1e-12 * diameter;
    if deviation > tol {
        return Err(MeshError::NonPlanarFace {
            face: f,
            deviation,
            tol,
        });
    }

    // area centroid via a fan from the first loop vertex
    let mut area2 = 0.0;
    let mut centroid = Vec3::zeros();
    for i in 1..m - 1 {
        let cross = (pts[i] - pts[0]).cross(&(pts[i + 1] - pts[0]));
        let signed = cross.dot(&normal); // = 2 * signed triangle area
        area2 += signed;
        centroid += (pts[0] + pts[i] + pts[i + 1]) * (signed / 3.0);
    }
    if area2 <= 0.0 {
        return Err(MeshError::DegenerateFace { face: f });
    }
    let center = centroid / area2;
    let area = area2 / 2.0;

    let axis_u = {
        let d = pts[1] - pts[0];
        (d - normal * d.dot(&normal)).normalize()
    };
    let axis_v = normal.cross(&axis_u);

    Ok(Face {
        vertices: fl,
        edges: Vec::with_capacity(m),
        omega_fe: Vec::with_capacity(m),
        n_fe: Vec::with_capacity(m),
        normal,
        center,
        diameter,
        area,
        axis_u,
        axis_v,
    })
}

fn build_element(
    t: usize,
    ef: Vec<usize>,
    faces: &[Face],
    vertices: &[Vec3],
) -> Result<Element, MeshError> {
    // orient faces consistently over the closed surface: every edge must be
    // traversed once in each direction
    let nf = ef.len();
    let mut sigma: Vec<i8> = vec![0; nf];
    // edge -> list of (local face, direction of traversal when sigma = +1)
    let mut edge_use: BTreeMap<usize, Vec<(usize, i8)>> = BTreeMap::new();
    for (lf, &f) in ef.iter().enumerate() {
        let face = &faces[f];
        let m = face.vertices.len();
        for i in 0..m {
            let (a, b) = (face.vertices[i], face.vertices[(i + 1) % m]);
            let e = face.edges[i];
            let dir: i8 = if a < b { 1 } else { -1 }; // along the global tangent?
            edge_use.entry(e).or_default().push((lf, dir));
        }
    }
    for uses in edge_use.values() {
        if uses.len() != 2 {
            return Err(MeshError::OpenElementBoundary { element: t });
        }
    }
    sigma[0] = 1;
    let mut stack = vec![0usize];
    while let Some(lf) = stack.pop() {
        let f = ef[lf];
        for &e in &faces[f].edges {
            let uses = &edge_use[&e];
            let (other, dirs) = if uses[0].0 == lf && uses[1].0 != lf {
                (uses[1].0, (uses[0].1, uses[1].1))
            } else if uses[1].0 == lf && uses[0].0 != lf {
                (uses[0].0, (uses[1].1, uses[0].1))
            } else {
                // both uses on the same face (degenerate pinch); orientation is
                // internal to the face and fine either way
                continue;
            };
            // opposite traversal required: sigma_lf * d_lf = -sigma_other * d_other
            let needed = -sigma[lf] * dirs.0 * dirs.1;
            if sigma[other] == 0 {
                sigma[other] = needed;
                stack.push(other);
            } else if sigma[other] != needed {
                return Err(MeshError::OpenElementBoundary { element: t });
            }
        }
    }
    if sigma.contains(&0) {
        return Err(MeshError::OpenElementBoundary { element: t });
    }

    // signed volume with the current orientation (fan from the origin)
    let mut vol6 = 0.0;
    for (lf, &f) in ef.iter().enumerate() {
        let face = &faces[f];
        let m = face.vertices.len();
        for i in 0..m {
            let a = face.center;
            let (mut b, mut c) = (
                vertices[face.vertices[i]],
                vertices[face.vertices[(i + 1) % m]],
            );
            if sigma[lf] < 0 {
                std::mem::swap(&mut b, &mut c);
            }
            vol6 += a.cross(&b).dot(&c);
        }
    }
    if vol6 < 0.0 {
        for s in sigma.iter_mut() {
            *s = -*s;
        }
        vol6 = -vol6;
    }
    let volume = vol6 / 6.0;
    if !(volume > 0.0) {
        return Err(MeshError::DegenerateElement { element: t });
    }

    // vertex set, edge set, centroid (tet fan from the first vertex), diameter
    let mut vset: Vec<usize> = ef
        .iter()
        .flat_map(|&f| faces[f].vertices.iter().copied())
        .collect();
    vset.sort_unstable();
    vset.dedup();
    let mut eset: Vec<usize> = ef
        .iter()
        .flat_map(|&f| faces[f].edges.iter().copied())
        .collect();
    eset.sort_unstable();
    eset.dedup();
    let p0 = vertices[vset[0]];
    let mut vol_sum = 0.0;
    let mut centroid = Vec3::zeros();
    for (lf, &f) in ef.iter().enumerate() {
        let face = &faces[f];
        let m = face.vertices.len();
        for i in 0..m {
            let a = face.center;
            let (mut b, mut c) = (
                vertices[face.vertices[i]],
                vertices[face.vertices[(i + 1) % m]],
            );
            if sigma[lf] < 0 {
                std::mem::swap(&mut b, &mut c);
            }
            let v = (a - p0).cross(&(b - p0)).dot(&(c - p0)) / 6.0;
            vol_sum += v;
            centroid += (p0 + a + b + c) * (v / 4.0);
        }
    }
    let center = centroid / vol_sum;
    let pts: Vec<Vec3> = vset.iter().map(|&v| vertices[v]).collect();
    let diameter = max_pairwise_distance(&pts);

    Ok(Element {
        faces: ef,
        omega_tf: sigma,
        vertices: vset,
        edges: eset,
        center,
        diameter,
        volume,
    })
}

fn max_pairwise_distance(pts: &[Vec3]) -> f64 {
    let mut d = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = f64::max(d, (pts[i] - pts[j]).norm());
        }
    }
    d
}

/// Splits the boundary faces into connected components by edge adjacency.
/// The component attaining the largest coordinate is the outer boundary; the
/// rest are void shells.
fn boundary_shells(
    boundary: &[usize],
    faces: &[Face],
    vertices: &[Vec3],
) -> (Vec<usize>, Vec<VoidShell>) {
    use std::collections::BTreeSet;
    if boundary.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut edge_to_bfaces: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &f in boundary {
        for &e in &faces[f].edges {
            edge_to_bfaces.entry(e).or_default().push(f);
        }
    }
    let bset: BTreeSet<usize> = boundary.iter().copied().collect();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &start in boundary {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(f) = stack.pop() {
            comp.push(f);
            for &e in &faces[f].edges {
                for &g in &edge_to_bfaces[&e] {
                    if bset.contains(&g) && seen.insert(g) {
                        stack.push(g);
                    }
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    // outer component: the one attaining the lexicographically largest vertex
    let key = |comp: &Vec<usize>| {
        comp.iter()
            .flat_map(|&f| faces[f].vertices.iter())
            .map(|&v| (vertices[v].x, vertices[v].y, vertices[v].z))
            .fold((f64::MIN, f64::MIN, f64::MIN), |acc, p| {
                if p > acc {
                    p
                } else {
                    acc
                }
            })
    };
    let outer_idx = (0..components.len())
        .max_by(|&i, &j| {
            key(&components[i])
                .partial_cmp(&key(&components[j]))
                .unwrap()
        })
        .unwrap();
    let outer = components[outer_idx].clone();
    let mut voids = Vec::new();
    for (i, comp) in components.into_iter().enumerate() {
        if i == outer_idx {
            continue;
        }
        let mut vs: Vec<usize> = comp
            .iter()
            .flat_map(|&f| faces[f].vertices.iter().copied())
            .collect();
        vs.sort_unstable();
        vs.dedup();
        let interior_point = vs.iter().map(|&v| vertices[v]).sum::<Vec3>() / vs.len() as f64;
        voids.push(VoidShell {
            faces: comp,
            interior_point,
        });
    }
    (outer, voids)
}

#[cfg(test)]
mod tests;
