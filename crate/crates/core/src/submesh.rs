//! Conforming tetrahedral submesh obtained by adding only face and element
//! centers. Every face of the parent mesh is fanned into triangles from its
//! centroid (triangles included) and every element is filled with tetrahedra
//! (element center, face center, two consecutive loop vertices), reordered so
//! each vertex quadruple forms a direct basis.
//!
//! Global subentity orientations: subedge tangents run from the lower to the
//! higher subvertex id, subface normals follow the ascending vertex triple.

use crate::mesh::{MeshJson, PolyMesh};
use crate::Vec3;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SubMeshError {
    #[error("degenerate simplex in element {element}: volume {volume:.3e}")]
    DegenerateSimplex { element: usize, volume: f64 },
    #[error("unknown element id {0}")]
    UnknownElement(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubVertex {
    Original(usize),
    FaceCenter(usize),
    ElemCenter(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubFaceParent {
    /// Lies inside a mesh face; `rel_sign` relates the global subface normal
    /// to the parent face normal.
    MeshFace { face: usize, rel_sign: i8 },
    /// Interior to a mesh element.
    Interior { element: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubEdgeParent {
    MeshEdge(usize),
    FaceInterior(usize),
    ElemInterior(usize),
}

#[derive(Clone, Debug)]
pub struct SubMesh {
    pub verts: Vec<Vec3>,
    pub vert_class: Vec<SubVertex>,
    /// Vertex quadruples with positive determinant.
    pub tets: Vec<[usize; 4]>,
    pub tet_parent: Vec<usize>,
    pub tet_volume: Vec<f64>,
    pub tet_diameter: Vec<f64>,
    /// Sorted ascending vertex triples.
    pub faces: Vec<[usize; 3]>,
    pub face_parent: Vec<SubFaceParent>,
    pub face_area: Vec<f64>,
    /// Per tet: its four faces with the outward sign of the global normal.
    pub tet_faces: Vec<[(usize, i8); 4]>,
    /// Sorted ascending vertex pairs.
    pub edges: Vec<[usize; 2]>,
    pub edge_parent: Vec<SubEdgeParent>,
    /// Per face: its three edges with the boundary-orientation sign of the
    /// ascending loop.
    pub face_edges: Vec<[(usize, i8); 3]>,
    /// Mesh edge id -> subedge id (mesh edges are never split).
    pub mesh_edge_to_sub: Vec<usize>,
    /// Tets contained in each parent element.
    pub elem_tets: Vec<Vec<usize>>,
}

/// Entities in the closure of a parent element, each tagged with whether it
/// lies on the element boundary.
#[derive(Clone, Debug, Default)]
pub struct SubEntitySets {
    pub tets: Vec<usize>,
    /// (subface, on element boundary)
    pub faces: Vec<(usize, bool)>,
    pub edges: Vec<(usize, bool)>,
    pub verts: Vec<(usize, bool)>,
}

pub fn tetrahedralize(mesh: &PolyMesh) -> Result<SubMesh, SubMeshError> {
    let nv = mesh.vertices.len();
    let nf = mesh.faces.len();
    let mut verts: Vec<Vec3> = mesh.vertices.clone();
    let mut vert_class: Vec<SubVertex> = (0..nv).map(SubVertex::Original).collect();
    for (f, face) in mesh.faces.iter().enumerate() {
        verts.push(face.center);
        vert_class.push(SubVertex::FaceCenter(f));
    }
    for (t, el) in mesh.elements.iter().enumerate() {
        verts.push(el.center);
        vert_class.push(SubVertex::ElemCenter(t));
    }
    let face_center_id = |f: usize| nv + f;
    let elem_center_id = |t: usize| nv + nf + t;

    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut tet_parent: Vec<usize> = Vec::new();
    let mut tet_volume: Vec<f64> = Vec::new();
    let mut tet_diameter: Vec<f64> = Vec::new();
    let mut elem_tets: Vec<Vec<usize>> = vec![Vec::new(); mesh.elements.len()];
    for (t, el) in mesh.elements.iter().enumerate() {
        for &f in &el.faces {
            let face = &mesh.faces[f];
            let m = face.vertices.len();
            for i in 0..m {
                let (a, b) = (face.vertices[i], face.vertices[(i + 1) % m]);
                let mut quad = [elem_center_id(t), face_center_id(f), a, b];
                let det = det3(
                    verts[quad[1]] - verts[quad[0]],
                    verts[quad[2]] - verts[quad[0]],
                    verts[quad[3]] - verts[quad[0]],
                );
                let vol = det.abs() / 6.0;
                if vol < 1e-14 * el.diameter.powi(3) {
                    return Err(SubMeshError::DegenerateSimplex {
                        element: t,
                        volume: vol,
                    });
                }
                if det < 0.0 {
                    quad.swap(2, 3);
                }
                elem_tets[t].push(tets.len());
                tets.push(quad);
                tet_parent.push(t);
                tet_volume.push(vol);
                let pts = [
                    verts[quad[0]],
                    verts[quad[1]],
                    verts[quad[2]],
                    verts[quad[3]],
                ];
                let mut d = 0.0_f64;
                for i in 0..4 {
                    for j in i + 1..4 {
                        d = d.max((pts[i] - pts[j]).norm());
                    }
                }
                tet_diameter.push(d);
            }
        }
    }

    // global subfaces and subedges, canonically sorted
    let mut face_set: Vec<[usize; 3]> = Vec::new();
    let mut edge_set: Vec<[usize; 2]> = Vec::new();
    for quad in &tets {
        for tri in local_faces(quad) {
            face_set.push(sorted3(tri));
        }
        for pair in local_edges(quad) {
            edge_set.push(sorted2(pair));
        }
    }
    face_set.sort_unstable();
    face_set.dedup();
    edge_set.sort_unstable();
    edge_set.dedup();
    let face_id: BTreeMap<[usize; 3], usize> =
        face_set.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let edge_id: BTreeMap<[usize; 2], usize> =
        edge_set.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    let mut tet_faces: Vec<[(usize, i8); 4]> = Vec::with_capacity(tets.len());
    for quad in &tets {
        let mut tf = [(0usize, 0i8); 4];
        for (k, tri) in local_faces(quad).into_iter().enumerate() {
            let s = sorted3(tri);
            let id = face_id[&s];
            // outward sign of the ascending normal: opposite vertex test
            let opp = quad.iter().copied().find(|v| !s.contains(v)).unwrap();
            let n = (verts[s[1]] - verts[s[0]]).cross(&(verts[s[2]] - verts[s[0]]));
            let sign = if n.dot(&(verts[s[0]] - verts[opp])) > 0.0 {
                1
            } else {
                -1
            };
            tf[k] = (id, sign);
        }
        tet_faces.push(tf);
    }

    let mut face_edges: Vec<[(usize, i8); 3]> = Vec::with_capacity(face_set.len());
    for tri in &face_set {
        // ascending loop (g0, g1, g2): boundary orientation signs
        face_edges.push([
            (edge_id[&[tri[0], tri[1]]], 1),
            (edge_id[&[tri[1], tri[2]]], 1),
            (edge_id[&[tri[0], tri[2]]], -1),
        ]);
    }

    // parentage
    let mut face_parent: Vec<SubFaceParent> = Vec::with_capacity(face_set.len());
    let mut face_area: Vec<f64> = Vec::with_capacity(face_set.len());
    for tri in &face_set {
        let classes = [vert_class[tri[0]], vert_class[tri[1]], vert_class[tri[2]]];
        let elem_center = classes.iter().find_map(|c| match c {
            SubVertex::ElemCenter(t) => Some(*t),
            _ => None,
        });
        let face_center = classes.iter().find_map(|c| match c {
            SubVertex::FaceCenter(f) => Some(*f),
            _ => None,
        });
        let parent = match (elem_center, face_center) {
            (Some(t), _) => SubFaceParent::Interior { element: t },
            (None, Some(f)) => {
                let n_asc = (verts[tri[1]] - verts[tri[0]]).cross(&(verts[tri[2]] - verts[tri[0]]));
                let rel = if n_asc.dot(&mesh.faces[f].normal) > 0.0 {
                    1
                } else {
                    -1
                };
                SubFaceParent::MeshFace {
                    face: f,
                    rel_sign: rel,
                }
            }
            (None, None) => unreachable!("subface without any center vertex"),
        };
        face_parent.push(parent);
        face_area.push(
            (verts[tri[1]] - verts[tri[0]])
                .cross(&(verts[tri[2]] - verts[tri[0]]))
                .norm()
                / 2.0,
        );
    }

    let mut edge_parent: Vec<SubEdgeParent> = Vec::with_capacity(edge_set.len());
    let mut mesh_edge_to_sub = vec![usize::MAX; mesh.edges.len()];
    let mesh_edge_id: BTreeMap<[usize; 2], usize> = mesh
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.v, i))
        .collect();
    for (i, pair) in edge_set.iter().enumerate() {
        let classes = [vert_class[pair[0]], vert_class[pair[1]]];
        let parent = match classes {
            [SubVertex::Original(_), SubVertex::Original(_)] => {
                let e = *mesh_edge_id
                    .get(pair)
                    .expect("original subedge must be a mesh edge");
                mesh_edge_to_sub[e] = i;
                SubEdgeParent::MeshEdge(e)
            }
            _ => {
                if let Some(t) = classes.iter().find_map(|c| match c {
                    SubVertex::ElemCenter(t) => Some(*t),
                    _ => None,
                }) {
                    SubEdgeParent::ElemInterior(t)
                } else {
                    let f = classes
                        .iter()
                        .find_map(|c| match c {
                            SubVertex::FaceCenter(f) => Some(*f),
                            _ => None,
                        })
                        .unwrap();
                    SubEdgeParent::FaceInterior(f)
                }
            }
        };
        edge_parent.push(parent);
    }

    Ok(SubMesh {
        verts,
        vert_class,
        tets,
        tet_parent,
        tet_volume,
        tet_diameter,
        faces: face_set,
        face_parent,
        face_area,
        tet_faces,
        edges: edge_set,
        edge_parent,
        face_edges,
        mesh_edge_to_sub,
        elem_tets,
    })
}

impl SubMesh {
    pub fn tet_points(&self, s: usize) -> [Vec3; 4] {
        let q = self.tets[s];
        [
            self.verts[q[0]],
            self.verts[q[1]],
            self.verts[q[2]],
            self.verts[q[3]],
        ]
    }

    pub fn face_points(&self, f: usize) -> [Vec3; 3] {
        let t = self.faces[f];
        [self.verts[t[0]], self.verts[t[1]], self.verts[t[2]]]
    }

    /// Unit normal of the global (ascending) orientation of a subface.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let p = self.face_points(f);
        (p[1] - p[0]).cross(&(p[2] - p[0])).normalize()
    }

    pub fn edge_vector(&self, e: usize) -> Vec3 {
        self.verts[self.edges[e][1]] - self.verts[self.edges[e][0]]
    }

    /// All simplices contained in a parent element together with the closure
    /// entities, tagged interior / on the element boundary.
    pub fn subentity_sets(&self, t: usize) -> Result<SubEntitySets, SubMeshError> {
        if t >= self.elem_tets.len() {
            return Err(SubMeshError::UnknownElement(t));
        }
        let mut out = SubEntitySets {
            tets: self.elem_tets[t].clone(),
            ..Default::default()
        };
        let mut faces: Vec<usize> = Vec::new();
        for &s in &out.tets {
            faces.extend(self.tet_faces[s].iter().map(|(f, _)| *f));
        }
        faces.sort_unstable();
        faces.dedup();
        let on_boundary = |f: usize| matches!(self.face_parent[f], SubFaceParent::MeshFace { .. });
        out.faces = faces.iter().map(|&f| (f, on_boundary(f))).collect();
        let mut edges: Vec<usize> = Vec::new();
        let mut verts: Vec<usize> = Vec::new();
        for &(f, _) in &out.faces {
            edges.extend(self.face_edges[f].iter().map(|(e, _)| *e));
            verts.extend(self.faces[f].iter().copied());
        }
        edges.sort_unstable();
        edges.dedup();
        verts.sort_unstable();
        verts.dedup();
        out.edges = edges
            .iter()
            .map(|&e| {
                let onb = !matches!(self.edge_parent[e], SubEdgeParent::ElemInterior(_));
                (e, onb)
            })
            .collect();
        out.verts = verts
            .iter()
            .map(|&v| (v, !matches!(self.vert_class[v], SubVertex::ElemCenter(_))))
            .collect();
        Ok(out)
    }

    /// Smallest h_S / h_T over the mesh (regularity constant of the refinement).
    pub fn regularity_constant(&self, mesh: &PolyMesh) -> f64 {
        self.tets
            .iter()
            .enumerate()
            .map(|(s, _)| self.tet_diameter[s] / mesh.elements[self.tet_parent[s]].diameter)
            .fold(f64::INFINITY, f64::min)
    }

    /// Debug dump in the mesh JSON schema (subfaces as triangles).
    pub fn to_mesh_json(&self) -> MeshJson {
        MeshJson {
            vertices: self.verts.iter().map(|p| [p.x, p.y, p.z]).collect(),
            faces: self.faces.iter().map(|t| t.to_vec()).collect(),
            elements: self
                .tet_faces
                .iter()
                .map(|tf| tf.iter().map(|(f, _)| *f).collect())
                .collect(),
            face_normals: None,
            metadata: None,
        }
    }
}

fn local_faces(q: &[usize; 4]) -> [[usize; 3]; 4] {
    [
        [q[0], q[1], q[2]],
        [q[0], q[1], q[3]],
        [q[0], q[2], q[3]],
        [q[1], q[2], q[3]],
    ]
}

fn local_edges(q: &[usize; 4]) -> [[usize; 2]; 6] {
    [
        [q[0], q[1]],
        [q[0], q[2]],
        [q[0], q[3]],
        [q[1], q[2]],
        [q[1], q[3]],
        [q[2], q[3]],
    ]
}

fn sorted3(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

fn sorted2(mut t: [usize; 2]) -> [usize; 2] {
    t.sort_unstable();
    t
}

fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    a.cross(&b).dot(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_hex_mesh, gen_voided_cube_mesh};

    fn single_tet_mesh() -> PolyMesh {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let faces = vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]];
        PolyMesh::build(vertices, faces, vec![vec![0, 1, 2, 3]], None).unwrap()
    }

    #[test]
    fn hexahedron_fans_into_24_tets() {
        let m = gen_hex_mesh(1).unwrap();
        let s = tetrahedralize(&m).unwrap();
        assert_eq!(s.tets.len(), 24);
        let sets = s.subentity_sets(0).unwrap();
        assert_eq!(sets.tets.len(), 24);
        let interior_verts: Vec<_> = sets.verts.iter().filter(|(_, onb)| !onb).collect();
        assert_eq!(interior_verts.len(), 1);
        let onb_faces = sets.faces.iter().filter(|(_, onb)| *onb).count();
        assert_eq!(onb_faces, 24);
    }

    #[test]
    fn tet_element_fans_into_12_tets() {
        let m = single_tet_mesh();
        let s = tetrahedralize(&m).unwrap();
        assert_eq!(s.tets.len(), 12);
    }

    #[test]
    fn tets_are_positively_oriented_and_volumes_add_up() {
        for m in [
            single_tet_mesh(),
            gen_hex_mesh(2).unwrap(),
            gen_voided_cube_mesh(3).unwrap(),
        ] {
            let s = tetrahedralize(&m).unwrap();
            for (i, q) in s.tets.iter().enumerate() {
                let det = det3(
                    s.verts[q[1]] - s.verts[q[0]],
                    s.verts[q[2]] - s.verts[q[0]],
                    s.verts[q[3]] - s.verts[q[0]],
                );
                assert!(det > 0.0, "tet {i} not direct");
                assert!((det / 6.0 - s.tet_volume[i]).abs() < 1e-15);
            }
            for (t, el) in m.elements.iter().enumerate() {
                let vol: f64 = s.elem_tets[t].iter().map(|&i| s.tet_volume[i]).sum();
                assert!((vol - el.volume).abs() <= 1e-12 * el.volume);
            }
        }
    }

    #[test]
    fn conformity_every_subface_has_one_or_two_tets() {
        let m = gen_hex_mesh(2).unwrap();
        let s = tetrahedralize(&m).unwrap();
        let mut count = vec![0usize; s.faces.len()];
        let mut sign_sum = vec![0i32; s.faces.len()];
        for tf in &s.tet_faces {
            for &(f, sg) in tf {
                count[f] += 1;
                sign_sum[f] += sg as i32;
            }
        }
        for (f, c) in count.iter().enumerate() {
            match s.face_parent[f] {
                SubFaceParent::MeshFace { face, .. } => {
                    let expected = m.face_elements[face].len();
                    assert_eq!(*c, expected, "subface {f}");
                    if expected == 2 {
                        assert_eq!(sign_sum[f], 0);
                    }
                }
                SubFaceParent::Interior { .. } => {
                    assert_eq!(*c, 2, "interior subface {f}");
                    assert_eq!(sign_sum[f], 0);
                }
            }
        }
    }

    #[test]
    fn regularity_constant_on_generated_families() {
        for m in [
            gen_hex_mesh(2).unwrap(),
            gen_hex_mesh(4).unwrap(),
            gen_voided_cube_mesh(3).unwrap(),
        ] {
            let s = tetrahedralize(&m).unwrap();
            let c = s.regularity_constant(&m);
            assert!(c >= 0.2, "regularity {c}");
            for (i, &p) in s.tet_parent.iter().enumerate() {
                assert!(s.tet_diameter[i] <= m.elements[p].diameter * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn mesh_edges_are_subedges() {
        let m = gen_hex_mesh(2).unwrap();
        let s = tetrahedralize(&m).unwrap();
        for (e, edge) in m.edges.iter().enumerate() {
            let se = s.mesh_edge_to_sub[e];
            assert_eq!(s.edges[se], edge.v);
            assert_eq!(s.edge_parent[se], SubEdgeParent::MeshEdge(e));
        }
    }

    #[test]
    fn unknown_element_is_an_error() {
        let m = gen_hex_mesh(1).unwrap();
        let s = tetrahedralize(&m).unwrap();
        assert!(matches!(
            s.subentity_sets(5),
            Err(SubMeshError::UnknownElement(5))
        ));
    }

    #[test]
    fn new_vertices_are_exactly_face_and_element_centers() {
        let m = gen_hex_mesh(2).unwrap();
        let s = tetrahedralize(&m).unwrap();
        let n_orig = s
            .vert_class
            .iter()
            .filter(|c| matches!(c, SubVertex::Original(_)))
            .count();
        let n_face = s
            .vert_class
            .iter()
            .filter(|c| matches!(c, SubVertex::FaceCenter(_)))
            .count();
        let n_elem = s
            .vert_class
            .iter()
            .filter(|c| matches!(c, SubVertex::ElemCenter(_)))
            .count();
        assert_eq!(n_orig, m.vertices.len());
        assert_eq!(n_face, m.faces.len());
        assert_eq!(n_elem, m.elements.len());
        for (f, face) in m.faces.iter().enumerate() {
            assert!((s.verts[m.vertices.len() + f] - face.center).norm() < 1e-15);
        }
    }
}
