//! Built-in Cartesian generators used by the verification suites.

use super::{MeshError, PolyMesh};
use crate::Vec3;

/// Cartesian mesh of the unit cube with `n^3` hexahedral elements.
pub fn gen_hex_mesh(n: usize) -> Result<PolyMesh, MeshError> {
    assert!(n >= 1, "n must be >= 1");
    grid_mesh(n, |_, _, _| true)
}

/// Hexahedral mesh of the unit cube minus the closed inner cube
/// [1/3, 2/3]^3. Requires `n` to be a positive multiple of 3; the resulting
/// mesh has exactly one inner boundary shell.
pub fn gen_voided_cube_mesh(n: usize) -> Result<PolyMesh, MeshError> {
    assert!(
        n >= 3 && n.is_multiple_of(3),
        "n must be a positive multiple of 3"
    );
    let lo = n / 3;
    let hi = 2 * n / 3;
    grid_mesh(n, move |i, j, k| {
        !(i >= lo && i < hi && j >= lo && j < hi && k >= lo && k < hi)
    })
}

fn grid_mesh(n: usize, keep: impl Fn(usize, usize, usize) -> bool) -> Result<PolyMesh, MeshError> {
    let np = n + 1;
    let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let vertices: Vec<Vec3> = (0..np * np * np)
        .map(|id| {
            let i = id % np;
            let j = (id / np) % np;
            let k = id / (np * np);
            Vec3::new(
                i as f64 / n as f64,
                j as f64 / n as f64,
                k as f64 / n as f64,
            )
        })
        .collect();

    // unique grid faces, loops counter-clockwise w.r.t. the +axis normal
    let mut face_loops: Vec<Vec<usize>> = Vec::new();
    let fx = |i: usize, j: usize, k: usize| -> Vec<usize> {
        vec![
            vid(i, j, k),
            vid(i, j + 1, k),
            vid(i, j + 1, k + 1),
            vid(i, j, k + 1),
        ]
    };
    let fy = |i: usize, j: usize, k: usize| -> Vec<usize> {
        vec![
            vid(i, j, k),
            vid(i, j, k + 1),
            vid(i + 1, j, k + 1),
            vid(i + 1, j, k),
        ]
    };
    let fz = |i: usize, j: usize, k: usize| -> Vec<usize> {
        vec![
            vid(i, j, k),
            vid(i + 1, j, k),
            vid(i + 1, j + 1, k),
            vid(i, j + 1, k),
        ]
    };
    // ids: x-faces, then y-faces, then z-faces
    let x_base = 0;
    for i in 0..=n {
        for j in 0..n {
            for k in 0..n {
                face_loops.push(fx(i, j, k));
            }
        }
    }
    let y_base = face_loops.len();
    for j in 0..=n {
        for i in 0..n {
            for k in 0..n {
                face_loops.push(fy(i, j, k));
            }
        }
    }
    let z_base = face_loops.len();
    for k in 0..=n {
        for i in 0..n {
            for j in 0..n {
                face_loops.push(fz(i, j, k));
            }
        }
    }
    let fx_id = |i: usize, j: usize, k: usize| x_base + k + n * (j + n * i);
    let fy_id = |i: usize, j: usize, k: usize| y_base + k + n * (i + n * j);
    let fz_id = |i: usize, j: usize, k: usize| z_base + j + n * (i + n * k);

    let mut element_faces: Vec<Vec<usize>> = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if keep(i, j, k) {
                    element_faces.push(vec![
                        fx_id(i, j, k),
                        fx_id(i + 1, j, k),
                        fy_id(i, j, k),
                        fy_id(i, j + 1, k),
                        fz_id(i, j, k),
                        fz_id(i, j, k + 1),
                    ]);
                }
            }
        }
    }

    // prune faces and vertices not referenced by any kept element
    let mut face_used = vec![false; face_loops.len()];
    for ef in &element_faces {
        for &f in ef {
            face_used[f] = true;
        }
    }
    let mut face_map = vec![usize::MAX; face_loops.len()];
    let mut kept_faces = Vec::new();
    for (f, used) in face_used.iter().enumerate() {
        if *used {
            face_map[f] = kept_faces.len();
            kept_faces.push(face_loops[f].clone());
        }
    }
    let mut vert_used = vec![false; vertices.len()];
    for fl in &kept_faces {
        for &v in fl {
            vert_used[v] = true;
        }
    }
    let mut vert_map = vec![usize::MAX; vertices.len()];
    let mut kept_vertices = Vec::new();
    for (v, used) in vert_used.iter().enumerate() {
        if *used {
            vert_map[v] = kept_vertices.len();
            kept_vertices.push(vertices[v]);
        }
    }
    let kept_faces: Vec<Vec<usize>> = kept_faces
        .into_iter()
        .map(|fl| fl.into_iter().map(|v| vert_map[v]).collect())
        .collect();
    let element_faces: Vec<Vec<usize>> = element_faces
        .into_iter()
        .map(|ef| ef.into_iter().map(|f| face_map[f]).collect())
        .collect();

    PolyMesh::build(kept_vertices, kept_faces, element_faces, None)
}
