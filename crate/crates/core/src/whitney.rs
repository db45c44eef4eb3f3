//! Lowest-order simplicial finite element bases in closed form: hat
//! functions, edge (curl-conforming) functions with unit tangential edge
//! integrals, face (div-conforming) functions with unit fluxes, and the
//! piecewise-constant volume function, together with their dual pairings,
//! exact L2 norms, differential identities and the assembled global complex
//! on a tetrahedral submesh.
//!
//! Orientation conventions on one simplex `(V0, V1, V2, V3)` (direct basis):
//! edge tangents run from the lower to the higher local index, face normals
//! follow the ascending vertex triple. Globally, signs are resolved against
//! the submesh conventions (tangent by ascending subvertex id, normal by
//! ascending triple), never the other way around.

use crate::linalg::Csr;
use crate::quadrature::tet_rule;
use crate::submesh::SubMesh;
use crate::Vec3;
use nalgebra::{DMatrix, DVector, Matrix3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WhitneyError {
    #[error("degenerate simplex (det = {det:.3e})")]
    DegenerateSimplex { det: f64 },
    #[error("orientation inconsistency at simplex {simplex}")]
    OrientationInconsistency { simplex: usize },
}

/// Local edges of a simplex, ascending pairs.
pub const SIMPLEX_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
/// Local faces of a simplex, ascending triples.
pub const SIMPLEX_FACES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

/// Closed-form basis functions on one positively oriented simplex.
#[derive(Clone, Debug)]
pub struct SimplexBasis {
    pub verts: [Vec3; 4],
    pub volume: f64,
    grad_lambda: [Vec3; 4],
    /// hat_i(x) = a . (x - p) / d
    hat: [(Vec3, Vec3, f64); 4],
    /// edge_ij(x) = a x (x - p) / d
    edge: [(Vec3, Vec3, f64); 6],
    /// face_ijk(x) = 2 (x - p) / d
    face: [(Vec3, f64); 4],
    /// volume function (constant 1/|S|)
    vol_value: f64,
}

fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    a.cross(&b).dot(&c)
}

/// Builds the local basis; the vertex quadruple must form a direct basis.
pub fn local_basis(verts: [Vec3; 4]) -> Result<SimplexBasis, WhitneyError> {
    let [x0, x1, x2, x3] = verts;
    let d = det3(x1 - x0, x2 - x0, x3 - x0);
    if !(d > 0.0) {
        return Err(WhitneyError::DegenerateSimplex { det: d });
    }
    let volume = d / 6.0;

    // gradients of the barycentric coordinates
    let a = Matrix3::from_columns(&[x1 - x0, x2 - x0, x3 - x0]);
    let ainv = a
        .try_inverse()
        .ok_or(WhitneyError::DegenerateSimplex { det: d })?;
    let mut grad_lambda = [Vec3::zeros(); 4];
    for m in 1..4 {
        grad_lambda[m] = ainv.row(m - 1).transpose();
    }
    grad_lambda[0] = -(grad_lambda[1] + grad_lambda[2] + grad_lambda[3]);

    // hat functions: each vanishes on the opposite face and is 1 at its vertex
    let hat = [
        (
            -(x2 - x1).cross(&(x3 - x1)),
            x3,
            det3(x2 - x1, x3 - x1, x3 - x0),
        ),
        (
            (x2 - x0).cross(&(x3 - x0)),
            x0,
            det3(x2 - x0, x3 - x0, x1 - x0),
        ),
        (
            (x1 - x0).cross(&(x3 - x0)),
            x0,
            det3(x1 - x0, x3 - x0, x2 - x0),
        ),
        (
            (x1 - x0).cross(&(x2 - x0)),
            x0,
            det3(x1 - x0, x2 - x0, x3 - x0),
        ),
    ];

    // edge functions: for edge (i, j) with complement (k, l), k < l:
    //   a = x_l - x_k, p = x_k, d = det(x_l - x_k, x_i - x_k, x_j - x_i)
    let mut edge = [(Vec3::zeros(), Vec3::zeros(), 0.0); 6];
    for (idx, &(i, j)) in SIMPLEX_EDGES.iter().enumerate() {
        let mut comp = [0usize; 2];
        let mut c = 0;
        for m in 0..4 {
            if m != i && m != j {
                comp[c] = m;
                c += 1;
            }
        }
        let (k, l) = (comp[0], comp[1]);
        let av = verts[l] - verts[k];
        let dv = det3(av, verts[i] - verts[k], verts[j] - verts[i]);
        edge[idx] = (av, verts[k], dv);
    }

    // face functions, normalized to unit flux through the ascending normal
    let mut face = [(Vec3::zeros(), 0.0); 4];
    for (idx, tri) in SIMPLEX_FACES.iter().enumerate() {
        let [i, j, k] = *tri;
        let l = 6 - i - j - k;
        let dv = det3(
            verts[j] - verts[i],
            verts[k] - verts[i],
            verts[i] - verts[l],
        );
        face[idx] = (verts[l], dv);
    }

    Ok(SimplexBasis {
        verts,
        volume,
        grad_lambda,
        hat,
        edge,
        face,
        vol_value: 1.0 / volume,
    })
}

impl SimplexBasis {
    pub fn hat(&self, i: usize, x: Vec3) -> f64 {
        let (a, p, d) = self.hat[i];
        a.dot(&(x - p)) / d
    }

    pub fn grad_hat(&self, i: usize) -> Vec3 {
        let (a, _, d) = self.hat[i];
        a / d
    }

    pub fn barycentric(&self, x: Vec3) -> [f64; 4] {
        [
            self.hat(0, x),
            self.hat(1, x),
            self.hat(2, x),
            self.hat(3, x),
        ]
    }

    pub fn grad_lambda(&self, i: usize) -> Vec3 {
        self.grad_lambda[i]
    }

    pub fn edge_fn(&self, e: usize, x: Vec3) -> Vec3 {
        let (a, p, d) = self.edge[e];
        a.cross(&(x - p)) / d
    }

    pub fn curl_edge_fn(&self, e: usize) -> Vec3 {
        let (a, _, d) = self.edge[e];
        2.0 * a / d
    }

    pub fn face_fn(&self, f: usize, x: Vec3) -> Vec3 {
        let (p, d) = self.face[f];
        2.0 * (x - p) / d
    }

    pub fn div_face_fn(&self, f: usize) -> f64 {
        let (_, d) = self.face[f];
        6.0 / d
    }

    pub fn vol_fn(&self) -> f64 {
        self.vol_value
    }

    /// Outward sign of the ascending-triple normal of local face `f`.
    pub fn omega_sf(&self, f: usize) -> f64 {
        let [i, j, k] = SIMPLEX_FACES[f];
        let l = 6 - i - j - k;
        let n = (self.verts[j] - self.verts[i]).cross(&(self.verts[k] - self.verts[i]));
        if n.dot(&(self.verts[i] - self.verts[l])) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Boundary-orientation incidence of edge `e` in face `f` (+1 when the
    /// ascending edge tangent agrees with the ascending face loop).
    pub fn incidence_fe(&self, f: usize, e: usize) -> f64 {
        let [i, j, k] = SIMPLEX_FACES[f];
        let (a, b) = SIMPLEX_EDGES[e];
        if (a, b) == (i, j) || (a, b) == (j, k) {
            1.0
        } else if (a, b) == (i, k) {
            -1.0
        } else {
            0.0
        }
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = SIMPLEX_EDGES[e];
        (self.verts[b] - self.verts[a]).norm()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [i, j, k] = SIMPLEX_FACES[f];
        (self.verts[j] - self.verts[i])
            .cross(&(self.verts[k] - self.verts[i]))
            .norm()
            / 2.0
    }

    /// Ascending-triple unit normal of local face `f`.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [i, j, k] = SIMPLEX_FACES[f];
        (self.verts[j] - self.verts[i])
            .cross(&(self.verts[k] - self.verts[i]))
            .normalize()
    }

    /// Dihedral coefficient associated with the edge joining the complement
    /// pair of `(i, j)`: the negative product of the inward normals of the
    /// faces opposite `i` and `j`.
    pub fn dihedral_coeff(&self, i: usize, j: usize) -> f64 {
        let inward = |opp: usize| -> Vec3 {
            let f = SIMPLEX_FACES
                .iter()
                .position(|t| !t.contains(&opp))
                .unwrap();
            let n = self.face_normal(f);
            let [a, _, _] = SIMPLEX_FACES[f];
            if n.dot(&(self.verts[opp] - self.verts[a])) > 0.0 {
                n
            } else {
                -n
            }
        };
        -inward(i).dot(&inward(j))
    }

    /// Closed-form squared L2 norms: (4 hats, 6 edges, 4 faces, volume).
    pub fn norms_closed(&self) -> ([f64; 4], [f64; 6], [f64; 4], f64) {
        let s = self.volume;
        let hats = [s / 10.0; 4];
        let mut edges = [0.0; 6];
        for (idx, &(i, j)) in SIMPLEX_EDGES.iter().enumerate() {
            let opp_area = |m: usize| -> f64 {
                let f = SIMPLEX_FACES.iter().position(|t| !t.contains(&m)).unwrap();
                self.face_area(f)
            };
            let (fi, fj) = (opp_area(i), opp_area(j));
            let c = self.dihedral_coeff(i, j);
            edges[idx] = (fi * fi + fj * fj + c * fi * fj) / (90.0 * s);
        }
        let mut faces = [0.0; 4];
        for (idx, tri) in SIMPLEX_FACES.iter().enumerate() {
            let [i, j, k] = *tri;
            let l = 6 - i - j - k;
            let (ei, ej, ek) = (
                self.verts[i] - self.verts[l],
                self.verts[j] - self.verts[l],
                self.verts[k] - self.verts[l],
            );
            faces[idx] = (ei.norm_squared()
                + ej.norm_squared()
                + ek.norm_squared()
                + ei.dot(&ej)
                + ei.dot(&ek)
                + ej.dot(&ek))
                / (90.0 * s);
        }
        (hats, edges, faces, 1.0 / s)
    }

    /// Same norms by quadrature (exact for these affine functions).
    pub fn norms_quadrature(&self) -> ([f64; 4], [f64; 6], [f64; 4], f64) {
        let rule = tet_rule(&self.verts, 2);
        let mut hats = [0.0; 4];
        let mut edges = [0.0; 6];
        let mut faces = [0.0; 4];
        let mut vol = 0.0;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            for i in 0..4 {
                hats[i] += w * self.hat(i, *p).powi(2);
            }
            for e in 0..6 {
                edges[e] += w * self.edge_fn(e, *p).norm_squared();
            }
            for f in 0..4 {
                faces[f] += w * self.face_fn(f, *p).norm_squared();
            }
            vol += w * self.vol_value * self.vol_value;
        }
        (hats, edges, faces, vol)
    }

    /// Worst deviation of the dual pairings from the Kronecker delta:
    /// vertex values of hats, tangential edge integrals of edge functions,
    /// normal fluxes of face functions, volume integral of the volume
    /// function.
    pub fn dual_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for ip in 0..4 {
                let d = if i == ip { 1.0 } else { 0.0 };
                worst = worst.max((self.hat(i, self.verts[ip]) - d).abs());
            }
        }
        // two-point Gauss on each edge integrates the affine integrand exactly
        for (ei, &(a, b)) in SIMPLEX_EDGES.iter().enumerate() {
            let (pa, pb) = (self.verts[a], self.verts[b]);
            let t = pb - pa;
            let g = 1.0 / (3.0_f64).sqrt() / 2.0;
            let nodes = [pa + t * (0.5 - g), pa + t * (0.5 + g)];
            for (ej, _) in SIMPLEX_EDGES.iter().enumerate() {
                let d = if ei == ej { 1.0 } else { 0.0 };
                let val = 0.5 * (self.edge_fn(ej, nodes[0]) + self.edge_fn(ej, nodes[1])).dot(&t);
                worst = worst.max((val - d).abs());
            }
        }
        // centroid rule on each face is exact for the affine flux
        for (fi, tri) in SIMPLEX_FACES.iter().enumerate() {
            let [i, j, k] = *tri;
            let c = (self.verts[i] + self.verts[j] + self.verts[k]) / 3.0;
            let n = self.face_normal(fi);
            let area = self.face_area(fi);
            for fj in 0..4 {
                let d = if fi == fj { 1.0 } else { 0.0 };
                let val = self.face_fn(fj, c).dot(&n) * area;
                worst = worst.max((val - d).abs());
            }
        }
        worst = worst.max((self.vol_value * self.volume - 1.0).abs());
        worst
    }

    /// Worst pointwise residual of the differential identities at the given
    /// points: gradients of hats against signed edge functions, curls of edge
    /// functions against signed face functions, divergences of face functions
    /// against the signed volume function.
    pub fn diff_residual(&self, points: &[Vec3]) -> f64 {
        let mut worst = 0.0_f64;
        for &x in points {
            // grad hat_i = sum_{j<i} edge_(j,i) - sum_{j>i} edge_(i,j)
            for i in 0..4 {
                let mut rhs = Vec3::zeros();
                for (ei, &(a, b)) in SIMPLEX_EDGES.iter().enumerate() {
                    if b == i {
                        rhs += self.edge_fn(ei, x);
                    } else if a == i {
                        rhs -= self.edge_fn(ei, x);
                    }
                }
                worst = worst.max((self.grad_hat(i) - rhs).norm());
            }
            // curl edge_(i,j) = sum over faces containing the edge of the
            // boundary-incidence-signed face functions
            for (ei, _) in SIMPLEX_EDGES.iter().enumerate() {
                let mut rhs = Vec3::zeros();
                for fi in 0..4 {
                    let inc = self.incidence_fe(fi, ei);
                    if inc != 0.0 {
                        rhs += self.face_fn(fi, x) * inc;
                    }
                }
                worst = worst.max((self.curl_edge_fn(ei) - rhs).norm());
            }
            // div face_(i,j,k) = omega_SF vol_fn
            for fi in 0..4 {
                let rhs = self.omega_sf(fi) * self.vol_value;
                worst = worst.max((self.div_face_fn(fi) - rhs).abs());
            }
        }
        worst
    }
}

/// Global lowest-order spaces on the submesh with signed incidence
/// differentials and mass matrices.
pub struct WhitneyComplex {
    pub nv: usize,
    pub ne: usize,
    pub nf: usize,
    pub nt: usize,
    /// Signed incidence: gradient (edges x vertices).
    pub d0: Csr,
    /// Signed incidence: curl (faces x edges).
    pub d1: Csr,
    /// Signed incidence: divergence (tets x faces).
    pub d2: Csr,
    /// Mass matrices of the four spaces.
    pub m0: Csr,
    pub m1: Csr,
    pub m2: Csr,
    pub m3: Csr,
    /// Per-tet local bases.
    pub local: Vec<SimplexBasis>,
    /// Local-to-global DOF signs per tet.
    pub edge_sign: Vec<[f64; 6]>,
    pub face_sign: Vec<[f64; 4]>,
    /// Global ids of the local entities per tet.
    pub edge_ids: Vec<[usize; 6]>,
    pub face_ids: Vec<[usize; 4]>,
}

pub fn assemble_whitney(sub: &SubMesh) -> Result<WhitneyComplex, WhitneyError> {
    let (nv, ne, nf, nt) = (
        sub.verts.len(),
        sub.edges.len(),
        sub.faces.len(),
        sub.tets.len(),
    );

    // incidence matrices from the global submesh conventions
    let mut t0 = Vec::with_capacity(2 * ne);
    for (e, pair) in sub.edges.iter().enumerate() {
        t0.push((e, pair[0], -1.0));
        t0.push((e, pair[1], 1.0));
    }
    let d0 = Csr::from_triplets(ne, nv, t0);
    let mut t1 = Vec::with_capacity(3 * nf);
    for (f, fe) in sub.face_edges.iter().enumerate() {
        for &(e, s) in fe {
            t1.push((f, e, s as f64));
        }
    }
    let d1 = Csr::from_triplets(nf, ne, t1);
    let mut t2 = Vec::with_capacity(4 * nt);
    for (s, tf) in sub.tet_faces.iter().enumerate() {
        for &(f, sg) in tf {
            t2.push((s, f, sg as f64));
        }
    }
    let d2 = Csr::from_triplets(nt, nf, t2);

    // local bases and local-to-global signs
    let mut local = Vec::with_capacity(nt);
    let mut edge_sign = Vec::with_capacity(nt);
    let mut face_sign = Vec::with_capacity(nt);
    let mut edge_ids = Vec::with_capacity(nt);
    let mut face_ids = Vec::with_capacity(nt);
    let edge_lookup: std::collections::BTreeMap<[usize; 2], usize> =
        sub.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let face_lookup: std::collections::BTreeMap<[usize; 3], usize> =
        sub.faces.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    for (s, quad) in sub.tets.iter().enumerate() {
        let basis = local_basis(sub.tet_points(s))?;
        let mut es = [0.0; 6];
        let mut eid = [0usize; 6];
        for (idx, &(a, b)) in SIMPLEX_EDGES.iter().enumerate() {
            let (ga, gb) = (quad[a], quad[b]);
            let key = [ga.min(gb), ga.max(gb)];
            eid[idx] = edge_lookup[&key];
            es[idx] = if ga < gb { 1.0 } else { -1.0 };
        }
        let mut fs = [0.0; 4];
        let mut fid = [0usize; 4];
        for (idx, tri) in SIMPLEX_FACES.iter().enumerate() {
            let g = [quad[tri[0]], quad[tri[1]], quad[tri[2]]];
            let mut sorted = g;
            sorted.sort_unstable();
            fid[idx] = face_lookup[&sorted];
            fs[idx] = permutation_parity(&g);
        }
        // consistency guard: the signed local outward test must match d2
        for &(fg, sg) in sub.tet_faces[s].iter() {
            let lidx = fid.iter().position(|&x| x == fg).unwrap();
            let predicted = basis.omega_sf(lidx) * fs[lidx];
            if (predicted - sg as f64).abs() > 0.5 {
                return Err(WhitneyError::OrientationInconsistency { simplex: s });
            }
        }
        local.push(basis);
        edge_sign.push(es);
        face_sign.push(fs);
        edge_ids.push(eid);
        face_ids.push(fid);
    }

    // mass matrices by exact quadrature of the stored closed forms
    let mut tm0 = Vec::new();
    let mut tm1 = Vec::new();
    let mut tm2 = Vec::new();
    let mut tm3 = Vec::new();
    for (s, quad) in sub.tets.iter().enumerate() {
        let basis = &local[s];
        let rule = tet_rule(&sub.tet_points(s), 2);
        let mut h: DMatrix<f64> = DMatrix::zeros(4, 4);
        let mut me: DMatrix<f64> = DMatrix::zeros(6, 6);
        let mut mf: DMatrix<f64> = DMatrix::zeros(4, 4);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let hv: Vec<f64> = (0..4).map(|i| basis.hat(i, *p)).collect();
            let ev: Vec<Vec3> = (0..6).map(|e| basis.edge_fn(e, *p)).collect();
            let fv: Vec<Vec3> = (0..4).map(|f| basis.face_fn(f, *p)).collect();
            for i in 0..4 {
                for j in 0..4 {
                    h[(i, j)] += w * hv[i] * hv[j];
                    mf[(i, j)] += w * fv[i].dot(&fv[j]);
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    me[(i, j)] += w * ev[i].dot(&ev[j]);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                tm0.push((quad[i], quad[j], h[(i, j)]));
                tm2.push((
                    face_ids[s][i],
                    face_ids[s][j],
                    face_sign[s][i] * face_sign[s][j] * mf[(i, j)],
                ));
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                tm1.push((
                    edge_ids[s][i],
                    edge_ids[s][j],
                    edge_sign[s][i] * edge_sign[s][j] * me[(i, j)],
                ));
            }
        }
        tm3.push((s, s, 1.0 / sub.tet_volume[s]));
    }
    let m0 = Csr::from_triplets(nv, nv, tm0);
    let m1 = Csr::from_triplets(ne, ne, tm1);
    let m2 = Csr::from_triplets(nf, nf, tm2);
    let m3 = Csr::from_triplets(nt, nt, tm3);

    Ok(WhitneyComplex {
        nv,
        ne,
        nf,
        nt,
        d0,
        d1,
        d2,
        m0,
        m1,
        m2,
        m3,
        local,
        edge_sign,
        face_sign,
        edge_ids,
        face_ids,
    })
}

fn permutation_parity(g: &[usize; 3]) -> f64 {
    // parity of the permutation sorting the triple ascending
    let mut inversions = 0;
    for i in 0..3 {
        for j in i + 1..3 {
            if g[i] > g[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl WhitneyComplex {
    /// Evaluates an edge-space function (global coefficients) inside tet `s`.
    pub fn eval_edge_space(&self, s: usize, chi: &DVector<f64>, x: Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for e in 0..6 {
            out += self.local[s].edge_fn(e, x) * (self.edge_sign[s][e] * chi[self.edge_ids[s][e]]);
        }
        out
    }

    /// Evaluates a face-space (div-conforming) function inside tet `s`.
    pub fn eval_face_space(&self, s: usize, psi: &DVector<f64>, x: Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for f in 0..4 {
            out += self.local[s].face_fn(f, x) * (self.face_sign[s][f] * psi[self.face_ids[s][f]]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SplitMix64;
    use crate::mesh::{gen_hex_mesh, gen_voided_cube_mesh};
    use crate::submesh::tetrahedralize;

    fn random_simplex(rng: &mut SplitMix64) -> SimplexBasis {
        loop {
            let mut v = [Vec3::zeros(); 4];
            for p in v.iter_mut() {
                *p = Vec3::new(rng.next_sym(), rng.next_sym(), rng.next_sym());
            }
            if det3(v[1] - v[0], v[2] - v[0], v[3] - v[0]) > 0.05 {
                return local_basis(v).unwrap();
            }
        }
    }

    fn interior_points(b: &SimplexBasis, rng: &mut SplitMix64, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                let mut l = [
                    rng.next_f64(),
                    rng.next_f64(),
                    rng.next_f64(),
                    rng.next_f64(),
                ];
                let s: f64 = l.iter().sum();
                for x in l.iter_mut() {
                    *x /= s;
                }
                b.verts[0] * l[0] + b.verts[1] * l[1] + b.verts[2] * l[2] + b.verts[3] * l[3]
            })
            .collect()
    }

    #[test]
    fn dual_pairings_hold_on_random_simplices() {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..100 {
            let b = random_simplex(&mut rng);
            assert!(b.dual_residual() < 1e-12);
        }
    }

    #[test]
    fn closed_form_norms_match_quadrature() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..100 {
            let b = random_simplex(&mut rng);
            let (h1, e1, f1, v1) = b.norms_closed();
            let (h2, e2, f2, v2) = b.norms_quadrature();
            for i in 0..4 {
                assert!((h1[i] - h2[i]).abs() <= 1e-12 * h2[i]);
                assert!(
                    (f1[i] - f2[i]).abs() <= 1e-12 * f2[i],
                    "face {i}: {} vs {}",
                    f1[i],
                    f2[i]
                );
            }
            for e in 0..6 {
                assert!(
                    (e1[e] - e2[e]).abs() <= 1e-12 * e2[e],
                    "edge {e}: {} vs {}",
                    e1[e],
                    e2[e]
                );
            }
            assert!((v1 - v2).abs() <= 1e-12 * v2);
        }
    }

    #[test]
    fn specific_norm_values() {
        let mut rng = SplitMix64::new(51);
        let b = random_simplex(&mut rng);
        let (h, _, _, v) = b.norms_closed();
        assert!((h[0] - b.volume / 10.0).abs() < 1e-15);
        assert!((v - 1.0 / b.volume).abs() < 1e-12 / b.volume);
    }

    #[test]
    fn differential_identities_hold() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..100 {
            let b = random_simplex(&mut rng);
            let pts = interior_points(&b, &mut rng, 5);
            assert!(b.diff_residual(&pts) < 1e-12);
        }
    }

    #[test]
    fn closed_forms_match_barycentric_representation() {
        // independent oracle: hat = lambda, edge = l_i grad l_j - l_j grad l_i,
        // face = 2 (l_i gl_j x gl_k + l_j gl_k x gl_i + l_k gl_i x gl_j)
        let mut rng = SplitMix64::new(31);
        for _ in 0..50 {
            let b = random_simplex(&mut rng);
            let pts = interior_points(&b, &mut rng, 4);
            for &x in &pts {
                let l = b.barycentric(x);
                for i in 0..4 {
                    let lam: f64 = {
                        // lambda from the affine system directly
                        l[i]
                    };
                    assert!((b.hat(i, x) - lam).abs() < 1e-12);
                    assert!((b.grad_hat(i) - b.grad_lambda(i)).norm() < 1e-11);
                }
                for (ei, &(i, j)) in SIMPLEX_EDGES.iter().enumerate() {
                    let w = b.grad_lambda(j) * l[i] - b.grad_lambda(i) * l[j];
                    assert!((b.edge_fn(ei, x) - w).norm() < 1e-11, "edge {ei}");
                }
                for (fi, tri) in SIMPLEX_FACES.iter().enumerate() {
                    let [i, j, k] = *tri;
                    let w = (b.grad_lambda(j).cross(&b.grad_lambda(k)) * l[i]
                        + b.grad_lambda(k).cross(&b.grad_lambda(i)) * l[j]
                        + b.grad_lambda(i).cross(&b.grad_lambda(j)) * l[k])
                        * 2.0;
                    assert!((b.face_fn(fi, x) - w).norm() < 1e-11, "face {fi}");
                }
            }
        }
    }

    #[test]
    fn norm_scaling_laws() {
        let mut rng = SplitMix64::new(4);
        let b = random_simplex(&mut rng);
        let s = 3.7_f64;
        let scaled: [Vec3; 4] = [
            b.verts[0] * s,
            b.verts[1] * s,
            b.verts[2] * s,
            b.verts[3] * s,
        ];
        let bs = local_basis(scaled).unwrap();
        let (h1, e1, f1, v1) = b.norms_closed();
        let (h2, e2, f2, v2) = bs.norms_closed();
        for i in 0..4 {
            assert!((h2[i] / h1[i] - s.powi(3)).abs() < 1e-9);
            assert!((f2[i] / f1[i] - s.powi(-1)).abs() < 1e-9);
        }
        for e in 0..6 {
            assert!((e2[e] / e1[e] - s).abs() < 1e-9);
        }
        assert!((v2 / v1 - s.powi(-3)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_simplex_is_rejected() {
        let v = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
        ];
        assert!(matches!(
            local_basis(v),
            Err(WhitneyError::DegenerateSimplex { .. })
        ));
    }

    #[test]
    fn incidence_identities_are_exact() {
        for mesh in [
            gen_hex_mesh(1).unwrap(),
            gen_hex_mesh(2).unwrap(),
            gen_voided_cube_mesh(3).unwrap(),
        ] {
            let sub = tetrahedralize(&mesh).unwrap();
            let w = assemble_whitney(&sub).unwrap();
            let d1d0 = w.d1.to_dense() * w.d0.to_dense();
            let d2d1 = w.d2.to_dense() * w.d1.to_dense();
            assert_eq!(d1d0.amax(), 0.0);
            assert_eq!(d2d1.amax(), 0.0);
        }
    }

    #[test]
    fn single_tet_submesh_dof_counts() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let faces = vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]];
        let mesh =
            crate::mesh::PolyMesh::build(vertices, faces, vec![vec![0, 1, 2, 3]], None).unwrap();
        let sub = tetrahedralize(&mesh).unwrap();
        let w = assemble_whitney(&sub).unwrap();
        assert_eq!(w.nv, sub.verts.len());
        assert_eq!(w.ne, sub.edges.len());
        assert_eq!(w.nf, sub.faces.len());
        assert_eq!(w.nt, sub.tets.len());
        assert_eq!(w.d0.nrows(), w.ne);
        assert_eq!(w.d1.nrows(), w.nf);
        assert_eq!(w.d2.nrows(), w.nt);
    }

    #[test]
    fn mass_matrices_are_spd() {
        let mesh = gen_hex_mesh(1).unwrap();
        let sub = tetrahedralize(&mesh).unwrap();
        let w = assemble_whitney(&sub).unwrap();
        for m in [&w.m0, &w.m1, &w.m2, &w.m3] {
            let d = m.to_dense();
            assert!((&d - d.transpose()).amax() < 1e-14);
            let eig = nalgebra::SymmetricEigen::new(d);
            assert!(eig.eigenvalues.iter().all(|&l| l > 0.0), "not SPD");
        }
    }

    #[test]
    fn global_gradient_matches_local_combination() {
        // grad of a P1 function: coefficients d0 * c expand in signed local bases
        let mesh = gen_hex_mesh(1).unwrap();
        let sub = tetrahedralize(&mesh).unwrap();
        let w = assemble_whitney(&sub).unwrap();
        let mut rng = SplitMix64::new(6);
        let c = rng.vector(w.nv);
        let gc = w.d0.matvec(&c);
        for s in 0..w.nt {
            let b = &w.local[s];
            let centroid = (b.verts[0] + b.verts[1] + b.verts[2] + b.verts[3]) / 4.0;
            // gradient of sum_i c_i hat_i inside this tet
            let mut grad = Vec3::zeros();
            for i in 0..4 {
                grad += b.grad_hat(i) * c[sub.tets[s][i]];
            }
            let val = w.eval_edge_space(s, &gc, centroid);
            assert!((grad - val).norm() < 1e-11, "tet {s}");
        }
    }

    #[test]
    fn curl_of_edge_space_matches_d1() {
        let mesh = gen_hex_mesh(1).unwrap();
        let sub = tetrahedralize(&mesh).unwrap();
        let w = assemble_whitney(&sub).unwrap();
        let mut rng = SplitMix64::new(8);
        let chi = rng.vector(w.ne);
        let psi = w.d1.matvec(&chi);
        for s in 0..w.nt {
            let b = &w.local[s];
            let centroid = (b.verts[0] + b.verts[1] + b.verts[2] + b.verts[3]) / 4.0;
            let mut curl = Vec3::zeros();
            for e in 0..6 {
                curl += b.curl_edge_fn(e) * (w.edge_sign[s][e] * chi[w.edge_ids[s][e]]);
            }
            let val = w.eval_face_space(s, &psi, centroid);
            assert!((curl - val).norm() < 1e-10, "tet {s}: {curl:?} vs {val:?}");
        }
    }

    #[test]
    fn voided_cube_cohomology_dimension() {
        let mesh = gen_voided_cube_mesh(3).unwrap();
        let sub = tetrahedralize(&mesh).unwrap();
        let w = assemble_whitney(&sub).unwrap();
        let sv1 = w.d1.to_dense().svd(false, false).singular_values;
        let sv2 = w.d2.to_dense().svd(false, false).singular_values;
        let list1: Vec<f64> = sv1.iter().cloned().collect();
        let list2: Vec<f64> = sv2.iter().cloned().collect();
        let mut l1 = list1.clone();
        l1.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut l2 = list2.clone();
        l2.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let rank1 = crate::linalg::numerical_rank(&l1, crate::RANK_RTOL);
        let rank2 = crate::linalg::numerical_rank(&l2, crate::RANK_RTOL);
        let ker_d2 = w.nf - rank2;
        assert_eq!(ker_d2 - rank1, 1, "second Betti number through the complex");
    }
}
