//! Mimetic Poincaré machinery on the tetrahedral submesh: the vertex-value
//! inequality check, the harmonic-form basis with its curl-range test, and
//! the edge/face lifting constructions.
//!
//! The liftings work on the assembled lowest-order complex. Values attached
//! to mesh faces are spread onto their subfaces as area-weighted flux shares,
//! interior subface values come from per-element minimum-norm extensions
//! enforcing the per-simplex closure exactly, and the minimum-norm curl/div
//! preimages are mass-weighted pseudo-inverse solves.

use crate::linalg::{jacobi, pcg, CgResult, Csr};
use crate::mesh::PolyMesh;
use crate::quadrature::triangle_rule_refined;
use crate::submesh::{SubFaceParent, SubMesh};
use crate::whitney::WhitneyComplex;
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MimeticError {
    #[error("closure precondition violated on element {element}: residual {residual:.3e}")]
    ElementClosure { element: usize, residual: f64 },
    #[error("closure precondition violated on shell {shell}: residual {residual:.3e}")]
    ShellClosure { shell: usize, residual: f64 },
    #[error("zero-sum precondition violated in interior-only mode: residual {residual:.3e}")]
    ZeroSum { residual: f64 },
    #[error("rank failure in a minimum-norm solve: residual {residual:.3e} after {iterations} iterations")]
    RankFailure { residual: f64, iterations: usize },
    #[error("singular shell-flux pairing matrix")]
    SingularPairing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntityKind {
    Vertex,
    Edge,
    Face,
    Elem,
}

/// A real value per mesh entity of one kind.
#[derive(Clone, Debug)]
pub struct EntityValues {
    pub kind: EntityKind,
    pub values: DVector<f64>,
}

impl EntityValues {
    pub fn new(kind: EntityKind, values: DVector<f64>) -> Self {
        EntityValues { kind, values }
    }
}

/// Result of the vertex-value inequality check.
#[derive(Clone, Copy, Debug)]
pub struct VertexPoincare {
    /// Gauge constant making the lifted function average-free.
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Result of the edge-from-face (or face-from-element) lifting.
#[derive(Clone, Debug)]
pub struct Lift {
    pub values: EntityValues,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub closure_residual: f64,
    pub cg: CgResult,
}

/// Discrete harmonic 2-forms spanned by interpolated analytic fields.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    /// One face-space coefficient vector per void.
    pub members: Vec<DVector<f64>>,
    /// Shell-flux pairing `L_i(member_j)`.
    pub pairing: DMatrix<f64>,
    /// Worst discrete-divergence residual over the members.
    pub div_residual: f64,
}

/// Verdict of the curl-range test.
#[derive(Clone, Debug)]
pub struct CurlRange {
    pub in_range: bool,
    pub witness: Option<DVector<f64>>,
    pub div_residual: f64,
    pub shell_fluxes: Vec<f64>,
    pub witness_residual: f64,
}

struct ElemExtension {
    interior: Vec<usize>,
    /// Min-norm solve matrix: interior values from per-tet right-hand sides.
    pinv: DMatrix<f64>,
    /// (tet row, subface, sign) triples over boundary subfaces of the element.
    boundary_terms: Vec<(usize, usize, f64)>,
}

/// Bundles the mesh, submesh and assembled complex with the precomputed
/// solvers used by the lifting constructions.
pub struct MimeticCtx<'a> {
    pub mesh: &'a PolyMesh,
    pub sub: &'a SubMesh,
    pub w: &'a WhitneyComplex,
    extensions: Vec<ElemExtension>,
    /// Per mesh face: (subface, orientation relative to the parent, area share).
    pub face_shares: Vec<Vec<(usize, f64, f64)>>,
    /// Per void shell: (subface, outward sign w.r.t. the domain).
    pub shell_subfaces: Vec<Vec<(usize, f64)>>,
    m1_diag: DVector<f64>,
    m2_diag: DVector<f64>,
    s1_diag: DVector<f64>,
    s2_diag: DVector<f64>,
}

const CG_TOL: f64 = 1e-13;

impl<'a> MimeticCtx<'a> {
    pub fn new(mesh: &'a PolyMesh, sub: &'a SubMesh, w: &'a WhitneyComplex) -> Self {
        let mut face_shares: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); mesh.faces.len()];
        for (sf, parent) in sub.face_parent.iter().enumerate() {
            if let SubFaceParent::MeshFace { face, rel_sign } = parent {
                face_shares[*face].push((
                    sf,
                    *rel_sign as f64,
                    sub.face_area[sf] / mesh.faces[*face].area,
                ));
            }
        }
        let mut shell_subfaces = Vec::with_capacity(mesh.void_shells.len());
        for shell in &mesh.void_shells {
            let mut list = Vec::new();
            for &f in &shell.faces {
                let omega = *mesh.omega_bf.get(&f).expect("shell face is boundary") as f64;
                for &(sf, rel, _) in &face_shares[f] {
                    list.push((sf, omega * rel));
                }
            }
            shell_subfaces.push(list);
        }

        // per-element minimum-norm extension solvers
        let mut extensions = Vec::with_capacity(mesh.elements.len());
        for t in 0..mesh.elements.len() {
            let tets = &sub.elem_tets[t];
            let mut interior: Vec<usize> = Vec::new();
            for &s in tets {
                for &(f, _) in &sub.tet_faces[s] {
                    if matches!(sub.face_parent[f], SubFaceParent::Interior { .. }) {
                        interior.push(f);
                    }
                }
            }
            interior.sort_unstable();
            interior.dedup();
            let col_of = |f: usize| interior.binary_search(&f).ok();
            let mut a = DMatrix::zeros(tets.len(), interior.len());
            let mut boundary_terms = Vec::new();
            for (row, &s) in tets.iter().enumerate() {
                for &(f, sg) in &sub.tet_faces[s] {
                    if let Some(col) = col_of(f) {
                        a[(row, col)] += sg as f64;
                    } else {
                        boundary_terms.push((row, f, sg as f64));
                    }
                }
            }
            let pinv = pseudo_inverse(&a);
            extensions.push(ElemExtension {
                interior,
                pinv,
                boundary_terms,
            });
        }

        let m1_diag = w.m1.diagonal();
        let m2_diag = w.m2.diagonal();
        let s1_diag = schur_diag_of(&w.d1, &m1_diag);
        let s2_diag = schur_diag_of(&w.d2, &m2_diag);

        MimeticCtx {
            mesh,
            sub,
            w,
            extensions,
            face_shares,
            shell_subfaces,
            m1_diag,
            m2_diag,
            s1_diag,
            s2_diag,
        }
    }

    /// Shell-flux functional `L_i` applied to face-space coefficients.
    pub fn shell_flux(&self, shell: usize, psi: &DVector<f64>) -> f64 {
        -self.shell_subfaces[shell]
            .iter()
            .map(|&(f, s)| s * psi[f])
            .sum::<f64>()
    }

    /// Mimetic Poincaré check for a collection of vertex values.
    pub fn vertex_poincare_check(&self, alpha_v: &EntityValues) -> VertexPoincare {
        assert_eq!(alpha_v.kind, EntityKind::Vertex);
        let alpha = &alpha_v.values;
        assert_eq!(alpha.len(), self.mesh.vertices.len());
        // extend to subvertices: centers copy the lowest-index parent vertex value
        let mut ext = DVector::zeros(self.sub.verts.len());
        for (sv, class) in self.sub.vert_class.iter().enumerate() {
            ext[sv] = match class {
                crate::submesh::SubVertex::Original(v) => alpha[*v],
                crate::submesh::SubVertex::FaceCenter(f) => {
                    alpha[*self.mesh.faces[*f].vertices.iter().min().unwrap()]
                }
                crate::submesh::SubVertex::ElemCenter(t) => {
                    alpha[*self.mesh.elements[*t].vertices.iter().min().unwrap()]
                }
            };
        }
        // gauge from the P1 mass row sums: int of phi_h = 0
        let ones = DVector::from_element(self.sub.verts.len(), 1.0);
        let wts = self.w.m0.matvec(&ones);
        let c = ext.dot(&wts) / wts.sum();

        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut scale = 0.0;
        for el in self.mesh.elements.iter() {
            let ht = el.diameter;
            for &v in &el.vertices {
                lhs += ht.powi(3) * (alpha[v] - c).powi(2);
                scale += ht.powi(3) * alpha[v] * alpha[v];
            }
            for &e in &el.edges {
                let ed = &self.mesh.edges[e];
                let jump = alpha[ed.v[1]] - alpha[ed.v[0]];
                rhs += ht * jump * jump;
            }
        }
        // a pure rounding residue of the gauge shift does not count as mass
        if lhs <= 1e-28 * scale {
            lhs = 0.0;
        }
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        VertexPoincare { c, lhs, rhs, ratio }
    }

    /// The P1 function lifted from extended vertex values, as subvertex
    /// coefficients after the gauge shift (used by oracles and reports).
    pub fn vertex_lift_coefficients(&self, alpha_v: &EntityValues) -> DVector<f64> {
        assert_eq!(alpha_v.kind, EntityKind::Vertex);
        let alpha = &alpha_v.values;
        let mut ext = DVector::zeros(self.sub.verts.len());
        for (sv, class) in self.sub.vert_class.iter().enumerate() {
            ext[sv] = match class {
                crate::submesh::SubVertex::Original(v) => alpha[*v],
                crate::submesh::SubVertex::FaceCenter(f) => {
                    alpha[*self.mesh.faces[*f].vertices.iter().min().unwrap()]
                }
                crate::submesh::SubVertex::ElemCenter(t) => {
                    alpha[*self.mesh.elements[*t].vertices.iter().min().unwrap()]
                }
            };
        }
        ext
    }

    /// Spreads mesh-face values onto subfaces (area-weighted flux shares in
    /// the global subface orientation) and extends to the interior subfaces
    /// with exact per-simplex closure.
    pub fn extend_face_values(&self, alpha_f: &DVector<f64>) -> Result<DVector<f64>, MimeticError> {
        // element closure precondition
        for (t, el) in self.mesh.elements.iter().enumerate() {
            let mut s = 0.0;
            let mut scale = 0.0;
            for (lf, &f) in el.faces.iter().enumerate() {
                s += el.omega_tf[lf] as f64 * alpha_f[f];
                scale += alpha_f[f].abs();
            }
            if s.abs() > 1e-11 * (1.0 + scale) {
                return Err(MimeticError::ElementClosure {
                    element: t,
                    residual: s.abs(),
                });
            }
        }
        // shell closure precondition
        for (i, shell) in self.mesh.void_shells.iter().enumerate() {
            let mut s = 0.0;
            let mut scale = 0.0;
            for &f in &shell.faces {
                s += *self.mesh.omega_bf.get(&f).unwrap() as f64 * alpha_f[f];
                scale += alpha_f[f].abs();
            }
            if s.abs() > 1e-11 * (1.0 + scale) {
                return Err(MimeticError::ShellClosure {
                    shell: i,
                    residual: s.abs(),
                });
            }
        }

        let mut c = DVector::zeros(self.sub.faces.len());
        for (f, shares) in self.face_shares.iter().enumerate() {
            for &(sf, rel, share) in shares {
                c[sf] = rel * alpha_f[f] * share;
            }
        }
        for ext in &self.extensions {
            if ext.interior.is_empty() {
                continue;
            }
            let mut b = DVector::zeros(ext.pinv.ncols());
            for &(row, f, sg) in &ext.boundary_terms {
                b[row] -= sg * c[f];
            }
            let sol = &ext.pinv * b;
            for (i, &f) in ext.interior.iter().enumerate() {
                c[f] = sol[i];
            }
        }
        Ok(c)
    }

    /// Edge values from face values (the curl lifting).
    pub fn lift_edge_from_face(&self, alpha_f: &EntityValues) -> Result<Lift, MimeticError> {
        assert_eq!(alpha_f.kind, EntityKind::Face);
        let alpha = &alpha_f.values;
        let c = self.extend_face_values(alpha)?;

        let (chi, cg) =
            self.min_norm_preimage(&self.w.d1, &self.w.m1, &self.m1_diag, &self.s1_diag, &c)?;
        // mesh edges are subedges; flip the incidence sign so that
        // sum_E omega_FE alpha_E = alpha_F
        let ne = self.mesh.edges.len();
        let mut alpha_e = DVector::zeros(ne);
        for e in 0..ne {
            alpha_e[e] = -chi[self.sub.mesh_edge_to_sub[e]];
        }
        // closure verification per mesh face
        let mut closure_residual = 0.0_f64;
        for (f, face) in self.mesh.faces.iter().enumerate() {
            let mut s = 0.0;
            for (le, &e) in face.edges.iter().enumerate() {
                s += face.omega_fe[le] as f64 * alpha_e[e];
            }
            closure_residual = closure_residual.max((s - alpha[f]).abs());
        }

        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for el in self.mesh.elements.iter() {
            let ht = el.diameter;
            for &e in &el.edges {
                lhs += ht * alpha_e[e] * alpha_e[e];
            }
            for &f in &el.faces {
                rhs += alpha[f] * alpha[f] / ht;
            }
        }
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        Ok(Lift {
            values: EntityValues::new(EntityKind::Edge, alpha_e),
            lhs,
            rhs,
            ratio,
            closure_residual,
            cg,
        })
    }

    /// Face values from element values (the divergence lifting). With
    /// `interior_only`, boundary subface fluxes are constrained to zero and
    /// the element values must sum to zero.
    pub fn lift_face_from_element(
        &self,
        alpha_t: &EntityValues,
        interior_only: bool,
    ) -> Result<Lift, MimeticError> {
        assert_eq!(alpha_t.kind, EntityKind::Elem);
        let alpha = &alpha_t.values;
        // simplex coefficients alpha_T |S| / |T|
        let mut c = DVector::zeros(self.sub.tets.len());
        for (s, &t) in self.sub.tet_parent.iter().enumerate() {
            c[s] = alpha[t] * self.sub.tet_volume[s] / self.mesh.elements[t].volume;
        }
        let (phi, cg) = if interior_only {
            let total: f64 = alpha.iter().sum();
            let scale: f64 = alpha.iter().map(|x| x.abs()).sum();
            if total.abs() > 1e-11 * (1.0 + scale) {
                return Err(MimeticError::ZeroSum {
                    residual: total.abs(),
                });
            }
            let keep: Vec<usize> = (0..self.sub.faces.len())
                .filter(|&f| match self.sub.face_parent[f] {
                    SubFaceParent::Interior { .. } => true,
                    SubFaceParent::MeshFace { face, .. } => {
                        self.mesh.face_elements[face].len() == 2
                    }
                })
                .collect();
            let (d2_sub, m2_sub, m2_diag_sub) =
                restrict_columns(&self.w.d2, &self.w.m2, &self.m2_diag, &keep);
            let s_diag = schur_diag_of(&d2_sub, &m2_diag_sub);
            let (phi_sub, cg) =
                self.min_norm_preimage(&d2_sub, &m2_sub, &m2_diag_sub, &s_diag, &c)?;
            let mut phi = DVector::zeros(self.sub.faces.len());
            for (i, &f) in keep.iter().enumerate() {
                phi[f] = phi_sub[i];
            }
            (phi, cg)
        } else {
            self.min_norm_preimage(&self.w.d2, &self.w.m2, &self.m2_diag, &self.s2_diag, &c)?
        };

        let nf = self.mesh.faces.len();
        let mut alpha_fv = DVector::zeros(nf);
        for (f, shares) in self.face_shares.iter().enumerate() {
            for &(sf, rel, _) in shares {
                alpha_fv[f] += rel * phi[sf];
            }
        }
        let mut closure_residual = 0.0_f64;
        for (t, el) in self.mesh.elements.iter().enumerate() {
            let mut s = 0.0;
            for (lf, &f) in el.faces.iter().enumerate() {
                s += el.omega_tf[lf] as f64 * alpha_fv[f];
            }
            closure_residual = closure_residual.max((s - alpha[t]).abs());
        }

        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (t, el) in self.mesh.elements.iter().enumerate() {
            let ht = el.diameter;
            for &f in &el.faces {
                lhs += alpha_fv[f] * alpha_fv[f] / ht;
            }
            rhs += alpha[t] * alpha[t] / ht.powi(3);
        }
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        Ok(Lift {
            values: EntityValues::new(EntityKind::Face, alpha_fv),
            lhs,
            rhs,
            ratio,
            closure_residual,
            cg,
        })
    }

    /// Harmonic 2-form basis by interpolating the analytic fields
    /// `x -> (x - x_i) / |x - x_i|^3` centred inside each void. Empty when
    /// the domain has no voids.
    pub fn harmonic_basis(&self) -> Result<HarmonicBasis, MimeticError> {
        let b2 = self.mesh.void_shells.len();
        let mut members = Vec::with_capacity(b2);
        let mut div_residual = 0.0_f64;
        for shell in &self.mesh.void_shells {
            let xi = shell.interior_point;
            let field = |p: Vec3| {
                let d: Vec3 = p - xi;
                let r = d.norm();
                d / (r * r * r)
            };
            let mut psi = DVector::zeros(self.sub.faces.len());
            for f in 0..self.sub.faces.len() {
                let tri = self.sub.face_points(f);
                let n = self.sub.face_normal(f);
                let rule = triangle_rule_refined(&tri, 12, 2);
                psi[f] = rule.integrate(|p| field(p).dot(&n));
            }
            let resid = self.w.d2.matvec(&psi).amax() / psi.amax().max(1e-300);
            div_residual = div_residual.max(resid);
            members.push(psi);
        }
        let mut pairing = DMatrix::zeros(b2, b2);
        for i in 0..b2 {
            for j in 0..b2 {
                pairing[(i, j)] = self.shell_flux(i, &members[j]);
            }
        }
        if b2 > 0 {
            for i in 0..b2 {
                if pairing[(i, i)] <= 0.0 {
                    return Err(MimeticError::SingularPairing);
                }
            }
            let diag_prod: f64 = pairing.diagonal().iter().product();
            if pairing.clone().lu().determinant().abs() <= 1e-8 * diag_prod.abs() {
                return Err(MimeticError::SingularPairing);
            }
        }
        Ok(HarmonicBasis {
            members,
            pairing,
            div_residual,
        })
    }

    /// Checks whether a face-space function is the curl of an edge-space
    /// function: divergence-free and zero flux through every void shell.
    /// When both conditions hold, returns the minimum-norm preimage.
    pub fn curl_range_test(&self, psi: &DVector<f64>) -> CurlRange {
        let scale = self.w.m2.matvec(psi).dot(psi).max(0.0).sqrt().max(1e-300);
        let div_residual = self.w.d2.matvec(psi).amax();
        let shell_fluxes: Vec<f64> = (0..self.mesh.void_shells.len())
            .map(|i| self.shell_flux(i, psi))
            .collect();
        let div_ok = div_residual <= 1e-10 * scale;
        let flux_ok = shell_fluxes.iter().all(|f| f.abs() <= 1e-10 * scale);
        if !(div_ok && flux_ok) {
            return CurlRange {
                in_range: false,
                witness: None,
                div_residual,
                shell_fluxes,
                witness_residual: f64::INFINITY,
            };
        }
        match self.min_norm_preimage(&self.w.d1, &self.w.m1, &self.m1_diag, &self.s1_diag, psi) {
            Ok((chi, _)) => {
                let witness_residual = (self.w.d1.matvec(&chi) - psi).norm() / scale;
                CurlRange {
                    in_range: witness_residual < 1e-10,
                    witness: Some(chi),
                    div_residual,
                    shell_fluxes,
                    witness_residual,
                }
            }
            Err(_) => CurlRange {
                in_range: false,
                witness: None,
                div_residual,
                shell_fluxes,
                witness_residual: f64::INFINITY,
            },
        }
    }

    /// Minimum-`M`-norm solution of `D x = b` through the Schur complement
    /// `D M^{-1} D^T mu = b`, with mass solves by Jacobi-preconditioned CG.
    fn min_norm_preimage(
        &self,
        d: &Csr,
        mass: &Csr,
        m_diag: &DVector<f64>,
        s_diag: &DVector<f64>,
        b: &DVector<f64>,
    ) -> Result<(DVector<f64>, CgResult), MimeticError> {
        let m_solve = |rhs: &DVector<f64>| -> DVector<f64> {
            let (x, _info) = pcg(|v| mass.matvec(v), jacobi(m_diag), rhs, 1e-14, 4000);
            x
        };
        let apply = |mu: &DVector<f64>| -> DVector<f64> { d.matvec(&m_solve(&d.tr_matvec(mu))) };
        let maxit = 40 * (b.len() as f64).sqrt() as usize + 400;
        let (mu, info) = pcg(apply, jacobi(s_diag), b, CG_TOL, maxit);
        let x = m_solve(&d.tr_matvec(&mu));
        let resid = (d.matvec(&x) - b).norm() / b.norm().max(1e-300);
        if resid > 1e-9 {
            return Err(MimeticError::RankFailure {
                residual: resid,
                iterations: info.iterations,
            });
        }
        Ok((x, info))
    }

    /// Second Betti number from numerical ranks of the incidence matrices
    /// (`dim ker d2 - rank d1`); dense, intended for small meshes.
    pub fn cohomology_b2_by_rank(&self) -> usize {
        let rank = |m: &Csr| -> usize {
            let sv = m.to_dense().svd(false, false).singular_values;
            let mut list: Vec<f64> = sv.iter().cloned().collect();
            list.sort_by(|a, b| b.partial_cmp(a).unwrap());
            crate::linalg::numerical_rank(&list, crate::RANK_RTOL)
        };
        let rank1 = rank(&self.w.d1);
        let rank2 = rank(&self.w.d2);
        (self.w.nf - rank2) - rank1
    }
}

fn restrict_columns(
    d: &Csr,
    mass: &Csr,
    m_diag: &DVector<f64>,
    keep: &[usize],
) -> (Csr, Csr, DVector<f64>) {
    let mut col_map = std::collections::BTreeMap::new();
    for (i, &c) in keep.iter().enumerate() {
        col_map.insert(c, i);
    }
    let mut trip = Vec::new();
    for r in 0..d.nrows() {
        for (c, v) in d.row(r) {
            if let Some(&cc) = col_map.get(&c) {
                trip.push((r, cc, v));
            }
        }
    }
    let d_sub = Csr::from_triplets(d.nrows(), keep.len(), trip);
    let mut mtrip = Vec::new();
    for (&r, &rr) in col_map.iter().collect::<Vec<_>>() {
        for (c, v) in mass.row(r) {
            if let Some(&cc) = col_map.get(&c) {
                mtrip.push((rr, cc, v));
            }
        }
    }
    let m_sub = Csr::from_triplets(keep.len(), keep.len(), mtrip);
    let diag = DVector::from_fn(keep.len(), |i, _| m_diag[keep[i]]);
    (d_sub, m_sub, diag)
}

fn schur_diag_of(d: &Csr, m_diag: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(d.nrows());
    for r in 0..d.nrows() {
        let mut s = 0.0;
        for (c, v) in d.row(r) {
            s += v * v / m_diag[c];
        }
        out[r] = s.max(1e-300);
    }
    out
}

/// Min-norm pseudo-inverse via SVD (for small consistent systems).
fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let mut sinv = DMatrix::zeros(vt.nrows(), u.ncols());
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-12 * smax {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

#[cfg(test)]
mod tests;
