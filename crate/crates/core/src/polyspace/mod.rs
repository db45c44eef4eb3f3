//! Polynomial spaces on mesh entities: scaled monomial bases in entity-local
//! frames, quadrature-backed Gram matrices, L2 projectors, and the direct
//! decompositions of vector polynomials into rotational/complement parts on
//! faces and gradient/rotational/complement parts on elements.
//!
//! Local frames are normalized by the entity diameter so the Gram
//! conditioning is independent of the mesh size. Face frames `(u, v, n)` are
//! right-handed, so the in-plane rotation of angle -pi/2 reads
//! `(z_u, z_v) -> (z_v, -z_u)` and the vector rotational of a scalar is
//! `vrot r = (d_v r, -d_u r) / h`.

use crate::mesh::PolyMesh;
use crate::quadrature::{self, Rule};
use crate::Vec3;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolySpaceError {
    #[error("singular Gram matrix on a degenerate entity")]
    SingularGram,
    #[error("rank deficiency: expected dimension {expected}, achieved {achieved}")]
    RankDeficiency { expected: usize, achieved: usize },
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
}

/// Handle to a mesh entity carrying polynomial data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Entity {
    Edge(usize),
    Face(usize),
    Elem(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    Edge,
    Face,
    Elem,
}

/// Entity-local scaled coordinate frame.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub kind: FrameKind,
    pub center: Vec3,
    pub h: f64,
    /// Edge: `[t, -, -]`; face: `[u, v, n]`; element: global axes.
    pub axes: [Vec3; 3],
}

impl Frame {
    pub fn dim(&self) -> usize {
        match self.kind {
            FrameKind::Edge => 1,
            FrameKind::Face => 2,
            FrameKind::Elem => 3,
        }
    }

    /// Scaled local coordinates of a physical point (unused slots are 0).
    pub fn local(&self, p: Vec3) -> [f64; 3] {
        let d = p - self.center;
        match self.kind {
            FrameKind::Edge => [d.dot(&self.axes[0]) / self.h, 0.0, 0.0],
            FrameKind::Face => [
                d.dot(&self.axes[0]) / self.h,
                d.dot(&self.axes[1]) / self.h,
                0.0,
            ],
            FrameKind::Elem => [
                d.dot(&self.axes[0]) / self.h,
                d.dot(&self.axes[1]) / self.h,
                d.dot(&self.axes[2]) / self.h,
            ],
        }
    }
}

pub fn entity_frame(mesh: &PolyMesh, entity: Entity) -> Frame {
    match entity {
        Entity::Edge(e) => {
            let ed = &mesh.edges[e];
            Frame {
                kind: FrameKind::Edge,
                center: ed.center,
                h: ed.length,
                axes: [mesh.edge_tangent(e), Vec3::zeros(), Vec3::zeros()],
            }
        }
        Entity::Face(f) => {
            let face = &mesh.faces[f];
            Frame {
                kind: FrameKind::Face,
                center: face.center,
                h: face.diameter,
                axes: [face.axis_u, face.axis_v, face.normal],
            }
        }
        Entity::Elem(t) => {
            let el = &mesh.elements[t];
            Frame {
                kind: FrameKind::Elem,
                center: el.center,
                h: el.diameter,
                axes: [Vec3::x(), Vec3::y(), Vec3::z()],
            }
        }
    }
}

/// Quadrature rule on an entity, exact to `degree`; polytopal entities
/// integrate through their simplicial subdivision.
pub fn entity_rule(mesh: &PolyMesh, entity: Entity, degree: usize) -> Result<Rule, PolySpaceError> {
    quadrature::check_degree(degree)?;
    Ok(entity_rule_unchecked(mesh, entity, degree))
}

pub(crate) fn entity_rule_unchecked(mesh: &PolyMesh, entity: Entity, degree: usize) -> Rule {
    match entity {
        Entity::Edge(e) => {
            let ed = &mesh.edges[e];
            quadrature::segment_rule(mesh.vertices[ed.v[0]], mesh.vertices[ed.v[1]], degree)
        }
        Entity::Face(f) => Rule::merged(
            mesh.face_tris(f)
                .iter()
                .map(|t| quadrature::triangle_rule(t, degree)),
        ),
        Entity::Elem(t) => Rule::merged(
            mesh.elem_tets(t)
                .iter()
                .map(|s| quadrature::tet_rule(s, degree)),
        ),
    }
}

/// Number of monomials of total degree <= `deg` in `dim` variables (0 for
/// negative degrees).
pub fn poly_dim(dim: usize, deg: isize) -> usize {
    if deg < 0 {
        return 0;
    }
    let l = deg as usize;
    match dim {
        1 => l + 1,
        2 => (l + 1) * (l + 2) / 2,
        3 => (l + 1) * (l + 2) * (l + 3) / 6,
        _ => unreachable!(),
    }
}

/// Graded lexicographic exponent list for `dim` variables up to `deg`.
pub fn mono_exponents(dim: usize, deg: isize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    if deg < 0 {
        return out;
    }
    for total in 0..=(deg as usize) {
        match dim {
            1 => out.push([total, 0, 0]),
            2 => {
                for a in (0..=total).rev() {
                    out.push([a, total - a, 0]);
                }
            }
            3 => {
                for a in (0..=total).rev() {
                    for b in (0..=(total - a)).rev() {
                        out.push([a, b, total - a - b]);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    out
}

fn mono_values(exps: &[[usize; 3]], local: &[[f64; 3]]) -> DMatrix<f64> {
    DMatrix::from_fn(local.len(), exps.len(), |i, j| {
        let [a, b, c] = exps[j];
        local[i][0].powi(a as i32) * local[i][1].powi(b as i32) * local[i][2].powi(c as i32)
    })
}

fn mono_partial(exps: &[[usize; 3]], local: &[[f64; 3]], axis: usize) -> DMatrix<f64> {
    DMatrix::from_fn(local.len(), exps.len(), |i, j| {
        let e = exps[j];
        if e[axis] == 0 {
            return 0.0;
        }
        let mut d = e;
        d[axis] -= 1;
        e[axis] as f64
            * local[i][0].powi(d[0] as i32)
            * local[i][1].powi(d[1] as i32)
            * local[i][2].powi(d[2] as i32)
    })
}

/// Tabulated component values at a set of points: one `npts x nbasis` block
/// per component.
pub struct Tab {
    pub comp: Vec<DMatrix<f64>>,
}

/// A polynomial basis on an entity: columns are basis members expressed in
/// the scaled monomial list of the ambient degree, one coefficient block per
/// vector component. Carries the Gram matrix of the entity L2 product and
/// its Cholesky factor.
pub struct Basis {
    pub frame: Frame,
    pub ambient_deg: isize,
    pub ncomp: usize,
    pub exps: Vec<[usize; 3]>,
    /// `(ncomp * nmono) x nbasis` coefficients.
    pub coeffs: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    pub gram_cond: f64,
    pub orthonormalized: bool,
}

/// Gram condition number beyond which bases are re-orthonormalized.
pub const ORTHONORMALIZE_COND: f64 = 1e8;

impl Basis {
    pub fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn finalize(
        frame: Frame,
        ambient_deg: isize,
        ncomp: usize,
        exps: Vec<[usize; 3]>,
        mut coeffs: DMatrix<f64>,
        rule: &Rule,
    ) -> Result<Basis, PolySpaceError> {
        if coeffs.ncols() == 0 {
            return Ok(Basis {
                frame,
                ambient_deg,
                ncomp,
                exps,
                coeffs,
                gram: DMatrix::zeros(0, 0),
                chol: None,
                gram_cond: 1.0,
                orthonormalized: false,
            });
        }
        let gram = gram_of(&frame, ncomp, &exps, &coeffs, rule);
        let eig = nalgebra::SymmetricEigen::new(gram.clone());
        let lmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let lmin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        if !(lmin > 0.0) {
            return Err(PolySpaceError::SingularGram);
        }
        let mut gram_cond = lmax / lmin;
        let mut orthonormalized = false;
        let mut gram = gram;
        if gram_cond > ORTHONORMALIZE_COND {
            let chol = gram
                .clone()
                .cholesky()
                .ok_or(PolySpaceError::SingularGram)?;
            // b' = b L^{-T}: solve L^T X = I, i.e. columns of L^{-T}
            let linv_t = chol
                .l()
                .transpose()
                .try_inverse()
                .ok_or(PolySpaceError::SingularGram)?;
            coeffs = &coeffs * linv_t;
            gram = gram_of(&frame, ncomp, &exps, &coeffs, rule);
            let eig2 = nalgebra::SymmetricEigen::new(gram.clone());
            let lmax2 = eig2.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            let lmin2 = eig2.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            gram_cond = lmax2 / lmin2;
            orthonormalized = true;
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or(PolySpaceError::SingularGram)?;
        Ok(Basis {
            frame,
            ambient_deg,
            ncomp,
            exps,
            coeffs,
            gram,
            chol: Some(chol),
            gram_cond,
            orthonormalized,
        })
    }

    /// Component values at physical points.
    pub fn values(&self, pts: &[Vec3]) -> Tab {
        let local: Vec<[f64; 3]> = pts.iter().map(|p| self.frame.local(*p)).collect();
        let v = mono_values(&self.exps, &local);
        let nm = self.exps.len();
        let comp = (0..self.ncomp)
            .map(|c| &v * self.coeffs.rows(c * nm, nm))
            .collect();
        Tab { comp }
    }

    /// Values of a vector basis embedded in 3D through the frame axes.
    pub fn values3(&self, pts: &[Vec3]) -> Tab {
        let t = self.values(pts);
        if self.ncomp == 1 {
            return t;
        }
        let (n, m) = (t.comp[0].nrows(), t.comp[0].ncols());
        let mut xyz = vec![
            DMatrix::zeros(n, m),
            DMatrix::zeros(n, m),
            DMatrix::zeros(n, m),
        ];
        for (c, block) in t.comp.iter().enumerate() {
            let axis = self.frame.axes[c];
            for d in 0..3 {
                xyz[d] += block * axis[d];
            }
        }
        Tab { comp: xyz }
    }

    /// Physical gradient of a scalar basis, embedded in 3D.
    pub fn phys_grad3(&self, pts: &[Vec3]) -> Tab {
        assert_eq!(self.ncomp, 1);
        let local: Vec<[f64; 3]> = pts.iter().map(|p| self.frame.local(*p)).collect();
        let (n, m) = (pts.len(), self.coeffs.ncols());
        let mut xyz = vec![
            DMatrix::zeros(n, m),
            DMatrix::zeros(n, m),
            DMatrix::zeros(n, m),
        ];
        for axis in 0..self.frame.dim() {
            let d = mono_partial(&self.exps, &local, axis) * &self.coeffs / self.frame.h;
            let a = self.frame.axes[axis];
            for c in 0..3 {
                xyz[c] += &d * a[c];
            }
        }
        Tab { comp: xyz }
    }

    /// Physical tangential derivative of a scalar edge basis.
    pub fn edge_deriv(&self, pts: &[Vec3]) -> DMatrix<f64> {
        assert_eq!(self.frame.kind, FrameKind::Edge);
        let local: Vec<[f64; 3]> = pts.iter().map(|p| self.frame.local(*p)).collect();
        mono_partial(&self.exps, &local, 0) * &self.coeffs / self.frame.h
    }

    /// Physical in-plane rotational `vrot r = (grad r)^perp` of a scalar face
    /// basis, embedded in 3D.
    pub fn vrot3(&self, pts: &[Vec3]) -> Tab {
        assert_eq!(self.ncomp, 1);
        assert_eq!(self.frame.kind, FrameKind::Face);
        let local: Vec<[f64; 3]> = pts.iter().map(|p| self.frame.local(*p)).collect();
        let du = mono_partial(&self.exps, &local, 0) * &self.coeffs / self.frame.h;
        let dv = mono_partial(&self.exps, &local, 1) * &self.coeffs / self.frame.h;
        // (d_v r) u_axis - (d_u r) v_axis
        let (u, v) = (self.frame.axes[0], self.frame.axes[1]);
        let comp = (0..3).map(|c| &dv * u[c] - &du * v[c]).collect();
        Tab { comp }
    }

    /// Physical divergence of a vector basis (face: tangential divergence).
    pub fn div_tab(&self, pts: &[Vec3]) -> DMatrix<f64> {
        assert!(self.ncomp >= 2);
        let local: Vec<[f64; 3]> = pts.iter().map(|p| self.frame.local(*p)).collect();
        let nm = self.exps.len();
        let mut out = DMatrix::zeros(pts.len(), self.coeffs.ncols());
        for c in 0..self.ncomp {
            out +=
                mono_partial(&self.exps, &local, c) * self.coeffs.rows(c * nm, nm) / self.frame.h;
        }
        out
    }

    /// Physical curl of a 3D vector basis.
    pub fn curl3(&self, pts: &[Vec3]) -> Tab {
        assert_eq!(self.ncomp, 3);
        assert_eq!(self.frame.kind, FrameKind::Elem);
        let local: Vec<[f64; 3]> = pts.iter().map(|p| self.frame.local(*p)).collect();
        let nm = self.exps.len();
        let part = |axis: usize, comp: usize| {
            mono_partial(&self.exps, &local, axis) * self.coeffs.rows(comp * nm, nm) / self.frame.h
        };
        // curl = (d_y b_z - d_z b_y, d_z b_x - d_x b_z, d_x b_y - d_y b_x)
        Tab {
            comp: vec![
                part(1, 2) - part(2, 1),
                part(2, 0) - part(0, 2),
                part(0, 1) - part(1, 0),
            ],
        }
    }

    /// Solves the Gram system (L2 projection for a moment vector).
    pub fn solve_gram(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.as_ref().expect("nonempty basis").solve(rhs)
    }

    /// L2 projection of a scalar function given by values at the nodes of
    /// `rule` (which must match the entity).
    pub fn project_values(&self, rule: &Rule, fvals: &DVector<f64>) -> DVector<f64> {
        assert_eq!(self.ncomp, 1);
        if self.is_empty() {
            return DVector::zeros(0);
        }
        let tab = self.values(&rule.points);
        let w = DVector::from_column_slice(&rule.weights);
        let rhs = tab.comp[0].transpose() * w.component_mul(fvals);
        self.solve_gram(&rhs)
    }

    /// L2 projection of a 3D vector field sampled at the nodes of `rule`
    /// (for face bases the tangential part is projected).
    pub fn project_vec3(&self, rule: &Rule, f: impl Fn(Vec3) -> Vec3) -> DVector<f64> {
        if self.is_empty() {
            return DVector::zeros(0);
        }
        let tab = self.values3(&rule.points);
        let mut rhs = DVector::zeros(self.len());
        for (i, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fv = f(*p);
            for j in 0..self.len() {
                rhs[j] += w
                    * (tab.comp[0][(i, j)] * fv.x
                        + tab.comp[1][(i, j)] * fv.y
                        + tab.comp[2][(i, j)] * fv.z);
            }
        }
        self.solve_gram(&rhs)
    }

    /// Evaluates a member given by coefficients at physical points (scalar).
    pub fn eval_scalar(&self, coeffs: &DVector<f64>, pts: &[Vec3]) -> DVector<f64> {
        let tab = self.values(pts);
        &tab.comp[0] * coeffs
    }

    /// Evaluates a member given by coefficients at physical points (3D).
    pub fn eval_vec3(&self, coeffs: &DVector<f64>, pts: &[Vec3]) -> Vec<Vec3> {
        let tab = self.values3(pts);
        (0..pts.len())
            .map(|i| {
                Vec3::new(
                    tab.comp[0].row(i).transpose().dot(coeffs),
                    tab.comp[1].row(i).transpose().dot(coeffs),
                    tab.comp[2].row(i).transpose().dot(coeffs),
                )
            })
            .collect()
    }
}

fn gram_of(
    frame: &Frame,
    ncomp: usize,
    exps: &[[usize; 3]],
    coeffs: &DMatrix<f64>,
    rule: &Rule,
) -> DMatrix<f64> {
    let local: Vec<[f64; 3]> = rule.points.iter().map(|p| frame.local(*p)).collect();
    let v = mono_values(exps, &local);
    let nm = exps.len();
    let mut gram = DMatrix::zeros(coeffs.ncols(), coeffs.ncols());
    for c in 0..ncomp {
        let vals = &v * coeffs.rows(c * nm, nm);
        let mut weighted = vals.clone();
        for (i, w) in rule.weights.iter().enumerate() {
            weighted.row_mut(i).scale_mut(*w);
        }
        gram += vals.transpose() * weighted;
    }
    gram
}

/// Scalar polynomial basis `P^deg(Y)` (empty for negative degrees).
pub fn scalar_basis(mesh: &PolyMesh, entity: Entity, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, entity);
    let exps = mono_exponents(frame.dim(), deg);
    let n = exps.len();
    let rule = entity_rule_unchecked(mesh, entity, (2 * deg.max(0)) as usize);
    Basis::finalize(frame, deg, 1, exps, DMatrix::identity(n, n), &rule)
}

/// Vector polynomial basis (components in the entity frame).
pub fn vector_basis(mesh: &PolyMesh, entity: Entity, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, entity);
    let d = frame.dim();
    assert!(d >= 2, "vector bases live on faces and elements");
    let exps = mono_exponents(d, deg);
    let nm = exps.len();
    let n = d * nm;
    let mut coeffs = DMatrix::zeros(n, n);
    for c in 0..d {
        for j in 0..nm {
            coeffs[(c * nm + j, c * nm + j)] = 1.0;
        }
    }
    let rule = entity_rule_unchecked(mesh, entity, (2 * deg.max(0)) as usize);
    Basis::finalize(frame, deg, d, exps, coeffs, &rule)
}

fn mono_index(exps: &[[usize; 3]], e: [usize; 3]) -> usize {
    exps.iter()
        .position(|x| *x == e)
        .expect("monomial in ambient list")
}

/// `Roly^deg(F) = vrot P^{deg+1}(F)`: the rotational part on a face.
pub fn roly_face(mesh: &PolyMesh, f: usize, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, Entity::Face(f));
    let exps = mono_exponents(2, deg);
    let nm = exps.len();
    let higher = mono_exponents(2, deg + 1);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for e in higher.iter().filter(|e| e[0] + e[1] >= 1) {
        // vrot m = (d_v m, -d_u m) in frame components (1/h factor dropped)
        let mut col: DVector<f64> = DVector::zeros(2 * nm);
        if e[1] >= 1 {
            col[mono_index(&exps, [e[0], e[1] - 1, 0])] += e[1] as f64;
        }
        if e[0] >= 1 {
            col[nm + mono_index(&exps, [e[0] - 1, e[1], 0])] -= e[0] as f64;
        }
        cols.push(col);
    }
    let coeffs = if cols.is_empty() {
        DMatrix::zeros(2 * nm, 0)
    } else {
        DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
    };
    let rule = entity_rule_unchecked(mesh, Entity::Face(f), (2 * deg.max(0)) as usize);
    Basis::finalize(frame, deg, 2, exps, coeffs, &rule)
}

/// `cRoly^deg(F) = (x - x_F) P^{deg-1}(F)`: the complement part on a face.
pub fn croly_face(mesh: &PolyMesh, f: usize, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, Entity::Face(f));
    let exps = mono_exponents(2, deg);
    let nm = exps.len();
    let lower = mono_exponents(2, deg - 1);
    let mut coeffs = DMatrix::zeros(2 * nm, lower.len());
    for (j, e) in lower.iter().enumerate() {
        coeffs[(mono_index(&exps, [e[0] + 1, e[1], 0]), j)] = 1.0;
        coeffs[(nm + mono_index(&exps, [e[0], e[1] + 1, 0]), j)] = 1.0;
    }
    let rule = entity_rule_unchecked(mesh, Entity::Face(f), (2 * deg.max(0)) as usize);
    Basis::finalize(frame, deg, 2, exps, coeffs, &rule)
}

/// `Goly^deg(T) = grad P^{deg+1}(T)`.
pub fn goly_elem(mesh: &PolyMesh, t: usize, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, Entity::Elem(t));
    let exps = mono_exponents(3, deg);
    let nm = exps.len();
    let higher = mono_exponents(3, deg + 1);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for e in higher.iter().filter(|e| e[0] + e[1] + e[2] >= 1) {
        let mut col: DVector<f64> = DVector::zeros(3 * nm);
        for axis in 0..3 {
            if e[axis] >= 1 {
                let mut d = *e;
                d[axis] -= 1;
                col[axis * nm + mono_index(&exps, d)] += e[axis] as f64;
            }
        }
        cols.push(col);
    }
    let coeffs = if cols.is_empty() {
        DMatrix::zeros(3 * nm, 0)
    } else {
        DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
    };
    let rule = entity_rule_unchecked(mesh, Entity::Elem(t), (2 * deg.max(0)) as usize);
    Basis::finalize(frame, deg, 3, exps, coeffs, &rule)
}

/// `cGoly^deg(T) = (x - x_T) x vP^{deg-1}(T)`, rank-reduced to the analytic
/// dimension (the generating set is redundant).
pub fn cgoly_elem(mesh: &PolyMesh, t: usize, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, Entity::Elem(t));
    let exps = mono_exponents(3, deg);
    let nm = exps.len();
    let lower = mono_exponents(3, deg - 1);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for e in &lower {
        for axis in 0..3 {
            // (u, v, w) x (m e_axis)
            let mut col: DVector<f64> = DVector::zeros(3 * nm);
            let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
            // cross(x, m e_axis) = m * (x_j e_i' ...): e_i component = x_j m * sign
            // x = (u, v, w): cross gives component along e_(axis+2) = +x_(axis+1) m,
            // along e_(axis+1) = -x_(axis+2) m
            let mut ej = *e;
            ej[j] += 1;
            col[i * nm + mono_index(&exps, ej)] -= 1.0;
            let mut ei = *e;
            ei[i] += 1;
            col[j * nm + mono_index(&exps, ei)] += 1.0;
            cols.push(col);
        }
    }
    let target = 3 * poly_dim(3, deg) - goly_dim(deg);
    reduce_and_finalize(mesh, Entity::Elem(t), frame, deg, exps, cols, target)
}

/// `Roly^deg(T) = curl vP^{deg+1}(T)`, rank-reduced.
pub fn roly_elem(mesh: &PolyMesh, t: usize, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, Entity::Elem(t));
    let exps = mono_exponents(3, deg);
    let nm = exps.len();
    let higher = mono_exponents(3, deg + 1);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for e in &higher {
        for axis in 0..3 {
            // curl(m e_axis) = grad m x e_axis
            let mut col: DVector<f64> = DVector::zeros(3 * nm);
            let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
            // (grad m) x e_axis: component along e_i = (d_j m), along e_j = -(d_i m)
            if e[j] >= 1 {
                let mut d = *e;
                d[j] -= 1;
                col[i * nm + mono_index(&exps, d)] += e[j] as f64;
            }
            if e[i] >= 1 {
                let mut d = *e;
                d[i] -= 1;
                col[j * nm + mono_index(&exps, d)] -= e[i] as f64;
            }
            if col.amax() > 0.0 {
                cols.push(col);
            }
        }
    }
    let target = roly_elem_dim(deg);
    reduce_and_finalize(mesh, Entity::Elem(t), frame, deg, exps, cols, target)
}

/// `cRoly^deg(T) = (x - x_T) P^{deg-1}(T)`.
pub fn croly_elem(mesh: &PolyMesh, t: usize, deg: isize) -> Result<Basis, PolySpaceError> {
    let frame = entity_frame(mesh, Entity::Elem(t));
    let exps = mono_exponents(3, deg);
    let nm = exps.len();
    let lower = mono_exponents(3, deg - 1);
    let mut coeffs = DMatrix::zeros(3 * nm, lower.len());
    for (j, e) in lower.iter().enumerate() {
        for axis in 0..3 {
            let mut ea = *e;
            ea[axis] += 1;
            coeffs[(axis * nm + mono_index(&exps, ea), j)] = 1.0;
        }
    }
    let rule = entity_rule_unchecked(mesh, Entity::Elem(t), (2 * deg.max(0)) as usize);
    Basis::finalize(frame, deg, 3, exps, coeffs, &rule)
}

pub fn goly_dim(deg: isize) -> usize {
    if deg < 0 {
        0
    } else {
        poly_dim(3, deg + 1) - 1
    }
}

pub fn cgoly_dim(deg: isize) -> usize {
    if deg < 0 {
        0
    } else {
        3 * poly_dim(3, deg) - goly_dim(deg)
    }
}

pub fn roly_elem_dim(deg: isize) -> usize {
    if deg < 0 {
        0
    } else {
        3 * poly_dim(3, deg) - poly_dim(3, deg - 1)
    }
}

pub fn roly_face_dim(deg: isize) -> usize {
    if deg < 0 {
        0
    } else {
        poly_dim(2, deg + 1) - 1
    }
}

fn reduce_and_finalize(
    mesh: &PolyMesh,
    entity: Entity,
    frame: Frame,
    deg: isize,
    exps: Vec<[usize; 3]>,
    cols: Vec<DVector<f64>>,
    target: usize,
) -> Result<Basis, PolySpaceError> {
    let nm = exps.len();
    let rule = entity_rule_unchecked(mesh, entity, (2 * deg.max(0)) as usize);
    if target == 0 || cols.is_empty() {
        return Basis::finalize(frame, deg, 3, exps, DMatrix::zeros(3 * nm, 0), &rule);
    }
    let gen = DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i]);
    // weighted value matrix, then greedy pivoted Gram-Schmidt column selection
    let local: Vec<[f64; 3]> = rule.points.iter().map(|p| frame.local(*p)).collect();
    let v = mono_values(&exps, &local);
    let npts = rule.points.len();
    let mut val = DMatrix::zeros(3 * npts, gen.ncols());
    for c in 0..3 {
        let block = &v * gen.rows(c * nm, nm);
        for (i, w) in rule.weights.iter().enumerate() {
            for j in 0..gen.ncols() {
                val[(c * npts + i, j)] = block[(i, j)] * w.sqrt();
            }
        }
    }
    let ncols = val.ncols();
    let init_max = (0..ncols)
        .map(|j| val.column(j).norm())
        .fold(0.0_f64, f64::max);
    let mut picked = vec![false; ncols];
    let mut sel: Vec<usize> = Vec::with_capacity(target);
    for _ in 0..target {
        let (jbest, nbest) = (0..ncols)
            .filter(|j| !picked[*j])
            .map(|j| (j, val.column(j).norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap_or((0, 0.0));
        if nbest <= 1e-10 * init_max {
            return Err(PolySpaceError::RankDeficiency {
                expected: target,
                achieved: sel.len(),
            });
        }
        picked[jbest] = true;
        sel.push(jbest);
        let q = val.column(jbest) / nbest;
        for j in 0..ncols {
            if !picked[j] {
                let proj = q.dot(&val.column(j));
                let upd = val.column(j) - &q * proj;
                val.set_column(j, &upd);
            }
        }
    }
    sel.sort_unstable();
    let mut coeffs = DMatrix::zeros(3 * nm, target);
    for (j, &c) in sel.iter().enumerate() {
        coeffs.set_column(j, &gen.column(c));
    }
    Basis::finalize(frame, deg, 3, exps, coeffs, &rule)
}

/// The direct decompositions on a face or element at a given degree.
pub struct SpaceDecomp {
    pub entity: Entity,
    pub deg: isize,
    pub roly: Basis,
    pub croly: Basis,
    /// Element decompositions also carry the gradient pair.
    pub goly: Option<Basis>,
    pub cgoly: Option<Basis>,
}

pub fn build_decomp(
    mesh: &PolyMesh,
    entity: Entity,
    deg: isize,
) -> Result<SpaceDecomp, PolySpaceError> {
    match entity {
        Entity::Face(f) => Ok(SpaceDecomp {
            entity,
            deg,
            roly: roly_face(mesh, f, deg)?,
            croly: croly_face(mesh, f, deg)?,
            goly: None,
            cgoly: None,
        }),
        Entity::Elem(t) => Ok(SpaceDecomp {
            entity,
            deg,
            roly: roly_elem(mesh, t, deg)?,
            croly: croly_elem(mesh, t, deg)?,
            goly: Some(goly_elem(mesh, t, deg)?),
            cgoly: Some(cgoly_elem(mesh, t, deg)?),
        }),
        Entity::Edge(_) => panic!("decompositions live on faces and elements"),
    }
}

impl SpaceDecomp {
    /// Smallest-to-largest singular value ratio of the stacked pair, measured
    /// through the pair Gram matrix (1 when one side is empty).
    pub fn direct_sum_sigma_ratio(&self, mesh: &PolyMesh, pair: (&Basis, &Basis)) -> f64 {
        let (a, b) = pair;
        let n = a.len() + b.len();
        if a.is_empty() || b.is_empty() {
            return 1.0;
        }
        let rule = entity_rule_unchecked(mesh, self.entity, (2 * self.deg.max(0)) as usize);
        let ta = a.values3(&rule.points);
        let tb = b.values3(&rule.points);
        let mut gram = DMatrix::zeros(n, n);
        let block = |x: &Tab, y: &Tab, w: &[f64]| {
            let mut g = DMatrix::zeros(x.comp[0].ncols(), y.comp[0].ncols());
            for c in 0..3 {
                let mut weighted = y.comp[c].clone();
                for (i, wi) in w.iter().enumerate() {
                    weighted.row_mut(i).scale_mut(*wi);
                }
                g += x.comp[c].transpose() * weighted;
            }
            g
        };
        let gaa = block(&ta, &ta, &rule.weights);
        let gab = block(&ta, &tb, &rule.weights);
        let gbb = block(&tb, &tb, &rule.weights);
        gram.view_mut((0, 0), (a.len(), a.len())).copy_from(&gaa);
        gram.view_mut((0, a.len()), (a.len(), b.len()))
            .copy_from(&gab);
        gram.view_mut((a.len(), 0), (b.len(), a.len()))
            .copy_from(&gab.transpose());
        gram.view_mut((a.len(), a.len()), (b.len(), b.len()))
            .copy_from(&gbb);
        let sv = gram.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::MAX, f64::min);
        (smin / smax).sqrt()
    }
}

#[cfg(test)]
mod tests;
