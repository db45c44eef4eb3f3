//! Global complex assembly: DOF layouts, the sparse operator matrices, the
//! Gram matrices of the component norms, and the canonical interpolators.

use super::local::{EdgeKit, ElemKit, FaceKit};
use super::{Context, DdrError, Layout, Space, XCurlVec, XDivVec, XGradVec};
use crate::linalg::Csr;
use crate::mesh::PolyMesh;
use crate::polyspace;
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub(crate) fn build_context(mesh: &PolyMesh, k: usize) -> Result<Context<'_>, DdrError> {
    let ki = k as isize;
    let edges: Vec<EdgeKit> = (0..mesh.edges.len())
        .map(|e| EdgeKit::build(mesh, e, k))
        .collect::<Result<_, _>>()?;
    let faces: Vec<FaceKit> = (0..mesh.faces.len())
        .map(|f| FaceKit::build(mesh, f, k, &edges))
        .collect::<Result<_, _>>()?;
    let elems: Vec<ElemKit> = (0..mesh.elements.len())
        .map(|t| ElemKit::build(mesh, t, k, &faces, &edges))
        .collect::<Result<_, _>>()?;

    let (nv, ne, nf, nt) = (
        mesh.vertices.len(),
        mesh.edges.len(),
        mesh.faces.len(),
        mesh.elements.len(),
    );
    let grad = Layout {
        nv,
        ne,
        nf,
        nt,
        vertex_dim: 1,
        edge_dim: polyspace::poly_dim(1, ki - 1),
        face_dim: polyspace::poly_dim(2, ki - 1),
        elem_dim: polyspace::poly_dim(3, ki - 1),
    };
    let fr_dim = polyspace::roly_face_dim(ki - 1);
    let fc_dim = polyspace::poly_dim(2, ki - 1);
    let curl = Layout {
        nv,
        ne,
        nf,
        nt,
        vertex_dim: 0,
        edge_dim: k + 1,
        face_dim: fr_dim + fc_dim,
        elem_dim: polyspace::roly_elem_dim(ki - 1) + polyspace::poly_dim(3, ki - 1),
    };
    let div = Layout {
        nv,
        ne,
        nf,
        nt,
        vertex_dim: 0,
        edge_dim: 0,
        face_dim: polyspace::poly_dim(2, ki),
        elem_dim: polyspace::goly_dim(ki - 1) + polyspace::cgoly_dim(ki),
    };
    let broken = Layout {
        nv,
        ne,
        nf,
        nt,
        vertex_dim: 0,
        edge_dim: 0,
        face_dim: 0,
        elem_dim: polyspace::poly_dim(3, ki),
    };

    // closure index maps
    let mut grad_closure_face = Vec::with_capacity(nf);
    let mut curl_closure_face = Vec::with_capacity(nf);
    for (f, face) in mesh.faces.iter().enumerate() {
        let mut g = Vec::new();
        for i in 0..grad.face_dim {
            g.push(grad.face_off(f) + i);
        }
        for &e in &face.edges {
            for i in 0..grad.edge_dim {
                g.push(grad.edge_off(e) + i);
            }
        }
        for &v in &face.vertices {
            g.push(grad.vertex_off(v));
        }
        grad_closure_face.push(g);
        let mut c = Vec::new();
        for i in 0..curl.face_dim {
            c.push(curl.face_off(f) + i);
        }
        for &e in &face.edges {
            for i in 0..curl.edge_dim {
                c.push(curl.edge_off(e) + i);
            }
        }
        curl_closure_face.push(c);
    }
    let mut grad_closure_elem = Vec::with_capacity(nt);
    let mut curl_closure_elem = Vec::with_capacity(nt);
    let mut div_closure_elem = Vec::with_capacity(nt);
    for (t, el) in mesh.elements.iter().enumerate() {
        let mut g = Vec::new();
        for i in 0..grad.elem_dim {
            g.push(grad.elem_off(t) + i);
        }
        for &f in &el.faces {
            for i in 0..grad.face_dim {
                g.push(grad.face_off(f) + i);
            }
        }
        for &e in &el.edges {
            for i in 0..grad.edge_dim {
                g.push(grad.edge_off(e) + i);
            }
        }
        for &v in &el.vertices {
            g.push(grad.vertex_off(v));
        }
        grad_closure_elem.push(g);
        let mut c = Vec::new();
        for i in 0..curl.elem_dim {
            c.push(curl.elem_off(t) + i);
        }
        for &f in &el.faces {
            for i in 0..curl.face_dim {
                c.push(curl.face_off(f) + i);
            }
        }
        for &e in &el.edges {
            for i in 0..curl.edge_dim {
                c.push(curl.edge_off(e) + i);
            }
        }
        curl_closure_elem.push(c);
        let mut d = Vec::new();
        for i in 0..div.elem_dim {
            d.push(div.elem_off(t) + i);
        }
        for &f in &el.faces {
            for i in 0..div.face_dim {
                d.push(div.face_off(f) + i);
            }
        }
        div_closure_elem.push(d);
    }

    // ---- global gradient
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (e, ek) in edges.iter().enumerate() {
        let ed = &mesh.edges[e];
        let mut cols = Vec::new();
        for i in 0..grad.edge_dim {
            cols.push(grad.edge_off(e) + i);
        }
        cols.push(grad.vertex_off(ed.v[0]));
        cols.push(grad.vertex_off(ed.v[1]));
        scatter(&mut trip, &ek.grad, curl.edge_off(e), &cols);
    }
    for (f, fk) in faces.iter().enumerate() {
        scatter(
            &mut trip,
            &fk.proj_r_grad,
            curl.face_off(f),
            &grad_closure_face[f],
        );
        scatter(
            &mut trip,
            &fk.proj_cr_grad,
            curl.face_off(f) + fr_dim,
            &grad_closure_face[f],
        );
    }
    for (t, tk) in elems.iter().enumerate() {
        let r_dim = tk.roly_km1.len();
        scatter(
            &mut trip,
            &tk.proj_r_grad,
            curl.elem_off(t),
            &grad_closure_elem[t],
        );
        scatter(
            &mut trip,
            &tk.proj_cr_grad,
            curl.elem_off(t) + r_dim,
            &grad_closure_elem[t],
        );
    }
    let grad_op = Csr::from_triplets(curl.total(), grad.total(), trip);

    // ---- global curl
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (f, fk) in faces.iter().enumerate() {
        scatter(&mut trip, &fk.curl, div.face_off(f), &curl_closure_face[f]);
    }
    for (t, tk) in elems.iter().enumerate() {
        let g_dim = tk.goly_km1.len();
        scatter(
            &mut trip,
            &tk.proj_g_curl,
            div.elem_off(t),
            &curl_closure_elem[t],
        );
        scatter(
            &mut trip,
            &tk.proj_cg_curl,
            div.elem_off(t) + g_dim,
            &curl_closure_elem[t],
        );
    }
    let curl_op = Csr::from_triplets(div.total(), curl.total(), trip);

    // ---- global divergence
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (t, tk) in elems.iter().enumerate() {
        scatter(&mut trip, &tk.div, broken.elem_off(t), &div_closure_elem[t]);
    }
    let div_op = Csr::from_triplets(broken.total(), div.total(), trip);

    // ---- component-norm Gram matrices (h-weighted sums of entity L2 norms)
    let mut w_edge = vec![0.0_f64; ne];
    let mut w_face = vec![0.0_f64; nf];
    let mut w_vert = vec![0.0_f64; nv];
    for el in mesh.elements.iter() {
        let ht = el.diameter;
        for &f in &el.faces {
            let face = &mesh.faces[f];
            w_face[f] += ht;
            for &e in face.edges.iter() {
                w_edge[e] += ht * face.diameter;
                let ed = &mesh.edges[e];
                for v in ed.v {
                    w_vert[v] += ht * face.diameter * ed.length;
                }
            }
        }
    }

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (v, w) in w_vert.iter().enumerate() {
        trip.push((grad.vertex_off(v), grad.vertex_off(v), *w));
    }
    for (e, ek) in edges.iter().enumerate() {
        if !ek.p_km1.is_empty() {
            scatter_sym(
                &mut trip,
                &(ek.p_km1.gram.clone() * w_edge[e]),
                grad.edge_off(e),
            );
        }
    }
    for (f, fk) in faces.iter().enumerate() {
        if !fk.p_km1.is_empty() {
            scatter_sym(
                &mut trip,
                &(fk.p_km1.gram.clone() * w_face[f]),
                grad.face_off(f),
            );
        }
    }
    for (t, tk) in elems.iter().enumerate() {
        if !tk.p_km1.is_empty() {
            scatter_sym(&mut trip, &tk.p_km1.gram, grad.elem_off(t));
        }
    }
    let grad_gram = Csr::from_triplets(grad.total(), grad.total(), trip);

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (e, ek) in edges.iter().enumerate() {
        scatter_sym(
            &mut trip,
            &(ek.p_k.gram.clone() * w_edge[e]),
            curl.edge_off(e),
        );
    }
    for (f, fk) in faces.iter().enumerate() {
        if !fk.roly_km1.is_empty() {
            scatter_sym(
                &mut trip,
                &(fk.roly_km1.gram.clone() * w_face[f]),
                curl.face_off(f),
            );
        }
        if !fk.croly_k.is_empty() {
            scatter_sym(
                &mut trip,
                &(fk.croly_k.gram.clone() * w_face[f]),
                curl.face_off(f) + fr_dim,
            );
        }
    }
    for (t, tk) in elems.iter().enumerate() {
        if !tk.roly_km1.is_empty() {
            scatter_sym(&mut trip, &tk.roly_km1.gram, curl.elem_off(t));
        }
        if !tk.croly_k.is_empty() {
            scatter_sym(
                &mut trip,
                &tk.croly_k.gram,
                curl.elem_off(t) + tk.roly_km1.len(),
            );
        }
    }
    let curl_gram = Csr::from_triplets(curl.total(), curl.total(), trip);

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (f, fk) in faces.iter().enumerate() {
        scatter_sym(
            &mut trip,
            &(fk.p_k.gram.clone() * w_face[f]),
            div.face_off(f),
        );
    }
    for (t, tk) in elems.iter().enumerate() {
        if !tk.goly_km1.is_empty() {
            scatter_sym(&mut trip, &tk.goly_km1.gram, div.elem_off(t));
        }
        if !tk.cgoly_k.is_empty() {
            scatter_sym(
                &mut trip,
                &tk.cgoly_k.gram,
                div.elem_off(t) + tk.goly_km1.len(),
            );
        }
    }
    let div_gram = Csr::from_triplets(div.total(), div.total(), trip);

    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    for (t, tk) in elems.iter().enumerate() {
        scatter_sym(&mut trip, &tk.p_k.gram, broken.elem_off(t));
    }
    let broken_gram = Csr::from_triplets(broken.total(), broken.total(), trip);

    Ok(Context {
        mesh,
        k,
        edges,
        faces,
        elems,
        grad,
        curl,
        div,
        broken,
        grad_op,
        curl_op,
        div_op,
        grad_gram,
        curl_gram,
        div_gram,
        broken_gram,
        grad_closure_face,
        grad_closure_elem,
        curl_closure_face,
        curl_closure_elem,
        div_closure_elem,
    })
}

fn scatter(trip: &mut Vec<(usize, usize, f64)>, m: &DMatrix<f64>, row0: usize, cols: &[usize]) {
    assert_eq!(m.ncols(), cols.len());
    for i in 0..m.nrows() {
        for (jl, &jg) in cols.iter().enumerate() {
            let v = m[(i, jl)];
            if v != 0.0 {
                trip.push((row0 + i, jg, v));
            }
        }
    }
}

fn scatter_sym(trip: &mut Vec<(usize, usize, f64)>, m: &DMatrix<f64>, off: usize) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                trip.push((off + i, off + j, v));
            }
        }
    }
}

/// Canonical interpolators: componentwise L2 projections of traces.
pub struct Interpolators;

impl<'m> Context<'m> {
    /// Interpolates a scalar field into the grad space.
    pub fn interpolate_grad(&self, f: &dyn Fn(Vec3) -> f64) -> XGradVec {
        let mut out = self.zero(Space::Grad);
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            out[self.grad.vertex_off(v)] = f(*p);
        }
        for (e, ek) in self.edges.iter().enumerate() {
            if !ek.p_km1.is_empty() {
                let vals = DVector::from_fn(ek.rule.points.len(), |i, _| f(ek.rule.points[i]));
                let c = ek.p_km1.project_values(&ek.rule, &vals);
                set_block(&mut out, self.grad.edge_off(e), &c);
            }
        }
        for (fid, fk) in self.faces.iter().enumerate() {
            if !fk.p_km1.is_empty() {
                let vals = DVector::from_fn(fk.rule.points.len(), |i, _| f(fk.rule.points[i]));
                let c = fk.p_km1.project_values(&fk.rule, &vals);
                set_block(&mut out, self.grad.face_off(fid), &c);
            }
        }
        for (t, tk) in self.elems.iter().enumerate() {
            if !tk.p_km1.is_empty() {
                let vals = DVector::from_fn(tk.rule.points.len(), |i, _| f(tk.rule.points[i]));
                let c = tk.p_km1.project_values(&tk.rule, &vals);
                set_block(&mut out, self.grad.elem_off(t), &c);
            }
        }
        XGradVec(out)
    }

    /// Interpolates a vector field into the curl space (edge tangential
    /// traces, tangential face components, element components).
    pub fn interpolate_curl(&self, v: &dyn Fn(Vec3) -> Vec3) -> XCurlVec {
        let mut out = self.zero(Space::Curl);
        for (e, ek) in self.edges.iter().enumerate() {
            let t = self.mesh.edge_tangent(e);
            let vals = DVector::from_fn(ek.rule.points.len(), |i, _| v(ek.rule.points[i]).dot(&t));
            let c = ek.p_k.project_values(&ek.rule, &vals);
            set_block(&mut out, self.curl.edge_off(e), &c);
        }
        for (fid, fk) in self.faces.iter().enumerate() {
            if !fk.roly_km1.is_empty() {
                let c = fk.roly_km1.project_vec3(&fk.rule, v);
                set_block(&mut out, self.curl.face_off(fid), &c);
            }
            if !fk.croly_k.is_empty() {
                let c = fk.croly_k.project_vec3(&fk.rule, v);
                set_block(&mut out, self.curl.face_off(fid) + fk.roly_km1.len(), &c);
            }
        }
        for (t, tk) in self.elems.iter().enumerate() {
            if !tk.roly_km1.is_empty() {
                let c = tk.roly_km1.project_vec3(&tk.rule, v);
                set_block(&mut out, self.curl.elem_off(t), &c);
            }
            if !tk.croly_k.is_empty() {
                let c = tk.croly_k.project_vec3(&tk.rule, v);
                set_block(&mut out, self.curl.elem_off(t) + tk.roly_km1.len(), &c);
            }
        }
        XCurlVec(out)
    }

    /// Interpolates a vector field into the div space (face normal traces and
    /// element components).
    pub fn interpolate_div(&self, w: &dyn Fn(Vec3) -> Vec3) -> XDivVec {
        let mut out = self.zero(Space::Div);
        for (fid, fk) in self.faces.iter().enumerate() {
            let n = self.mesh.faces[fid].normal;
            let vals = DVector::from_fn(fk.rule.points.len(), |i, _| w(fk.rule.points[i]).dot(&n));
            let c = fk.p_k.project_values(&fk.rule, &vals);
            set_block(&mut out, self.div.face_off(fid), &c);
        }
        for (t, tk) in self.elems.iter().enumerate() {
            if !tk.goly_km1.is_empty() {
                let c = tk.goly_km1.project_vec3(&tk.rule, w);
                set_block(&mut out, self.div.elem_off(t), &c);
            }
            if !tk.cgoly_k.is_empty() {
                let c = tk.cgoly_k.project_vec3(&tk.rule, w);
                set_block(&mut out, self.div.elem_off(t) + tk.goly_km1.len(), &c);
            }
        }
        XDivVec(out)
    }

    /// Piecewise L2 projection into the broken space.
    pub fn project_broken(&self, f: &dyn Fn(Vec3) -> f64) -> DVector<f64> {
        let mut out = self.zero(Space::Broken);
        for (t, tk) in self.elems.iter().enumerate() {
            let vals = DVector::from_fn(tk.rule.points.len(), |i, _| f(tk.rule.points[i]));
            let c = tk.p_k.project_values(&tk.rule, &vals);
            set_block(&mut out, self.broken.elem_off(t), &c);
        }
        out
    }

    /// Flat dump of a DOF vector together with its layout descriptor.
    pub fn dump_dofs(&self, space: Space, data: &DVector<f64>) -> (DofDescriptor, Vec<f64>) {
        let l = self.layout(space);
        assert_eq!(data.len(), l.total());
        let descr = DofDescriptor {
            space: match space {
                Space::Grad => "grad".into(),
                Space::Curl => "curl".into(),
                Space::Div => "div".into(),
                Space::Broken => "broken".into(),
            },
            k: self.k,
            counts: [l.nv, l.ne, l.nf, l.nt],
            dims: [l.vertex_dim, l.edge_dim, l.face_dim, l.elem_dim],
            total: l.total(),
        };
        (descr, data.iter().cloned().collect())
    }

    /// Restores a DOF vector checked against the layout descriptor.
    pub fn restore_dofs(
        &self,
        space: Space,
        descr: &DofDescriptor,
        data: &[f64],
    ) -> Option<DVector<f64>> {
        let l = self.layout(space);
        let ok = descr.total == l.total()
            && descr.counts == [l.nv, l.ne, l.nf, l.nt]
            && descr.dims == [l.vertex_dim, l.edge_dim, l.face_dim, l.elem_dim]
            && data.len() == l.total();
        ok.then(|| DVector::from_column_slice(data))
    }

    /// L2 norm of a broken-space coefficient vector.
    pub fn broken_norm(&self, x: &DVector<f64>) -> f64 {
        self.component_norm(Space::Broken, x)
    }

    /// Evaluates the scalar trace of a grad vector on a face (coefficients in
    /// the face `P^{k+1}` basis).
    pub fn face_trace(&self, f: usize, q: &XGradVec) -> DVector<f64> {
        &self.faces[f].trace * self.restrict_grad_face(f, q)
    }

    /// Evaluates the tangential trace of a curl vector on a face.
    pub fn face_ttrace(&self, f: usize, v: &XCurlVec) -> DVector<f64> {
        &self.faces[f].ttrace * self.restrict_curl_face(f, v)
    }

    /// Mean of the face curl over a face: `int_F C_F v`.
    pub fn face_curl_mean(&self, f: usize, v: &XCurlVec) -> f64 {
        let c = &self.faces[f].curl * self.restrict_curl_face(f, v);
        let fk = &self.faces[f];
        let tab = fk.p_k.values(&fk.rule.points);
        let mut s = 0.0;
        for (q, w) in fk.rule.weights.iter().enumerate() {
            let mut val = 0.0;
            for j in 0..fk.p_k.len() {
                val += tab.comp[0][(q, j)] * c[j];
            }
            s += w * val;
        }
        s
    }

    /// Mean of the element divergence: `int_T D_T w`.
    pub fn elem_div_mean(&self, t: usize, w: &XDivVec) -> f64 {
        let d = &self.elems[t].div * self.restrict_div_elem(t, w);
        let tk = &self.elems[t];
        let tab = tk.p_k.values(&tk.rule.points);
        let mut s = 0.0;
        for (q, wq) in tk.rule.weights.iter().enumerate() {
            let mut val = 0.0;
            for j in 0..tk.p_k.len() {
                val += tab.comp[0][(q, j)] * d[j];
            }
            s += wq * val;
        }
        s
    }
}

fn set_block(out: &mut DVector<f64>, off: usize, c: &DVector<f64>) {
    for i in 0..c.len() {
        out[off + i] = c[i];
    }
}

/// Serializable layout descriptor for DOF dump/restore: entity order is
/// vertices, edges, faces, elements; inside an entity, the basis order of the
/// polynomial spaces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DofDescriptor {
    pub space: String,
    pub k: usize,
    pub counts: [usize; 4],
    pub dims: [usize; 4],
    pub total: usize,
}

/// Needed by callers indexing the newtype wrappers.
impl std::ops::Index<usize> for XGradVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::Deref for XGradVec {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl std::ops::Deref for XCurlVec {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl std::ops::Deref for XDivVec {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl std::ops::IndexMut<usize> for XGradVec {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
