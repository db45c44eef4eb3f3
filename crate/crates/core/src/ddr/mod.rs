//! The discrete de Rham spaces and operators of degree `k`.
//!
//! Space components (coefficient vectors against `polyspace` bases):
//!
//! ```text
//! grad space: q_T in P^{k-1}(T), q_F in P^{k-1}(F), q_E in P^{k-1}(E), q_V in R
//! curl space: v_RT in R^{k-1}(T), v_cRT in cR^k(T),
//!             v_RF in R^{k-1}(F), v_cRF in cR^k(F), v_E in P^k(E)
//! div space:  w_GT in G^{k-1}(T), w_cGT in cG^k(T), w_F in P^k(F)
//! broken:     piecewise P^k(T)
//! ```
//!
//! Global degrees of freedom are laid out vertices, then edges, then faces,
//! then elements; inside an entity, blocks follow the component order above
//! and the basis order of `polyspace`.

mod global;
mod local;

pub use global::{DofDescriptor, Interpolators};
pub use local::{EdgeKit, ElemKit, FaceKit};

use crate::linalg::Csr;
use crate::mesh::PolyMesh;
use crate::polyspace::{self, PolySpaceError};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdrError {
    #[error(transparent)]
    PolySpace(#[from] PolySpaceError),
    #[error("singular local solve on {entity} {id}")]
    SingularLocalSolve { entity: &'static str, id: usize },
}

/// Which DDR space a DOF vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Grad,
    Curl,
    Div,
    Broken,
}

/// Component vector of the grad space.
#[derive(Clone, Debug)]
pub struct XGradVec(pub DVector<f64>);
/// Component vector of the curl space.
#[derive(Clone, Debug)]
pub struct XCurlVec(pub DVector<f64>);
/// Component vector of the div space.
#[derive(Clone, Debug)]
pub struct XDivVec(pub DVector<f64>);

/// Per-entity-kind block sizes and offsets of a DOF layout.
#[derive(Clone, Debug)]
pub struct Layout {
    pub nv: usize,
    pub ne: usize,
    pub nf: usize,
    pub nt: usize,
    pub vertex_dim: usize,
    pub edge_dim: usize,
    pub face_dim: usize,
    pub elem_dim: usize,
}

impl Layout {
    pub fn vertex_off(&self, v: usize) -> usize {
        v * self.vertex_dim
    }

    pub fn edge_off(&self, e: usize) -> usize {
        self.nv * self.vertex_dim + e * self.edge_dim
    }

    pub fn face_off(&self, f: usize) -> usize {
        self.nv * self.vertex_dim + self.ne * self.edge_dim + f * self.face_dim
    }

    pub fn elem_off(&self, t: usize) -> usize {
        self.nv * self.vertex_dim
            + self.ne * self.edge_dim
            + self.nf * self.face_dim
            + t * self.elem_dim
    }

    pub fn total(&self) -> usize {
        self.nv * self.vertex_dim
            + self.ne * self.edge_dim
            + self.nf * self.face_dim
            + self.nt * self.elem_dim
    }
}

/// Assembled context for one mesh and degree: local operator kits for every
/// entity, DOF layouts, global operator matrices and norm Gram matrices.
pub struct Context<'m> {
    pub mesh: &'m PolyMesh,
    pub k: usize,
    pub edges: Vec<EdgeKit>,
    pub faces: Vec<FaceKit>,
    pub elems: Vec<ElemKit>,
    pub grad: Layout,
    pub curl: Layout,
    pub div: Layout,
    pub broken: Layout,
    /// Global discrete gradient (curl-space rows, grad-space columns).
    pub grad_op: Csr,
    /// Global discrete curl (div-space rows, curl-space columns).
    pub curl_op: Csr,
    /// Global discrete divergence (broken rows, div-space columns).
    pub div_op: Csr,
    /// Gram matrices of the component norms.
    pub grad_gram: Csr,
    pub curl_gram: Csr,
    pub div_gram: Csr,
    pub broken_gram: Csr,
    // local closure index maps (global column indices per entity closure)
    pub(crate) grad_closure_face: Vec<Vec<usize>>,
    pub(crate) grad_closure_elem: Vec<Vec<usize>>,
    pub(crate) curl_closure_face: Vec<Vec<usize>>,
    pub(crate) curl_closure_elem: Vec<Vec<usize>>,
    pub(crate) div_closure_elem: Vec<Vec<usize>>,
}

impl<'m> Context<'m> {
    pub fn new(mesh: &'m PolyMesh, k: usize) -> Result<Context<'m>, DdrError> {
        global::build_context(mesh, k)
    }

    pub fn layout(&self, space: Space) -> &Layout {
        match space {
            Space::Grad => &self.grad,
            Space::Curl => &self.curl,
            Space::Div => &self.div,
            Space::Broken => &self.broken,
        }
    }

    pub fn gram(&self, space: Space) -> &Csr {
        match space {
            Space::Grad => &self.grad_gram,
            Space::Curl => &self.curl_gram,
            Space::Div => &self.div_gram,
            Space::Broken => &self.broken_gram,
        }
    }

    /// Global discrete gradient applied to a grad-space vector.
    pub fn apply_grad(&self, q: &XGradVec) -> XCurlVec {
        XCurlVec(self.grad_op.matvec(&q.0))
    }

    pub fn apply_curl(&self, v: &XCurlVec) -> XDivVec {
        XDivVec(self.curl_op.matvec(&v.0))
    }

    pub fn apply_div(&self, w: &XDivVec) -> DVector<f64> {
        self.div_op.matvec(&w.0)
    }

    /// Component norm induced by the space's Gram matrix.
    pub fn component_norm(&self, space: Space, x: &DVector<f64>) -> f64 {
        self.component_product(space, x, x).max(0.0).sqrt()
    }

    /// Component product (the bilinear form inducing the component norm).
    pub fn component_product(&self, space: Space, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.gram(space).matvec(y).dot(x)
    }

    /// Restriction of a grad-space vector to the closure of a face.
    pub fn restrict_grad_face(&self, f: usize, q: &XGradVec) -> DVector<f64> {
        gather(&q.0, &self.grad_closure_face[f])
    }

    pub fn restrict_grad_elem(&self, t: usize, q: &XGradVec) -> DVector<f64> {
        gather(&q.0, &self.grad_closure_elem[t])
    }

    pub fn restrict_curl_face(&self, f: usize, v: &XCurlVec) -> DVector<f64> {
        gather(&v.0, &self.curl_closure_face[f])
    }

    pub fn restrict_curl_elem(&self, t: usize, v: &XCurlVec) -> DVector<f64> {
        gather(&v.0, &self.curl_closure_elem[t])
    }

    pub fn restrict_div_elem(&self, t: usize, w: &XDivVec) -> DVector<f64> {
        gather(&w.0, &self.div_closure_elem[t])
    }

    /// Grad-space edge closure `[q_E; q_tail; q_head]`.
    pub fn restrict_grad_edge(&self, e: usize, q: &XGradVec) -> DVector<f64> {
        let ed = &self.mesh.edges[e];
        let mut out = DVector::zeros(self.grad.edge_dim + 2);
        let off = self.grad.edge_off(e);
        for i in 0..self.grad.edge_dim {
            out[i] = q.0[off + i];
        }
        out[self.grad.edge_dim] = q.0[self.grad.vertex_off(ed.v[0])];
        out[self.grad.edge_dim + 1] = q.0[self.grad.vertex_off(ed.v[1])];
        out
    }

    pub fn zero(&self, space: Space) -> DVector<f64> {
        DVector::zeros(self.layout(space).total())
    }

    /// Number of polynomial dimensions for the grad space (helper).
    pub fn poly_dims(k: usize) -> (usize, usize, usize) {
        let k = k as isize;
        (
            polyspace::poly_dim(1, k - 1),
            polyspace::poly_dim(2, k - 1),
            polyspace::poly_dim(3, k - 1),
        )
    }
}

pub(crate) fn gather(x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| x[idx[i]])
}
