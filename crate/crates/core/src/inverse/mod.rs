//! Constructive right inverses of the discrete gradient, curl and divergence,
//! and numerical Poincaré-constant estimation.
//!
//! Each inverse takes only the image of the operator: vertex values come from
//! a spanning tree of edge-gradient means, the remaining components from
//! small local moment solves against the complement spaces; the curl and
//! divergence constructions route through the mimetic liftings for the
//! lowest-order balance data. The operator equality `op(constructed) =
//! op(input)` is verified on every call.

use crate::ddr::{Context, Space, XCurlVec, XDivVec, XGradVec};
use crate::linalg::{numerical_rank, whiten, CgResult};
use crate::mimetic::{EntityKind, EntityValues, MimeticCtx, MimeticError};
use crate::RANK_RTOL;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("cycle inconsistency {residual:.3e} while propagating vertex values (edge {edge})")]
    CycleInconsistency { edge: usize, residual: f64 },
    #[error("singular local solve on {entity} {id}")]
    SingularLocalSolve { entity: &'static str, id: usize },
    #[error("shell/element balance assertion failed: {0}")]
    BalanceAssertion(String),
    #[error(transparent)]
    Mimetic(#[from] MimeticError),
    #[error("operator equality failed: relative residual {0:.3e}")]
    OperatorEquality(f64),
}

/// Outcome of one constructive inverse.
#[derive(Clone, Debug)]
pub struct InverseResult {
    pub constructed: DVector<f64>,
    /// Relative residual of `op(constructed) = op(input)` in the output norm.
    pub op_residual: f64,
    /// Component norm of the operator image.
    pub input_op_norm: f64,
    /// Component norm of the constructed vector.
    pub output_norm: f64,
    /// `output_norm / input_op_norm` (0 when the image vanishes).
    pub implied_constant: f64,
    pub lift_cg: Option<CgResult>,
}

/// Numerical Poincaré constant of one operator.
#[derive(Clone, Debug)]
pub struct PoincareEstimate {
    pub c_num: f64,
    pub kernel_dim: usize,
    /// Input attaining the worst quotient-to-image ratio.
    pub worst_input: DVector<f64>,
    /// Whitened singular values, descending.
    pub sigmas: Vec<f64>,
    u: DMatrix<f64>,
    l_out: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Grad,
    Curl,
    Div,
}

struct EdgeInv {
    /// `int b_j r_i'` over the `P^{k-1}` unknown.
    a: DMatrix<f64>,
    /// `-int G r_i` moments against the edge `P^k` block.
    m_g: DMatrix<f64>,
    /// zero-mean test values at (tail, head).
    ends_r: DMatrix<f64>,
}

struct FaceInv {
    a_qf: DMatrix<f64>,
    /// Per loop edge: `omega int_E b^{k+1}_a (c_i . n_FE)`.
    e_pot: Vec<DMatrix<f64>>,
    a_zrf: DMatrix<f64>,
    /// zero-mean `P^k` test moments against the face `P^k` basis.
    m_w: DMatrix<f64>,
    /// Per loop edge: integrals of the zero-mean tests along the edge.
    e_int: Vec<DVector<f64>>,
}

struct ElemInv {
    a_qt: DMatrix<f64>,
    /// Per local face: `omega int_F b^{k+1}_a (c_i . n_F)`.
    f_pot: Vec<DMatrix<f64>>,
    a_zrt: DMatrix<f64>,
    /// Per local face: `omega int_F (w_i x n) . (face vP^k basis)`.
    f_ttr: Vec<DMatrix<f64>>,
    a_zgt: DMatrix<f64>,
    /// zero-mean `P^k(T)` test moments against the element `P^k` basis.
    m_q: DMatrix<f64>,
    /// Per local face: integrals of the zero-mean element tests on the face.
    f_int: Vec<DVector<f64>>,
}

/// Precomputed local systems for the three inverses on one mesh and degree.
/// Images below this component norm are treated as zero (the preimage is
/// then the zero vector); desk-scale meshes keep meaningful images well
/// above it.
pub const ZERO_IMAGE_TOL: f64 = 1e-11;

fn zero_result(z: DVector<f64>) -> InverseResult {
    InverseResult {
        constructed: z,
        op_residual: 0.0,
        input_op_norm: 0.0,
        output_norm: 0.0,
        implied_constant: 0.0,
        lift_cg: None,
    }
}

pub struct InverseCtx<'a> {
    pub ddr: &'a Context<'a>,
    pub mim: &'a MimeticCtx<'a>,
    edge_inv: Vec<EdgeInv>,
    face_inv: Vec<FaceInv>,
    elem_inv: Vec<ElemInv>,
}

fn zero_mean_tests(
    basis: &crate::polyspace::Basis,
    rule: &crate::quadrature::Rule,
) -> (Vec<usize>, Vec<f64>) {
    let area: f64 = rule.weights.iter().sum();
    let tab = basis.values(&rule.points);
    let means: Vec<f64> = (0..basis.len())
        .map(|j| {
            rule.weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * tab.comp[0][(q, j)])
                .sum::<f64>()
                / area
        })
        .collect();
    ((1..basis.len()).collect(), means)
}

impl<'a> InverseCtx<'a> {
    pub fn new(ddr: &'a Context<'a>, mim: &'a MimeticCtx<'a>) -> Self {
        let mesh = ddr.mesh;
        let k = ddr.k;

        let mut edge_inv = Vec::with_capacity(mesh.edges.len());
        for ek in ddr.edges.iter() {
            if k == 0 {
                edge_inv.push(EdgeInv {
                    a: DMatrix::zeros(0, 0),
                    m_g: DMatrix::zeros(0, 0),
                    ends_r: DMatrix::zeros(0, 0),
                });
                continue;
            }
            let (idx, means) = zero_mean_tests(&ek.p_k, &ek.rule);
            let n = idx.len();
            let dtab = ek.p_k.edge_deriv(&ek.rule.points);
            let qtab = ek.p_km1.values(&ek.rule.points).comp.remove(0);
            let ktab = ek.p_k.values(&ek.rule.points).comp.remove(0);
            let mut a = DMatrix::zeros(n, n);
            let mut m_g = DMatrix::zeros(n, ek.p_k.len());
            for (row, &i) in idx.iter().enumerate() {
                for j in 0..n {
                    a[(row, j)] = ek
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * qtab[(q, j)] * dtab[(q, i)])
                        .sum();
                }
                for j in 0..ek.p_k.len() {
                    m_g[(row, j)] = -ek
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * (ktab[(q, i)] - means[i]) * ktab[(q, j)])
                        .sum::<f64>();
                }
            }
            let end_tab = ek.p_k.values(&ek.ends);
            let mut ends_r = DMatrix::zeros(n, 2);
            for (row, &i) in idx.iter().enumerate() {
                ends_r[(row, 0)] = end_tab.comp[0][(0, i)] - means[i];
                ends_r[(row, 1)] = end_tab.comp[0][(1, i)] - means[i];
            }
            edge_inv.push(EdgeInv { a, m_g, ends_r });
        }

        let mut face_inv = Vec::with_capacity(mesh.faces.len());
        for fk in ddr.faces.iter() {
            if k == 0 {
                face_inv.push(FaceInv {
                    a_qf: DMatrix::zeros(0, 0),
                    e_pot: Vec::new(),
                    a_zrf: DMatrix::zeros(0, 0),
                    m_w: DMatrix::zeros(0, 0),
                    e_int: Vec::new(),
                });
                continue;
            }
            // face scalar system: tests c in cR^k(F), unknown q_F in P^{k-1}(F)
            let div_c = fk.croly_k.div_tab(&fk.rule.points);
            let qtab = fk.p_km1.values(&fk.rule.points).comp.remove(0);
            let mut a_qf = DMatrix::zeros(fk.croly_k.len(), fk.p_km1.len());
            for i in 0..fk.croly_k.len() {
                for j in 0..fk.p_km1.len() {
                    a_qf[(i, j)] = fk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * qtab[(q, j)] * div_c[(q, i)])
                        .sum();
                }
            }
            let mut e_pot = Vec::new();
            for fe in &fk.loop_edges {
                let ek = &ddr.edges[fe.edge];
                let epts = &ek.rule.points;
                let c3e = fk.croly_k.values3(epts);
                let pe = ek.p_kp1.values(epts).comp.remove(0);
                let mut b = DMatrix::zeros(fk.croly_k.len(), ek.p_kp1.len());
                for (q, w) in ek.rule.weights.iter().enumerate() {
                    for i in 0..fk.croly_k.len() {
                        let cn = c3e.comp[0][(q, i)] * fe.n_fe.x
                            + c3e.comp[1][(q, i)] * fe.n_fe.y
                            + c3e.comp[2][(q, i)] * fe.n_fe.z;
                        for aa in 0..ek.p_kp1.len() {
                            b[(i, aa)] += w * cn * pe[(q, aa)] * fe.omega;
                        }
                    }
                }
                e_pot.push(b);
            }
            // face rotational system: tests r in P^{0,k}(F), unknown in R^{k-1}(F)
            let (idx, means) = zero_mean_tests(&fk.p_k, &fk.rule);
            let n = idx.len();
            let vr = fk.p_k.vrot3(&fk.rule.points);
            let r3 = fk.roly_km1.values3(&fk.rule.points);
            let mut a_zrf = DMatrix::zeros(n, fk.roly_km1.len());
            for (row, &i) in idx.iter().enumerate() {
                for j in 0..fk.roly_km1.len() {
                    a_zrf[(row, j)] = fk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| {
                            w * (vr.comp[0][(q, i)] * r3.comp[0][(q, j)]
                                + vr.comp[1][(q, i)] * r3.comp[1][(q, j)]
                                + vr.comp[2][(q, i)] * r3.comp[2][(q, j)])
                        })
                        .sum();
                }
            }
            let ktab = fk.p_k.values(&fk.rule.points).comp.remove(0);
            let mut m_w = DMatrix::zeros(n, fk.p_k.len());
            for (row, &i) in idx.iter().enumerate() {
                for j in 0..fk.p_k.len() {
                    m_w[(row, j)] = fk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * (ktab[(q, i)] - means[i]) * ktab[(q, j)])
                        .sum();
                }
            }
            let mut e_int = Vec::new();
            for fe in &fk.loop_edges {
                let ek = &ddr.edges[fe.edge];
                let re = fk.p_k.values(&ek.rule.points).comp.remove(0);
                let mut v = DVector::zeros(n);
                for (row, &i) in idx.iter().enumerate() {
                    v[row] = ek
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * (re[(q, i)] - means[i]))
                        .sum();
                }
                e_int.push(v);
            }
            face_inv.push(FaceInv {
                a_qf,
                e_pot,
                a_zrf,
                m_w,
                e_int,
            });
        }

        let mut elem_inv = Vec::with_capacity(mesh.elements.len());
        for (t, tk) in ddr.elems.iter().enumerate() {
            let el = &mesh.elements[t];
            if k == 0 {
                elem_inv.push(ElemInv {
                    a_qt: DMatrix::zeros(0, 0),
                    f_pot: Vec::new(),
                    a_zrt: DMatrix::zeros(0, 0),
                    f_ttr: Vec::new(),
                    a_zgt: DMatrix::zeros(0, 0),
                    m_q: DMatrix::zeros(0, 0),
                    f_int: Vec::new(),
                });
                continue;
            }
            // element scalar system, tests in cR^k(T)
            let div_c = tk.croly_k.div_tab(&tk.rule.points);
            let qtab = tk.p_km1.values(&tk.rule.points).comp.remove(0);
            let mut a_qt = DMatrix::zeros(tk.croly_k.len(), tk.p_km1.len());
            for i in 0..tk.croly_k.len() {
                for j in 0..tk.p_km1.len() {
                    a_qt[(i, j)] = tk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * qtab[(q, j)] * div_c[(q, i)])
                        .sum();
                }
            }
            let mut f_pot = Vec::new();
            for &f in &el.faces {
                let fk = &ddr.faces[f];
                let n = mesh.faces[f].normal;
                let omega = ddr.mesh.omega_tf(t, f);
                let c3 = tk.croly_k.values3(&fk.rule.points);
                let pb = fk.p_kp1.values(&fk.rule.points).comp.remove(0);
                let mut b = DMatrix::zeros(tk.croly_k.len(), fk.p_kp1.len());
                for (q, w) in fk.rule.weights.iter().enumerate() {
                    for i in 0..tk.croly_k.len() {
                        let cn = c3.comp[0][(q, i)] * n.x
                            + c3.comp[1][(q, i)] * n.y
                            + c3.comp[2][(q, i)] * n.z;
                        for aa in 0..fk.p_kp1.len() {
                            b[(i, aa)] += w * cn * pb[(q, aa)] * omega;
                        }
                    }
                }
                f_pot.push(b);
            }
            // element rotational system, tests in cG^k(T)
            let cw = tk.cgoly_k.curl3(&tk.rule.points);
            let r3 = tk.roly_km1.values3(&tk.rule.points);
            let mut a_zrt = DMatrix::zeros(tk.cgoly_k.len(), tk.roly_km1.len());
            for i in 0..tk.cgoly_k.len() {
                for j in 0..tk.roly_km1.len() {
                    a_zrt[(i, j)] = tk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| {
                            w * (cw.comp[0][(q, i)] * r3.comp[0][(q, j)]
                                + cw.comp[1][(q, i)] * r3.comp[1][(q, j)]
                                + cw.comp[2][(q, i)] * r3.comp[2][(q, j)])
                        })
                        .sum();
                }
            }
            let mut f_ttr = Vec::new();
            for &f in &el.faces {
                let fk = &ddr.faces[f];
                let n = mesh.faces[f].normal;
                let omega = ddr.mesh.omega_tf(t, f);
                let w3 = tk.cgoly_k.values3(&fk.rule.points);
                let g3 = fk.vp_k.values3(&fk.rule.points);
                let mut b = DMatrix::zeros(tk.cgoly_k.len(), fk.vp_k.len());
                for (q, wq) in fk.rule.weights.iter().enumerate() {
                    for i in 0..tk.cgoly_k.len() {
                        let w = crate::Vec3::new(
                            w3.comp[0][(q, i)],
                            w3.comp[1][(q, i)],
                            w3.comp[2][(q, i)],
                        );
                        let wxn = w.cross(&n);
                        for jj in 0..fk.vp_k.len() {
                            let gvec = crate::Vec3::new(
                                g3.comp[0][(q, jj)],
                                g3.comp[1][(q, jj)],
                                g3.comp[2][(q, jj)],
                            );
                            b[(i, jj)] += wq * wxn.dot(&gvec) * omega;
                        }
                    }
                }
                f_ttr.push(b);
            }
            // element gradient-part system, tests in P^{0,k}(T)
            let (idx, means) = zero_mean_tests(&tk.p_k, &tk.rule);
            let n = idx.len();
            let gq = tk.p_k.phys_grad3(&tk.rule.points);
            let g3 = tk.goly_km1.values3(&tk.rule.points);
            let mut a_zgt = DMatrix::zeros(n, tk.goly_km1.len());
            for (row, &i) in idx.iter().enumerate() {
                for j in 0..tk.goly_km1.len() {
                    a_zgt[(row, j)] = tk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| {
                            w * (gq.comp[0][(q, i)] * g3.comp[0][(q, j)]
                                + gq.comp[1][(q, i)] * g3.comp[1][(q, j)]
                                + gq.comp[2][(q, i)] * g3.comp[2][(q, j)])
                        })
                        .sum();
                }
            }
            let ktab = tk.p_k.values(&tk.rule.points).comp.remove(0);
            let mut m_q = DMatrix::zeros(n, tk.p_k.len());
            for (row, &i) in idx.iter().enumerate() {
                for j in 0..tk.p_k.len() {
                    m_q[(row, j)] = tk
                        .rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * (ktab[(q, i)] - means[i]) * ktab[(q, j)])
                        .sum();
                }
            }
            let mut f_int = Vec::new();
            for &f in &el.faces {
                let fk = &ddr.faces[f];
                let omega = ddr.mesh.omega_tf(t, f);
                let qe = tk.p_k.values(&fk.rule.points).comp.remove(0);
                let mut v = DVector::zeros(n);
                for (row, &i) in idx.iter().enumerate() {
                    v[row] = omega
                        * fk.rule
                            .weights
                            .iter()
                            .enumerate()
                            .map(|(q, w)| w * (qe[(q, i)] - means[i]))
                            .sum::<f64>();
                }
                f_int.push(v);
            }
            elem_inv.push(ElemInv {
                a_qt,
                f_pot,
                a_zrt,
                f_ttr,
                a_zgt,
                m_q,
                f_int,
            });
        }

        InverseCtx {
            ddr,
            mim,
            edge_inv,
            face_inv,
            elem_inv,
        }
    }

    /// Mean of the edge component of a curl-space vector over each edge.
    fn edge_means(&self, v: &XCurlVec) -> DVector<f64> {
        let ddr = self.ddr;
        let mut out: DVector<f64> = DVector::zeros(ddr.mesh.edges.len());
        for (e, ek) in ddr.edges.iter().enumerate() {
            let coeffs = DVector::from_fn(ddr.curl.edge_dim, |i, _| v.0[ddr.curl.edge_off(e) + i]);
            let vals = ek.p_k.eval_scalar(&coeffs, &ek.rule.points);
            out[e] = ek
                .rule
                .weights
                .iter()
                .zip(vals.iter())
                .map(|(w, x)| w * x)
                .sum();
        }
        out
    }

    /// Vertex values from edge jumps by a breadth-first spanning tree rooted
    /// at the lowest vertex (root value 0), with a cycle-consistency check.
    fn vertex_values_from_jumps(&self, jumps: &DVector<f64>) -> Result<DVector<f64>, InverseError> {
        let mesh = self.ddr.mesh;
        let nv = mesh.vertices.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
        for (e, ed) in mesh.edges.iter().enumerate() {
            adj[ed.v[0]].push((ed.v[1], e));
            adj[ed.v[1]].push((ed.v[0], e));
        }
        let mut q: DVector<f64> = DVector::zeros(nv);
        let mut seen = vec![false; nv];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(0usize);
        while let Some(v) = queue.pop_front() {
            for &(u, e) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    let ed = &mesh.edges[e];
                    q[u] = if ed.v[1] == u {
                        q[v] + jumps[e]
                    } else {
                        q[v] - jumps[e]
                    };
                    queue.push_back(u);
                }
            }
        }
        let scale = jumps.amax().max(1e-300);
        for (e, ed) in mesh.edges.iter().enumerate() {
            let r = (q[ed.v[1]] - q[ed.v[0]] - jumps[e]).abs();
            if r > 1e-9 * scale.max(1.0) {
                return Err(InverseError::CycleInconsistency {
                    edge: e,
                    residual: r,
                });
            }
        }
        Ok(q)
    }

    /// Constructive inverse of the gradient from its image.
    pub fn inverse_gradient_from_image(&self, v: &XCurlVec) -> Result<InverseResult, InverseError> {
        let ddr = self.ddr;
        if ddr.component_norm(Space::Curl, &v.0) <= ZERO_IMAGE_TOL {
            return Ok(zero_result(ddr.zero(Space::Grad)));
        }
        let jumps = self.edge_means(v);
        let qv = self.vertex_values_from_jumps(&jumps)?;
        let mut q = XGradVec(ddr.zero(Space::Grad));
        for (vi, val) in qv.iter().enumerate() {
            q.0[ddr.grad.vertex_off(vi)] = *val;
        }
        if ddr.k >= 1 {
            for (e, inv) in self.edge_inv.iter().enumerate() {
                let g = DVector::from_fn(ddr.curl.edge_dim, |i, _| v.0[ddr.curl.edge_off(e) + i]);
                let ed = &ddr.mesh.edges[e];
                let mut rhs = &inv.m_g * g;
                rhs += inv.ends_r.column(1) * qv[ed.v[1]] - inv.ends_r.column(0) * qv[ed.v[0]];
                let sol =
                    inv.a
                        .clone()
                        .lu()
                        .solve(&rhs)
                        .ok_or(InverseError::SingularLocalSolve {
                            entity: "edge",
                            id: e,
                        })?;
                for i in 0..sol.len() {
                    q.0[ddr.grad.edge_off(e) + i] = sol[i];
                }
            }
            for (f, inv) in self.face_inv.iter().enumerate() {
                let fk = &ddr.faces[f];
                let fr = fk.roly_km1.len();
                let vcr =
                    DVector::from_fn(fk.croly_k.len(), |i, _| v.0[ddr.curl.face_off(f) + fr + i]);
                let mut rhs = -(&fk.croly_k.gram * vcr);
                for (le, fe) in fk.loop_edges.iter().enumerate() {
                    let pot = &ddr.edges[fe.edge].pot * ddr.restrict_grad_edge(fe.edge, &q);
                    rhs += &inv.e_pot[le] * pot;
                }
                let sol =
                    inv.a_qf
                        .clone()
                        .lu()
                        .solve(&rhs)
                        .ok_or(InverseError::SingularLocalSolve {
                            entity: "face",
                            id: f,
                        })?;
                for i in 0..sol.len() {
                    q.0[ddr.grad.face_off(f) + i] = sol[i];
                }
            }
            for (t, inv) in self.elem_inv.iter().enumerate() {
                let tk = &ddr.elems[t];
                let tr = tk.roly_km1.len();
                let vcr =
                    DVector::from_fn(tk.croly_k.len(), |i, _| v.0[ddr.curl.elem_off(t) + tr + i]);
                let mut rhs = -(&tk.croly_k.gram * vcr);
                for (lf, &f) in ddr.mesh.elements[t].faces.iter().enumerate() {
                    let tr_face = &ddr.faces[f].trace * ddr.restrict_grad_face(f, &q);
                    rhs += &inv.f_pot[lf] * tr_face;
                }
                let sol =
                    inv.a_qt
                        .clone()
                        .lu()
                        .solve(&rhs)
                        .ok_or(InverseError::SingularLocalSolve {
                            entity: "element",
                            id: t,
                        })?;
                for i in 0..sol.len() {
                    q.0[ddr.grad.elem_off(t) + i] = sol[i];
                }
            }
        }
        let image = ddr.apply_grad(&q);
        let input_op_norm = ddr.component_norm(Space::Curl, &v.0);
        let op_residual =
            ddr.component_norm(Space::Curl, &(&image.0 - &v.0)) / input_op_norm.max(1e-300);
        let output_norm = ddr.component_norm(Space::Grad, &q.0);
        if input_op_norm > 1e-11 && op_residual > 1e-9 {
            return Err(InverseError::OperatorEquality(op_residual));
        }
        Ok(InverseResult {
            constructed: q.0,
            op_residual,
            input_op_norm,
            output_norm,
            implied_constant: if input_op_norm > 1e-11 {
                output_norm / input_op_norm
            } else {
                0.0
            },
            lift_cg: None,
        })
    }

    pub fn inverse_gradient(&self, p: &XGradVec) -> Result<InverseResult, InverseError> {
        self.inverse_gradient_from_image(&self.ddr.apply_grad(p))
    }

    /// Constructive inverse of the curl from its image.
    pub fn inverse_curl_from_image(&self, w: &XDivVec) -> Result<InverseResult, InverseError> {
        let ddr = self.ddr;
        let mesh = ddr.mesh;
        if ddr.component_norm(Space::Div, &w.0) <= ZERO_IMAGE_TOL {
            return Ok(zero_result(ddr.zero(Space::Curl)));
        }
        let mut alpha_f: DVector<f64> = DVector::zeros(mesh.faces.len());
        for (f, fk) in ddr.faces.iter().enumerate() {
            let coeffs = DVector::from_fn(ddr.div.face_dim, |i, _| w.0[ddr.div.face_off(f) + i]);
            let vals = fk.p_k.eval_scalar(&coeffs, &fk.rule.points);
            alpha_f[f] = fk
                .rule
                .weights
                .iter()
                .zip(vals.iter())
                .map(|(wq, x)| wq * x)
                .sum();
        }
        // balance assertions (hold whenever the input is an actual curl image)
        let scale = alpha_f.amax().max(1e-300);
        for (t, el) in mesh.elements.iter().enumerate() {
            let s: f64 = el
                .faces
                .iter()
                .enumerate()
                .map(|(lf, &f)| el.omega_tf[lf] as f64 * alpha_f[f])
                .sum();
            if s.abs() > 1e-10 * scale.max(1.0) {
                return Err(InverseError::BalanceAssertion(format!(
                    "element {t} flux sum {s:.3e}"
                )));
            }
        }
        for (i, shell) in mesh.void_shells.iter().enumerate() {
            let s: f64 = shell
                .faces
                .iter()
                .map(|&f| *mesh.omega_bf.get(&f).unwrap() as f64 * alpha_f[f])
                .sum();
            if s.abs() > 1e-10 * scale.max(1.0) {
                return Err(InverseError::BalanceAssertion(format!(
                    "shell {i} flux sum {s:.3e}"
                )));
            }
        }
        let lift = self
            .mim
            .lift_edge_from_face(&EntityValues::new(EntityKind::Face, alpha_f))?;
        let alpha_e = &lift.values.values;

        let mut z = XCurlVec(ddr.zero(Space::Curl));
        for e in 0..mesh.edges.len() {
            // constant edge component with int_E z_E = -alpha_E so the face
            // curl means transfer with the clockwise edge-sign convention
            z.0[ddr.curl.edge_off(e)] = -alpha_e[e] / mesh.edges[e].length;
        }
        if ddr.k >= 1 {
            for (f, inv) in self.face_inv.iter().enumerate() {
                let fk = &ddr.faces[f];
                let wf = DVector::from_fn(ddr.div.face_dim, |i, _| w.0[ddr.div.face_off(f) + i]);
                let mut rhs = &inv.m_w * wf;
                for (le, fe) in fk.loop_edges.iter().enumerate() {
                    let ze = z.0[ddr.curl.edge_off(fe.edge)];
                    rhs += &inv.e_int[le] * (fe.omega * ze);
                }
                let sol =
                    inv.a_zrf
                        .clone()
                        .lu()
                        .solve(&rhs)
                        .ok_or(InverseError::SingularLocalSolve {
                            entity: "face",
                            id: f,
                        })?;
                for i in 0..sol.len() {
                    z.0[ddr.curl.face_off(f) + i] = sol[i];
                }
            }
            for (t, inv) in self.elem_inv.iter().enumerate() {
                let tk = &ddr.elems[t];
                let g_dim = tk.goly_km1.len();
                let wcg = DVector::from_fn(tk.cgoly_k.len(), |i, _| {
                    w.0[ddr.div.elem_off(t) + g_dim + i]
                });
                let mut rhs = &tk.cgoly_k.gram * wcg;
                for (lf, &f) in mesh.elements[t].faces.iter().enumerate() {
                    // the boundary term enters negatively so that it cancels
                    // against the element-curl moments when substituted back
                    let ttr = &ddr.faces[f].ttrace * ddr.restrict_curl_face(f, &z);
                    rhs -= &inv.f_ttr[lf] * ttr;
                }
                let sol =
                    inv.a_zrt
                        .clone()
                        .lu()
                        .solve(&rhs)
                        .ok_or(InverseError::SingularLocalSolve {
                            entity: "element",
                            id: t,
                        })?;
                for i in 0..sol.len() {
                    z.0[ddr.curl.elem_off(t) + i] = sol[i];
                }
            }
        }
        let image = ddr.apply_curl(&z);
        let input_op_norm = ddr.component_norm(Space::Div, &w.0);
        let op_residual =
            ddr.component_norm(Space::Div, &(&image.0 - &w.0)) / input_op_norm.max(1e-300);
        let output_norm = ddr.component_norm(Space::Curl, &z.0);
        if input_op_norm > 1e-11 && op_residual > 1e-9 {
            return Err(InverseError::OperatorEquality(op_residual));
        }
        Ok(InverseResult {
            constructed: z.0,
            op_residual,
            input_op_norm,
            output_norm,
            implied_constant: if input_op_norm > 1e-11 {
                output_norm / input_op_norm
            } else {
                0.0
            },
            lift_cg: Some(lift.cg),
        })
    }

    pub fn inverse_curl(&self, v: &XCurlVec) -> Result<InverseResult, InverseError> {
        self.inverse_curl_from_image(&self.ddr.apply_curl(v))
    }

    /// Constructive inverse of the divergence from its image (broken space).
    pub fn inverse_divergence_from_image(
        &self,
        g: &DVector<f64>,
    ) -> Result<InverseResult, InverseError> {
        let ddr = self.ddr;
        let mesh = ddr.mesh;
        if ddr.component_norm(Space::Broken, g) <= ZERO_IMAGE_TOL {
            return Ok(zero_result(ddr.zero(Space::Div)));
        }
        let mut alpha_t: DVector<f64> = DVector::zeros(mesh.elements.len());
        for (t, tk) in ddr.elems.iter().enumerate() {
            let coeffs =
                DVector::from_fn(ddr.broken.elem_dim, |i, _| g[ddr.broken.elem_off(t) + i]);
            let vals = tk.p_k.eval_scalar(&coeffs, &tk.rule.points);
            alpha_t[t] = tk
                .rule
                .weights
                .iter()
                .zip(vals.iter())
                .map(|(wq, x)| wq * x)
                .sum();
        }
        let lift = self
            .mim
            .lift_face_from_element(&EntityValues::new(EntityKind::Elem, alpha_t), false)?;
        let alpha_f = &lift.values.values;

        let mut z = XDivVec(ddr.zero(Space::Div));
        for f in 0..mesh.faces.len() {
            z.0[ddr.div.face_off(f)] = alpha_f[f] / mesh.faces[f].area;
        }
        if ddr.k >= 1 {
            for (t, inv) in self.elem_inv.iter().enumerate() {
                let gt =
                    DVector::from_fn(ddr.broken.elem_dim, |i, _| g[ddr.broken.elem_off(t) + i]);
                let mut rhs = -(&inv.m_q * gt);
                for (lf, &f) in mesh.elements[t].faces.iter().enumerate() {
                    let zf = z.0[ddr.div.face_off(f)];
                    rhs += &inv.f_int[lf] * zf;
                }
                let sol =
                    inv.a_zgt
                        .clone()
                        .lu()
                        .solve(&rhs)
                        .ok_or(InverseError::SingularLocalSolve {
                            entity: "element",
                            id: t,
                        })?;
                for i in 0..sol.len() {
                    z.0[ddr.div.elem_off(t) + i] = sol[i];
                }
            }
        }
        let image = ddr.apply_div(&z);
        let input_op_norm = ddr.component_norm(Space::Broken, g);
        let op_residual =
            ddr.component_norm(Space::Broken, &(&image - g)) / input_op_norm.max(1e-300);
        let output_norm = ddr.component_norm(Space::Div, &z.0);
        if input_op_norm > 1e-11 && op_residual > 1e-9 {
            return Err(InverseError::OperatorEquality(op_residual));
        }
        Ok(InverseResult {
            constructed: z.0,
            op_residual,
            input_op_norm,
            output_norm,
            implied_constant: if input_op_norm > 1e-11 {
                output_norm / input_op_norm
            } else {
                0.0
            },
            lift_cg: Some(lift.cg),
        })
    }

    pub fn inverse_divergence(&self, w: &XDivVec) -> Result<InverseResult, InverseError> {
        self.inverse_divergence_from_image(&self.ddr.apply_div(w))
    }
}

/// Numerical Poincaré constant: the reciprocal of the smallest nonzero
/// singular value of the norm-whitened operator matrix, with the kernel
/// dimension and the worst input direction.
pub fn poincare_constant(ctx: &Context<'_>, op: OpKind) -> PoincareEstimate {
    let (o, gin, gout) = match op {
        OpKind::Grad => (&ctx.grad_op, &ctx.grad_gram, &ctx.curl_gram),
        OpKind::Curl => (&ctx.curl_op, &ctx.curl_gram, &ctx.div_gram),
        OpKind::Div => (&ctx.div_op, &ctx.div_gram, &ctx.broken_gram),
    };
    let od = o.to_dense();
    let gin_d = gin.to_dense();
    let gout_d = gout.to_dense();
    let b = whiten(&od, &gin_d, &gout_d);
    let svd = b.clone().svd(true, true);
    let vt = svd.v_t.as_ref().unwrap();
    let u_raw = svd.u.as_ref().unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = numerical_rank(&sigmas, RANK_RTOL);
    let kernel_dim = od.ncols() - rank;
    let c_num = 1.0 / sigmas[rank - 1];
    // worst whitened input: right singular vector of the smallest kept sigma
    let y = vt.row(order[rank - 1]).transpose();
    let lin = gin_d.cholesky().unwrap().l();
    let mut x = y.clone();
    solve_upper_from_lower_transpose(&lin, &mut x);
    let mut u = DMatrix::zeros(u_raw.nrows(), order.len().min(u_raw.ncols()));
    for (new, &old) in order.iter().take(u.ncols()).enumerate() {
        u.set_column(new, &u_raw.column(old));
    }
    let l_out = gout_d.cholesky().unwrap().l();
    PoincareEstimate {
        c_num,
        kernel_dim,
        worst_input: x,
        sigmas,
        u,
        l_out,
    }
}

impl PoincareEstimate {
    /// Minimal component norm over the preimage coset of an image vector
    /// (the quotient norm, realized by the whitened pseudo-inverse).
    pub fn quotient_min_norm(&self, y_image: &DVector<f64>) -> f64 {
        let ytil = self.l_out.transpose() * y_image;
        let c = self.u.transpose() * ytil;
        let rank = numerical_rank(&self.sigmas, RANK_RTOL);
        (0..rank.min(c.len()))
            .map(|i| (c[i] / self.sigmas[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn solve_upper_from_lower_transpose(l: &DMatrix<f64>, rhs: &mut DVector<f64>) {
    // solves L^T x = rhs given the lower factor L
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= l[(j, i)] * rhs[j];
        }
        rhs[i] = s / l[(i, i)];
    }
}

/// Block-diagonal Cholesky of a component-norm Gram matrix (the blocks are
/// the per-entity component Grams, so factorization stays cheap at any size).
struct BlockChol {
    blocks: Vec<(usize, nalgebra::Cholesky<f64, nalgebra::Dyn>)>,
}

impl BlockChol {
    fn new(gram: &crate::linalg::Csr, layout: &crate::ddr::Layout) -> BlockChol {
        let mut offsets: Vec<(usize, usize)> = Vec::new();
        for v in 0..layout.nv {
            if layout.vertex_dim > 0 {
                offsets.push((layout.vertex_off(v), layout.vertex_dim));
            }
        }
        for e in 0..layout.ne {
            if layout.edge_dim > 0 {
                offsets.push((layout.edge_off(e), layout.edge_dim));
            }
        }
        for f in 0..layout.nf {
            if layout.face_dim > 0 {
                offsets.push((layout.face_off(f), layout.face_dim));
            }
        }
        for t in 0..layout.nt {
            if layout.elem_dim > 0 {
                offsets.push((layout.elem_off(t), layout.elem_dim));
            }
        }
        let mut blocks = Vec::with_capacity(offsets.len());
        for (off, dim) in offsets {
            let mut m = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for (c, v) in gram.row(off + i) {
                    if c >= off && c < off + dim {
                        m[(i, c - off)] = v;
                    }
                }
            }
            blocks.push((off, m.cholesky().expect("component Gram block is SPD")));
        }
        BlockChol { blocks }
    }

    /// `x <- L^{-T} x` blockwise.
    fn solve_lt(&self, x: &mut DVector<f64>) {
        for (off, chol) in &self.blocks {
            let l = chol.l();
            let dim = l.nrows();
            for i in (0..dim).rev() {
                let mut s = x[off + i];
                for j in i + 1..dim {
                    s -= l[(j, i)] * x[off + j];
                }
                x[off + i] = s / l[(i, i)];
            }
        }
    }

    /// `x <- L^T x` blockwise.
    fn apply_lt(&self, x: &mut DVector<f64>) {
        for (off, chol) in &self.blocks {
            let l = chol.l();
            let dim = l.nrows();
            for i in 0..dim {
                let mut s = 0.0;
                for j in i..dim {
                    s += l[(j, i)] * x[off + j];
                }
                x[off + i] = s;
            }
        }
    }
}

/// Iterative estimate of the smallest nonzero whitened singular value, for
/// problems past the dense ceiling: power iteration on the pseudo-inverse
/// through LSQR min-norm least-squares solves, with the whitened operator
/// applied matrix-free (the Gram factors are block-diagonal).
pub fn poincare_constant_iterative(
    ctx: &Context<'_>,
    op: OpKind,
    rel_tol: f64,
    seed: u64,
) -> (f64, usize) {
    let (o, lin, lout) = match op {
        OpKind::Grad => (
            &ctx.grad_op,
            BlockChol::new(&ctx.grad_gram, &ctx.grad),
            BlockChol::new(&ctx.curl_gram, &ctx.curl),
        ),
        OpKind::Curl => (
            &ctx.curl_op,
            BlockChol::new(&ctx.curl_gram, &ctx.curl),
            BlockChol::new(&ctx.div_gram, &ctx.div),
        ),
        OpKind::Div => (
            &ctx.div_op,
            BlockChol::new(&ctx.div_gram, &ctx.div),
            BlockChol::new(&ctx.broken_gram, &ctx.broken),
        ),
    };
    // B = Lout^T O Lin^{-T}; B^T = Lin^{-1} O^T Lout
    let b_apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut t = x.clone();
        lin.solve_lt(&mut t);
        let mut y = o.matvec(&t);
        lout.apply_lt(&mut y);
        y
    };
    let bt_apply = |y: &DVector<f64>| -> DVector<f64> {
        let mut t = y.clone();
        apply_l(&lout, &mut t);
        let mut z = o.tr_matvec(&t);
        solve_l(&lin, &mut z);
        z
    };
    let n_in = o.ncols();
    let mut rng = crate::linalg::SplitMix64::new(seed);
    // start in the row space
    let mut x = bt_apply(&b_apply(&rng.vector(n_in)));
    x /= x.norm();
    let mut norm_pinv_sq = 0.0_f64;
    let mut iters = 0usize;
    for _ in 0..100 {
        // x <- pinv(B) pinv(B)^T x, through two LSQR min-norm solves
        let u = lsqr(&bt_apply, &b_apply, &x, 1e-12, 4 * n_in + 200);
        let z = lsqr(&b_apply, &bt_apply, &u, 1e-12, 4 * n_in + 200);
        let rho = z.norm(); // Rayleigh estimate of 1 / sigma_min^2 since |x| = 1
        iters += 1;
        let conv = (rho - norm_pinv_sq).abs() <= rel_tol * rho.abs();
        norm_pinv_sq = rho;
        if !(rho > 0.0) {
            break;
        }
        x = z / rho;
        if conv {
            break;
        }
    }
    (norm_pinv_sq.sqrt(), iters)
}

/// Minimal LSQR (Paige-Saunders) for the min-norm least-squares solution of
/// `A x = b` given matrix-free `A` and `A^T` applications.
fn lsqr<F, G>(av: &F, atv: &G, b: &DVector<f64>, tol: f64, maxit: usize) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut beta = b.norm();
    if beta == 0.0 {
        return DVector::zeros(atv(b).len());
    }
    let mut u = b / beta;
    let mut v = atv(&u);
    let mut alpha = v.norm();
    if alpha == 0.0 {
        return DVector::zeros(v.len());
    }
    v /= alpha;
    let mut w = v.clone();
    let mut x = DVector::zeros(v.len());
    let mut phibar = beta;
    let mut rhobar = alpha;
    let bnorm = beta;
    for _ in 0..maxit {
        u = av(&v) - alpha * &u;
        beta = u.norm();
        if beta > 0.0 {
            u /= beta;
        }
        v = atv(&u) - beta * &v;
        alpha = v.norm();
        if alpha > 0.0 {
            v /= alpha;
        }
        let rho = (rhobar * rhobar + beta * beta).sqrt();
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;
        x.axpy(phi / rho, &w, 1.0);
        w = &v - (theta / rho) * &w;
        // |A^T r| estimate controls least-squares convergence
        if phibar * alpha * c.abs() <= tol * bnorm {
            break;
        }
    }
    x
}

fn apply_l(chol: &BlockChol, x: &mut DVector<f64>) {
    for (off, c) in &chol.blocks {
        let l = c.l();
        let dim = l.nrows();
        for i in (0..dim).rev() {
            let mut s = 0.0;
            for j in 0..=i {
                s += l[(i, j)] * x[off + j];
            }
            x[off + i] = s;
        }
    }
}

fn solve_l(chol: &BlockChol, x: &mut DVector<f64>) {
    for (off, c) in &chol.blocks {
        let l = c.l();
        let dim = l.nrows();
        for i in 0..dim {
            let mut s = x[off + i];
            for j in 0..i {
                s -= l[(i, j)] * x[off + j];
            }
            x[off + i] = s / l[(i, i)];
        }
    }
}

#[cfg(test)]
mod tests;
