//! Local operator kits, one per mesh entity: the discrete gradient, curl and
//! divergence together with the scalar, edge-potential and tangential trace
//! reconstructions, all as dense matrices acting on entity-closure DOF
//! vectors.

use super::DdrError;
use crate::mesh::PolyMesh;
use crate::polyspace::{
    self, cgoly_elem, croly_elem, croly_face, entity_rule_unchecked, goly_elem, roly_elem,
    roly_face, scalar_basis, vector_basis, Basis, Entity, Tab,
};
use crate::quadrature::Rule;
use crate::Vec3;
use nalgebra::DMatrix;

fn quad_degree(k: usize) -> usize {
    2 * k + 4
}

/// `sum_q w_q (a_i . b_j)` for 3-component tabulations: returns `a_cols x b_cols`.
pub(crate) fn weighted_dot3(a: &Tab, b: &Tab, w: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.comp[0].ncols(), b.comp[0].ncols());
    for c in 0..3 {
        let mut wb = b.comp[c].clone();
        for (q, wq) in w.iter().enumerate() {
            wb.row_mut(q).scale_mut(*wq);
        }
        out += a.comp[c].transpose() * wb;
    }
    out
}

/// `sum_q w_q a_qi b_qj` for scalar tabulations.
pub(crate) fn weighted_dot1(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut wb = b.clone();
    for (q, wq) in w.iter().enumerate() {
        wb.row_mut(q).scale_mut(*wq);
    }
    a.transpose() * wb
}

pub struct EdgeKit {
    pub rule: Rule,
    pub p_km1: Basis,
    pub p_k: Basis,
    pub p_kp1: Basis,
    /// Edge gradient: `P^k` coefficients from the closure `[q_E; q_tail; q_head]`.
    pub grad: DMatrix<f64>,
    /// Edge potential: `P^{k+1}` coefficients from the closure.
    pub pot: DMatrix<f64>,
    /// Vertex coordinates (tail, head).
    pub ends: [Vec3; 2],
}

impl EdgeKit {
    pub fn closure_dim(&self) -> usize {
        self.p_km1.len() + 2
    }

    pub(crate) fn build(mesh: &PolyMesh, e: usize, k: usize) -> Result<EdgeKit, DdrError> {
        let ki = k as isize;
        let rule = entity_rule_unchecked(mesh, Entity::Edge(e), quad_degree(k));
        let p_km1 = scalar_basis(mesh, Entity::Edge(e), ki - 1)?;
        let p_k = scalar_basis(mesh, Entity::Edge(e), ki)?;
        let p_kp1 = scalar_basis(mesh, Entity::Edge(e), ki + 1)?;
        let ed = &mesh.edges[e];
        let ends = [mesh.vertices[ed.v[0]], mesh.vertices[ed.v[1]]];
        let clos = p_km1.len() + 2;

        // int_E G r = -int_E q_E r' + q_head r(head) - q_tail r(tail)
        let mut rhs = DMatrix::zeros(p_k.len(), clos);
        if !p_km1.is_empty() {
            let dr = p_k.edge_deriv(&rule.points);
            let qe = p_km1.values(&rule.points).comp.remove(0);
            let m = weighted_dot1(&dr, &qe, &rule.weights); // [i,j] = int r_i' b_j
            rhs.view_mut((0, 0), (p_k.len(), p_km1.len()))
                .copy_from(&(-m));
        }
        let ends_tab = p_k.values(&ends);
        for i in 0..p_k.len() {
            rhs[(i, p_km1.len())] = -ends_tab.comp[0][(0, i)];
            rhs[(i, p_km1.len() + 1)] = ends_tab.comp[0][(1, i)];
        }
        let mut grad = DMatrix::zeros(p_k.len(), clos);
        for j in 0..clos {
            grad.set_column(j, &p_k.solve_gram(&rhs.column(j).into()));
        }

        // potential P^{k+1}: matches the edge gradient and the mean of q_E
        // (k >= 1) or interpolates the vertex values (k = 0)
        let pot = if k == 0 {
            // local coordinate of tail/head is -1/2 / +1/2: P = mid + jump * s
            let mut m = DMatrix::zeros(2, 2);
            m[(0, 0)] = 0.5;
            m[(0, 1)] = 0.5;
            m[(1, 0)] = -1.0;
            m[(1, 1)] = 1.0;
            m
        } else {
            let n = p_kp1.len();
            let mut sys = DMatrix::zeros(n, n);
            let dp = p_kp1.edge_deriv(&rule.points);
            let sk = p_k.values(&rule.points).comp.remove(0);
            let m = weighted_dot1(&sk, &dp, &rule.weights); // [i,j] = int s_i (b_j)'
            sys.view_mut((0, 0), (p_k.len(), n)).copy_from(&m);
            let pv = p_kp1.values(&rule.points).comp.remove(0);
            for j in 0..n {
                sys[(n - 1, j)] = rule
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * pv[(q, j)])
                    .sum();
            }
            // right-hand side: gram_k * grad rows for the moments, mean of q_E
            let mut rhs2 = DMatrix::zeros(n, clos);
            let moments = &p_k.gram * &grad;
            rhs2.view_mut((0, 0), (p_k.len(), clos)).copy_from(&moments);
            let qv = p_km1.values(&rule.points).comp.remove(0);
            for j in 0..p_km1.len() {
                rhs2[(n - 1, j)] = rule
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| w * qv[(q, j)])
                    .sum();
            }
            sys.lu().solve(&rhs2).ok_or(DdrError::SingularLocalSolve {
                entity: "edge",
                id: e,
            })?
        };

        Ok(EdgeKit {
            rule,
            p_km1,
            p_k,
            p_kp1,
            grad,
            pot,
            ends,
        })
    }
}

/// Loop-local data of one edge of a face.
#[derive(Clone, Debug)]
pub struct FaceEdge {
    pub edge: usize,
    pub omega: f64,
    pub n_fe: Vec3,
    /// Gather map: edge grad closure indices into the face grad closure.
    pub grad_gather: Vec<usize>,
}

pub struct FaceKit {
    pub rule: Rule,
    pub p_km1: Basis,
    pub p_k: Basis,
    pub p_kp1: Basis,
    pub vp_k: Basis,
    pub roly_km1: Basis,
    pub croly_k: Basis,
    pub croly_kp2: Basis,
    pub loop_edges: Vec<FaceEdge>,
    /// Face gradient: `vP^k` coefficients from the grad closure.
    pub grad: DMatrix<f64>,
    /// Scalar trace `P^{k+1}` from the grad closure.
    pub trace: DMatrix<f64>,
    /// Rotational / complement projections of the face gradient.
    pub proj_r_grad: DMatrix<f64>,
    pub proj_cr_grad: DMatrix<f64>,
    /// Face curl `P^k` from the curl closure.
    pub curl: DMatrix<f64>,
    /// Tangential trace `vP^k` from the curl closure.
    pub ttrace: DMatrix<f64>,
    pub grad_closure_dim: usize,
    pub curl_closure_dim: usize,
}

impl FaceKit {
    pub(crate) fn build(
        mesh: &PolyMesh,
        f: usize,
        k: usize,
        edge_kits: &[EdgeKit],
    ) -> Result<FaceKit, DdrError> {
        let ki = k as isize;
        let rule = entity_rule_unchecked(mesh, Entity::Face(f), quad_degree(k));
        let p_km1 = scalar_basis(mesh, Entity::Face(f), ki - 1)?;
        let p_k = scalar_basis(mesh, Entity::Face(f), ki)?;
        let p_kp1 = scalar_basis(mesh, Entity::Face(f), ki + 1)?;
        let vp_k = vector_basis(mesh, Entity::Face(f), ki)?;
        let roly_km1 = roly_face(mesh, f, ki - 1)?;
        let croly_k = croly_face(mesh, f, ki)?;
        let croly_kp2 = croly_face(mesh, f, ki + 2)?;

        let face = &mesh.faces[f];
        let m = face.vertices.len();
        let e_dim = edge_kits.first().map(|ek| ek.p_km1.len()).unwrap_or(0);
        let grad_clos = p_km1.len() + m * e_dim + m;
        let curl_clos = roly_km1.len() + croly_k.len() + m * (k + 1);

        let mut loop_edges = Vec::with_capacity(m);
        for le in 0..m {
            let e = face.edges[le];
            let ed = &mesh.edges[e];
            // gather: [q_E of e; q at ed.v[0]; q at ed.v[1]]
            let mut gather = Vec::with_capacity(e_dim + 2);
            for i in 0..e_dim {
                gather.push(p_km1.len() + le * e_dim + i);
            }
            let vpos = |v: usize| {
                face.vertices
                    .iter()
                    .position(|&x| x == v)
                    .expect("loop vertex")
            };
            gather.push(p_km1.len() + m * e_dim + vpos(ed.v[0]));
            gather.push(p_km1.len() + m * e_dim + vpos(ed.v[1]));
            loop_edges.push(FaceEdge {
                edge: e,
                omega: face.omega_fe[le] as f64,
                n_fe: face.n_fe[le],
                grad_gather: gather,
            });
        }

        // ---- face gradient (moments against vP^k)
        let mut rhs = DMatrix::zeros(vp_k.len(), grad_clos);
        if !p_km1.is_empty() {
            let div = vp_k.div_tab(&rule.points);
            let qf = p_km1.values(&rule.points).comp.remove(0);
            let mm = weighted_dot1(&div, &qf, &rule.weights);
            rhs.view_mut((0, 0), (vp_k.len(), p_km1.len()))
                .copy_from(&(-mm));
        }
        for fe in &loop_edges {
            let ek = &edge_kits[fe.edge];
            let epts = &ek.rule.points;
            let v3 = vp_k.values3(epts);
            // (v_i . n_FE) at edge nodes
            let vn = {
                let mut out = DMatrix::zeros(epts.len(), vp_k.len());
                for c in 0..3 {
                    out += &v3.comp[c] * fe.n_fe[c];
                }
                out
            };
            let pe = ek.p_kp1.values(epts).comp.remove(0);
            let b = weighted_dot1(&vn, &pe, &ek.rule.weights) * fe.omega; // [i, a]
            let contrib = b * &ek.pot; // [i, edge closure]
            for (jl, &jg) in fe.grad_gather.iter().enumerate() {
                for i in 0..vp_k.len() {
                    rhs[(i, jg)] += contrib[(i, jl)];
                }
            }
        }
        let mut grad = DMatrix::zeros(vp_k.len(), grad_clos);
        for j in 0..grad_clos {
            grad.set_column(j, &vp_k.solve_gram(&rhs.column(j).into()));
        }

        // ---- scalar trace: moments against div(cR^{k+2})
        let div_c = croly_kp2.div_tab(&rule.points);
        let pv = p_kp1.values(&rule.points).comp.remove(0);
        let sys = weighted_dot1(&div_c, &pv, &rule.weights); // [i, j] = int div(c_i) b_j
        let mut rhs_t = DMatrix::zeros(croly_kp2.len(), grad_clos);
        {
            let c3 = croly_kp2.values3(&rule.points);
            let v3 = vp_k.values3(&rule.points);
            let cross = weighted_dot3(&c3, &v3, &rule.weights); // [i, j] = int c_i . v_j
            rhs_t -= cross * &grad;
            for fe in &loop_edges {
                let ek = &edge_kits[fe.edge];
                let epts = &ek.rule.points;
                let c3e = croly_kp2.values3(epts);
                let cn = {
                    let mut out = DMatrix::zeros(epts.len(), croly_kp2.len());
                    for c in 0..3 {
                        out += &c3e.comp[c] * fe.n_fe[c];
                    }
                    out
                };
                let pe = ek.p_kp1.values(epts).comp.remove(0);
                let b = weighted_dot1(&cn, &pe, &ek.rule.weights) * fe.omega;
                let contrib = b * &ek.pot;
                for (jl, &jg) in fe.grad_gather.iter().enumerate() {
                    for i in 0..croly_kp2.len() {
                        rhs_t[(i, jg)] += contrib[(i, jl)];
                    }
                }
            }
        }
        let trace = sys.lu().solve(&rhs_t).ok_or(DdrError::SingularLocalSolve {
            entity: "face",
            id: f,
        })?;

        // ---- projections of the gradient on Roly^{k-1} and cRoly^k
        let proj = |target: &Basis| -> DMatrix<f64> {
            if target.is_empty() {
                return DMatrix::zeros(0, grad_clos);
            }
            let t3 = target.values3(&rule.points);
            let v3 = vp_k.values3(&rule.points);
            let cross = weighted_dot3(&t3, &v3, &rule.weights);
            let rhs = cross * &grad;
            let mut out = DMatrix::zeros(target.len(), grad_clos);
            for j in 0..grad_clos {
                out.set_column(j, &target.solve_gram(&rhs.column(j).into()));
            }
            out
        };
        let proj_r_grad = proj(&roly_km1);
        let proj_cr_grad = proj(&croly_k);

        // ---- face curl (moments against P^k)
        let mut rhs_c = DMatrix::zeros(p_k.len(), curl_clos);
        if !roly_km1.is_empty() {
            let vr = p_k.vrot3(&rule.points);
            let r3 = roly_km1.values3(&rule.points);
            let mm = weighted_dot3(&vr, &r3, &rule.weights); // [i, j] = int vrot(r_i) . b_j
            rhs_c
                .view_mut((0, 0), (p_k.len(), roly_km1.len()))
                .copy_from(&mm);
        }
        for (le, fe) in loop_edges.iter().enumerate() {
            let ek = &edge_kits[fe.edge];
            let epts = &ek.rule.points;
            let rk = p_k.values(epts).comp.remove(0);
            let be = ek.p_k.values(epts).comp.remove(0);
            let mm = weighted_dot1(&rk, &be, &ek.rule.weights) * (-fe.omega); // [i, a]
            let off = roly_km1.len() + croly_k.len() + le * (k + 1);
            for a in 0..(k + 1) {
                for i in 0..p_k.len() {
                    rhs_c[(i, off + a)] += mm[(i, a)];
                }
            }
        }
        let mut curl = DMatrix::zeros(p_k.len(), curl_clos);
        for j in 0..curl_clos {
            curl.set_column(j, &p_k.solve_gram(&rhs_c.column(j).into()));
        }

        // ---- tangential trace: tests vrot(P^{0,k+1}) + cR^k
        let n_vp = vp_k.len();
        let n_r = p_kp1.len() - 1; // nonconstant members
        let area: f64 = rule.weights.iter().sum();
        let mut sys_t = DMatrix::zeros(n_vp, n_vp);
        let mut rhs_tt = DMatrix::zeros(n_vp, curl_clos);
        {
            let vr_kp1 = p_kp1.vrot3(&rule.points); // vrot of all members (constant's is 0)
            let v3 = vp_k.values3(&rule.points);
            let cross = weighted_dot3(&vr_kp1, &v3, &rule.weights); // [mem, j]
            for i in 0..n_r {
                sys_t.row_mut(i).copy_from(&cross.row(i + 1));
            }
            // means of the p_kp1 members, for the zero-average test functions
            let pv1 = p_kp1.values(&rule.points).comp.remove(0);
            let means: Vec<f64> = (0..p_kp1.len())
                .map(|j| {
                    rule.weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * pv1[(q, j)])
                        .sum::<f64>()
                        / area
                })
                .collect();
            // rhs: int C r_i + sum_E omega int_E v_E r_i, r_i = m_{i+1} - mean
            let pkv = p_k.values(&rule.points).comp.remove(0);
            let mut cross_r = DMatrix::zeros(n_r, p_k.len());
            for i in 0..n_r {
                for j in 0..p_k.len() {
                    cross_r[(i, j)] = rule
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * (pv1[(q, i + 1)] - means[i + 1]) * pkv[(q, j)])
                        .sum();
                }
            }
            let part = cross_r * &curl;
            for i in 0..n_r {
                for j in 0..curl_clos {
                    rhs_tt[(i, j)] += part[(i, j)];
                }
            }
            for (le, fe) in loop_edges.iter().enumerate() {
                let ek = &edge_kits[fe.edge];
                let epts = &ek.rule.points;
                let re = p_kp1.values(epts).comp.remove(0);
                let be = ek.p_k.values(epts).comp.remove(0);
                let off = roly_km1.len() + croly_k.len() + le * (k + 1);
                for i in 0..n_r {
                    for a in 0..(k + 1) {
                        let s: f64 = ek
                            .rule
                            .weights
                            .iter()
                            .enumerate()
                            .map(|(q, w)| w * (re[(q, i + 1)] - means[i + 1]) * be[(q, a)])
                            .sum();
                        rhs_tt[(i, off + a)] += fe.omega * s;
                    }
                }
            }
            // w-tests against cR^k
            if !croly_k.is_empty() {
                let c3 = croly_k.values3(&rule.points);
                let cross_w = weighted_dot3(&c3, &v3, &rule.weights);
                for i in 0..croly_k.len() {
                    sys_t.row_mut(n_r + i).copy_from(&cross_w.row(i));
                }
                let gcc = weighted_dot3(&c3, &croly_k.values3(&rule.points), &rule.weights);
                for i in 0..croly_k.len() {
                    for j in 0..croly_k.len() {
                        rhs_tt[(n_r + i, roly_km1.len() + j)] = gcc[(i, j)];
                    }
                }
            }
        }
        let ttrace = sys_t
            .lu()
            .solve(&rhs_tt)
            .ok_or(DdrError::SingularLocalSolve {
                entity: "face",
                id: f,
            })?;

        Ok(FaceKit {
            rule,
            p_km1,
            p_k,
            p_kp1,
            vp_k,
            roly_km1,
            croly_k,
            croly_kp2,
            loop_edges,
            grad,
            trace,
            proj_r_grad,
            proj_cr_grad,
            curl,
            ttrace,
            grad_closure_dim: grad_clos,
            curl_closure_dim: curl_clos,
        })
    }
}

pub struct ElemKit {
    pub rule: Rule,
    pub p_km1: Basis,
    pub p_k: Basis,
    pub vp_k: Basis,
    pub roly_km1: Basis,
    pub croly_k: Basis,
    pub goly_km1: Basis,
    pub cgoly_k: Basis,
    /// Element gradient `vP^k` from the grad closure.
    pub grad: DMatrix<f64>,
    pub proj_r_grad: DMatrix<f64>,
    pub proj_cr_grad: DMatrix<f64>,
    /// Element curl `vP^k` from the curl closure.
    pub curl: DMatrix<f64>,
    pub proj_g_curl: DMatrix<f64>,
    pub proj_cg_curl: DMatrix<f64>,
    /// Element divergence `P^k` from the div closure.
    pub div: DMatrix<f64>,
    /// Gather maps of each face's local closures into the element closures.
    pub face_grad_gather: Vec<Vec<usize>>,
    pub face_curl_gather: Vec<Vec<usize>>,
    pub grad_closure_dim: usize,
    pub curl_closure_dim: usize,
    pub div_closure_dim: usize,
}

impl ElemKit {
    pub(crate) fn build(
        mesh: &PolyMesh,
        t: usize,
        k: usize,
        face_kits: &[FaceKit],
        edge_kits: &[EdgeKit],
    ) -> Result<ElemKit, DdrError> {
        let ki = k as isize;
        let rule = entity_rule_unchecked(mesh, Entity::Elem(t), quad_degree(k));
        let p_km1 = scalar_basis(mesh, Entity::Elem(t), ki - 1)?;
        let p_k = scalar_basis(mesh, Entity::Elem(t), ki)?;
        let vp_k = vector_basis(mesh, Entity::Elem(t), ki)?;
        let roly_km1 = roly_elem(mesh, t, ki - 1)?;
        let croly_k = croly_elem(mesh, t, ki)?;
        let goly_km1 = goly_elem(mesh, t, ki - 1)?;
        let cgoly_k = cgoly_elem(mesh, t, ki)?;

        let el = &mesh.elements[t];
        let e_dim = edge_kits.first().map(|ek| ek.p_km1.len()).unwrap_or(0);
        let f_dim = p_km1_face_dim(k);
        let nfl = el.faces.len();
        let grad_clos = p_km1.len() + nfl * f_dim + el.edges.len() * e_dim + el.vertices.len();
        let fr_dim = polyspace::roly_face_dim(ki - 1);
        let fc_dim = polyspace::poly_dim(2, ki - 1); // croly_k face dim
        let curl_clos =
            roly_km1.len() + croly_k.len() + nfl * (fr_dim + fc_dim) + el.edges.len() * (k + 1);
        let div_clos = goly_km1.len() + cgoly_k.len() + nfl * polyspace::poly_dim(2, ki);

        // gather maps
        let mut face_grad_gather = Vec::with_capacity(nfl);
        let mut face_curl_gather = Vec::with_capacity(nfl);
        let edge_pos = |e: usize| {
            el.edges
                .iter()
                .position(|&x| x == e)
                .expect("edge of element")
        };
        let vert_pos = |v: usize| {
            el.vertices
                .iter()
                .position(|&x| x == v)
                .expect("vertex of element")
        };
        for (lf, &f) in el.faces.iter().enumerate() {
            let face = &mesh.faces[f];
            let mloop = face.vertices.len();
            let mut gg = Vec::with_capacity(f_dim + mloop * e_dim + mloop);
            for i in 0..f_dim {
                gg.push(p_km1.len() + lf * f_dim + i);
            }
            for le in 0..mloop {
                let e = face.edges[le];
                for i in 0..e_dim {
                    gg.push(p_km1.len() + nfl * f_dim + edge_pos(e) * e_dim + i);
                }
            }
            for le in 0..mloop {
                gg.push(
                    p_km1.len()
                        + nfl * f_dim
                        + el.edges.len() * e_dim
                        + vert_pos(face.vertices[le]),
                );
            }
            face_grad_gather.push(gg);

            let mut gc = Vec::with_capacity(fr_dim + fc_dim + mloop * (k + 1));
            for i in 0..(fr_dim + fc_dim) {
                gc.push(roly_km1.len() + croly_k.len() + lf * (fr_dim + fc_dim) + i);
            }
            for le in 0..mloop {
                let e = face.edges[le];
                for i in 0..(k + 1) {
                    gc.push(
                        roly_km1.len()
                            + croly_k.len()
                            + nfl * (fr_dim + fc_dim)
                            + edge_pos(e) * (k + 1)
                            + i,
                    );
                }
            }
            face_curl_gather.push(gc);
        }

        // ---- element gradient
        let mut rhs = DMatrix::zeros(vp_k.len(), grad_clos);
        if !p_km1.is_empty() {
            let div = vp_k.div_tab(&rule.points);
            let qt = p_km1.values(&rule.points).comp.remove(0);
            let mm = weighted_dot1(&div, &qt, &rule.weights);
            rhs.view_mut((0, 0), (vp_k.len(), p_km1.len()))
                .copy_from(&(-mm));
        }
        for (lf, &f) in el.faces.iter().enumerate() {
            let fk = &face_kits[f];
            let omega = el.omega_tf[lf] as f64;
            let n = mesh.faces[f].normal;
            let fpts = &fk.rule.points;
            let v3 = vp_k.values3(fpts);
            let vn = {
                let mut out = DMatrix::zeros(fpts.len(), vp_k.len());
                for c in 0..3 {
                    out += &v3.comp[c] * n[c];
                }
                out
            };
            let pb = fk.p_kp1.values(fpts).comp.remove(0);
            let b = weighted_dot1(&vn, &pb, &fk.rule.weights) * omega; // [i, a]
            let contrib = b * &fk.trace;
            for (jl, &jg) in face_grad_gather[lf].iter().enumerate() {
                for i in 0..vp_k.len() {
                    rhs[(i, jg)] += contrib[(i, jl)];
                }
            }
        }
        let mut grad = DMatrix::zeros(vp_k.len(), grad_clos);
        for j in 0..grad_clos {
            grad.set_column(j, &vp_k.solve_gram(&rhs.column(j).into()));
        }

        // ---- element curl
        let mut rhs_c = DMatrix::zeros(vp_k.len(), curl_clos);
        if !roly_km1.is_empty() {
            let cw = vp_k.curl3(&rule.points);
            let r3 = roly_km1.values3(&rule.points);
            let mm = weighted_dot3(&cw, &r3, &rule.weights); // [i, j] = int curl(w_i) . b_j
            rhs_c
                .view_mut((0, 0), (vp_k.len(), roly_km1.len()))
                .copy_from(&mm);
        }
        for (lf, &f) in el.faces.iter().enumerate() {
            let fk = &face_kits[f];
            let omega = el.omega_tf[lf] as f64;
            let n = mesh.faces[f].normal;
            let fpts = &fk.rule.points;
            let w3 = vp_k.values3(fpts);
            // (w_i x n) at face nodes, dotted against the face vP^k basis
            let g3 = fk.vp_k.values3(fpts);
            let mut b = DMatrix::zeros(vp_k.len(), fk.vp_k.len());
            for (q, wq) in fk.rule.weights.iter().enumerate() {
                for i in 0..vp_k.len() {
                    let w = Vec3::new(w3.comp[0][(q, i)], w3.comp[1][(q, i)], w3.comp[2][(q, i)]);
                    let wxn = w.cross(&n);
                    for jj in 0..fk.vp_k.len() {
                        let g = Vec3::new(
                            g3.comp[0][(q, jj)],
                            g3.comp[1][(q, jj)],
                            g3.comp[2][(q, jj)],
                        );
                        b[(i, jj)] += wq * wxn.dot(&g);
                    }
                }
            }
            let contrib = b * &fk.ttrace * omega;
            for (jl, &jg) in face_curl_gather[lf].iter().enumerate() {
                for i in 0..vp_k.len() {
                    rhs_c[(i, jg)] += contrib[(i, jl)];
                }
            }
        }
        let mut curl = DMatrix::zeros(vp_k.len(), curl_clos);
        for j in 0..curl_clos {
            curl.set_column(j, &vp_k.solve_gram(&rhs_c.column(j).into()));
        }

        // ---- element divergence
        let mut rhs_d = DMatrix::zeros(p_k.len(), div_clos);
        if !goly_km1.is_empty() {
            let gq = p_k.phys_grad3(&rule.points);
            let g3 = goly_km1.values3(&rule.points);
            let mm = weighted_dot3(&gq, &g3, &rule.weights);
            rhs_d
                .view_mut((0, 0), (p_k.len(), goly_km1.len()))
                .copy_from(&(-mm));
        }
        let fpk = polyspace::poly_dim(2, ki);
        for (lf, &f) in el.faces.iter().enumerate() {
            let fk = &face_kits[f];
            let omega = el.omega_tf[lf] as f64;
            let fpts = &fk.rule.points;
            let qv = p_k.values(fpts).comp.remove(0);
            let wv = fk.p_k.values(fpts).comp.remove(0);
            let mm = weighted_dot1(&qv, &wv, &fk.rule.weights) * omega;
            let off = goly_km1.len() + cgoly_k.len() + lf * fpk;
            for i in 0..p_k.len() {
                for a in 0..fpk {
                    rhs_d[(i, off + a)] += mm[(i, a)];
                }
            }
        }
        let mut div = DMatrix::zeros(p_k.len(), div_clos);
        for j in 0..div_clos {
            div.set_column(j, &p_k.solve_gram(&rhs_d.column(j).into()));
        }

        // ---- projections
        let proj = |target: &Basis, source: &DMatrix<f64>| -> DMatrix<f64> {
            if target.is_empty() {
                return DMatrix::zeros(0, source.ncols());
            }
            let t3 = target.values3(&rule.points);
            let v3 = vp_k.values3(&rule.points);
            let cross = weighted_dot3(&t3, &v3, &rule.weights);
            let rhs = cross * source;
            let mut out = DMatrix::zeros(target.len(), source.ncols());
            for j in 0..source.ncols() {
                out.set_column(j, &target.solve_gram(&rhs.column(j).into()));
            }
            out
        };
        let proj_r_grad = proj(&roly_km1, &grad);
        let proj_cr_grad = proj(&croly_k, &grad);
        let proj_g_curl = proj(&goly_km1, &curl);
        let proj_cg_curl = proj(&cgoly_k, &curl);

        Ok(ElemKit {
            rule,
            p_km1,
            p_k,
            vp_k,
            roly_km1,
            croly_k,
            goly_km1,
            cgoly_k,
            grad,
            proj_r_grad,
            proj_cr_grad,
            curl,
            proj_g_curl,
            proj_cg_curl,
            div,
            face_grad_gather,
            face_curl_gather,
            grad_closure_dim: grad_clos,
            curl_closure_dim: curl_clos,
            div_closure_dim: div_clos,
        })
    }
}

fn p_km1_face_dim(k: usize) -> usize {
    polyspace::poly_dim(2, k as isize - 1)
}
