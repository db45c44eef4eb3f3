//! Magnetostatics on general topology: the discrete harmonic space, the
//! saddle bilinear form with its six terms, a direct solver, and the
//! graph-norm inf-sup probe.
//!
//! The discrete products on the curl and div spaces are the component
//! products inducing the component norms; the bilinear form and the graph
//! norm are built verbatim on top of them.

use crate::ddr::{Context, Space};
use crate::linalg::{numerical_rank, whiten_bilinear};
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MagnetoError {
    #[error(
        "ambiguous harmonic-space rank: singular-value gap {gap:.3e} within 10x of the cutoff"
    )]
    AmbiguousRank { gap: f64 },
    #[error("singular saddle system")]
    SingularSystem,
}

/// Orthonormal (in the div product) basis of the discrete harmonic space
/// `{w : D w = 0 and (w, C v) = 0 for all v}`.
pub struct HarmonicDivSpace {
    pub basis: Vec<DVector<f64>>,
    pub div_residual: f64,
    pub curl_orth_residual: f64,
}

pub fn harmonic_div_space(ctx: &Context<'_>) -> Result<HarmonicDivSpace, MagnetoError> {
    let d = ctx.div_op.to_dense();
    let c = ctx.curl_op.to_dense();
    let gdiv = ctx.div_gram.to_dense();
    // stacked system [D ; C^T G_div]: null space = harmonic forms
    let ct_g = c.transpose() * &gdiv;
    let mut stacked = DMatrix::zeros(d.nrows() + ct_g.nrows(), d.ncols());
    stacked
        .view_mut((0, 0), (d.nrows(), d.ncols()))
        .copy_from(&d);
    stacked
        .view_mut((d.nrows(), 0), (ct_g.nrows(), ct_g.ncols()))
        .copy_from(&ct_g);
    let svd = stacked.svd(false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let sigmas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = numerical_rank(&sigmas, crate::RANK_RTOL);
    // flag a cutoff that separates the spectrum by less than a decade
    if rank > 0 && rank < sigmas.len() {
        let above = sigmas[rank - 1];
        let below = sigmas.get(rank).copied().unwrap_or(0.0);
        if below > 0.0 && above / below < 10.0 {
            return Err(MagnetoError::AmbiguousRank { gap: above / below });
        }
    }
    let mut raw: Vec<DVector<f64>> = Vec::new();
    for i in rank..sigmas.len() {
        raw.push(vt.row(order[i]).transpose());
    }
    // orthonormalize in the div component product
    let gram = |x: &DVector<f64>, y: &DVector<f64>| ctx.component_product(Space::Div, x, y);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for mut v in raw {
        for b in &basis {
            let proj = gram(&v, b);
            v -= b * proj;
        }
        let nrm = gram(&v, &v).max(0.0).sqrt();
        if nrm > 1e-12 {
            basis.push(v / nrm);
        }
    }
    // residual checks
    let mut div_residual = 0.0_f64;
    let mut curl_orth_residual = 0.0_f64;
    for b in &basis {
        div_residual = div_residual.max(ctx.component_norm(Space::Broken, &ctx.div_op.matvec(b)));
        let gb = ctx.div_gram.matvec(b);
        // max over curl-image basis: |(b, C e_i)| = |(C^T G_div b)_i|
        curl_orth_residual = curl_orth_residual.max(ctx.curl_op.tr_matvec(&gb).amax());
    }
    Ok(HarmonicDivSpace {
        basis,
        div_residual,
        curl_orth_residual,
    })
}

/// Assembled saddle system for one source term.
pub struct MagnetoSystem {
    pub n_sigma: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Gram matrix of the graph norm on the product space.
    pub graph_gram: DMatrix<f64>,
    /// Component norm of the interpolated source.
    pub source_norm: f64,
}

/// Source presets used by the verification driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourcePreset {
    Zero,
    Constant,
    Polynomial,
}

impl SourcePreset {
    pub fn field(self) -> impl Fn(Vec3) -> Vec3 {
        move |p: Vec3| match self {
            SourcePreset::Zero => Vec3::zeros(),
            SourcePreset::Constant => Vec3::new(1.0, -2.0, 0.5),
            SourcePreset::Polynomial => Vec3::new(p.y * p.z, p.x - p.z * p.z, p.x * p.y + p.z),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SourcePreset::Zero => "zero",
            SourcePreset::Constant => "constant",
            SourcePreset::Polynomial => "polynomial",
        }
    }
}

pub fn assemble_magneto(
    ctx: &Context<'_>,
    harmonic: &HarmonicDivSpace,
    f: &dyn Fn(Vec3) -> Vec3,
) -> MagnetoSystem {
    let n_sigma = ctx.curl.total();
    let n_u = ctx.div.total();
    let n_p = harmonic.basis.len();
    let n = n_sigma + n_u + n_p;

    let c = ctx.curl_op.to_dense();
    let d = ctx.div_op.to_dense();
    let g_curl = ctx.curl_gram.to_dense();
    let g_div = ctx.div_gram.to_dense();
    let g_broken = ctx.broken_gram.to_dense();

    let a21 = &g_div * &c; // (C sigma, v)_div
    let a12 = -a21.transpose(); // -(u, C tau)_div: negative transpose of the same block
    let a22 = d.transpose() * &g_broken * &d;
    let bmat = {
        let mut m = DMatrix::zeros(n_u, n_p);
        for (j, b) in harmonic.basis.iter().enumerate() {
            m.set_column(j, b);
        }
        m
    };
    let a23 = &g_div * &bmat;
    let a32 = bmat.transpose() * &g_div;

    let mut matrix = DMatrix::zeros(n, n);
    matrix
        .view_mut((0, 0), (n_sigma, n_sigma))
        .copy_from(&g_curl);
    matrix
        .view_mut((0, n_sigma), (n_sigma, n_u))
        .copy_from(&a12);
    matrix
        .view_mut((n_sigma, 0), (n_u, n_sigma))
        .copy_from(&a21);
    matrix
        .view_mut((n_sigma, n_sigma), (n_u, n_u))
        .copy_from(&a22);
    matrix
        .view_mut((n_sigma, n_sigma + n_u), (n_u, n_p))
        .copy_from(&a23);
    matrix
        .view_mut((n_sigma + n_u, n_sigma), (n_p, n_u))
        .copy_from(&a32);

    let i_f = ctx.interpolate_div(f);
    let mut rhs = DVector::zeros(n);
    let g_if = &g_div * &i_f.0;
    for i in 0..n_u {
        rhs[n_sigma + i] = g_if[i];
    }
    let source_norm = ctx.component_norm(Space::Div, &i_f.0);

    // graph-norm Gram: |sigma|^2 + |C sigma|^2 + |u|^2 + |D u|^2 + |p|^2
    let mut graph_gram = DMatrix::zeros(n, n);
    let n_sig_blk = &g_curl + c.transpose() * &g_div * &c;
    let n_u_blk = &g_div + &a22;
    graph_gram
        .view_mut((0, 0), (n_sigma, n_sigma))
        .copy_from(&n_sig_blk);
    graph_gram
        .view_mut((n_sigma, n_sigma), (n_u, n_u))
        .copy_from(&n_u_blk);
    for i in 0..n_p {
        graph_gram[(n_sigma + n_u + i, n_sigma + n_u + i)] = 1.0; // orthonormal basis
    }

    MagnetoSystem {
        n_sigma,
        n_u,
        n_p,
        matrix,
        rhs,
        graph_gram,
        source_norm,
    }
}

/// Direct evaluation of the bilinear form from the component products (used
/// to cross-check the assembled matrix).
pub fn bilinear_form(
    ctx: &Context<'_>,
    harmonic: &HarmonicDivSpace,
    trial: (&DVector<f64>, &DVector<f64>, &DVector<f64>),
    test: (&DVector<f64>, &DVector<f64>, &DVector<f64>),
) -> f64 {
    let (sigma, u, p) = trial;
    let (tau, v, q) = test;
    let expand = |coeff: &DVector<f64>| -> DVector<f64> {
        let mut w = ctx.zero(Space::Div);
        for (j, b) in harmonic.basis.iter().enumerate() {
            w += b * coeff[j];
        }
        w
    };
    let p_full = expand(p);
    let q_full = expand(q);
    let c_sigma = ctx.curl_op.matvec(sigma);
    let c_tau = ctx.curl_op.matvec(tau);
    let d_u = ctx.div_op.matvec(u);
    let d_v = ctx.div_op.matvec(v);
    ctx.component_product(Space::Curl, sigma, tau) - ctx.component_product(Space::Div, u, &c_tau)
        + ctx.component_product(Space::Div, &c_sigma, v)
        + ctx.component_product(Space::Broken, &d_u, &d_v)
        + ctx.component_product(Space::Div, &p_full, v)
        + ctx.component_product(Space::Div, u, &q_full)
}

/// Solution of the saddle system with its diagnostics.
pub struct MagnetoSolution {
    pub sigma: DVector<f64>,
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    /// Relative algebraic residual of the solve.
    pub residual: f64,
    pub graph_norm: f64,
    /// Component norm of the discrete divergence of `u`.
    pub div_u_norm: f64,
    /// Worst product of `u` against the harmonic basis.
    pub harmonic_orthogonality: f64,
}

pub fn solve_magnetostatics(
    ctx: &Context<'_>,
    harmonic: &HarmonicDivSpace,
    system: &MagnetoSystem,
) -> Result<MagnetoSolution, MagnetoError> {
    let lu = system.matrix.clone().lu();
    let x = lu.solve(&system.rhs).ok_or(MagnetoError::SingularSystem)?;
    let residual = (&system.matrix * &x - &system.rhs).norm()
        / system
            .rhs
            .norm()
            .max(system.matrix.norm() * x.norm())
            .max(1e-300);
    let sigma = x.rows(0, system.n_sigma).into_owned();
    let u = x.rows(system.n_sigma, system.n_u).into_owned();
    let p = x.rows(system.n_sigma + system.n_u, system.n_p).into_owned();
    let graph_norm = (x.dot(&(&system.graph_gram * &x))).max(0.0).sqrt();
    let div_u_norm = ctx.component_norm(Space::Broken, &ctx.div_op.matvec(&u));
    let mut harmonic_orthogonality = 0.0_f64;
    for b in &harmonic.basis {
        harmonic_orthogonality =
            harmonic_orthogonality.max(ctx.component_product(Space::Div, &u, b).abs());
    }
    Ok(MagnetoSolution {
        sigma,
        u,
        p,
        residual,
        graph_norm,
        div_u_norm,
        harmonic_orthogonality,
    })
}

/// Smallest singular value of the graph-norm-whitened system matrix
/// (rows are functionals, so the output side carries the dual norm).
pub fn infsup_constant(system: &MagnetoSystem) -> f64 {
    let b = whiten_bilinear(&system.matrix, &system.graph_gram);
    let sv = b.svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::MAX, f64::min)
}
