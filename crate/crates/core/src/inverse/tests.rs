use super::*;
use crate::ddr::Context;
use crate::linalg::SplitMix64;
use crate::mesh::{gen_hex_mesh, gen_voided_cube_mesh, PolyMesh};
use crate::mimetic::MimeticCtx;
use crate::submesh::tetrahedralize;
use crate::whitney::assemble_whitney;
use crate::Vec3;

struct Fixture {
    mesh: PolyMesh,
}

struct Built<'a> {
    ddr: Context<'a>,
    sub: crate::submesh::SubMesh,
}

impl Fixture {
    fn new(mesh: PolyMesh) -> Self {
        Fixture { mesh }
    }

    fn build(&self, k: usize) -> Built<'_> {
        Built {
            ddr: Context::new(&self.mesh, k).unwrap(),
            sub: tetrahedralize(&self.mesh).unwrap(),
        }
    }
}

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
fn inverse_gradient_on_constant_is_zero_after_gauge() {
    let fx = Fixture::new(gen_hex_mesh(1).unwrap());
    for k in 0..=1 {
        let b = fx.build(k);
        let w = assemble_whitney(&b.sub).unwrap();
        let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
        let inv = InverseCtx::new(&b.ddr, &mim);
        let p = b.ddr.interpolate_grad(&|_| 3.0);
        let r = inv.inverse_gradient(&p).unwrap();
        assert!(r.output_norm < 1e-11, "k={k}: {}", r.output_norm);
        assert_eq!(r.implied_constant, 0.0);
    }
}

#[test]
fn inverse_gradient_vertex_jumps_match_input_jumps() {
    let fx = Fixture::new(gen_hex_mesh(2).unwrap());
    for k in 0..=1usize {
        let b = fx.build(k);
        let w = assemble_whitney(&b.sub).unwrap();
        let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
        let inv = InverseCtx::new(&b.ddr, &mim);
        let mut rng = SplitMix64::new(41);
        let p = crate::ddr::XGradVec(rng.vector(b.ddr.grad.total()));
        let r = inv.inverse_gradient(&p).unwrap();
        assert!(r.op_residual < 1e-10, "k={k}: {}", r.op_residual);
        for ed in &fx.mesh.edges {
            let jq = r.constructed[b.ddr.grad.vertex_off(ed.v[1])]
                - r.constructed[b.ddr.grad.vertex_off(ed.v[0])];
            let jp = p.0[b.ddr.grad.vertex_off(ed.v[1])] - p.0[b.ddr.grad.vertex_off(ed.v[0])];
            assert!((jq - jp).abs() < 1e-10, "k={k}: {jq} vs {jp}");
        }
    }
}

#[test]
fn inverse_gradient_is_gauge_invariant() {
    let fx = Fixture::new(gen_hex_mesh(1).unwrap());
    let b = fx.build(1);
    let w = assemble_whitney(&b.sub).unwrap();
    let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
    let inv = InverseCtx::new(&b.ddr, &mim);
    let mut rng = SplitMix64::new(5);
    let p = crate::ddr::XGradVec(rng.vector(b.ddr.grad.total()));
    // the kernel element carrying "the same values plus a constant" is the
    // interpolant of that constant
    let shift = b.ddr.interpolate_grad(&|_| 7.5);
    let mut shifted = p.clone();
    shifted.0 += &shift.0;
    let r1 = inv.inverse_gradient(&p).unwrap();
    let r2 = inv.inverse_gradient(&shifted).unwrap();
    assert!((r1.constructed - r2.constructed).amax() < 1e-10);
}

#[test]
fn inverse_curl_of_gradient_image_is_zero() {
    let fx = Fixture::new(gen_hex_mesh(1).unwrap());
    for k in 0..=1 {
        let b = fx.build(k);
        let w = assemble_whitney(&b.sub).unwrap();
        let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
        let inv = InverseCtx::new(&b.ddr, &mim);
        let mut rng = SplitMix64::new(17);
        let p = crate::ddr::XGradVec(rng.vector(b.ddr.grad.total()));
        let v = b.ddr.apply_grad(&p);
        let r = inv.inverse_curl(&v).unwrap();
        // C (G p) = 0, so the constructed preimage must vanish
        assert!(r.input_op_norm < 1e-9, "k={k}");
        assert!(r.output_norm < 1e-8, "k={k}: {}", r.output_norm);
    }
}

#[test]
fn inverse_curl_preserves_face_curl_means() {
    let fx = Fixture::new(gen_hex_mesh(2).unwrap());
    for k in 0..=1usize {
        let b = fx.build(k);
        let w = assemble_whitney(&b.sub).unwrap();
        let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
        let inv = InverseCtx::new(&b.ddr, &mim);
        let mut rng = SplitMix64::new(23);
        let v = crate::ddr::XCurlVec(rng.vector(b.ddr.curl.total()));
        let r = inv.inverse_curl(&v).unwrap();
        assert!(r.op_residual < 1e-10, "k={k}: {}", r.op_residual);
        let z = crate::ddr::XCurlVec(r.constructed.clone());
        for f in 0..fx.mesh.faces.len() {
            let mv = b.ddr.face_curl_mean(f, &v);
            let mz = b.ddr.face_curl_mean(f, &z);
            assert!((mv - mz).abs() < 1e-10 * mv.abs().max(1.0), "k={k} f={f}");
        }
    }
}

#[test]
fn inverse_divergence_examples() {
    let fx = Fixture::new(gen_hex_mesh(2).unwrap());
    for k in 0..=1usize {
        let b = fx.build(k);
        let w = assemble_whitney(&b.sub).unwrap();
        let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
        let inv = InverseCtx::new(&b.ddr, &mim);
        let mut rng = SplitMix64::new(29);
        let wv = crate::ddr::XDivVec(rng.vector(b.ddr.div.total()));
        let r = inv.inverse_divergence(&wv).unwrap();
        assert!(r.op_residual < 1e-10, "k={k}: {}", r.op_residual);
        // mean preservation per element
        let z = crate::ddr::XDivVec(r.constructed.clone());
        for t in 0..fx.mesh.elements.len() {
            let mw = b.ddr.elem_div_mean(t, &wv);
            let mz = b.ddr.elem_div_mean(t, &z);
            assert!((mw - mz).abs() < 1e-10 * mw.abs().max(1.0), "k={k} t={t}");
        }
        // a divergence-free input maps to the zero preimage
        let p = crate::ddr::XCurlVec(rng.vector(b.ddr.curl.total()));
        let wfree = b.ddr.apply_curl(&p);
        let r0 = inv.inverse_divergence(&wfree).unwrap();
        assert!(r0.input_op_norm < 1e-9);
        assert!(r0.output_norm < 1e-8, "k={k}: {}", r0.output_norm);
    }
}

#[test]
fn poincare_estimate_kernel_dims() {
    let tet = single_tet_mesh();
    let ctx = Context::new(&tet, 0).unwrap();
    let est = poincare_constant(&ctx, OpKind::Grad);
    assert_eq!(est.kernel_dim, 1);
    assert!(est.c_num.is_finite() && est.c_num > 0.0);

    let voided = gen_voided_cube_mesh(3).unwrap();
    let ctx = Context::new(&voided, 0).unwrap();
    let est_div = poincare_constant(&ctx, OpKind::Div);
    assert!(est_div.c_num.is_finite());
    // kernel of the divergence contains rank(curl) + b2 directions
    let est_curl = poincare_constant(&ctx, OpKind::Curl);
    let rank_curl = ctx.curl.total() - est_curl.kernel_dim;
    assert_eq!(est_div.kernel_dim, rank_curl + 1);
}

#[test]
fn constructed_norm_dominates_quotient_and_worst_input_attains_cnum() {
    let fx = Fixture::new(gen_hex_mesh(1).unwrap());
    let b = fx.build(1);
    let w = assemble_whitney(&b.sub).unwrap();
    let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
    let inv = InverseCtx::new(&b.ddr, &mim);
    let est = poincare_constant(&b.ddr, OpKind::Grad);
    let mut rng = SplitMix64::new(31);
    for trial in 0..10 {
        let p = crate::ddr::XGradVec(rng.vector(b.ddr.grad.total()));
        let image = b.ddr.apply_grad(&p);
        let r = inv.inverse_gradient(&p).unwrap();
        let qmin = est.quotient_min_norm(&image.0);
        assert!(
            r.output_norm >= qmin - 1e-9,
            "trial {trial}: constructed {} < quotient min {qmin}",
            r.output_norm
        );
        // the quotient minimum is bounded by the estimate
        assert!(qmin <= est.c_num * r.input_op_norm * (1.0 + 1e-8));
    }
    // the worst input direction achieves a ratio >= c_num through any right inverse
    let xworst = crate::ddr::XGradVec(est.worst_input.clone());
    let r = inv.inverse_gradient(&xworst).unwrap();
    assert!(
        r.implied_constant >= est.c_num * (1.0 - 1e-8),
        "{} vs {}",
        r.implied_constant,
        est.c_num
    );
}

#[test]
fn poincare_constants_are_finite_on_voided_mesh_with_lifts() {
    // exercise the curl inverse on the voided cube (shell condition active)
    let fx = Fixture::new(gen_voided_cube_mesh(3).unwrap());
    let b = fx.build(0);
    let w = assemble_whitney(&b.sub).unwrap();
    let mim = MimeticCtx::new(&fx.mesh, &b.sub, &w);
    let inv = InverseCtx::new(&b.ddr, &mim);
    let mut rng = SplitMix64::new(37);
    for _ in 0..3 {
        let v = crate::ddr::XCurlVec(rng.vector(b.ddr.curl.total()));
        let r = inv.inverse_curl(&v).unwrap();
        assert!(r.op_residual < 1e-10);
    }
}

#[test]
fn iterative_sigma_estimate_matches_dense() {
    let mesh = gen_hex_mesh(2).unwrap();
    let ctx = Context::new(&mesh, 0).unwrap();
    for op in [OpKind::Grad, OpKind::Div] {
        let dense = poincare_constant(&ctx, op);
        let (c_it, iters) = poincare_constant_iterative(&ctx, op, 1e-8, 99);
        assert!(iters > 0);
        assert!(
            (c_it - dense.c_num).abs() < 1e-5 * dense.c_num,
            "{op:?}: iterative {c_it} vs dense {}",
            dense.c_num
        );
    }
}
