use super::*;
use crate::mesh::gen_hex_mesh;
use crate::quadrature::tet_rule;

fn hex() -> PolyMesh {
    gen_hex_mesh(1).unwrap()
}

#[test]
fn entity_rules_integrate_constants_exactly() {
    let m = hex();
    let s = crate::submesh::tetrahedralize(&m).unwrap();
    for (i, _) in s.tets.iter().enumerate() {
        let r = tet_rule(&s.tet_points(i), 2);
        assert!((r.measure() - s.tet_volume[i]).abs() <= 1e-14 * s.tet_volume[i]);
    }
    let r = entity_rule(&m, Entity::Elem(0), 4).unwrap();
    // int over [0,1]^3 of x^2 y^2 = 1/9
    let got = r.integrate(|p| p.x * p.x * p.y * p.y);
    assert!((got - 1.0 / 9.0).abs() < 1e-14, "got {got}");
}

#[test]
fn face_rule_products_match_degree_raised_reference() {
    let m = hex();
    let k = 2usize;
    let f = 0usize;
    let basis = scalar_basis(&m, Entity::Face(f), (k + 1) as isize).unwrap();
    let rule = entity_rule(&m, Entity::Face(f), 2 * k + 2).unwrap();
    let oracle = entity_rule(&m, Entity::Face(f), 2 * k + 6).unwrap();
    let tab = basis.values(&rule.points).comp[0].clone();
    let tab_o = basis.values(&oracle.points).comp[0].clone();
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let a: f64 = rule
                .weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * tab[(q, i)] * tab[(q, j)])
                .sum();
            let b: f64 = oracle
                .weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * tab_o[(q, i)] * tab_o[(q, j)])
                .sum();
            assert!((a - b).abs() < 1e-13, "({i},{j}): {a} vs {b}");
        }
    }
}

#[test]
fn basis_dimensions() {
    let m = hex();
    for (l, expect) in [(0isize, 1usize), (1, 4), (2, 10), (3, 20)] {
        assert_eq!(scalar_basis(&m, Entity::Elem(0), l).unwrap().len(), expect);
    }
    for (l, expect) in [(0isize, 1usize), (1, 3), (2, 6)] {
        assert_eq!(scalar_basis(&m, Entity::Face(0), l).unwrap().len(), expect);
    }
    for (l, expect) in [(0isize, 1usize), (1, 2), (2, 3)] {
        assert_eq!(scalar_basis(&m, Entity::Edge(0), l).unwrap().len(), expect);
    }
    assert_eq!(scalar_basis(&m, Entity::Elem(0), -1).unwrap().len(), 0);
}

#[test]
fn gram_is_spd_with_reported_condition() {
    let m = hex();
    let b = scalar_basis(&m, Entity::Elem(0), 3).unwrap();
    assert!(b.gram_cond >= 1.0 && b.gram_cond.is_finite());
    let eig = nalgebra::SymmetricEigen::new(b.gram.clone());
    assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
}

#[test]
fn projector_is_idempotent_on_members() {
    let m = hex();
    let b = scalar_basis(&m, Entity::Elem(0), 2).unwrap();
    let rule = entity_rule(&m, Entity::Elem(0), 6).unwrap();
    // f = a member of the space itself
    let coeffs = DVector::from_fn(b.len(), |i, _| (i as f64 * 0.37).sin() + 0.2);
    let fvals = b.eval_scalar(&coeffs, &rule.points);
    let proj = b.project_values(&rule, &fvals);
    assert!((proj - coeffs).norm() < 1e-12);
}

#[test]
fn constant_projects_to_constant() {
    let m = hex();
    let b = scalar_basis(&m, Entity::Elem(0), 0).unwrap();
    let rule = entity_rule(&m, Entity::Elem(0), 2).unwrap();
    let proj = b.project_values(&rule, &DVector::from_element(rule.points.len(), 1.0));
    // single coefficient, constant monomial: must represent the constant 1
    let vals = b.eval_scalar(&proj, &[Vec3::new(0.3, 0.4, 0.9)]);
    assert!((vals[0] - 1.0).abs() < 1e-13);
}

#[test]
fn projection_matches_dense_normal_equations_oracle() {
    let m = hex();
    let b = scalar_basis(&m, Entity::Elem(0), 1).unwrap();
    let rule = entity_rule(&m, Entity::Elem(0), 10).unwrap();
    let f = |p: Vec3| p.x * p.x;
    let fvals = crate::quadrature::tabulate(&rule, f);
    let proj = b.project_values(&rule, &fvals);
    // oracle: dense normal equations assembled from raw tabulations
    let tab = b.values(&rule.points).comp[0].clone();
    let n = b.len();
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (q, w) in rule.weights.iter().enumerate() {
        for i in 0..n {
            rhs[i] += w * tab[(q, i)] * fvals[q];
            for j in 0..n {
                a[(i, j)] += w * tab[(q, i)] * tab[(q, j)];
            }
        }
    }
    let oracle = a.lu().solve(&rhs).unwrap();
    assert!((proj - oracle).norm() < 1e-12);
}

#[test]
fn projector_contracts() {
    let m = hex();
    let b = scalar_basis(&m, Entity::Face(2), 2).unwrap();
    let rule = entity_rule(&m, Entity::Face(2), 8).unwrap();
    for s in 0..5 {
        let f = |p: Vec3| (3.0 * p.x + s as f64).sin() * (2.0 * p.y - p.z).cos();
        let fvals = crate::quadrature::tabulate(&rule, f);
        let proj = b.project_values(&rule, &fvals);
        let pvals = b.eval_scalar(&proj, &rule.points);
        let norm_f: f64 = rule
            .weights
            .iter()
            .zip(fvals.iter())
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt();
        let norm_p: f64 = rule
            .weights
            .iter()
            .zip(pvals.iter())
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt();
        assert!(norm_p <= norm_f + 1e-11);
    }
}

#[test]
fn decomp_dimensions_face() {
    let m = hex();
    let d = build_decomp(&m, Entity::Face(0), 0).unwrap();
    assert_eq!(d.roly.len(), 2);
    assert_eq!(d.croly.len(), 0);
    let d = build_decomp(&m, Entity::Face(0), 2).unwrap();
    assert_eq!(d.roly.len(), poly_dim(2, 3) - 1);
    assert_eq!(d.croly.len(), poly_dim(2, 1));
    assert_eq!(d.roly.len() + d.croly.len(), 2 * poly_dim(2, 2));
}

#[test]
fn decomp_dimensions_elem() {
    let m = hex();
    let d = build_decomp(&m, Entity::Elem(0), 1).unwrap();
    assert_eq!(d.cgoly.as_ref().unwrap().len(), 3);
    assert_eq!(d.goly.as_ref().unwrap().len(), 9);
    assert_eq!(
        d.goly.as_ref().unwrap().len() + d.cgoly.as_ref().unwrap().len(),
        3 * poly_dim(3, 1)
    );
    assert_eq!(d.roly.len() + d.croly.len(), 3 * poly_dim(3, 1));
    // negative degree: all trivial
    let d = build_decomp(&m, Entity::Elem(0), -1).unwrap();
    assert_eq!(d.roly.len(), 0);
    assert_eq!(d.croly.len(), 0);
    assert_eq!(d.goly.as_ref().unwrap().len(), 0);
    assert_eq!(d.cgoly.as_ref().unwrap().len(), 0);
}

#[test]
fn direct_sums_have_full_numerical_rank() {
    let m = hex();
    for l in 0..=2isize {
        let d = build_decomp(&m, Entity::Face(0), l).unwrap();
        assert!(d.direct_sum_sigma_ratio(&m, (&d.roly, &d.croly)) > 1e-8);
        let d = build_decomp(&m, Entity::Elem(0), l).unwrap();
        assert!(d.direct_sum_sigma_ratio(&m, (&d.roly, &d.croly)) > 1e-8);
        assert!(
            d.direct_sum_sigma_ratio(&m, (d.goly.as_ref().unwrap(), d.cgoly.as_ref().unwrap()))
                > 1e-8
        );
    }
}

#[test]
fn vrot_members_are_divergence_free() {
    let m = hex();
    let b = roly_face(&m, 3, 2).unwrap();
    let rule = entity_rule(&m, Entity::Face(3), 6).unwrap();
    let div = b.div_tab(&rule.points);
    assert!(div.amax() < 1e-12);
}

#[test]
fn goly_members_are_curl_free() {
    let m = hex();
    let b = goly_elem(&m, 0, 2).unwrap();
    let rule = entity_rule(&m, Entity::Elem(0), 6).unwrap();
    let curl = b.curl3(&rule.points);
    for c in &curl.comp {
        assert!(c.amax() < 1e-12);
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn projection_idempotent_on_random_members(seed in 0u64..1000) {
            let m = hex();
            let mut rng = crate::linalg::SplitMix64::new(seed);
            let b = scalar_basis(&m, Entity::Face(1), 2).unwrap();
            let rule = entity_rule(&m, Entity::Face(1), 6).unwrap();
            let coeffs = rng.vector(b.len());
            let fvals = b.eval_scalar(&coeffs, &rule.points);
            let proj = b.project_values(&rule, &fvals);
            prop_assert!((proj - coeffs).norm() < 1e-11);
        }
    }
}
