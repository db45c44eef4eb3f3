//! Quadrature on segments, triangles and tetrahedra, exact to a requested
//! polynomial degree. Simplex rules use the collapsed-coordinate construction
//! from 1D Gauss–Legendre and Gauss–Jacobi rules, so any degree is available;
//! polytopal faces and elements integrate through their simplicial
//! subdivision (see the mesh module).

use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest degree accepted by the public entity-rule constructors.
pub const DEFAULT_MAX_DEGREE: usize = 14;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("unsupported quadrature degree {requested} (max {max})")]
    UnsupportedDegree { requested: usize, max: usize },
}

/// Quadrature nodes (physical coordinates) with weights summing to the
/// measure of the integration domain.
#[derive(Clone, Debug)]
pub struct Rule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate<F: FnMut(Vec3) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn merged(rules: impl IntoIterator<Item = Rule>) -> Rule {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for r in rules {
            points.extend(r.points);
            weights.extend(r.weights);
        }
        Rule { points, weights }
    }
}

/// Nodes/weights for weight (1-x)^alpha on [0, 1], exact for polynomials of
/// degree <= 2n-1, via Golub–Welsch on the Jacobi recurrence.
fn gauss_jacobi_01(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let (a, b) = (alpha, 0.0);
    // three-term recurrence coefficients for monic Jacobi polynomials on [-1,1]
    let mut diag = vec![0.0_f64; n];
    let mut off = vec![0.0_f64; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        let denom = (2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0);
        diag[k] = if denom == 0.0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / denom
        };
    }
    for k in 1..n {
        let kf = k as f64;
        let num = 4.0 * kf * (kf + a) * (kf + b) * (kf + a + b);
        let den = (2.0 * kf + a + b).powi(2) * (2.0 * kf + a + b + 1.0) * (2.0 * kf + a + b - 1.0);
        off[k - 1] = (num / den).sqrt();
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag[k];
        if k + 1 < n {
            jac[(k, k + 1)] = off[k];
            jac[(k + 1, k)] = off[k];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    // mu0 = int_{-1}^{1} (1-x)^alpha dx
    let mu0 = 2.0_f64.powf(a + 1.0) / (a + 1.0);
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (x, mu0 * v0 * v0)
        })
        .collect();
    nodes.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    // map x in [-1,1] with weight (1-x)^alpha to t in [0,1] with weight (1-t)^alpha:
    // t = (x+1)/2, dx = 2 dt, (1-x)^alpha = (2(1-t))^alpha
    let scale = 2.0_f64.powf(-(a + 1.0));
    let xs = nodes.iter().map(|p| 0.5 * (p.0 + 1.0)).collect();
    let ws = nodes.iter().map(|p| p.1 * scale).collect();
    (xs, ws)
}

fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss–Legendre rule on [0, 1], exact to the requested degree.
pub fn gauss_legendre_01(degree: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_01(points_for_degree(degree), 0.0)
}

/// Rule on the physical segment [a, b].
pub fn segment_rule(a: Vec3, b: Vec3, degree: usize) -> Rule {
    let (xs, ws) = gauss_legendre_01(degree);
    let len = (b - a).norm();
    Rule {
        points: xs.iter().map(|&t| a + (b - a) * t).collect(),
        weights: ws.iter().map(|&w| w * len).collect(),
    }
}

/// Rule on the physical triangle, exact for total degree <= `degree`.
pub fn triangle_rule(tri: &[Vec3; 3], degree: usize) -> Rule {
    let (xu, wu) = gauss_jacobi_01(points_for_degree(degree), 1.0);
    let (xv, wv) = gauss_legendre_01(degree);
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let area2 = (b - a).cross(&(c - a)).norm(); // = 2 |F|
    let mut points = Vec::with_capacity(xu.len() * xv.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&u, &cw_u) in xu.iter().zip(&wu) {
        for (&v, &cw_v) in xv.iter().zip(&wv) {
            // barycentric (l1, l2) = (u, v (1 - u)); Jacobian (1-u) absorbed in wu
            let l1 = u;
            let l2 = v * (1.0 - u);
            points.push(a + (b - a) * l1 + (c - a) * l2);
            weights.push(cw_u * cw_v * area2);
        }
    }
    Rule { points, weights }
}

/// Triangle rule after `splits` levels of uniform 4-subdivision. Used to
/// integrate smooth non-polynomial fields (fluxes of analytic harmonic
/// fields) to near machine precision.
pub fn triangle_rule_refined(tri: &[Vec3; 3], degree: usize, splits: usize) -> Rule {
    if splits == 0 {
        return triangle_rule(tri, degree);
    }
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let (ab, bc, ca) = ((a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5);
    let children = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]];
    Rule::merged(
        children
            .iter()
            .map(|t| triangle_rule_refined(t, degree, splits - 1)),
    )
}

/// Rule on the physical tetrahedron, exact for total degree <= `degree`.
pub fn tet_rule(tet: &[Vec3; 4], degree: usize) -> Rule {
    let n = points_for_degree(degree);
    let (xu, wu) = gauss_jacobi_01(n, 2.0);
    let (xv, wv) = gauss_jacobi_01(n, 1.0);
    let (xw, ww) = gauss_legendre_01(degree);
    let (a, b, c, d) = (tet[0], tet[1], tet[2], tet[3]);
    let vol6 = (b - a).cross(&(c - a)).dot(&(d - a)).abs(); // = 6 |S|
    let mut points = Vec::with_capacity(xu.len() * xv.len() * xw.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&u, &cw_u) in xu.iter().zip(&wu) {
        for (&v, &cw_v) in xv.iter().zip(&wv) {
            for (&w, &cw_w) in xw.iter().zip(&ww) {
                // barycentric (l1, l2, l3) = (u, v(1-u), w(1-u)(1-v))
                let l1 = u;
                let l2 = v * (1.0 - u);
                let l3 = w * (1.0 - u) * (1.0 - v);
                points.push(a + (b - a) * l1 + (c - a) * l2 + (d - a) * l3);
                weights.push(cw_u * cw_v * cw_w * vol6);
            }
        }
    }
    Rule { points, weights }
}

/// Guard used by the public entity-rule constructors.
pub fn check_degree(degree: usize) -> Result<(), QuadratureError> {
    if degree > DEFAULT_MAX_DEGREE {
        Err(QuadratureError::UnsupportedDegree {
            requested: degree,
            max: DEFAULT_MAX_DEGREE,
        })
    } else {
        Ok(())
    }
}

/// Tabulates `f` at the nodes of `rule` into a vector (handy for projections).
pub fn tabulate<F: FnMut(Vec3) -> f64>(rule: &Rule, mut f: F) -> DVector<f64> {
    DVector::from_fn(rule.points.len(), |i, _| f(rule.points[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn segment_rule_is_exact() {
        let r = segment_rule(v(0.0, 0.0, 0.0), v(2.0, 0.0, 0.0), 7);
        // int_0^2 x^7 dx = 2^8 / 8 = 32
        let got = r.integrate(|p| p.x.powi(7));
        assert!((got - 32.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // reference triangle (0,0), (1,0), (0,1): int x^a y^b = a! b! / (a+b+2)!
        let tri = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)];
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        for deg in 0..=10usize {
            let r = triangle_rule(&tri, deg);
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let got = r.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
                    assert!(
                        (got - exact).abs() < 1e-14 * (1.0 + exact.abs()),
                        "deg {deg} a {a} b {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn tet_rule_integrates_monomials() {
        // reference tet: int x^a y^b z^c = a! b! c! / (a+b+c+3)!
        let tet = [
            v(0.0, 0.0, 0.0),
            v(1.0, 0.0, 0.0),
            v(0.0, 1.0, 0.0),
            v(0.0, 0.0, 1.0),
        ];
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        for deg in [0usize, 1, 2, 3, 5, 8, 11, 14] {
            let r = tet_rule(&tet, deg);
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    for c in 0..=(deg - a - b) {
                        let exact = fact(a) * fact(b) * fact(c) / fact(a + b + c + 3);
                        let got = r.integrate(|p| {
                            p.x.powi(a as i32) * p.y.powi(b as i32) * p.z.powi(c as i32)
                        });
                        assert!(
                            (got - exact).abs() < 1e-14 * (1.0 + exact.abs()),
                            "deg {deg} exps ({a},{b},{c}): got {got} exact {exact}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn simplex_measures() {
        let tet = [
            v(0.0, 0.0, 0.0),
            v(1.0, 0.0, 0.0),
            v(0.0, 1.0, 0.0),
            v(0.0, 0.0, 1.0),
        ];
        let r = tet_rule(&tet, 0);
        assert!((r.measure() - 1.0 / 6.0).abs() < 1e-15);
        let tri = [v(0.0, 0.0, 1.0), v(2.0, 0.0, 1.0), v(0.0, 2.0, 1.0)];
        assert!((triangle_rule(&tri, 0).measure() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn refined_rule_preserves_exactness() {
        let tri = [v(0.2, 0.1, 0.0), v(1.3, 0.4, 0.5), v(0.1, 1.5, -0.3)];
        let coarse = triangle_rule(&tri, 6);
        let fine = triangle_rule_refined(&tri, 6, 2);
        let f = |p: Vec3| (p.x - p.y).powi(3) * (p.z + 0.7).powi(2) + 1.0;
        assert!((coarse.integrate(f) - fine.integrate(f)).abs() < 1e-13);
    }

    #[test]
    fn degree_guard() {
        assert!(check_degree(14).is_ok());
        assert!(check_degree(15).is_err());
    }
}
