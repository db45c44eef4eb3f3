//! Dense and sparse linear-algebra helpers: a minimal CSR matrix, conjugate
//! gradients, pseudo-inverse solves, norm-whitened singular values, and a
//! deterministic 64-bit generator for reproducible random inputs.

use nalgebra::{DMatrix, DVector};

/// Sparse matrix in compressed-row form. Only the operations needed by the
/// solvers are provided (matvec, transpose-matvec, densification).
#[derive(Clone, Debug)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &t {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] = cols.len();
                last = Some((r, c));
            }
        }
        for r in 1..=nrows {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        Csr {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            cols: vec![],
            vals: vec![],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = DVector::zeros(self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
        y
    }

    pub fn tr_matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = DVector::zeros(self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr != 0.0 {
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    y[self.cols[k]] += self.vals[k] * xr;
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Diagonal of `self` as a vector (missing entries are 0).
    pub fn diagonal(&self) -> DVector<f64> {
        let n = self.nrows.min(self.ncols);
        let mut d = DVector::zeros(n);
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    d[r] += self.vals[k];
                }
            }
        }
        d
    }

    /// Row iterator yielding (col, val) pairs for row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Copy, Debug)]
pub struct CgResult {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients on a symmetric positive semi-definite
/// operator given as a closure. The right-hand side must be consistent when
/// the operator is singular; CG then converges to the solution component in
/// the Krylov space of `b`.
pub fn pcg<A, P>(
    apply: A,
    precond: P,
    b: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> (DVector<f64>, CgResult)
where
    A: Fn(&DVector<f64>) -> DVector<f64>,
    P: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = b.len();
    let bnorm = b.norm();
    let mut x = DVector::zeros(n);
    if bnorm == 0.0 {
        return (
            x,
            CgResult {
                iterations: 0,
                rel_residual: 0.0,
                converged: true,
            },
        );
    }
    let mut r = b.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut res = r.norm() / bnorm;
    let mut it = 0;
    while res > rel_tol && it < max_iter {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            break; // left the numerical range of the operator
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        res = r.norm() / bnorm;
        z = precond(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + beta * &p;
        it += 1;
    }
    (
        x,
        CgResult {
            iterations: it,
            rel_residual: res,
            converged: res <= rel_tol,
        },
    )
}

/// Jacobi preconditioner from a diagonal estimate; zero entries are skipped.
pub fn jacobi(diag: &DVector<f64>) -> impl Fn(&DVector<f64>) -> DVector<f64> + '_ {
    move |r| {
        let mut z = r.clone();
        for i in 0..z.len() {
            if diag[i].abs() > 0.0 {
                z[i] /= diag[i];
            }
        }
        z
    }
}

/// Minimum-norm least-squares solution of `A x = b` via SVD with the relative
/// rank cutoff `rtol`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut y = u.transpose() * b;
    for (i, s) in svd.singular_values.iter().enumerate() {
        y[i] = if *s > rtol * smax { y[i] / s } else { 0.0 };
    }
    vt.transpose() * y
}

/// Singular values of the norm-whitened operator `Lout^T · O · Lin^{-T}`
/// where `gram_in = Lin Lin^T` and `gram_out = Lout Lout^T`. Maximizing
/// `|O x|_out / |x|_in` over the complement of the kernel is then reading the
/// extreme singular values of the returned list.
pub fn whitened_singular_values(
    op: &DMatrix<f64>,
    gram_in: &DMatrix<f64>,
    gram_out: &DMatrix<f64>,
) -> Vec<f64> {
    let b = whiten(op, gram_in, gram_out);
    let mut sv: Vec<f64> = b
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Whitened operator matrix `Lout^T · O · Lin^{-T}` (see
/// [`whitened_singular_values`]).
pub fn whiten(op: &DMatrix<f64>, gram_in: &DMatrix<f64>, gram_out: &DMatrix<f64>) -> DMatrix<f64> {
    let l_in = gram_in
        .clone()
        .cholesky()
        .expect("input Gram must be SPD")
        .l();
    let l_out = gram_out
        .clone()
        .cholesky()
        .expect("output Gram must be SPD")
        .l();
    // right-multiply by Lin^{-T}: solve B * Lin^T = O  <=>  Lin * B^T = O^T
    let mut bt = op.transpose();
    solve_lower_triangular_inplace(&l_in, &mut bt);
    l_out.transpose() * bt.transpose()
}

/// Whitened matrix of a bilinear form: `L^{-1} A L^{-T}` with `gram = L L^T`.
/// Its smallest singular value is the inf-sup constant of the form in the
/// norm induced by `gram` (rows act as functionals, measured in the dual
/// norm).
pub fn whiten_bilinear(a: &DMatrix<f64>, gram: &DMatrix<f64>) -> DMatrix<f64> {
    let l = gram.clone().cholesky().expect("Gram must be SPD").l();
    let mut x = a.clone();
    solve_lower_triangular_inplace(&l, &mut x); // X = L^{-1} A
    let mut bt = x.transpose();
    solve_lower_triangular_inplace(&l, &mut bt); // B^T = L^{-1} X^T
    bt.transpose()
}

fn solve_lower_triangular_inplace(l: &DMatrix<f64>, rhs: &mut DMatrix<f64>) {
    let n = l.nrows();
    for col in 0..rhs.ncols() {
        for i in 0..n {
            let mut s = rhs[(i, col)];
            for j in 0..i {
                s -= l[(i, j)] * rhs[(j, col)];
            }
            rhs[(i, col)] = s / l[(i, i)];
        }
    }
}

/// Rank with respect to the relative cutoff `rtol` on a descending list of
/// singular values.
pub fn numerical_rank(singular_values: &[f64], rtol: f64) -> usize {
    let smax = singular_values.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|s| **s > rtol * smax).count()
}

/// Deterministic 64-bit generator (SplitMix64). Used for all randomized
/// inputs so that reports are reproducible byte for byte given a seed.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-1, 1).
    pub fn next_sym(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    pub fn vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.next_sym())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_matvec_matches_dense() {
        let t = vec![
            (0, 0, 2.0),
            (0, 2, -1.0),
            (2, 1, 3.0),
            (2, 1, 1.0),
            (3, 0, 5.0),
        ];
        let a = Csr::from_triplets(4, 3, t);
        assert_eq!(a.nnz(), 4); // duplicate summed
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = a.matvec(&x);
        let yd = a.to_dense() * &x;
        assert!((y - yd).norm() < 1e-14);
        let z = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]);
        let w = a.tr_matvec(&z);
        let wd = a.to_dense().transpose() * &z;
        assert!((w - wd).norm() < 1e-14);
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 30;
        let mut rng = SplitMix64::new(7);
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.next_sym());
        let a = &m * m.transpose() + DMatrix::identity(n, n) * (n as f64);
        let xstar = rng.vector(n);
        let b = &a * &xstar;
        let diag = DVector::from_fn(n, |i, _| a[(i, i)]);
        let (x, info) = pcg(|v| &a * v, jacobi(&diag), &b, 1e-13, 500);
        assert!(info.converged, "residual {}", info.rel_residual);
        assert!((x - xstar).norm() < 1e-9);
    }

    #[test]
    fn min_norm_solve_picks_smallest_solution() {
        // underdetermined: x + y = 2 has min-norm solution (1, 1)
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let x = min_norm_solve(&a, &b, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn whitening_reproduces_generalized_rayleigh() {
        let mut rng = SplitMix64::new(3);
        let op = DMatrix::<f64>::from_fn(4, 4, |_, _| rng.next_sym());
        let gin = DMatrix::<f64>::identity(4, 4) * 2.0;
        let gout = DMatrix::<f64>::identity(4, 4) * 8.0;
        let sv = whitened_singular_values(&op, &gin, &gout);
        let plain: Vec<f64> = op
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .collect();
        // |O x|_out / |x|_in = sqrt(8) |O x| / sqrt(2) |x| = 2 sigma
        assert!((sv[0] - 2.0 * plain[0]).abs() < 1e-12);
    }

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
