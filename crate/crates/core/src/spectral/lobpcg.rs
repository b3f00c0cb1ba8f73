//! Block eigensolver for the lowest eigenpairs of a Hermitian positive
//! semidefinite operator given only through its action.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) type Block = Vec<Vec<Complex64>>;
pub(crate) type VecOp<'a> = &'a dyn Fn(&[Complex64]) -> Vec<Complex64>;

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormalizes `cand` against `basis` and itself with two passes of
/// classical Gram–Schmidt, dropping columns that are numerically dependent.
fn extend_orthonormal(basis: &mut Block, cand: Block) {
    for mut v in cand {
        let before = norm(&v);
        if before == 0.0 || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            let coeffs: Vec<Complex64> = basis.iter().map(|q| dot(q, &v)).collect();
            for (q, c) in basis.iter().zip(coeffs) {
                axpy(-c, q, &mut v);
            }
        }
        let after = norm(&v);
        if after > 1e-10 * before {
            let inv = 1.0 / after;
            v.iter_mut().for_each(|z| *z *= inv);
            basis.push(v);
        }
    }
}

/// `out_j = sum_i cols_i c[(i, j)]` for the first `p` columns of `c`.
fn combine(cols: &[Vec<Complex64>], c: &DMatrix<Complex64>, rows: std::ops::Range<usize>, p: usize) -> Block {
    let n = cols[0].len();
    (0..p)
        .map(|j| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for i in rows.clone() {
                let cij = c[(i, j)];
                if cij != Complex64::new(0.0, 0.0) {
                    axpy(cij, &cols[i], &mut out);
                }
            }
            out
        })
        .collect()
}

/// Hermitian Rayleigh–Ritz: ascending eigenvalues and eigenvectors of
/// `Q^H (A Q)`.
fn rayleigh_ritz(q: &Block, aq: &Block) -> (Vec<f64>, DMatrix<Complex64>) {
    let m = q.len();
    let mut g = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = 0.5 * (dot(&q[i], &aq[j]) + dot(&aq[i], &q[j]));
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<Complex64>::zeros(m, m);
    for (jn, &jo) in order.iter().enumerate() {
        vecs.set_column(jn, &eig.eigenvectors.column(jo));
    }
    (vals, vecs)
}

#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub values: Vec<f64>,
    pub vectors: Block,
    pub iterations: usize,
    pub converged: bool,
}

/// Locally optimal block preconditioned conjugate gradient with
/// Rayleigh–Ritz on an explicitly orthonormalized basis `[X, T R, P]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lobpcg(
    n: usize,
    apply: VecOp,
    precond: Option<VecOp>,
    k: usize,
    block: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Solved {
    let p = block.max(k).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Block = (0..p)
        .map(|_| (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
        .collect();
    let mut x: Block = Vec::with_capacity(p);
    extend_orthonormal(&mut x, start);
    let ax: Block = x.iter().map(|v| apply(v)).collect();
    let (mut theta, c) = rayleigh_ritz(&x, &ax);
    let pp = x.len();
    let mut ax = combine(&ax, &c, 0..pp, pp);
    x = combine(&x, &c, 0..pp, pp);
    let mut dirs: Block = Vec::new();
    let mut iterations = 0;
    loop {
        let resid: Block = x
            .iter()
            .zip(&ax)
            .zip(&theta)
            .map(|((xv, av), &t)| av.iter().zip(xv).map(|(a, b)| a - b * t).collect())
            .collect();
        let worst = resid[..k.min(resid.len())].iter().map(|r| norm(r)).fold(0.0, f64::max);
        if worst <= tol || iterations >= max_iter {
            theta.truncate(k);
            x.truncate(k);
            return Solved { values: theta, vectors: x, iterations, converged: worst <= tol };
        }
        iterations += 1;
        let mut q: Block = x.clone();
        let nx = q.len();
        let w = match precond {
            Some(t) => resid.iter().map(|r| t(r)).collect(),
            None => resid,
        };
        extend_orthonormal(&mut q, w);
        extend_orthonormal(&mut q, dirs);
        let aq: Block = q.iter().map(|v| apply(v)).collect();
        let (vals, c) = rayleigh_ritz(&q, &aq);
        let m = q.len();
        let keep = nx.min(m);
        theta = vals[..keep].to_vec();
        dirs = combine(&q, &c, nx..m, keep);
        x = combine(&q, &c, 0..m, keep);
        ax = combine(&aq, &c, 0..m, keep);
    }
}

/// Dense Hermitian eigendecomposition; columns of `mat` are the operator
/// applied to unit vectors.
pub(crate) fn dense_lowest(mat: DMatrix<Complex64>, k: usize) -> Solved {
    let n = mat.nrows();
    let herm = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order.truncate(k);
    Solved {
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect(),
        iterations: 0,
        converged: true,
    }
}
