//! SVD-directed augmentation.
//!
//! The augmented view of a graph is the rank-q truncated SVD reconstruction
//! of its normalized adjacency. [`approx_svd`] computes the factors with a
//! randomized range finder (Gaussian test matrix, power iterations with
//! re-orthonormalization, exact decomposition of the small projected matrix);
//! [`SvdFactors`] applies `U_q S_q V_qᵀ` as a factored operator in
//! `O(M q d)` without ever forming the `M x M` reconstruction.
//! [`exact_svd_oracle`] is the slow dense reference used to bound the
//! randomized error, and [`random_augment`] is the edge-drop/feature-mask
//! perturbation used for ablation comparisons.

use std::sync::Arc;

use thiserror::Error;

use crate::graph::{Graph, NormalizedAdjacency};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::{kernels, LinearMap, NumResult, Tensor};

#[derive(Error, Debug)]
pub enum SvdError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("dense oracle guard: matrix has {0} rows, limit is {MAX_ORACLE_DIM}")]
    OracleTooLarge(usize),
}

/// Dense-oracle size guard.
pub const MAX_ORACLE_DIM: usize = 500;

/// Truncated SVD factors `U_q S_q V_qᵀ` of a square matrix.
///
/// Singular values are descending and non-negative; `U_q`/`V_q` columns are
/// orthonormal (zero singular directions carry zero `V` columns, which leave
/// the reconstruction unchanged).
#[derive(Clone)]
pub struct SvdFactors<T: Scalar> {
    m: usize,
    q: usize,
    /// `M x q`, row-major.
    u: Vec<T>,
    /// Length q, descending.
    s: Vec<T>,
    /// `M x q`, row-major.
    v: Vec<T>,
    /// Cached transposes (`q x M`) for the factored products.
    ut: Vec<T>,
    vt: Vec<T>,
}

impl<T: Scalar> SvdFactors<T> {
    fn new(m: usize, q: usize, u: Vec<T>, s: Vec<T>, v: Vec<T>) -> Self {
        let ut = kernels::transpose(&u, m, q);
        let vt = kernels::transpose(&v, m, q);
        SvdFactors { m, q, u, s, v, ut, vt }
    }

    /// Rank-q factors of the zero operator (all singular values zero).
    pub fn zero(m: usize, q: usize) -> Self {
        SvdFactors::new(m, q, vec![T::zero(); m * q], vec![T::zero(); q], vec![T::zero(); m * q])
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.q
    }

    pub fn singular_values(&self) -> &[T] {
        &self.s
    }

    /// `M x q`, row-major.
    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    /// Dense `U S Vᵀ` (test/report helper; `O(M^2 q)`).
    pub fn reconstruction_dense(&self) -> Vec<T> {
        let mut us = self.u.clone();
        for row in us.chunks_mut(self.q) {
            for (x, &sv) in row.iter_mut().zip(&self.s) {
                *x = *x * sv;
            }
        }
        kernels::matmul(&us, &self.vt, self.m, self.q, self.m)
    }

    /// Frobenius distance between a dense matrix and the reconstruction.
    pub fn reconstruction_error(&self, dense: &[T]) -> T {
        let recon = self.reconstruction_dense();
        dense
            .iter()
            .zip(&recon)
            .map(|(&a, &r)| {
                let d = a - r;
                d * d
            })
            .sum::<T>()
            .sqrt()
    }

    /// Max deviation of `UᵀU` and `VᵀV` from identity, skipping zero columns.
    pub fn orthonormality_residual(&self) -> T {
        let mut worst = T::zero();
        for mat in [&self.ut, &self.vt] {
            for i in 0..self.q {
                let ri = &mat[i * self.m..(i + 1) * self.m];
                let ni = ri.iter().map(|&v| v * v).sum::<T>();
                if ni == T::zero() {
                    continue; // zero column from a zero singular direction
                }
                for j in i..self.q {
                    let rj = &mat[j * self.m..(j + 1) * self.m];
                    let nj = rj.iter().map(|&v| v * v).sum::<T>();
                    if nj == T::zero() {
                        continue;
                    }
                    let dot = ri.iter().zip(rj).map(|(&a, &b)| a * b).sum::<T>();
                    let expect = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((dot - expect).abs());
                }
            }
        }
        worst
    }
}

impl<T: Scalar> LinearMap<T> for SvdFactors<T> {
    fn out_rows(&self) -> usize {
        self.m
    }

    fn in_rows(&self) -> usize {
        self.m
    }

    /// `U (S ⊙ (Vᵀ x))` in `O(M q d)`.
    fn apply_to(&self, x: &[T], cols: usize, out: &mut [T]) {
        let mut t = kernels::matmul(&self.vt, x, self.q, self.m, cols);
        for (i, row) in t.chunks_mut(cols).enumerate() {
            for v in row.iter_mut() {
                *v = *v * self.s[i];
            }
        }
        out.copy_from_slice(&kernels::matmul(&self.u, &t, self.m, self.q, cols));
    }

    /// `(U S Vᵀ)ᵀ g = V (S ⊙ (Uᵀ g))`.
    fn apply_transpose_to(&self, g: &[T], cols: usize, out: &mut [T]) {
        let mut t = kernels::matmul(&self.ut, g, self.q, self.m, cols);
        for (i, row) in t.chunks_mut(cols).enumerate() {
            for v in row.iter_mut() {
                *v = *v * self.s[i];
            }
        }
        out.copy_from_slice(&kernels::matmul(&self.v, &t, self.m, self.q, cols));
    }
}

/// Apply the factored reconstruction to a tensor, recorded on the tape
/// (gradients flow to `x`; the factors are constants).
pub fn factored_apply<T: Scalar>(f: &Arc<SvdFactors<T>>, x: &Tensor<T>) -> NumResult<Tensor<T>> {
    Tensor::apply_map(f.clone() as Arc<dyn LinearMap<T>>, x)
}

/// Either side of the two-view encoding: the sparse normalized adjacency of
/// the original graph, or the factored SVD reconstruction.
#[derive(Clone)]
pub enum PropagationOperator<T: Scalar> {
    Explicit(Arc<NormalizedAdjacency<T>>),
    Factored(Arc<SvdFactors<T>>),
}

impl<T: Scalar> PropagationOperator<T> {
    pub fn num_rows(&self) -> usize {
        match self {
            PropagationOperator::Explicit(adj) => adj.num_nodes(),
            PropagationOperator::Factored(f) => f.num_rows(),
        }
    }

    /// Tape-recorded product with a feature/embedding matrix.
    pub fn apply(self: &Arc<Self>, x: &Tensor<T>) -> NumResult<Tensor<T>> {
        Tensor::apply_map(self.clone() as Arc<dyn LinearMap<T>>, x)
    }
}

impl<T: Scalar> LinearMap<T> for PropagationOperator<T> {
    fn out_rows(&self) -> usize {
        self.num_rows()
    }

    fn in_rows(&self) -> usize {
        self.num_rows()
    }

    fn apply_to(&self, x: &[T], cols: usize, out: &mut [T]) {
        match self {
            PropagationOperator::Explicit(adj) => adj.apply_to(x, cols, out),
            PropagationOperator::Factored(f) => f.apply_to(x, cols, out),
        }
    }

    fn apply_transpose_to(&self, g: &[T], cols: usize, out: &mut [T]) {
        match self {
            PropagationOperator::Explicit(adj) => adj.apply_transpose_to(g, cols, out),
            PropagationOperator::Factored(f) => f.apply_transpose_to(g, cols, out),
        }
    }
}

/// Dense square matrix as a [`LinearMap`] (tests and the oracle path).
#[derive(Clone)]
pub struct DenseMatrix<T: Scalar> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n);
        DenseMatrix { n, data }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

impl<T: Scalar> LinearMap<T> for DenseMatrix<T> {
    fn out_rows(&self) -> usize {
        self.n
    }

    fn in_rows(&self) -> usize {
        self.n
    }

    fn apply_to(&self, x: &[T], cols: usize, out: &mut [T]) {
        out.copy_from_slice(&kernels::matmul(&self.data, x, self.n, self.n, cols));
    }

    fn apply_transpose_to(&self, g: &[T], cols: usize, out: &mut [T]) {
        let at = kernels::transpose(&self.data, self.n, self.n);
        out.copy_from_slice(&kernels::matmul(&at, g, self.n, self.n, cols));
    }
}

/// Randomized truncated SVD of the normalized adjacency.
pub fn approx_svd<T: Scalar>(
    adj: &NormalizedAdjacency<T>,
    q: usize,
    oversample: usize,
    power_iters: usize,
    rng: &mut RngState,
) -> Result<SvdFactors<T>, SvdError> {
    approx_svd_map(adj, q, oversample, power_iters, rng)
}

/// Randomized truncated SVD of any square linear operator.
///
/// Range finder: sample a Gaussian `M x (q + oversample)` test matrix, take
/// `Y = A Ω`, orthonormalize, then `power_iters` rounds of
/// `Q = orth(A orth(Aᵀ Q))`; project `B = Qᵀ A`, decompose the small `B`
/// exactly via the eigendecomposition of `B Bᵀ`, and truncate to `q`.
pub fn approx_svd_map<T: Scalar>(
    op: &dyn LinearMap<T>,
    q: usize,
    oversample: usize,
    power_iters: usize,
    rng: &mut RngState,
) -> Result<SvdFactors<T>, SvdError> {
    let m = op.out_rows();
    if op.in_rows() != m {
        return Err(SvdError::Param(format!(
            "operator must be square, got {m}x{}",
            op.in_rows()
        )));
    }
    if q == 0 || q > m {
        return Err(SvdError::Param(format!(
            "rank q must be in 1..={m}, got {q}"
        )));
    }
    let mut k = q + oversample;
    if k > m {
        log::warn!("oversample {oversample} clamped: q + oversample > {m} rows");
        k = m;
    }

    // Gaussian test matrix, M x k.
    let omega: Vec<T> = (0..m * k).map(|_| T::from_f64(rng.standard_normal())).collect();
    let mut y = vec![T::zero(); m * k];
    op.apply_to(&omega, k, &mut y);
    let mut qmat = orthonormalize(y, m, k);
    let mut scratch = vec![T::zero(); m * k];
    for _ in 0..power_iters {
        op.apply_transpose_to(&qmat, k, &mut scratch);
        let z = orthonormalize(scratch.clone(), m, k);
        op.apply_to(&z, k, &mut scratch);
        qmat = orthonormalize(scratch.clone(), m, k);
    }

    // B = Qᵀ A, computed as (Aᵀ Q)ᵀ: k x M.
    op.apply_transpose_to(&qmat, k, &mut scratch);
    let b = kernels::transpose(&scratch, m, k);

    // Exact SVD of small B via eigendecomposition of B Bᵀ (k x k).
    let bt = scratch; // Aᵀ Q = Bᵀ, M x k
    let bbt = kernels::matmul(&b, &bt, k, m, k);
    let (eigvals, eigvecs) = sym_eig_jacobi(&bbt, k);
    // Descending by eigenvalue.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &bb| {
        eigvals[bb]
            .partial_cmp(&eigvals[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let cutoff = T::from_f64(1e-12);
    let mut s = Vec::with_capacity(q);
    let mut u = vec![T::zero(); m * q];
    let mut v = vec![T::zero(); m * q];
    for (col, &idx) in order.iter().take(q).enumerate() {
        let lambda = eigvals[idx].max(T::zero());
        let sigma = lambda.sqrt();
        s.push(sigma);
        // w: eigenvector of B Bᵀ (column idx of eigvecs, k x k row-major)
        let w: Vec<T> = (0..k).map(|r| eigvecs[r * k + idx]).collect();
        // u = Q w
        for i in 0..m {
            let qrow = &qmat[i * k..(i + 1) * k];
            u[i * q + col] = qrow.iter().zip(&w).map(|(&a, &b)| a * b).sum();
        }
        if sigma > cutoff {
            // v = Bᵀ w / sigma
            for i in 0..m {
                let brow = &bt[i * k..(i + 1) * k];
                let dot: T = brow.iter().zip(&w).map(|(&a, &b)| a * b).sum();
                v[i * q + col] = dot / sigma;
            }
        } // else: zero singular direction, leave the V column zero
    }
    Ok(SvdFactors::new(m, q, u, s, v))
}

/// Exact rank-q truncated SVD of a small dense square matrix, via the dense
/// symmetric eigendecomposition of the Gram matrix `AᵀA`. Intended as the
/// independent reference for [`approx_svd`]; guarded to `M <= 500`.
pub fn exact_svd_oracle<T: Scalar>(matrix: &Tensor<T>, q: usize) -> Result<SvdFactors<T>, SvdError> {
    let (m, n) = matrix.shape();
    if m != n {
        return Err(SvdError::Param(format!("matrix must be square, got {m}x{n}")));
    }
    if m > MAX_ORACLE_DIM {
        return Err(SvdError::OracleTooLarge(m));
    }
    if q == 0 || q > m {
        return Err(SvdError::Param(format!(
            "rank q must be in 1..={m}, got {q}"
        )));
    }
    let a = matrix.data();
    let at = kernels::transpose(a, m, m);
    let gram = kernels::matmul(&at, a, m, m, m);
    let (eigvals, eigvecs) = sym_eig_jacobi(&gram, m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| {
        eigvals[y]
            .partial_cmp(&eigvals[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let cutoff = T::from_f64(1e-12);
    let mut s = Vec::with_capacity(q);
    let mut u = vec![T::zero(); m * q];
    let mut v = vec![T::zero(); m * q];
    for (col, &idx) in order.iter().take(q).enumerate() {
        let sigma = eigvals[idx].max(T::zero()).sqrt();
        s.push(sigma);
        let vi: Vec<T> = (0..m).map(|r| eigvecs[r * m + idx]).collect();
        for i in 0..m {
            v[i * q + col] = vi[i];
        }
        if sigma > cutoff {
            // u = A v / sigma
            for i in 0..m {
                let arow = &a[i * m..(i + 1) * m];
                let dot: T = arow.iter().zip(&vi).map(|(&x, &y)| x * y).sum();
                u[i * q + col] = dot / sigma;
            }
        } else {
            // null direction of a (symmetric) matrix: reuse v
            for i in 0..m {
                u[i * q + col] = vi[i];
            }
        }
    }
    Ok(SvdFactors::new(m, q, u, s, v))
}

/// Random edge-drop / feature-column-mask perturbation of a graph.
///
/// Each undirected edge is dropped independently with probability
/// `edge_drop`; each feature column is zeroed with probability `feat_mask`.
/// Returns the renormalized adjacency of the perturbed graph plus the masked
/// feature matrix.
pub fn random_augment<T: Scalar>(
    g: &Graph<T>,
    edge_drop: f64,
    feat_mask: f64,
    rng: &mut RngState,
) -> Result<(NormalizedAdjacency<T>, Tensor<T>), SvdError> {
    for (name, p) in [("edge_drop", edge_drop), ("feat_mask", feat_mask)] {
        if !(0.0..1.0).contains(&p) {
            return Err(SvdError::Param(format!(
                "{name} must be in [0, 1), got {p}"
            )));
        }
    }
    let kept: Vec<(u32, u32)> = g
        .edges()
        .iter()
        .copied()
        .filter(|_| !rng.bernoulli(edge_drop))
        .collect();
    let n = g.num_nodes();
    let mut degree = vec![1.0f64; n];
    for &(a, b) in &kept {
        degree[a as usize] += 1.0;
        degree[b as usize] += 1.0;
    }
    let mut entries = Vec::with_capacity(2 * kept.len() + n);
    for (i, &d) in degree.iter().enumerate() {
        entries.push((i, i, T::from_f64(1.0 / d)));
    }
    for &(a, b) in &kept {
        let (a, b) = (a as usize, b as usize);
        let val = T::from_f64(1.0 / (degree[a] * degree[b]).sqrt());
        entries.push((a, b, val));
        entries.push((b, a, val));
    }
    let adj = NormalizedAdjacency::from_csr(crate::sparse::CsrMatrix::from_triplets(n, n, entries));

    let f = g.num_features();
    let col_kept: Vec<bool> = (0..f).map(|_| !rng.bernoulli(feat_mask)).collect();
    let mut data = g.features().data().to_vec();
    for row in data.chunks_mut(f) {
        for (x, &keep) in row.iter_mut().zip(&col_kept) {
            if !keep {
                *x = T::zero();
            }
        }
    }
    let features = Tensor::new(n, f, data).expect("same shape");
    Ok((adj, features))
}

/// One cyclic-Jacobi symmetric eigendecomposition: returns `(eigenvalues,
/// eigenvectors)` with eigenvector j in column j of the `n x n` row-major
/// matrix. Input must be symmetric.
fn sym_eig_jacobi<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    if n == 1 {
        return (vec![m[0]], v);
    }
    let eps = T::from_f64(1e-14);
    let frob = m.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = eps * frob.max(T::one());
    const MAX_SWEEPS: usize = 50;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * T::from_f64(1e-2) {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (T::from_f64(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // rows/columns p and q of the symmetric matrix
                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = m[p * n + j];
                    let aqj = m[q * n + j];
                    m[p * n + j] = c * apj - s * aqj;
                    m[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[i * n + i]).collect();
    (eig, v)
}

/// Modified Gram-Schmidt (two passes) on the columns of an `m x k` row-major
/// matrix. Columns that vanish under projection are left as zeros.
fn orthonormalize<T: Scalar>(mut a: Vec<T>, m: usize, k: usize) -> Vec<T> {
    let tiny = T::from_f64(1e-300);
    for _pass in 0..2 {
        for j in 0..k {
            for prev in 0..j {
                let mut dot = T::zero();
                for i in 0..m {
                    dot = dot + a[i * k + j] * a[i * k + prev];
                }
                for i in 0..m {
                    a[i * k + j] = a[i * k + j] - dot * a[i * k + prev];
                }
            }
            let norm = (0..m)
                .map(|i| a[i * k + j] * a[i * k + j])
                .sum::<T>()
                .sqrt();
            if norm > tiny {
                for i in 0..m {
                    a[i * k + j] = a[i * k + j] / norm;
                }
            } else {
                for i in 0..m {
                    a[i * k + j] = T::zero();
                }
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize_adjacency;

    fn dense_identity(n: usize) -> DenseMatrix<f64> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 1.0;
        }
        DenseMatrix::new(n, d)
    }

    fn random_symmetric(n: usize, rng: &mut RngState) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.uniform_in(-1.0, 1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn identity_spectrum() {
        let mut rng = RngState::new(1);
        let id5 = dense_identity(5);
        let f = approx_svd_map(&id5, 3, 10, 4, &mut rng).unwrap();
        for &s in f.singular_values() {
            assert!((s - 1.0).abs() < 1e-10, "sigma {s}");
        }
        // two dropped unit singular values -> squared error 2
        let err = f.reconstruction_error(id5.data());
        assert!((err * err - 2.0).abs() < 1e-8, "err^2 {}", err * err);
    }

    #[test]
    fn exact_low_rank_recovery() {
        let mut rng = RngState::new(2);
        let n = 20;
        let (u, v, w, x): (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) = (
            (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
            (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
            (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
            (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
        );
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = u[i] * v[j] + w[i] * x[j];
            }
        }
        let mat = DenseMatrix::new(n, a.clone());
        let f = approx_svd_map(&mat, 2, 10, 4, &mut rng).unwrap();
        assert!(f.reconstruction_error(&a) < 1e-8);
    }

    #[test]
    fn randomized_error_close_to_oracle() {
        let mut rng = RngState::new(3);
        let n = 50;
        let a = random_symmetric(n, &mut rng);
        let f = approx_svd_map(&DenseMatrix::new(n, a.clone()), 5, 10, 4, &mut rng).unwrap();
        let t = Tensor::new(n, n, a.clone()).unwrap();
        let oracle = exact_svd_oracle(&t, 5).unwrap();
        let approx_err = f.reconstruction_error(&a);
        let oracle_err = oracle.reconstruction_error(&a);
        assert!(
            approx_err <= 1.05 * oracle_err,
            "approx {approx_err} vs oracle {oracle_err}"
        );
        // invariants
        assert!(f.orthonormality_residual() < 1e-8);
        let s = f.singular_values();
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn oracle_diagonal_case() {
        let t = Tensor::<f64>::from_rows(vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let f = exact_svd_oracle(&t, 2).unwrap();
        assert!((f.singular_values()[0] - 3.0).abs() < 1e-9);
        assert!((f.singular_values()[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_zero_matrix() {
        let t = Tensor::<f64>::zeros(4, 4);
        let f = exact_svd_oracle(&t, 3).unwrap();
        assert!(f.singular_values().iter().all(|&s| s.abs() < 1e-12));
    }

    #[test]
    fn oracle_orthonormality_residual() {
        let mut rng = RngState::new(4);
        let n = 30;
        let a = random_symmetric(n, &mut rng);
        let f = exact_svd_oracle(&Tensor::new(n, n, a).unwrap(), 6).unwrap();
        assert!(f.orthonormality_residual() < 1e-9);
    }

    #[test]
    fn singular_values_are_absolute_eigenvalues() {
        let t = Tensor::<f64>::from_rows(vec![
            vec![3.0, 0.0, 0.0],
            vec![0.0, -2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let f = exact_svd_oracle(&t, 3).unwrap();
        let s = f.singular_values();
        assert!((s[0] - 3.0).abs() < 1e-9);
        assert!((s[1] - 2.0).abs() < 1e-9);
        assert!((s[2] - 1.0).abs() < 1e-9);
        // and the reconstruction still matches the signed matrix
        assert!(f.reconstruction_error(t.data()) < 1e-9);
    }

    #[test]
    fn oracle_guards() {
        let t = Tensor::<f64>::zeros(2, 3);
        assert!(exact_svd_oracle(&t, 1).is_err());
        let t = Tensor::<f64>::zeros(3, 3);
        assert!(exact_svd_oracle(&t, 0).is_err());
        assert!(exact_svd_oracle(&t, 4).is_err());
    }

    #[test]
    fn approx_rank_validation() {
        let mut rng = RngState::new(5);
        let id = dense_identity(4);
        assert!(approx_svd_map(&id, 5, 2, 1, &mut rng).is_err());
        assert!(approx_svd_map(&id, 0, 2, 1, &mut rng).is_err());
        // oversample clamps instead of failing
        assert!(approx_svd_map(&id, 3, 100, 1, &mut rng).is_ok());
    }

    #[test]
    fn factored_apply_identity_and_zero() {
        let mut rng = RngState::new(6);
        let id = dense_identity(4);
        let f = Arc::new(approx_svd_map(&id, 4, 4, 2, &mut rng).unwrap());
        let x = Tensor::from_rows(vec![
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![5.0, 6.0],
            vec![7.0, 8.0],
        ])
        .unwrap();
        let y = factored_apply(&f, &x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-10);
        }
        let zero = Tensor::<f64>::zeros(4, 2);
        let y = factored_apply(&f, &zero).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn factored_apply_matches_dense_reconstruction() {
        // random 20-node graph
        let mut rng = RngState::new(7);
        let n = 20;
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                if rng.bernoulli(0.2) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(Tensor::<f64>::ones(n, 3), edges, vec![0; n], 1).unwrap();
        let adj = normalize_adjacency(&g);
        let f = Arc::new(approx_svd(&adj, 5, 10, 4, &mut rng).unwrap());
        let x_data: Vec<f64> = (0..n * 4).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let x = Tensor::new(n, 4, x_data.clone()).unwrap();
        let y = factored_apply(&f, &x).unwrap();
        let recon = f.reconstruction_dense();
        let dense = kernels::matmul(&recon, &x_data, n, n, 4);
        for (a, b) in y.data().iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn propagation_operator_is_linear() {
        let mut rng = RngState::new(8);
        let g = Graph::new(
            Tensor::<f64>::ones(6, 2),
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)],
            vec![0; 6],
            1,
        )
        .unwrap();
        let adj = Arc::new(normalize_adjacency(&g));
        let factors = Arc::new(approx_svd(&adj, 3, 3, 4, &mut rng).unwrap());
        for op in [
            Arc::new(PropagationOperator::Explicit(adj.clone())),
            Arc::new(PropagationOperator::Factored(factors)),
        ] {
            let x_data: Vec<f64> = (0..12).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let y_data: Vec<f64> = (0..12).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            let x = Tensor::new(6, 2, x_data.clone()).unwrap();
            let y = Tensor::new(6, 2, y_data.clone()).unwrap();
            let (a, b) = (2.5, -1.25);
            let combined: Vec<f64> = x_data
                .iter()
                .zip(&y_data)
                .map(|(&xv, &yv)| a * xv + b * yv)
                .collect();
            let lhs = op
                .apply(&Tensor::new(6, 2, combined).unwrap())
                .unwrap();
            let rhs_x = op.apply(&x).unwrap().scale(a);
            let rhs_y = op.apply(&y).unwrap().scale(b);
            let rhs = rhs_x.add(&rhs_y).unwrap();
            for (l, r) in lhs.data().iter().zip(rhs.data()) {
                assert!((l - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn random_augment_identity_case() {
        let g = Graph::new(
            Tensor::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap(),
            vec![(0, 1), (1, 2)],
            vec![0, 0, 0],
            1,
        )
        .unwrap();
        let mut rng = RngState::new(9);
        let (adj, x) = random_augment(&g, 0.0, 0.0, &mut rng).unwrap();
        let base = normalize_adjacency(&g);
        assert_eq!(adj.to_dense(), base.to_dense());
        assert_eq!(x.data(), g.features().data());
    }

    #[test]
    fn random_augment_statistics() {
        let mut rng = RngState::new(10);
        // graph with 10^4 edges: ring + random chords on 300 nodes
        let n: u32 = 300;
        let mut edges = std::collections::BTreeSet::new();
        let mut er = RngState::new(11);
        while edges.len() < 10_000 {
            let a = (er.next_u64() % n as u64) as u32;
            let b = (er.next_u64() % n as u64) as u32;
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let g = Graph::new(
            Tensor::<f64>::ones(n as usize, 1000),
            edges.into_iter().collect(),
            vec![0; n as usize],
            1,
        )
        .unwrap();
        let (adj, _) = random_augment(&g, 0.2, 0.0, &mut rng).unwrap();
        // nnz = n diagonal + 2 * kept edges
        let kept = (adj.nnz() - n as usize) / 2;
        assert!(
            (7_500..=8_500).contains(&kept),
            "kept {kept} of 10000 edges"
        );
        let (_, x) = random_augment(&g, 0.0, 0.3, &mut rng).unwrap();
        let f = g.num_features();
        let zeroed = (0..f)
            .filter(|&j| (0..g.num_nodes()).all(|i| x.at(i, j) == 0.0))
            .count();
        let frac = zeroed as f64 / f as f64;
        assert!((0.25..=0.35).contains(&frac), "zeroed fraction {frac}");
    }

    #[test]
    fn random_augment_validates_probabilities() {
        let g = Graph::new(Tensor::<f64>::ones(2, 1), vec![(0, 1)], vec![0, 0], 1).unwrap();
        let mut rng = RngState::new(1);
        assert!(random_augment(&g, 1.0, 0.0, &mut rng).is_err());
        assert!(random_augment(&g, 0.0, -0.2, &mut rng).is_err());
    }
}
