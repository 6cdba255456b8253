//! Dense 2-D tensors with recorded operations and reverse-mode gradients.
//!
//! A [`Tensor`] is an immutable row-major matrix. Operations on tensors
//! record their inputs, so a scalar result can be differentiated with
//! [`Tensor::backward`], which returns a [`GradStore`] mapping leaf tensors
//! to gradients. [`Parameter`] pairs a trainable leaf with its accumulated
//! gradient buffer.
//!
//! Design notes:
//! - everything is checked against central finite differences in
//!   `gradcheck`, so each backward rule here stays small and local;
//! - heavy products route through one axpy-style kernel (`kernels::matmul`)
//!   that is parallelized over output row blocks with a fixed split, keeping
//!   results bit-identical across runs and thread schedules;
//! - ReLU uses subgradient 0 at exactly 0.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::rng::RngState;
use crate::scalar::Scalar;

#[derive(Error, Debug)]
pub enum NumError {
    #[error("shape mismatch in {op}: left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("{op} expects a scalar (1x1) tensor, got {rows}x{cols}")]
    NotScalar {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type NumResult<T> = Result<T, NumError>;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Constant linear operator `L` applied to a tensor: `y = L x`.
///
/// Implementors provide the transpose product as well so gradients can flow
/// to `x` (`grad_x = Lᵀ grad_y`). The operator itself is never differentiated.
pub trait LinearMap<T: Scalar>: Send + Sync {
    fn out_rows(&self) -> usize;
    fn in_rows(&self) -> usize;
    /// `out = L * x` where `x` is `in_rows x cols` row-major.
    fn apply_to(&self, x: &[T], cols: usize, out: &mut [T]);
    /// `out = Lᵀ * g` where `g` is `out_rows x cols` row-major.
    fn apply_transpose_to(&self, g: &[T], cols: usize, out: &mut [T]);
}

enum Op<T: Scalar> {
    Matmul(Tensor<T>, Tensor<T>),
    Add(Tensor<T>, Tensor<T>),
    Sub(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    /// `(M x n) + (1 x n)` broadcast over rows.
    AddRowVec(Tensor<T>, Tensor<T>),
    Scale(Tensor<T>, T),
    /// Elementwise product with a `1 x 1` tensor.
    MulScalarTensor(Tensor<T>, Tensor<T>),
    Relu(Tensor<T>),
    Exp(Tensor<T>),
    Ln(Tensor<T>),
    RowSoftmax(Tensor<T>),
    RowSums(Tensor<T>),
    ColSums(Tensor<T>),
    SumAll(Tensor<T>),
    Diag(Tensor<T>),
    Transpose(Tensor<T>),
    Entry(Tensor<T>, usize, usize),
    /// Row-cosine-similarity matrix between two `M x m` inputs.
    CosineSim(Tensor<T>, Tensor<T>),
    /// `exp((w ⊙ a) * inv_temp)`; `weights = None` means all-ones.
    WeightedExp {
        input: Tensor<T>,
        weights: Option<Tensor<T>>,
        inv_temp: T,
    },
    /// Fused symmetrized InfoNCE reduction over three similarity matrices
    /// (see [`Tensor::nce_objective`]). Caches the exponentiated matrices and
    /// denominators for the backward pass.
    NceObjective(Box<NceState<T>>),
    /// Mean cross-entropy from logits over a row subset.
    CrossEntropy {
        logits: Tensor<T>,
        labels: Arc<Vec<usize>>,
        rows: Arc<Vec<usize>>,
    },
    ApplyMap(Arc<dyn LinearMap<T>>, Tensor<T>),
}

/// Cached state of the fused contrastive reduction.
pub(crate) struct NceState<T: Scalar> {
    sim_hz: Tensor<T>,
    sim_hh: Tensor<T>,
    sim_zz: Tensor<T>,
    /// (cross, within-h, within-z) weights; `None` = all-ones.
    weights: Option<(Tensor<T>, Tensor<T>, Tensor<T>)>,
    inv_temp: T,
    e_hz: Vec<T>,
    e_hh: Vec<T>,
    e_zz: Vec<T>,
    den_h: Vec<T>,
    den_z: Vec<T>,
}

struct Inner<T: Scalar> {
    id: u64,
    rows: usize,
    cols: usize,
    data: Vec<T>,
    op: Option<Op<T>>,
    requires_grad: bool,
}

/// Immutable dense matrix participating in gradient recording.
pub struct Tensor<T: Scalar>(Arc<Inner<T>>);

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Arc::clone(&self.0))
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Tensor[{}x{}{}]",
            self.rows(),
            self.cols(),
            if self.requires_grad() { ", grad" } else { "" }
        )
    }
}

impl<T: Scalar> Tensor<T> {
    fn from_op(rows: usize, cols: usize, data: Vec<T>, op: Op<T>) -> Self {
        let requires_grad = match &op {
            Op::Matmul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRowVec(a, b)
            | Op::MulScalarTensor(a, b)
            | Op::CosineSim(a, b) => a.requires_grad() || b.requires_grad(),
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::RowSoftmax(a)
            | Op::RowSums(a)
            | Op::ColSums(a)
            | Op::SumAll(a)
            | Op::Diag(a)
            | Op::Transpose(a)
            | Op::Entry(a, _, _)
            | Op::WeightedExp { input: a, .. }
            | Op::CrossEntropy { logits: a, .. }
            | Op::ApplyMap(_, a) => a.requires_grad(),
            Op::NceObjective(state) => {
                state.sim_hz.requires_grad()
                    || state.sim_hh.requires_grad()
                    || state.sim_zz.requires_grad()
            }
        };
        Tensor(Arc::new(Inner {
            id: fresh_id(),
            rows,
            cols,
            data,
            op: if requires_grad { Some(op) } else { None },
            requires_grad,
        }))
    }

    /// Constant leaf tensor.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> NumResult<Self> {
        if rows == 0 || cols == 0 {
            return Err(NumError::InvalidParam(format!(
                "tensor dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(NumError::InvalidParam(format!(
                "data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Tensor(Arc::new(Inner {
            id: fresh_id(),
            rows,
            cols,
            data,
            op: None,
            requires_grad: false,
        })))
    }

    /// Trainable leaf tensor (gradients are tracked from here).
    pub fn new_var(rows: usize, cols: usize, data: Vec<T>) -> NumResult<Self> {
        let t = Self::new(rows, cols, data)?;
        let inner = Arc::try_unwrap(t.0).ok().expect("fresh tensor is unshared");
        Ok(Tensor(Arc::new(Inner {
            requires_grad: true,
            ..inner
        })))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::new(rows, cols, vec![T::zero(); rows * cols]).expect("positive dims")
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Tensor::new(rows, cols, vec![T::one(); rows * cols]).expect("positive dims")
    }

    pub fn scalar(v: T) -> Self {
        Tensor::new(1, 1, vec![v]).expect("1x1")
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> NumResult<Self> {
        if rows.is_empty() {
            return Err(NumError::InvalidParam("no rows given".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumError::InvalidParam("ragged rows".into()));
        }
        let r = rows.len();
        Tensor::new(r, cols, rows.into_iter().flatten().collect())
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn rows(&self) -> usize {
        self.0.rows
    }

    pub fn cols(&self) -> usize {
        self.0.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.0.rows, self.0.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.0.data[i * self.0.cols + j]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_scalar(&self) -> bool {
        self.0.rows == 1 && self.0.cols == 1
    }

    /// Value of a `1 x 1` tensor.
    pub fn scalar_value(&self) -> NumResult<T> {
        if !self.is_scalar() {
            return Err(NumError::NotScalar {
                op: "scalar_value",
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        Ok(self.0.data[0])
    }

    pub fn all_finite(&self) -> bool {
        self.0.data.iter().all(|v| v.is_finite())
    }

    fn same_shape(&self, other: &Tensor<T>, op: &'static str) -> NumResult<()> {
        if self.shape() != other.shape() {
            return Err(NumError::ShapeMismatch {
                op,
                lhs_rows: self.rows(),
                lhs_cols: self.cols(),
                rhs_rows: other.rows(),
                rhs_cols: other.cols(),
            });
        }
        Ok(())
    }

    // ---- recorded operations ----

    pub fn matmul(&self, rhs: &Tensor<T>) -> NumResult<Tensor<T>> {
        if self.cols() != rhs.rows() {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                lhs_rows: self.rows(),
                lhs_cols: self.cols(),
                rhs_rows: rhs.rows(),
                rhs_cols: rhs.cols(),
            });
        }
        let out = kernels::matmul(
            self.data(),
            rhs.data(),
            self.rows(),
            self.cols(),
            rhs.cols(),
        );
        Ok(Tensor::from_op(
            self.rows(),
            rhs.cols(),
            out,
            Op::Matmul(self.clone(), rhs.clone()),
        ))
    }

    pub fn add(&self, rhs: &Tensor<T>) -> NumResult<Tensor<T>> {
        self.same_shape(rhs, "add")?;
        let out = zip_map(self.data(), rhs.data(), |a, b| a + b);
        Ok(Tensor::from_op(
            self.rows(),
            self.cols(),
            out,
            Op::Add(self.clone(), rhs.clone()),
        ))
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> NumResult<Tensor<T>> {
        self.same_shape(rhs, "sub")?;
        let out = zip_map(self.data(), rhs.data(), |a, b| a - b);
        Ok(Tensor::from_op(
            self.rows(),
            self.cols(),
            out,
            Op::Sub(self.clone(), rhs.clone()),
        ))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, rhs: &Tensor<T>) -> NumResult<Tensor<T>> {
        self.same_shape(rhs, "mul")?;
        let out = zip_map(self.data(), rhs.data(), |a, b| a * b);
        Ok(Tensor::from_op(
            self.rows(),
            self.cols(),
            out,
            Op::Mul(self.clone(), rhs.clone()),
        ))
    }

    /// Broadcast-add a `1 x n` row vector to every row.
    pub fn add_row_broadcast(&self, bias: &Tensor<T>) -> NumResult<Tensor<T>> {
        if bias.rows() != 1 || bias.cols() != self.cols() {
            return Err(NumError::ShapeMismatch {
                op: "add_row_broadcast",
                lhs_rows: self.rows(),
                lhs_cols: self.cols(),
                rhs_rows: bias.rows(),
                rhs_cols: bias.cols(),
            });
        }
        let n = self.cols();
        let b = bias.data();
        let mut out = self.data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, &bv) in row.iter_mut().zip(b) {
                *o = *o + bv;
            }
        }
        Ok(Tensor::from_op(
            self.rows(),
            self.cols(),
            out,
            Op::AddRowVec(self.clone(), bias.clone()),
        ))
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        let out = self.data().iter().map(|&v| v * c).collect();
        Tensor::from_op(self.rows(), self.cols(), out, Op::Scale(self.clone(), c))
    }

    pub fn neg(&self) -> Tensor<T> {
        self.scale(-T::one())
    }

    /// Elementwise product with a trainable `1 x 1` scalar tensor.
    pub fn mul_scalar_tensor(&self, s: &Tensor<T>) -> NumResult<Tensor<T>> {
        if !s.is_scalar() {
            return Err(NumError::NotScalar {
                op: "mul_scalar_tensor",
                rows: s.rows(),
                cols: s.cols(),
            });
        }
        let sv = s.0.data[0];
        let out = self.data().iter().map(|&v| v * sv).collect();
        Ok(Tensor::from_op(
            self.rows(),
            self.cols(),
            out,
            Op::MulScalarTensor(self.clone(), s.clone()),
        ))
    }

    pub fn relu(&self) -> Tensor<T> {
        let out = self
            .data()
            .iter()
            .map(|&v| if v > T::zero() { v } else { T::zero() })
            .collect();
        Tensor::from_op(self.rows(), self.cols(), out, Op::Relu(self.clone()))
    }

    pub fn exp(&self) -> Tensor<T> {
        let out = self.data().iter().map(|&v| v.exp()).collect();
        Tensor::from_op(self.rows(), self.cols(), out, Op::Exp(self.clone()))
    }

    pub fn ln(&self) -> Tensor<T> {
        let out = self.data().iter().map(|&v| v.ln()).collect();
        Tensor::from_op(self.rows(), self.cols(), out, Op::Ln(self.clone()))
    }

    /// Row-wise softmax with per-row max subtraction.
    pub fn row_softmax(&self) -> Tensor<T> {
        let out = kernels::row_softmax_values(self.data(), self.rows(), self.cols());
        Tensor::from_op(self.rows(), self.cols(), out, Op::RowSoftmax(self.clone()))
    }

    /// Softmax of each row, computed outside the tape.
    pub fn row_softmax_values(&self) -> Vec<T> {
        kernels::row_softmax_values(self.data(), self.rows(), self.cols())
    }

    /// `m x n -> m x 1` sums over each row.
    pub fn row_sums(&self) -> Tensor<T> {
        let n = self.cols();
        let out = self
            .data()
            .chunks(n)
            .map(|row| row.iter().copied().sum())
            .collect();
        Tensor::from_op(self.rows(), 1, out, Op::RowSums(self.clone()))
    }

    /// `m x n -> n x 1` sums over each column.
    pub fn col_sums(&self) -> Tensor<T> {
        let (m, n) = self.shape();
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            let row = &self.data()[i * n..(i + 1) * n];
            for (o, &v) in out.iter_mut().zip(row) {
                *o = *o + v;
            }
        }
        Tensor::from_op(n, 1, out, Op::ColSums(self.clone()))
    }

    pub fn sum_all(&self) -> Tensor<T> {
        let s = self.data().iter().copied().sum();
        Tensor::from_op(1, 1, vec![s], Op::SumAll(self.clone()))
    }

    /// Main diagonal of a square matrix as an `m x 1` column.
    pub fn diag(&self) -> NumResult<Tensor<T>> {
        let (m, n) = self.shape();
        if m != n {
            return Err(NumError::ShapeMismatch {
                op: "diag",
                lhs_rows: m,
                lhs_cols: n,
                rhs_rows: m,
                rhs_cols: m,
            });
        }
        let out = (0..m).map(|i| self.at(i, i)).collect();
        Ok(Tensor::from_op(m, 1, out, Op::Diag(self.clone())))
    }

    pub fn transpose(&self) -> Tensor<T> {
        let (m, n) = self.shape();
        let out = kernels::transpose(self.data(), m, n);
        Tensor::from_op(n, m, out, Op::Transpose(self.clone()))
    }

    /// Single entry as a `1 x 1` tensor.
    pub fn entry(&self, i: usize, j: usize) -> NumResult<Tensor<T>> {
        if i >= self.rows() || j >= self.cols() {
            return Err(NumError::InvalidParam(format!(
                "entry ({i},{j}) out of bounds for {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        Ok(Tensor::from_op(
            1,
            1,
            vec![self.at(i, j)],
            Op::Entry(self.clone(), i, j),
        ))
    }

    /// Cosine similarity of every row of `self` against every row of `rhs`:
    /// `S[i,k] = <a_i, b_k> / (|a_i| |b_k| + eps)` with `eps = 1e-12`.
    ///
    /// Zero rows yield ~0 similarity; their norm gets subgradient 0.
    pub fn cosine_sim(&self, rhs: &Tensor<T>) -> NumResult<Tensor<T>> {
        self.same_shape(rhs, "cosine_sim")?;
        let (m, d) = self.shape();
        let na = kernels::row_norms(self.data(), m, d);
        let nb = kernels::row_norms(rhs.data(), m, d);
        let bt = kernels::transpose(rhs.data(), m, d);
        let mut out = kernels::matmul(self.data(), &bt, m, d, m);
        let eps = T::from_f64(COSINE_EPS);
        for i in 0..m {
            let row = &mut out[i * m..(i + 1) * m];
            for (k, v) in row.iter_mut().enumerate() {
                *v = *v / (na[i] * nb[k] + eps);
            }
        }
        Ok(Tensor::from_op(
            m,
            m,
            out,
            Op::CosineSim(self.clone(), rhs.clone()),
        ))
    }

    /// `exp((w ⊙ a) / temp)` where `w` is a constant weight matrix;
    /// `weights = None` stands for all-ones weights without materializing
    /// them.
    ///
    /// The weights are data-dependent constants (no gradient flows to them);
    /// passing a gradient-tracked tensor is an error.
    pub fn weighted_exp(&self, weights: Option<&Tensor<T>>, temp: T) -> NumResult<Tensor<T>> {
        if let Some(w) = weights {
            self.same_shape(w, "weighted_exp")?;
            if w.requires_grad() {
                return Err(NumError::InvalidParam(
                    "weighted_exp weights must be constant".into(),
                ));
            }
        }
        if temp <= T::zero() {
            return Err(NumError::InvalidParam(format!(
                "temperature must be positive, got {temp}"
            )));
        }
        let inv_temp = T::one() / temp;
        let out = match weights {
            Some(w) => zip_map(self.data(), w.data(), |a, wv| (wv * a * inv_temp).exp()),
            None => self.data().iter().map(|&a| (a * inv_temp).exp()).collect(),
        };
        Ok(Tensor::from_op(
            self.rows(),
            self.cols(),
            out,
            Op::WeightedExp {
                input: self.clone(),
                weights: weights.cloned(),
                inv_temp,
            },
        ))
    }

    /// Mean negative log-likelihood over `rows`, from logits, using the
    /// log-sum-exp trick. `labels[i]` is the class of node `i`.
    pub fn cross_entropy_logits(&self, labels: &[usize], rows: &[usize]) -> NumResult<Tensor<T>> {
        let (m, c) = self.shape();
        if rows.is_empty() {
            return Err(NumError::InvalidParam(
                "cross entropy over an empty row set".into(),
            ));
        }
        if labels.len() != m {
            return Err(NumError::InvalidParam(format!(
                "label count {} does not match row count {m}",
                labels.len()
            )));
        }
        for &r in rows {
            if r >= m {
                return Err(NumError::InvalidParam(format!(
                    "row index {r} out of bounds for {m} rows"
                )));
            }
            if labels[r] >= c {
                return Err(NumError::InvalidParam(format!(
                    "label {} out of bounds for {c} classes",
                    labels[r]
                )));
            }
        }
        let mut total = T::zero();
        for &r in rows {
            let row = &self.data()[r * c..(r + 1) * c];
            let max = row.iter().copied().fold(row[0], T::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            total = total + (lse - row[labels[r]]);
        }
        let val = total / T::from_f64(rows.len() as f64);
        Ok(Tensor::from_op(
            1,
            1,
            vec![val],
            Op::CrossEntropy {
                logits: self.clone(),
                labels: Arc::new(labels.to_vec()),
                rows: Arc::new(rows.to_vec()),
            },
        ))
    }

    /// Fused symmetrized InfoNCE objective over the three similarity
    /// matrices of a two-view batch:
    ///
    /// `L = (1/2M) sum_i [ln den_h_i + ln den_z_i - 2 ln pos_i]` with
    /// `pos_i = E_hz[i,i]`, `den_h_i = sum_k E_hz[i,k] + sum_{k!=i} E_hh[i,k]`,
    /// `den_z_i = sum_k E_hz[k,i] + sum_{k!=i} E_zz[i,k]`, and
    /// `E_xy = exp((W_xy ⊙ S_xy) / temp)` (weights default to 1).
    ///
    /// Equivalent to composing `weighted_exp`, row/column/diagonal
    /// reductions and logs, but with one fused backward pass; the
    /// composed path stays available and the two are tested against each
    /// other and against a direct-summation reference.
    pub fn nce_objective(
        sim_hz: &Tensor<T>,
        sim_hh: &Tensor<T>,
        sim_zz: &Tensor<T>,
        weights: Option<(&Tensor<T>, &Tensor<T>, &Tensor<T>)>,
        temp: T,
    ) -> NumResult<Tensor<T>> {
        let m = sim_hz.rows();
        for (name, s) in [("sim_hz", sim_hz), ("sim_hh", sim_hh), ("sim_zz", sim_zz)] {
            if s.shape() != (m, m) {
                return Err(NumError::ShapeMismatch {
                    op: "nce_objective",
                    lhs_rows: m,
                    lhs_cols: m,
                    rhs_rows: s.rows(),
                    rhs_cols: s.cols(),
                });
            }
            let _ = name;
        }
        if temp <= T::zero() {
            return Err(NumError::InvalidParam(format!(
                "temperature must be positive, got {temp}"
            )));
        }
        if let Some((w_hz, w_hh, w_zz)) = &weights {
            for w in [w_hz, w_hh, w_zz] {
                if w.shape() != (m, m) {
                    return Err(NumError::ShapeMismatch {
                        op: "nce_objective weights",
                        lhs_rows: m,
                        lhs_cols: m,
                        rhs_rows: w.rows(),
                        rhs_cols: w.cols(),
                    });
                }
                if w.requires_grad() {
                    return Err(NumError::InvalidParam(
                        "nce_objective weights must be constant".into(),
                    ));
                }
            }
        }
        let inv_temp = T::one() / temp;
        let wexp = |s: &Tensor<T>, w: Option<&Tensor<T>>| -> Vec<T> {
            match w {
                Some(w) => zip_map(s.data(), w.data(), |sv, wv| (wv * sv * inv_temp).exp()),
                None => s.data().iter().map(|&sv| (sv * inv_temp).exp()).collect(),
            }
        };
        let (w_hz, w_hh, w_zz) = match &weights {
            Some((a, b, c)) => (Some(*a), Some(*b), Some(*c)),
            None => (None, None, None),
        };
        let e_hz = wexp(sim_hz, w_hz);
        let e_hh = wexp(sim_hh, w_hh);
        let e_zz = wexp(sim_zz, w_zz);
        let mut den_h = vec![T::zero(); m];
        let mut den_z = vec![T::zero(); m];
        for i in 0..m {
            let mut row_cross = T::zero();
            let mut row_within = T::zero();
            for k in 0..m {
                let idx = i * m + k;
                row_cross = row_cross + e_hz[idx];
                den_z[k] = den_z[k] + e_hz[idx];
                if k != i {
                    row_within = row_within + e_hh[idx];
                }
            }
            den_h[i] = row_cross + row_within;
        }
        for i in 0..m {
            let mut row_within = T::zero();
            for k in 0..m {
                if k != i {
                    row_within = row_within + e_zz[i * m + k];
                }
            }
            den_z[i] = den_z[i] + row_within;
        }
        let two = T::from_f64(2.0);
        let mut total = T::zero();
        for i in 0..m {
            let pos = e_hz[i * m + i];
            total = total + den_h[i].ln() + den_z[i].ln() - two * pos.ln();
        }
        let value = total / (two * T::from_f64(m as f64));
        let state = NceState {
            sim_hz: sim_hz.clone(),
            sim_hh: sim_hh.clone(),
            sim_zz: sim_zz.clone(),
            weights: weights.map(|(a, b, c)| (a.clone(), b.clone(), c.clone())),
            inv_temp,
            e_hz,
            e_hh,
            e_zz,
            den_h,
            den_z,
        };
        Ok(Tensor::from_op(
            1,
            1,
            vec![value],
            Op::NceObjective(Box::new(state)),
        ))
    }

    /// Apply a constant linear operator: `y = L * self`.
    pub fn apply_map(map: Arc<dyn LinearMap<T>>, x: &Tensor<T>) -> NumResult<Tensor<T>> {
        if map.in_rows() != x.rows() {
            return Err(NumError::ShapeMismatch {
                op: "apply_map",
                lhs_rows: map.out_rows(),
                lhs_cols: map.in_rows(),
                rhs_rows: x.rows(),
                rhs_cols: x.cols(),
            });
        }
        let mut out = vec![T::zero(); map.out_rows() * x.cols()];
        map.apply_to(x.data(), x.cols(), &mut out);
        Ok(Tensor::from_op(
            map.out_rows(),
            x.cols(),
            out,
            Op::ApplyMap(map, x.clone()),
        ))
    }

    // ---- reverse pass ----

    /// Reverse-mode differentiation from a scalar loss. Returns gradients for
    /// every reachable gradient-tracked leaf.
    pub fn backward(&self) -> NumResult<GradStore<T>> {
        if !self.is_scalar() {
            return Err(NumError::NotScalar {
                op: "backward",
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        let order = self.topo_order();
        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.id(), vec![T::one()]);
        for node in order.iter().rev() {
            let Some(op) = &node.0.op else { continue };
            // Leaves keep their entries; interior grads are consumed here.
            let g = match grads.remove(&node.id()) {
                Some(g) => g,
                None => continue,
            };
            let mut sink = |t: &Tensor<T>, contrib: Vec<T>| {
                if !t.requires_grad() {
                    return;
                }
                match grads.entry(t.id()) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        for (acc, v) in e.get_mut().iter_mut().zip(contrib) {
                            *acc = *acc + v;
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(contrib);
                    }
                }
            };
            match op {
                Op::Matmul(a, b) => {
                    if a.requires_grad() {
                        let bt = kernels::transpose(b.data(), b.rows(), b.cols());
                        let ga = kernels::matmul(&g, &bt, a.rows(), b.cols(), b.rows());
                        sink(a, ga);
                    }
                    if b.requires_grad() {
                        let gb = kernels::matmul_tn(a.data(), &g, a.rows(), a.cols(), b.cols());
                        sink(b, gb);
                    }
                }
                Op::Add(a, b) => {
                    sink(a, g.clone());
                    sink(b, g);
                }
                Op::Sub(a, b) => {
                    sink(a, g.clone());
                    sink(b, g.iter().map(|&v| -v).collect());
                }
                Op::Mul(a, b) => {
                    if a.requires_grad() {
                        sink(a, zip_map(&g, b.data(), |gv, bv| gv * bv));
                    }
                    if b.requires_grad() {
                        sink(b, zip_map(&g, a.data(), |gv, av| gv * av));
                    }
                }
                Op::AddRowVec(a, bias) => {
                    if a.requires_grad() {
                        sink(a, g.clone());
                    }
                    if bias.requires_grad() {
                        let n = a.cols();
                        let mut gb = vec![T::zero(); n];
                        for row in g.chunks(n) {
                            for (acc, &v) in gb.iter_mut().zip(row) {
                                *acc = *acc + v;
                            }
                        }
                        sink(bias, gb);
                    }
                }
                Op::Scale(a, c) => {
                    sink(a, g.iter().map(|&v| v * *c).collect());
                }
                Op::MulScalarTensor(a, s) => {
                    let sv = s.0.data[0];
                    if a.requires_grad() {
                        sink(a, g.iter().map(|&v| v * sv).collect());
                    }
                    if s.requires_grad() {
                        let gs = g
                            .iter()
                            .zip(a.data())
                            .map(|(&gv, &av)| gv * av)
                            .sum::<T>();
                        sink(s, vec![gs]);
                    }
                }
                Op::Relu(a) => {
                    sink(
                        a,
                        zip_map(&g, a.data(), |gv, av| {
                            if av > T::zero() {
                                gv
                            } else {
                                T::zero()
                            }
                        }),
                    );
                }
                Op::Exp(a) => {
                    sink(a, zip_map(&g, node.data(), |gv, ov| gv * ov));
                }
                Op::Ln(a) => {
                    sink(a, zip_map(&g, a.data(), |gv, av| gv / av));
                }
                Op::RowSoftmax(a) => {
                    let (m, n) = a.shape();
                    let p = node.data();
                    let mut ga = vec![T::zero(); m * n];
                    for i in 0..m {
                        let (pr, gr) = (&p[i * n..(i + 1) * n], &g[i * n..(i + 1) * n]);
                        let dot = pr
                            .iter()
                            .zip(gr)
                            .map(|(&pv, &gv)| pv * gv)
                            .sum::<T>();
                        for j in 0..n {
                            ga[i * n + j] = pr[j] * (gr[j] - dot);
                        }
                    }
                    sink(a, ga);
                }
                Op::RowSums(a) => {
                    let (m, n) = a.shape();
                    let mut ga = vec![T::zero(); m * n];
                    for i in 0..m {
                        ga[i * n..(i + 1) * n].fill(g[i]);
                    }
                    sink(a, ga);
                }
                Op::ColSums(a) => {
                    let (m, n) = a.shape();
                    let mut ga = vec![T::zero(); m * n];
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] = g[j];
                        }
                    }
                    sink(a, ga);
                }
                Op::SumAll(a) => {
                    sink(a, vec![g[0]; a.rows() * a.cols()]);
                }
                Op::Diag(a) => {
                    let m = a.rows();
                    let mut ga = vec![T::zero(); m * m];
                    for i in 0..m {
                        ga[i * m + i] = g[i];
                    }
                    sink(a, ga);
                }
                Op::Transpose(a) => {
                    sink(a, kernels::transpose(&g, node.rows(), node.cols()));
                }
                Op::Entry(a, i, j) => {
                    let mut ga = vec![T::zero(); a.rows() * a.cols()];
                    ga[i * a.cols() + j] = g[0];
                    sink(a, ga);
                }
                Op::CosineSim(a, b) => {
                    let (ga, gb) = kernels::cosine_sim_backward(
                        &g,
                        node.data(),
                        a.data(),
                        b.data(),
                        a.rows(),
                        a.cols(),
                        a.requires_grad(),
                        b.requires_grad(),
                    );
                    if let Some(ga) = ga {
                        sink(a, ga);
                    }
                    if let Some(gb) = gb {
                        sink(b, gb);
                    }
                }
                Op::WeightedExp {
                    input,
                    weights,
                    inv_temp,
                } => {
                    let out = node.data();
                    let it = *inv_temp;
                    let ga: Vec<T> = match weights {
                        Some(w) => g
                            .iter()
                            .zip(out.iter().zip(w.data().iter()))
                            .map(|(&gv, (&ov, &wv))| gv * ov * wv * it)
                            .collect(),
                        None => g
                            .iter()
                            .zip(out.iter())
                            .map(|(&gv, &ov)| gv * ov * it)
                            .collect(),
                    };
                    sink(input, ga);
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    rows,
                } => {
                    let (m, c) = logits.shape();
                    let scale = g[0] / T::from_f64(rows.len() as f64);
                    let mut ga = vec![T::zero(); m * c];
                    for &r in rows.iter() {
                        let row = &logits.data()[r * c..(r + 1) * c];
                        let max = row.iter().copied().fold(row[0], T::max);
                        let denom = row.iter().map(|&v| (v - max).exp()).sum::<T>();
                        for j in 0..c {
                            let p = (row[j] - max).exp() / denom;
                            let delta = if j == labels[r] { T::one() } else { T::zero() };
                            ga[r * c + j] = ga[r * c + j] + scale * (p - delta);
                        }
                    }
                    sink(logits, ga);
                }
                Op::ApplyMap(map, x) => {
                    let mut gx = vec![T::zero(); x.rows() * x.cols()];
                    map.apply_transpose_to(&g, x.cols(), &mut gx);
                    sink(x, gx);
                }
                Op::NceObjective(state) => {
                    let m = state.sim_hz.rows();
                    let two = T::from_f64(2.0);
                    let scale = g[0] * state.inv_temp / (two * T::from_f64(m as f64));
                    let inv_den_h: Vec<T> =
                        state.den_h.iter().map(|&d| T::one() / d).collect();
                    let inv_den_z: Vec<T> =
                        state.den_z.iter().map(|&d| T::one() / d).collect();
                    let weight_at = |w: &Option<(Tensor<T>, Tensor<T>, Tensor<T>)>,
                                     pick: usize,
                                     idx: usize| {
                        match w {
                            Some((a, b, c)) => match pick {
                                0 => a.data()[idx],
                                1 => b.data()[idx],
                                _ => c.data()[idx],
                            },
                            None => T::one(),
                        }
                    };
                    if state.sim_hz.requires_grad() {
                        let mut ga = vec![T::zero(); m * m];
                        for i in 0..m {
                            for k in 0..m {
                                let idx = i * m + k;
                                let mut coef = inv_den_h[i] + inv_den_z[k];
                                if i == k {
                                    coef = coef - two / state.e_hz[idx];
                                }
                                ga[idx] = scale
                                    * weight_at(&state.weights, 0, idx)
                                    * state.e_hz[idx]
                                    * coef;
                            }
                        }
                        sink(&state.sim_hz, ga);
                    }
                    if state.sim_hh.requires_grad() {
                        let mut ga = vec![T::zero(); m * m];
                        for i in 0..m {
                            for k in 0..m {
                                if i == k {
                                    continue;
                                }
                                let idx = i * m + k;
                                ga[idx] = scale
                                    * weight_at(&state.weights, 1, idx)
                                    * state.e_hh[idx]
                                    * inv_den_h[i];
                            }
                        }
                        sink(&state.sim_hh, ga);
                    }
                    if state.sim_zz.requires_grad() {
                        let mut ga = vec![T::zero(); m * m];
                        for i in 0..m {
                            for k in 0..m {
                                if i == k {
                                    continue;
                                }
                                let idx = i * m + k;
                                ga[idx] = scale
                                    * weight_at(&state.weights, 2, idx)
                                    * state.e_zz[idx]
                                    * inv_den_z[i];
                            }
                        }
                        sink(&state.sim_zz, ga);
                    }
                }
            }
        }
        Ok(GradStore { grads })
    }

    /// Topological order (inputs before outputs) over grad-tracked nodes.
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut seen: HashMap<u64, ()> = HashMap::new();
        // Iterative post-order DFS; (node, children_pushed).
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !node.requires_grad() || seen.contains_key(&node.id()) {
                continue;
            }
            seen.insert(node.id(), ());
            stack.push((node.clone(), true));
            if let Some(op) = &node.0.op {
                let mut push = |t: &Tensor<T>| stack.push((t.clone(), false));
                match op {
                    Op::Matmul(a, b)
                    | Op::Add(a, b)
                    | Op::Sub(a, b)
                    | Op::Mul(a, b)
                    | Op::AddRowVec(a, b)
                    | Op::MulScalarTensor(a, b)
                    | Op::CosineSim(a, b) => {
                        push(a);
                        push(b);
                    }
                    Op::Scale(a, _)
                    | Op::Relu(a)
                    | Op::Exp(a)
                    | Op::Ln(a)
                    | Op::RowSoftmax(a)
                    | Op::RowSums(a)
                    | Op::ColSums(a)
                    | Op::SumAll(a)
                    | Op::Diag(a)
                    | Op::Transpose(a)
                    | Op::Entry(a, _, _)
                    | Op::WeightedExp { input: a, .. }
                    | Op::CrossEntropy { logits: a, .. }
                    | Op::ApplyMap(_, a) => push(a),
                }
            }
        }
        order
    }
}

const COSINE_EPS: f64 = 1e-12;

/// Gradients keyed by tensor id, as produced by [`Tensor::backward`].
pub struct GradStore<T: Scalar> {
    grads: HashMap<u64, Vec<T>>,
}

impl<T: Scalar> GradStore<T> {
    pub fn get(&self, t: &Tensor<T>) -> Option<&[T]> {
        self.grads.get(&t.id()).map(|v| v.as_slice())
    }

    pub fn leaf_grads(&self) -> impl Iterator<Item = &[T]> {
        self.grads.values().map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// A trainable value paired with its accumulated gradient.
#[derive(Clone)]
pub struct Parameter<T: Scalar> {
    value: Tensor<T>,
    grad: Vec<T>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(init: Tensor<T>) -> Self {
        let len = init.rows() * init.cols();
        let value = Tensor::new_var(init.rows(), init.cols(), init.data().to_vec())
            .expect("valid source tensor");
        Parameter {
            value,
            grad: vec![T::zero(); len],
        }
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn grad(&self) -> &[T] {
        &self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    /// Add this parameter's gradient from a backward pass, if any.
    pub fn accumulate(&mut self, store: &GradStore<T>) {
        if let Some(g) = store.get(&self.value) {
            for (acc, &v) in self.grad.iter_mut().zip(g) {
                *acc = *acc + v;
            }
        }
    }

    /// Replace the value (a fresh gradient-tracked leaf); used by optimizers.
    pub fn set_data(&mut self, data: Vec<T>) {
        let (r, c) = self.value.shape();
        assert_eq!(data.len(), r * c, "parameter update changed shape");
        self.value = Tensor::new_var(r, c, data).expect("same shape");
    }
}

/// Inverted dropout: zero entries with probability `rate`, scale survivors by
/// `1/(1-rate)` in training mode; identity in eval mode.
pub fn dropout<T: Scalar>(
    a: &Tensor<T>,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> NumResult<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumError::InvalidParam(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok(a.clone());
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..a.rows() * a.cols())
        .map(|_| {
            if rng.bernoulli(rate) {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect();
    let mask = Tensor::new(a.rows(), a.cols(), mask)?;
    a.mul(&mask)
}

/// Glorot/Xavier-uniform initialization: entries uniform in `[-a, a]` with
/// `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init<T: Scalar>(rows: usize, cols: usize, rng: &mut RngState) -> NumResult<Tensor<T>> {
    if rows == 0 || cols == 0 {
        return Err(NumError::InvalidParam(format!(
            "glorot_init needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::from_f64(rng.uniform_in(-a, a)))
        .collect();
    Tensor::new(rows, cols, data)
}

fn zip_map<T: Scalar>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

pub(crate) mod kernels {
    //! Row-major dense kernels. The matmul is axpy-style (`C[i,:] += a_ik *
    //! B[k,:]`), which vectorizes without reassociating any accumulation and
    //! skips zero left-hand entries (binary feature matrices make the first
    //! encoder layer mostly zeros). Parallel splits are by fixed output row
    //! blocks, so results do not depend on the thread schedule.

    use rayon::prelude::*;

    use crate::scalar::Scalar;

    /// Work threshold below which matmul stays single-threaded.
    const PAR_FLOPS: usize = 1 << 21;

    /// Rows of `C` are computed in blocks of 4 so each pass streams `B` once
    /// per block instead of once per row. Blocks where all four left-hand
    /// entries vanish are skipped, which makes binary feature matrices cheap.
    pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
        debug_assert_eq!(a.len(), m * k);
        debug_assert_eq!(b.len(), k * n);
        let mut c = vec![T::zero(); m * n];
        if m * k * n < PAR_FLOPS {
            for (ib, cchunk) in c.chunks_mut(4 * n).enumerate() {
                matmul_block(a, b, k, n, ib * 4, cchunk);
            }
        } else {
            c.par_chunks_mut(4 * n).enumerate().for_each(|(ib, cchunk)| {
                matmul_block(a, b, k, n, ib * 4, cchunk);
            });
        }
        c
    }

    /// Up to four consecutive output rows starting at `i0`.
    #[inline]
    fn matmul_block<T: Scalar>(a: &[T], b: &[T], k: usize, n: usize, i0: usize, cchunk: &mut [T]) {
        let rows = cchunk.len() / n;
        if rows == 4 {
            let (c0, rest) = cchunk.split_at_mut(n);
            let (c1, rest) = rest.split_at_mut(n);
            let (c2, c3) = rest.split_at_mut(n);
            let a0 = &a[i0 * k..(i0 + 1) * k];
            let a1 = &a[(i0 + 1) * k..(i0 + 2) * k];
            let a2 = &a[(i0 + 2) * k..(i0 + 3) * k];
            let a3 = &a[(i0 + 3) * k..(i0 + 4) * k];
            for l in 0..k {
                let (v0, v1, v2, v3) = (a0[l], a1[l], a2[l], a3[l]);
                if v0 == T::zero() && v1 == T::zero() && v2 == T::zero() && v3 == T::zero() {
                    continue;
                }
                let brow = &b[l * n..(l + 1) * n];
                for j in 0..n {
                    let bv = brow[j];
                    c0[j] = c0[j] + v0 * bv;
                    c1[j] = c1[j] + v1 * bv;
                    c2[j] = c2[j] + v2 * bv;
                    c3[j] = c3[j] + v3 * bv;
                }
            }
        } else {
            for (r, crow) in cchunk.chunks_mut(n).enumerate() {
                matmul_row(&a[(i0 + r) * k..(i0 + r + 1) * k], b, n, crow);
            }
        }
    }

    #[inline]
    fn matmul_row<T: Scalar>(arow: &[T], b: &[T], n: usize, crow: &mut [T]) {
        for (kk, &aik) in arow.iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + aik * bv;
            }
        }
    }

    /// `C (m x n) = aᵀ b` with `a: k x m`, `b: k x n`, both row-major; no
    /// transposed copy of `a` is formed. The contraction is always split into
    /// the same two halves (combined low-then-high), so the result does not
    /// depend on whether the halves ran in parallel.
    pub fn matmul_tn<T: Scalar>(a: &[T], b: &[T], k: usize, m: usize, n: usize) -> Vec<T> {
        debug_assert_eq!(a.len(), k * m);
        debug_assert_eq!(b.len(), k * n);
        if k * m * n < PAR_FLOPS || k < 2 {
            return matmul_tn_range(a, b, m, n, 0, k);
        }
        let mid = k / 2;
        let (mut lo, hi) = rayon::join(
            || matmul_tn_range(a, b, m, n, 0, mid),
            || matmul_tn_range(a, b, m, n, mid, k),
        );
        for (l, h) in lo.iter_mut().zip(&hi) {
            *l = *l + *h;
        }
        lo
    }

    /// Partial `aᵀ b` over contraction rows `l0..l1`, scattering 8 rows of
    /// `b` at a time so `C` is streamed once per chunk.
    fn matmul_tn_range<T: Scalar>(
        a: &[T],
        b: &[T],
        m: usize,
        n: usize,
        l0: usize,
        l1: usize,
    ) -> Vec<T> {
        let mut c = vec![T::zero(); m * n];
        let mut l = l0;
        while l < l1 {
            let chunk = (l1 - l).min(8);
            for j in 0..m {
                let crow = &mut c[j * n..(j + 1) * n];
                for r in 0..chunk {
                    let v = a[(l + r) * m + j];
                    if v == T::zero() {
                        continue;
                    }
                    let brow = &b[(l + r) * n..(l + r + 1) * n];
                    for (cv, &bv) in crow.iter_mut().zip(brow) {
                        *cv = *cv + v * bv;
                    }
                }
            }
            l += chunk;
        }
        c
    }

    pub fn transpose<T: Scalar>(a: &[T], m: usize, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); m * n];
        const B: usize = 32;
        for ib in (0..m).step_by(B) {
            for jb in (0..n).step_by(B) {
                for i in ib..(ib + B).min(m) {
                    for j in jb..(jb + B).min(n) {
                        out[j * m + i] = a[i * n + j];
                    }
                }
            }
        }
        out
    }

    pub fn row_norms<T: Scalar>(a: &[T], m: usize, d: usize) -> Vec<T> {
        (0..m)
            .map(|i| {
                a[i * d..(i + 1) * d]
                    .iter()
                    .map(|&v| v * v)
                    .sum::<T>()
                    .sqrt()
            })
            .collect()
    }

    pub fn row_softmax_values<T: Scalar>(a: &[T], m: usize, n: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let row = &a[i * n..(i + 1) * n];
            let max = row.iter().copied().fold(row[0], T::max);
            let mut sum = T::zero();
            let start = out.len();
            for &v in row {
                let e = (v - max).exp();
                sum = sum + e;
                out.push(e);
            }
            for v in &mut out[start..] {
                *v = *v / sum;
            }
        }
        out
    }

    /// Gradients of the cosine-similarity matrix.
    ///
    /// With `n_i = |a_i|`, `m_k = |b_k|`, `D_ik = n_i m_k + eps`, `S = ABᵀ ⊘ D`:
    /// `∂L/∂a_i = Σ_k (G_ik/D_ik) b_k − (a_i/n_i) Σ_k G_ik S_ik m_k / D_ik`,
    /// and symmetrically for `b`. Rows with zero norm skip the second term
    /// (subgradient 0 of the norm at 0).
    #[allow(clippy::too_many_arguments)]
    pub fn cosine_sim_backward<T: Scalar>(
        g: &[T],
        s: &[T],
        a: &[T],
        b: &[T],
        m: usize,
        d: usize,
        need_a: bool,
        need_b: bool,
    ) -> (Option<Vec<T>>, Option<Vec<T>>) {
        let eps = T::from_f64(super::COSINE_EPS);
        let na = row_norms(a, m, d);
        let nb = row_norms(b, m, d);
        // W = G ⊘ D, plus the per-row/column correction coefficients.
        let mut w = vec![T::zero(); m * m];
        let mut ca = vec![T::zero(); m];
        let mut cb = vec![T::zero(); m];
        for i in 0..m {
            for k in 0..m {
                let idx = i * m + k;
                let dd = na[i] * nb[k] + eps;
                let wv = g[idx] / dd;
                w[idx] = wv;
                let t = g[idx] * s[idx] / dd;
                ca[i] = ca[i] + t * nb[k];
                cb[k] = cb[k] + t * na[i];
            }
        }
        let ga = need_a.then(|| {
            let mut ga = matmul(&w, b, m, m, d);
            for i in 0..m {
                if na[i] > T::zero() {
                    let coef = ca[i] / na[i];
                    let arow = &a[i * d..(i + 1) * d];
                    for (gv, &av) in ga[i * d..(i + 1) * d].iter_mut().zip(arow) {
                        *gv = *gv - coef * av;
                    }
                }
            }
            ga
        });
        let gb = need_b.then(|| {
            let mut gb = matmul_tn(&w, a, m, m, d);
            for k in 0..m {
                if nb[k] > T::zero() {
                    let coef = cb[k] / nb[k];
                    let brow = &b[k * d..(k + 1) * d];
                    for (gv, &bv) in gb[k * d..(k + 1) * d].iter_mut().zip(brow) {
                        *gv = *gv - coef * bv;
                    }
                }
            }
            gb
        });
        (ga, gb)
    }
}


/// Re-export of the dense kernels for benchmarking binaries.
pub mod kernels_bench {
    pub use super::kernels::{matmul, transpose};
}
