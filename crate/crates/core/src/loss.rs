//! Contrastive signals and objectives.
//!
//! Per training step the two projected views give three cosine-similarity
//! matrices (cross-view, and within each view). High-confidence classifier
//! predictions produce pseudo-labels, a pair pseudo-label matrix `Q`, and a
//! reweighting matrix `R = |Q - Norm(sim)|` over confident pairs (`R = 1`
//! elsewhere, keeping the plain InfoNCE behaviour there). Each exponent of
//! the InfoNCE objective is then `(R * theta) / tau`. With an empty
//! confidence set everything reduces to the symmetrized plain InfoNCE on the
//! same code path.
//!
//! `R`, `Q` and the pseudo-labels are data-dependent constants: no gradient
//! flows through them, only through the similarities.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tensor::{NumError, NumResult, Tensor};

#[derive(Error, Debug)]
pub enum LossError {
    #[error("invalid loss configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// How the high-confidence node set O is selected from the prediction P.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum ConfidenceRule {
    /// Nodes whose max predicted probability reaches the threshold.
    Threshold(f64),
    /// Per predicted class, the k most confident nodes.
    PerClassTopK(usize),
}

impl Default for ConfidenceRule {
    fn default() -> Self {
        ConfidenceRule::Threshold(0.8)
    }
}

/// Contrastive-loss hyper-parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    /// InfoNCE temperature.
    pub temperature: f64,
    /// Weight of the contrastive term in the joint objective.
    pub lambda: f64,
    /// Selection rule for the confidence set O.
    pub confidence: ConfidenceRule,
    /// Disable to keep plain InfoNCE even when O is non-empty.
    pub reweighting: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            temperature: 0.5,
            lambda: 0.1,
            confidence: ConfidenceRule::default(),
            reweighting: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, num_classes: usize) -> Result<(), LossError> {
        if self.temperature <= 0.0 {
            return Err(LossError::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.lambda < 0.0 {
            return Err(LossError::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        match self.confidence {
            ConfidenceRule::Threshold(rho) => {
                let lower = 1.0 / num_classes as f64;
                if !(rho > lower && rho <= 1.0) {
                    return Err(LossError::Config(format!(
                        "confidence threshold must be in (1/{num_classes}, 1], got {rho}"
                    )));
                }
            }
            ConfidenceRule::PerClassTopK(k) => {
                if k == 0 {
                    return Err(LossError::Config("per-class top-k must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Select the high-confidence set O and pseudo-labels Y from the prediction
/// values `p` (`m x c` probability rows). Argmax ties break to the lowest
/// class index; Y is meaningful only where the mask is set.
pub fn select_confident<T: Scalar>(
    p: &[T],
    m: usize,
    c: usize,
    rule: &ConfidenceRule,
) -> (Vec<bool>, Vec<usize>) {
    debug_assert_eq!(p.len(), m * c);
    let mut labels = vec![0usize; m];
    let mut best = vec![T::zero(); m];
    for i in 0..m {
        let row = &p[i * c..(i + 1) * c];
        let mut arg = 0;
        let mut max = row[0];
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > max {
                max = v;
                arg = j;
            }
        }
        labels[i] = arg;
        best[i] = max;
    }
    let mask = match rule {
        ConfidenceRule::Threshold(rho) => {
            let rho = T::from_f64(*rho);
            best.iter().map(|&b| b >= rho).collect()
        }
        ConfidenceRule::PerClassTopK(k) => {
            let mut mask = vec![false; m];
            for class in 0..c {
                let mut members: Vec<usize> =
                    (0..m).filter(|&i| labels[i] == class).collect();
                members.sort_by(|&a, &b| {
                    best[b]
                        .partial_cmp(&best[a])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                for &i in members.iter().take(*k) {
                    mask[i] = true;
                }
            }
            mask
        }
    };
    (mask, labels)
}

/// Pair pseudo-label matrix: `Q_ik = 1` iff `Y_i = Y_k`, defined on O x O
/// (zero elsewhere; the mask travels alongside).
pub fn pair_label_matrix<T: Scalar>(labels: &[usize], mask: &[bool]) -> Vec<T> {
    let m = labels.len();
    let mut q = vec![T::zero(); m * m];
    for i in 0..m {
        if !mask[i] {
            continue;
        }
        for k in 0..m {
            if mask[k] && labels[i] == labels[k] {
                q[i * m + k] = T::one();
            }
        }
    }
    q
}

/// Reweighting matrix: `R_ik = |Q_ik - Norm(sim_ik)|` for confident pairs,
/// 1 elsewhere. `Norm` is the min-max normalization over the O x O entries
/// of this similarity matrix; if they are all equal it is defined as 0.5.
pub fn reweight_matrix<T: Scalar>(q: &[T], mask: &[bool], sim: &[T]) -> Vec<T> {
    let m = mask.len();
    debug_assert_eq!(sim.len(), m * m);
    let mut r = vec![T::one(); m * m];
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..m {
        if !mask[i] {
            continue;
        }
        for k in 0..m {
            if mask[k] {
                let v = sim[i * m + k];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let span = hi - lo;
    let degenerate = !(span > T::zero());
    for i in 0..m {
        if !mask[i] {
            continue;
        }
        for k in 0..m {
            if !mask[k] {
                continue;
            }
            let idx = i * m + k;
            let norm = if degenerate {
                T::from_f64(0.5)
            } else {
                (sim[idx] - lo) / span
            };
            r[idx] = (q[idx] - norm).abs();
        }
    }
    r
}

/// Per-step contrastive state: tape-recorded similarity matrices plus the
/// constant confidence mask, pseudo-labels, Q and R matrices.
pub struct PairSignals<T: Scalar> {
    pub sim_hz: Tensor<T>,
    pub sim_hh: Tensor<T>,
    pub sim_zz: Tensor<T>,
    pub confident: Vec<bool>,
    pub pseudo_labels: Vec<usize>,
    /// Pair pseudo-label matrix; `None` when the confidence set is empty.
    pub q: Option<Tensor<T>>,
    /// Reweighting matrices; `None` stands for all-ones (plain InfoNCE).
    pub r_hz: Option<Tensor<T>>,
    pub r_hh: Option<Tensor<T>>,
    pub r_zz: Option<Tensor<T>>,
}

impl<T: Scalar> PairSignals<T> {
    /// Plain signals: empty confidence set, all weights 1.
    pub fn plain(gh: &Tensor<T>, gz: &Tensor<T>) -> NumResult<Self> {
        let m = gh.rows();
        let sim_hz = gh.cosine_sim(gz)?;
        let sim_hh = gh.cosine_sim(gh)?;
        let sim_zz = gz.cosine_sim(gz)?;
        Ok(PairSignals {
            sim_hz,
            sim_hh,
            sim_zz,
            confident: vec![false; m],
            pseudo_labels: vec![0; m],
            q: None,
            r_hz: None,
            r_hh: None,
            r_zz: None,
        })
    }

    /// Signals with confidence-based reweighting from prediction values `p`
    /// (`m x num_classes` probability rows, treated as constants).
    pub fn reweighted(
        gh: &Tensor<T>,
        gz: &Tensor<T>,
        p: &[T],
        num_classes: usize,
        rule: &ConfidenceRule,
    ) -> NumResult<Self> {
        let mut signals = Self::plain(gh, gz)?;
        let m = gh.rows();
        let (mask, labels) = select_confident(p, m, num_classes, rule);
        if mask.iter().any(|&b| b) {
            let q = pair_label_matrix::<T>(&labels, &mask);
            let r_hz = reweight_matrix(&q, &mask, signals.sim_hz.data());
            let r_hh = reweight_matrix(&q, &mask, signals.sim_hh.data());
            let r_zz = reweight_matrix(&q, &mask, signals.sim_zz.data());
            signals.q = Some(Tensor::new(m, m, q)?);
            signals.r_hz = Some(Tensor::new(m, m, r_hz)?);
            signals.r_hh = Some(Tensor::new(m, m, r_hh)?);
            signals.r_zz = Some(Tensor::new(m, m, r_zz)?);
        }
        signals.confident = mask;
        signals.pseudo_labels = labels;
        Ok(signals)
    }

    pub fn num_confident(&self) -> usize {
        self.confident.iter().filter(|&&c| c).count()
    }
}

/// Per-anchor plain InfoNCE losses (`m x 1`): positive `theta(h_i, z_i)`,
/// negatives over `theta(h_i, z_k)` and `theta(h_i, h_k)`, `k != i`.
pub fn info_nce<T: Scalar>(
    sim_hz: &Tensor<T>,
    sim_hh: &Tensor<T>,
    tau: T,
) -> NumResult<Tensor<T>> {
    let e_hz = sim_hz.weighted_exp(None, tau)?;
    let e_hh = sim_hh.weighted_exp(None, tau)?;
    per_anchor_losses(&e_hz, &e_hh, Side::Row)
}

enum Side {
    /// Anchor scans its row of the cross-view matrix.
    Row,
    /// Anchor scans its column (the transposed role in the symmetric term).
    Col,
}

/// `-log(pos / (pos + off-diagonal cross terms + off-diagonal within-view
/// terms))` per anchor, from exponentiated similarity matrices.
fn per_anchor_losses<T: Scalar>(
    e_cross: &Tensor<T>,
    e_within: &Tensor<T>,
    side: Side,
) -> NumResult<Tensor<T>> {
    let pos = e_cross.diag()?;
    let cross_sums = match side {
        Side::Row => e_cross.row_sums(),
        Side::Col => e_cross.col_sums(),
    };
    let within_off = e_within.row_sums().sub(&e_within.diag()?)?;
    // cross_sums already contains the positive (its diagonal term)
    let den = cross_sums.add(&within_off)?;
    den.ln().sub(&pos.ln())
}

/// The contrastive objective: reweighted InfoNCE averaged over both
/// directions of every positive pair, `(1/2M) sum_i [l(h_i, z_i) + l(z_i, h_i)]`.
///
/// Each exponent is `(R * theta) / tau`. The symmetric term swaps roles:
/// positives `theta(z_i, h_i)`, negatives over `theta(z_i, h_k)` (the
/// transposed cross matrix) and `theta(z_i, z_k)`, weighted by `R_hz`
/// transposed and `R_zz`. With an empty confidence set all weights are 1 and
/// this is exactly the symmetrized plain InfoNCE.
pub fn contrastive_objective<T: Scalar>(
    signals: &PairSignals<T>,
    tau: T,
) -> NumResult<Tensor<T>> {
    let m = signals.sim_hz.rows();
    let e_hz = signals.sim_hz.weighted_exp(signals.r_hz.as_ref(), tau)?;
    let e_hh = signals.sim_hh.weighted_exp(signals.r_hh.as_ref(), tau)?;
    let e_zz = signals.sim_zz.weighted_exp(signals.r_zz.as_ref(), tau)?;
    let l_h = per_anchor_losses(&e_hz, &e_hh, Side::Row)?;
    let l_z = per_anchor_losses(&e_hz, &e_zz, Side::Col)?;
    let total = l_h.add(&l_z)?.sum_all();
    Ok(total.scale(T::one() / T::from_f64(2.0 * m as f64)))
}

/// Mean cross-entropy over the training nodes, from logits.
pub fn cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
    train_idx: &[usize],
) -> NumResult<Tensor<T>> {
    logits.cross_entropy_logits(labels, train_idx)
}

/// Joint objective `L = L_ce + lambda * L_cl`.
pub fn joint_loss<T: Scalar>(
    l_ce: &Tensor<T>,
    l_cl: &Tensor<T>,
    lambda: T,
) -> NumResult<Tensor<T>> {
    if lambda < T::zero() {
        return Err(NumError::InvalidParam(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    l_ce.add(&l_cl.scale(lambda))
}

pub mod oracle {
    //! Independent brute-force reference for the contrastive objectives.
    //!
    //! Computed with explicit per-pair loops straight from the embedding
    //! values, sharing no code with the tensor path. Used by tests and the
    //! verification command to pin the tape implementation.

    /// Cosine similarity between rows `i` of `a` and `k` of `b`.
    fn cos(a: &[f64], b: &[f64], i: usize, k: usize, d: usize) -> f64 {
        let (ra, rb) = (&a[i * d..(i + 1) * d], &b[k * d..(k + 1) * d]);
        let dot: f64 = ra.iter().zip(rb).map(|(&x, &y)| x * y).sum();
        let na: f64 = ra.iter().map(|&x| x * x).sum::<f64>().sqrt();
        let nb: f64 = rb.iter().map(|&x| x * x).sum::<f64>().sqrt();
        dot / (na * nb + 1e-12)
    }

    fn reweight(
        q: impl Fn(usize, usize) -> f64,
        mask: &[bool],
        sim: &dyn Fn(usize, usize) -> f64,
        m: usize,
        i: usize,
        k: usize,
    ) -> f64 {
        if !(mask[i] && mask[k]) {
            return 1.0;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in 0..m {
            if !mask[a] {
                continue;
            }
            for b in 0..m {
                if mask[b] {
                    lo = lo.min(sim(a, b));
                    hi = hi.max(sim(a, b));
                }
            }
        }
        let norm = if hi - lo > 0.0 {
            (sim(i, k) - lo) / (hi - lo)
        } else {
            0.5
        };
        (q(i, k) - norm).abs()
    }

    /// Direct-summation objective. With `mask` all false this is the plain
    /// symmetrized InfoNCE; otherwise the reweighted objective with
    /// pseudo-labels `labels` over the confident set.
    pub fn objective(
        gh: &[f64],
        gz: &[f64],
        m: usize,
        d: usize,
        mask: &[bool],
        labels: &[usize],
        tau: f64,
    ) -> f64 {
        let q = |i: usize, k: usize| -> f64 {
            if mask[i] && mask[k] && labels[i] == labels[k] {
                1.0
            } else {
                0.0
            }
        };
        let s_hz = |i: usize, k: usize| cos(gh, gz, i, k, d);
        let s_hh = |i: usize, k: usize| cos(gh, gh, i, k, d);
        let s_zz = |i: usize, k: usize| cos(gz, gz, i, k, d);
        let r_hz = |i: usize, k: usize| reweight(q, mask, &s_hz, m, i, k);
        let r_hh = |i: usize, k: usize| reweight(q, mask, &s_hh, m, i, k);
        let r_zz = |i: usize, k: usize| reweight(q, mask, &s_zz, m, i, k);

        let mut total = 0.0;
        for i in 0..m {
            // l(h_i, z_i)
            let pos = (r_hz(i, i) * s_hz(i, i) / tau).exp();
            let mut den = pos;
            for k in 0..m {
                if k == i {
                    continue;
                }
                den += (r_hz(i, k) * s_hz(i, k) / tau).exp();
                den += (r_hh(i, k) * s_hh(i, k) / tau).exp();
            }
            total += -(pos / den).ln();
            // l(z_i, h_i): cross terms theta(z_i, h_k) = s_hz(k, i)
            let mut den = pos;
            for k in 0..m {
                if k == i {
                    continue;
                }
                den += (r_hz(k, i) * s_hz(k, i) / tau).exp();
                den += (r_zz(i, k) * s_zz(i, k) / tau).exp();
            }
            total += -(pos / den).ln();
        }
        total / (2.0 * m as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use proptest::prelude::*;

    fn random_embeddings(m: usize, d: usize, rng: &mut RngState) -> Vec<f64> {
        (0..m * d).map(|_| rng.uniform_in(-1.0, 1.0)).collect()
    }

    #[test]
    fn select_confident_threshold_cases() {
        // uniform row below 0.8 threshold; peaked row above
        let p = vec![0.25, 0.25, 0.25, 0.25, 0.05, 0.9, 0.025, 0.025];
        let (mask, labels) = select_confident::<f64>(&p, 2, 4, &ConfidenceRule::Threshold(0.8));
        assert_eq!(mask, vec![false, true]);
        assert_eq!(labels[1], 1);
        // threshold 1.0 with strictly sub-1 rows: empty set
        let (mask, _) = select_confident::<f64>(&p, 2, 4, &ConfidenceRule::Threshold(1.0));
        assert!(mask.iter().all(|&b| !b));
    }

    #[test]
    fn select_confident_ties_break_low() {
        let p = vec![0.4, 0.4, 0.2];
        let (_, labels) = select_confident::<f64>(&p, 1, 3, &ConfidenceRule::Threshold(0.3));
        assert_eq!(labels[0], 0);
    }

    #[test]
    fn select_confident_per_class_top_k() {
        // class 0: rows 0 (0.9) and 1 (0.6); class 1: row 2 (0.7)
        let p = vec![0.9, 0.1, 0.6, 0.4, 0.3, 0.7];
        let (mask, _) = select_confident::<f64>(&p, 3, 2, &ConfidenceRule::PerClassTopK(1));
        assert_eq!(mask, vec![true, false, true]);
    }

    #[test]
    fn pair_label_matrix_cases() {
        let q = pair_label_matrix::<f64>(&[0, 0, 1], &[true, true, true]);
        assert_eq!(
            q,
            vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        // all confident, same label: all ones
        let q = pair_label_matrix::<f64>(&[2, 2], &[true, true]);
        assert!(q.iter().all(|&v| v == 1.0));
        // empty O: all zeros
        let q = pair_label_matrix::<f64>(&[0, 1], &[false, false]);
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reweight_direct_substitution() {
        // 2 confident nodes; sims chosen so Norm(sim_01) = 0.9
        let mask = vec![true, true];
        let sim = vec![0.0, 0.9, 0.3, 1.0]; // min 0, max 1 over OxO
        let q_pos = vec![1.0, 1.0, 1.0, 1.0];
        let r = reweight_matrix::<f64>(&q_pos, &mask, &sim);
        assert!((r[1] - 0.1).abs() < 1e-12, "easy positive down-weighted");
        let q_neg = vec![0.0; 4];
        let r = reweight_matrix::<f64>(&q_neg, &mask, &sim);
        assert!((r[1] - 0.9).abs() < 1e-12, "hard negative up-weighted");
        // non-confident endpoint keeps the plain setting
        let mask = vec![true, false];
        let r = reweight_matrix::<f64>(&q_pos, &mask, &sim);
        assert_eq!(r[1], 1.0);
        assert_eq!(r[2], 1.0);
    }

    #[test]
    fn reweight_degenerate_norm() {
        let mask = vec![true, true];
        let sim = vec![0.4; 4];
        let q = vec![1.0; 4];
        let r = reweight_matrix::<f64>(&q, &mask, &sim);
        assert!(r.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn info_nce_single_node_is_zero() {
        let gh = Tensor::from_rows(vec![vec![0.3, 0.4]]).unwrap();
        let gz = Tensor::from_rows(vec![vec![0.1, 0.9]]).unwrap();
        let signals = PairSignals::plain(&gh, &gz).unwrap();
        let l = contrastive_objective(&signals, 0.5).unwrap();
        assert_eq!(l.scalar_value().unwrap(), 0.0);
    }

    #[test]
    fn info_nce_equal_similarities_closed_form() {
        // identical embeddings: every similarity is 1
        let m = 6;
        let row = vec![1.0, 2.0, 3.0];
        let gh = Tensor::from_rows(vec![row.clone(); m]).unwrap();
        let gz = Tensor::from_rows(vec![row; m]).unwrap();
        let per_anchor = info_nce(
            &gh.cosine_sim(&gz).unwrap(),
            &gh.cosine_sim(&gh).unwrap(),
            0.5,
        )
        .unwrap();
        let expect = ((2 * m - 1) as f64).ln();
        for i in 0..m {
            assert!(
                (per_anchor.at(i, 0) - expect).abs() < 1e-10,
                "anchor {i}: {} vs {expect}",
                per_anchor.at(i, 0)
            );
        }
    }

    #[test]
    fn plain_objective_matches_brute_force() {
        let mut rng = RngState::new(42);
        let (m, d) = (6, 4);
        let gh_data = random_embeddings(m, d, &mut rng);
        let gz_data = random_embeddings(m, d, &mut rng);
        let gh = Tensor::new(m, d, gh_data.clone()).unwrap();
        let gz = Tensor::new(m, d, gz_data.clone()).unwrap();
        let signals = PairSignals::plain(&gh, &gz).unwrap();
        let got = contrastive_objective(&signals, 0.5)
            .unwrap()
            .scalar_value()
            .unwrap();
        let want = oracle::objective(
            &gh_data,
            &gz_data,
            m,
            d,
            &vec![false; m],
            &vec![0; m],
            0.5,
        );
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn reweighted_objective_matches_brute_force() {
        let mut rng = RngState::new(43);
        let (m, d) = (6, 4);
        let gh_data = random_embeddings(m, d, &mut rng);
        let gz_data = random_embeddings(m, d, &mut rng);
        // synthetic confidence: nodes 0, 2, 3 confident with labels 0, 0, 1
        let mask = vec![true, false, true, true, false, false];
        let labels = vec![0, 0, 0, 1, 1, 0];
        // build P rows realizing exactly this mask/labels under rho = 0.8
        let c = 2;
        let mut p = vec![0.0; m * c];
        for i in 0..m {
            let conf = if mask[i] { 0.9 } else { 0.6 };
            p[i * c + labels[i]] = conf;
            p[i * c + (1 - labels[i])] = 1.0 - conf;
        }
        let gh = Tensor::new(m, d, gh_data.clone()).unwrap();
        let gz = Tensor::new(m, d, gz_data.clone()).unwrap();
        let signals =
            PairSignals::reweighted(&gh, &gz, &p, c, &ConfidenceRule::Threshold(0.8)).unwrap();
        assert_eq!(signals.confident, mask);
        let got = contrastive_objective(&signals, 0.5)
            .unwrap()
            .scalar_value()
            .unwrap();
        let want = oracle::objective(&gh_data, &gz_data, m, d, &mask, &labels, 0.5);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn empty_confidence_set_reduces_to_plain() {
        let mut rng = RngState::new(44);
        let (m, d) = (5, 3);
        let gh = Tensor::new(m, d, random_embeddings(m, d, &mut rng)).unwrap();
        let gz = Tensor::new(m, d, random_embeddings(m, d, &mut rng)).unwrap();
        // uniform predictions: nothing clears a 0.8 threshold
        let p = vec![0.5; m * 2];
        let reweighted =
            PairSignals::reweighted(&gh, &gz, &p, 2, &ConfidenceRule::Threshold(0.8)).unwrap();
        assert_eq!(reweighted.num_confident(), 0);
        let plain = PairSignals::plain(&gh, &gz).unwrap();
        let a = contrastive_objective(&reweighted, 0.5).unwrap();
        let b = contrastive_objective(&plain, 0.5).unwrap();
        let (a, b) = (a.scalar_value().unwrap(), b.scalar_value().unwrap());
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn monotonic_response_to_reweighting() {
        // theta > 0 fixture: all-positive embeddings
        let mut rng = RngState::new(45);
        let (m, d) = (4, 3);
        let gh_data: Vec<f64> = (0..m * d).map(|_| rng.uniform_in(0.2, 1.0)).collect();
        let gz_data: Vec<f64> = (0..m * d).map(|_| rng.uniform_in(0.2, 1.0)).collect();
        let gh = Tensor::new(m, d, gh_data).unwrap();
        let gz = Tensor::new(m, d, gz_data).unwrap();
        let base = PairSignals::plain(&gh, &gz).unwrap();
        let value = |signals: &PairSignals<f64>| {
            contrastive_objective(signals, 0.5)
                .unwrap()
                .scalar_value()
                .unwrap()
        };
        let v0 = value(&base);
        // bump R for a negative pair (0,2) on the cross matrix
        let mut bumped = PairSignals::plain(&gh, &gz).unwrap();
        let mut r = vec![1.0; m * m];
        r[2] = 1.5;
        bumped.r_hz = Some(Tensor::new(m, m, r).unwrap());
        assert!(value(&bumped) > v0, "raising a negative weight must raise the loss");
        // shrink R for the positive pair (1,1)
        let mut shrunk = PairSignals::plain(&gh, &gz).unwrap();
        let mut r = vec![1.0; m * m];
        r[m + 1] = 0.5;
        shrunk.r_hz = Some(Tensor::new(m, m, r).unwrap());
        assert!(value(&shrunk) > v0, "shrinking a positive weight must raise the loss");
        let mut raised = PairSignals::plain(&gh, &gz).unwrap();
        let mut r = vec![1.0; m * m];
        r[m + 1] = 1.5;
        raised.r_hz = Some(Tensor::new(m, m, r).unwrap());
        assert!(value(&raised) < v0, "raising a positive weight must lower the loss");
    }

    #[test]
    fn joint_loss_cases() {
        let ce = Tensor::<f64>::scalar(1.0);
        let cl = Tensor::<f64>::scalar(2.0);
        let l = joint_loss(&ce, &cl, 0.1).unwrap().scalar_value().unwrap();
        assert!((l - 1.2).abs() < 1e-15);
        let l = joint_loss(&ce, &cl, 0.0).unwrap().scalar_value().unwrap();
        assert_eq!(l, 1.0);
        let l = joint_loss(&ce, &cl, 5.0).unwrap().scalar_value().unwrap();
        assert!((l - 11.0).abs() < 1e-15);
        assert!(joint_loss(&ce, &cl, -0.1).is_err());
    }

    #[test]
    fn loss_config_validation() {
        let mut cfg = LossConfig::default();
        assert!(cfg.validate(7).is_ok());
        cfg.confidence = ConfidenceRule::Threshold(0.1); // below 1/7
        assert!(cfg.validate(7).is_err());
        cfg.confidence = ConfidenceRule::Threshold(1.0);
        assert!(cfg.validate(7).is_ok());
        cfg.temperature = 0.0;
        assert!(cfg.validate(7).is_err());
    }

    #[test]
    fn gradients_flow_through_both_similarity_inputs() {
        use crate::gradcheck::check_scalar_fn;
        let mut rng = RngState::new(46);
        let (m, d) = (4, 3);
        let gz_data = random_embeddings(m, d, &mut rng);
        let gh0: Vec<f64> = (0..m * d).map(|_| rng.uniform_in(0.3, 1.0)).collect();
        let max_rel = check_scalar_fn(&gh0, 1e-6, |ghv| {
            let gh = crate::tensor::Tensor::new_var(m, d, ghv.to_vec()).unwrap();
            let gz = Tensor::new(m, d, gz_data.clone()).unwrap();
            let signals = PairSignals::plain(&gh, &gz).unwrap();
            contrastive_objective(&signals, 0.5).unwrap()
        });
        assert!(max_rel < 1e-6, "rel err {max_rel}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn objective_matches_oracle_on_random_fixtures(seed in 0u64..10_000) {
            let mut rng = RngState::new(seed);
            let m = 2 + (rng.next_u64() % 7) as usize; // 2..=8
            let d = 2 + (rng.next_u64() % 4) as usize;
            let c = 2 + (rng.next_u64() % 3) as usize;
            let gh_data = random_embeddings(m, d, &mut rng);
            let gz_data = random_embeddings(m, d, &mut rng);
            // random prediction rows; threshold drawn to produce empty, mixed
            // or full confidence sets
            let mut p = vec![0.0; m * c];
            for i in 0..m {
                let mut row: Vec<f64> = (0..c).map(|_| rng.uniform_in(0.0, 1.0)).collect();
                let s: f64 = row.iter().sum();
                for v in &mut row { *v /= s; }
                p[i * c..(i + 1) * c].copy_from_slice(&row);
            }
            let rho = rng.uniform_in(1.0 / c as f64 + 1e-6, 1.0);
            let rule = ConfidenceRule::Threshold(rho);
            let gh = Tensor::new(m, d, gh_data.clone()).unwrap();
            let gz = Tensor::new(m, d, gz_data.clone()).unwrap();
            let signals = PairSignals::reweighted(&gh, &gz, &p, c, &rule).unwrap();
            let got = contrastive_objective(&signals, 0.5).unwrap().scalar_value().unwrap();
            let want = oracle::objective(
                &gh_data, &gz_data, m, d,
                &signals.confident, &signals.pseudo_labels, 0.5,
            );
            prop_assert!((got - want).abs() < 1e-10, "{} vs {}", got, want);

            // typed invariants: Q symmetric with unit diagonal on O,
            // R in [0,1] on OxO and exactly 1 elsewhere
            if let Some(q_t) = &signals.q {
                let q = q_t.data();
                let r_mats = [
                    signals.r_hz.as_ref().unwrap().data(),
                    signals.r_hh.as_ref().unwrap().data(),
                    signals.r_zz.as_ref().unwrap().data(),
                ];
                for i in 0..m {
                    for k in 0..m {
                        prop_assert_eq!(q[i * m + k], q[k * m + i]);
                        let in_o = signals.confident[i] && signals.confident[k];
                        if i == k && in_o {
                            prop_assert_eq!(q[i * m + k], 1.0);
                        }
                        for r in r_mats {
                            let v = r[i * m + k];
                            if in_o {
                                prop_assert!((0.0..=1.0).contains(&v));
                            } else {
                                prop_assert_eq!(v, 1.0);
                            }
                        }
                    }
                }
            } else {
                prop_assert!(signals.confident.iter().all(|&b| !b));
            }
            // similarities within [-1, 1] (plus epsilon)
            for s in [signals.sim_hz.data(), signals.sim_hh.data(), signals.sim_zz.data()] {
                prop_assert!(s.iter().all(|&v| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&v)));
            }
        }
    }
}
