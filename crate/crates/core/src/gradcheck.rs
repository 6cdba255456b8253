//! Finite-difference gradient verification.
//!
//! Central differences are the independent oracle for every backward rule in
//! this crate: `df/dx_i ~ (f(x + h e_i) - f(x - h e_i)) / 2h`. The helpers
//! here are used by unit tests and by the `gradcheck` CLI command, which runs
//! the full encoder/objective suite on synthetic fixtures.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Relative error with the denominator floored at `1e-6` so exact zeros
/// compare cleanly; pairs below `1e-8` in magnitude count as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m < 1e-8 {
        return 0.0;
    }
    (a - b).abs() / m.max(1e-6)
}

/// Check the gradient of a scalar-valued tensor function of one leaf.
///
/// `build` must construct the loss from the given coordinate values, creating
/// exactly one gradient-tracked leaf (`Tensor::new_var`) from them. Returns
/// the maximum relative error between the analytic gradient and central
/// finite differences with step `h`.
pub fn check_scalar_fn<F>(x0: &[f64], h: f64, build: F) -> f64
where
    F: Fn(&[f64]) -> Tensor<f64>,
{
    let loss = build(x0);
    let store = loss.backward().expect("scalar loss");
    let analytic = store
        .single_leaf()
        .expect("build must create exactly one gradient-tracked leaf")
        .to_vec();
    assert_eq!(analytic.len(), x0.len());

    let mut max_rel = 0.0f64;
    let mut x = x0.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = build(&x).scalar_value().expect("scalar loss");
        x[i] = orig - h;
        let fm = build(&x).scalar_value().expect("scalar loss");
        x[i] = orig;
        let fd = (fp - fm) / (2.0 * h);
        max_rel = max_rel.max(rel_err(analytic[i], fd));
    }
    max_rel
}

/// Central finite differences of an arbitrary scalar function, one coordinate
/// vector at a time. Used where the differentiated quantity is produced by a
/// whole training-step forward rather than a single tensor expression.
pub fn finite_diff<F>(x0: &[f64], h: f64, mut eval: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = eval(&x);
        x[i] = orig - h;
        let fm = eval(&x);
        x[i] = orig;
        out.push((fp - fm) / (2.0 * h));
    }
    out
}

/// Maximum relative error between an analytic gradient and its
/// finite-difference estimate.
pub fn max_rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(fd)
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max)
}

impl<T: Scalar> crate::tensor::GradStore<T> {
    /// The gradient of the single leaf, if exactly one leaf received one.
    pub fn single_leaf(&self) -> Option<&[T]> {
        let mut it = self.leaf_grads();
        let first = it.next()?;
        if it.next().is_some() {
            return None;
        }
        Some(first)
    }
}

// ---- full-pipeline suite ----

use std::sync::Arc;

use crate::encoder::{EncoderConfig, EncoderKind, Model};
use crate::graph::{normalize_adjacency, synthetic_community_graph, Graph, NormalizedAdjacency};
use crate::loss::{contrastive_objective, joint_loss, ConfidenceRule, PairSignals};
use crate::rng::RngState;
use crate::svd::{approx_svd, random_augment, PropagationOperator};
use crate::tensor::NumResult;
use crate::train::Mode;

/// One checked configuration and its worst parameter-gradient error.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub params_checked: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn worst(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Reweighting constants captured at the base point. Gradients do not flow
/// through the reweighting matrices, so the finite-difference oracle must
/// hold them fixed while perturbing parameters.
struct FrozenSignals {
    confident: Vec<bool>,
    pseudo_labels: Vec<usize>,
    q: Option<Tensor<f64>>,
    r_hz: Option<Tensor<f64>>,
    r_hh: Option<Tensor<f64>>,
    r_zz: Option<Tensor<f64>>,
}

struct ModeFixture {
    graph: Graph<f64>,
    op1: Arc<PropagationOperator<f64>>,
    second: Option<(Arc<PropagationOperator<f64>>, Tensor<f64>)>,
    train_idx: Vec<usize>,
    lambda: f64,
    tau: f64,
}

impl ModeFixture {
    fn loss(&self, model: &Model<f64>, frozen: Option<&FrozenSignals>) -> NumResult<Tensor<f64>> {
        let mut rng = RngState::new(0); // dropout is off; never drawn from
        let x = self.graph.features();
        let h = model.encoder.forward(&self.op1, x, &mut rng, false)?;
        let logits = model.classifier.logits(&h)?;
        let l_ce = logits.cross_entropy_logits(self.graph.labels(), &self.train_idx)?;
        let Some((op2, x2)) = &self.second else {
            return Ok(l_ce);
        };
        let z = model.encoder.forward(op2, x2, &mut rng, false)?;
        let gh = model.projector.forward(&h)?;
        let gz = model.projector.forward(&z)?;
        let signals = match frozen {
            Some(f) => PairSignals {
                sim_hz: gh.cosine_sim(&gz)?,
                sim_hh: gh.cosine_sim(&gh)?,
                sim_zz: gz.cosine_sim(&gz)?,
                confident: f.confident.clone(),
                pseudo_labels: f.pseudo_labels.clone(),
                q: f.q.clone(),
                r_hz: f.r_hz.clone(),
                r_hh: f.r_hh.clone(),
                r_zz: f.r_zz.clone(),
            },
            None => PairSignals::plain(&gh, &gz)?,
        };
        let l_cl = contrastive_objective(&signals, self.tau)?;
        joint_loss(&l_ce, &l_cl, self.lambda)
    }
}

fn build_fixture(kind: EncoderKind, mode: Mode, seed: u64) -> (ModeFixture, Model<f64>) {
    let mut rng = RngState::new(seed);
    let graph: Graph<f64> = synthetic_community_graph(12, 7, 3, 0.6, 0.15, &mut rng);
    let adj: Arc<NormalizedAdjacency<f64>> = Arc::new(normalize_adjacency(&graph));
    let op1 = Arc::new(PropagationOperator::Explicit(adj.clone()));
    let second = match mode {
        Mode::Baseline => None,
        Mode::RandomAug => {
            let (adj2, x2) = random_augment(&graph, 0.2, 0.2, &mut rng).expect("valid rates");
            Some((
                Arc::new(PropagationOperator::Explicit(Arc::new(adj2))),
                x2,
            ))
        }
        Mode::WoLgdl | Mode::Full => {
            let factors = approx_svd(&adj, 3, 4, 2, &mut rng).expect("valid rank");
            Some((
                Arc::new(PropagationOperator::Factored(Arc::new(factors))),
                graph.features().clone(),
            ))
        }
    };
    let mut cfg = EncoderConfig::new(kind, graph.num_features(), graph.num_classes());
    cfg.hidden = 8;
    cfg.dropout = 0.0;
    cfg.gpr_steps = 4;
    let model = Model::new(&cfg, &mut rng).expect("valid config");
    let fixture = ModeFixture {
        train_idx: (0..graph.num_nodes()).step_by(2).collect(),
        graph,
        op1,
        second,
        lambda: 0.1,
        tau: 0.5,
    };
    (fixture, model)
}

/// Gradient-check the full joint objective of one encoder/mode combination
/// on a random 12-node, 7-feature, 3-class fixture. Central differences with
/// step `h`; returns the maximum relative error over every parameter entry.
pub fn check_mode_objective(kind: EncoderKind, mode: Mode, h: f64, seed: u64) -> SuiteEntry {
    let (fixture, mut model) = build_fixture(kind, mode, seed);
    // Reweighting constants (full mode) are captured once at the base point.
    let frozen = if mode == Mode::Full {
        let mut rng = RngState::new(0);
        let x = fixture.graph.features();
        let h0 = model
            .encoder
            .forward(&fixture.op1, x, &mut rng, false)
            .expect("forward");
        let logits = model.classifier.logits(&h0).expect("logits");
        let (op2, x2) = fixture.second.as_ref().expect("second view");
        let z = model.encoder.forward(op2, x2, &mut rng, false).expect("forward");
        let gh = model.projector.forward(&h0).expect("projection");
        let gz = model.projector.forward(&z).expect("projection");
        let p = logits.row_softmax_values();
        let signals = PairSignals::reweighted(
            &gh,
            &gz,
            &p,
            fixture.graph.num_classes(),
            // modest threshold so the fixture actually has confident pairs
            &ConfidenceRule::Threshold(0.4),
        )
        .expect("signals");
        Some(FrozenSignals {
            confident: signals.confident.clone(),
            pseudo_labels: signals.pseudo_labels.clone(),
            q: signals.q.clone(),
            r_hz: signals.r_hz.clone(),
            r_hh: signals.r_hh.clone(),
            r_zz: signals.r_zz.clone(),
        })
    } else {
        None
    };

    let loss = fixture.loss(&model, frozen.as_ref()).expect("loss");
    let store = loss.backward().expect("backward");
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| {
            store
                .get(p.value())
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; p.grad().len()])
        })
        .collect();

    let num_params = model.params().len();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for pi in 0..num_params {
        let base = model.params()[pi].value().data().to_vec();
        for ci in 0..base.len() {
            let mut perturbed = base.clone();
            perturbed[ci] = base[ci] + h;
            model.params_mut()[pi].set_data(perturbed.clone());
            let fp = fixture
                .loss(&model, frozen.as_ref())
                .expect("loss")
                .scalar_value()
                .expect("scalar");
            perturbed[ci] = base[ci] - h;
            model.params_mut()[pi].set_data(perturbed);
            let fm = fixture
                .loss(&model, frozen.as_ref())
                .expect("loss")
                .scalar_value()
                .expect("scalar");
            model.params_mut()[pi].set_data(base.clone());
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max(rel_err(analytic[pi][ci], fd));
            checked += 1;
        }
    }
    SuiteEntry {
        name: format!("{kind}/{mode}"),
        max_rel_err: worst,
        params_checked: checked,
    }
}

/// The full suite: every encoder and every mode's joint objective.
pub fn encoder_objective_suite(h: f64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport::default();
    for kind in [EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::GprGnn] {
        for mode in crate::train::ALL_MODES {
            report.entries.push(check_mode_objective(kind, mode, h, seed));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_diff_matches_simple_function() {
        // f(x) = sum(x^2): df/dx = 2x
        let x0 = [1.0, -2.0, 0.5];
        let fd = finite_diff(&x0, 1e-6, |x| x.iter().map(|v| v * v).sum());
        let analytic: Vec<f64> = x0.iter().map(|v| 2.0 * v).collect();
        assert!(max_rel_err(&analytic, &fd) < 1e-8);
    }

    #[test]
    fn full_objective_gradcheck_one_config() {
        // the whole matrix runs in the acceptance suite; spot-check here
        let entry = check_mode_objective(EncoderKind::Gcn, Mode::Full, 1e-5, 42);
        assert!(
            entry.max_rel_err < 1e-4,
            "{}: {}",
            entry.name,
            entry.max_rel_err
        );
        assert!(entry.params_checked > 100);
    }
}
