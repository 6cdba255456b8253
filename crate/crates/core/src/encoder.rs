//! Shared GNN encoders, the projection head, and the node classifier.
//!
//! All three encoders run against a [`PropagationOperator`], so the same
//! parameter set produces embeddings for the original graph (sparse
//! normalized adjacency) and for the SVD-reconstructed view (factored
//! operator). Dropout sits before each weight multiplication and is active
//! only in training mode.

use std::sync::Arc;

use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::svd::PropagationOperator;
use crate::tensor::{dropout, glorot_init, NumError, NumResult, Parameter, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Gin,
    GprGnn,
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncoderKind::Gcn => write!(f, "gcn"),
            EncoderKind::Gin => write!(f, "gin"),
            EncoderKind::GprGnn => write!(f, "gprgnn"),
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(EncoderKind::Gcn),
            "gin" => Ok(EncoderKind::Gin),
            "gprgnn" => Ok(EncoderKind::GprGnn),
            other => Err(format!("unknown encoder '{other}' (expected gcn, gin or gprgnn)")),
        }
    }
}

/// Architecture hyper-parameters shared by all encoders.
#[derive(Debug, Clone)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub in_features: usize,
    pub num_classes: usize,
    /// Message-passing depth; the implementation is two-layer.
    pub layers: usize,
    /// Hidden/embedding width m.
    pub hidden: usize,
    pub dropout: f64,
    /// Propagation steps K (GPR only).
    pub gpr_steps: usize,
    /// Teleport probability for the initial propagation weights (GPR only).
    pub gpr_alpha: f64,
    /// None: single linear classifier; Some(h): two-layer with hidden h.
    pub classifier_hidden: Option<usize>,
}

impl EncoderConfig {
    pub fn new(kind: EncoderKind, in_features: usize, num_classes: usize) -> Self {
        EncoderConfig {
            kind,
            in_features,
            num_classes,
            layers: 2,
            hidden: 64,
            dropout: 0.5,
            gpr_steps: 10,
            gpr_alpha: 0.1,
            classifier_hidden: None,
        }
    }

    fn validate(&self) -> NumResult<()> {
        if self.layers != 2 {
            return Err(NumError::InvalidParam(format!(
                "only two-layer encoders are implemented, got layers = {}",
                self.layers
            )));
        }
        if self.hidden == 0 || self.in_features == 0 || self.num_classes == 0 {
            return Err(NumError::InvalidParam(
                "hidden, in_features and num_classes must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NumError::InvalidParam(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// A dense layer `x W + b`.
struct Dense<T: Scalar> {
    w: Parameter<T>,
    b: Option<Parameter<T>>,
}

impl<T: Scalar> Dense<T> {
    fn new(inputs: usize, outputs: usize, bias: bool, rng: &mut RngState) -> NumResult<Self> {
        Ok(Dense {
            w: Parameter::new(glorot_init(inputs, outputs, rng)?),
            b: bias.then(|| Parameter::new(Tensor::zeros(1, outputs))),
        })
    }

    fn forward(&self, x: &Tensor<T>) -> NumResult<Tensor<T>> {
        let y = x.matmul(self.w.value())?;
        match &self.b {
            Some(b) => y.add_row_broadcast(b.value()),
            None => Ok(y),
        }
    }

    fn params(&self) -> Vec<&Parameter<T>> {
        match &self.b {
            Some(b) => vec![&self.w, b],
            None => vec![&self.w],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        match &mut self.b {
            Some(b) => vec![&mut self.w, b],
            None => vec![&mut self.w],
        }
    }
}

/// Two-layer graph convolution: `H = op (ReLU(op drop(X) W0)) -> drop -> W1`.
pub struct GcnEncoder<T: Scalar> {
    w0: Parameter<T>,
    w1: Parameter<T>,
    dropout: f64,
}

impl<T: Scalar> GcnEncoder<T> {
    fn new(cfg: &EncoderConfig, rng: &mut RngState) -> NumResult<Self> {
        Ok(GcnEncoder {
            w0: Parameter::new(glorot_init(cfg.in_features, cfg.hidden, rng)?),
            w1: Parameter::new(glorot_init(cfg.hidden, cfg.hidden, rng)?),
            dropout: cfg.dropout,
        })
    }

    fn forward(
        &self,
        op: &Arc<PropagationOperator<T>>,
        x: &Tensor<T>,
        rng: &mut RngState,
        training: bool,
    ) -> NumResult<Tensor<T>> {
        let h = dropout(x, self.dropout, rng, training)?;
        let h = op.apply(&h.matmul(self.w0.value())?)?.relu();
        let h = dropout(&h, self.dropout, rng, training)?;
        op.apply(&h.matmul(self.w1.value())?)
    }
}

/// One GIN layer: `h' = MLP((1 + eps) h + op h)` with a two-layer MLP.
struct GinLayer<T: Scalar> {
    eps: Parameter<T>,
    l1: Dense<T>,
    l2: Dense<T>,
}

impl<T: Scalar> GinLayer<T> {
    fn new(inputs: usize, hidden: usize, rng: &mut RngState) -> NumResult<Self> {
        Ok(GinLayer {
            eps: Parameter::new(Tensor::zeros(1, 1)),
            l1: Dense::new(inputs, hidden, true, rng)?,
            l2: Dense::new(hidden, hidden, true, rng)?,
        })
    }

    fn forward(
        &self,
        op: &Arc<PropagationOperator<T>>,
        h: &Tensor<T>,
        drop_rate: f64,
        rng: &mut RngState,
        training: bool,
    ) -> NumResult<Tensor<T>> {
        let one_plus_eps = Tensor::scalar(T::one()).add(self.eps.value())?;
        let scaled = h.mul_scalar_tensor(&one_plus_eps)?;
        let pre = scaled.add(&op.apply(h)?)?;
        let a = dropout(&pre, drop_rate, rng, training)?;
        let a = self.l1.forward(&a)?.relu();
        let a = dropout(&a, drop_rate, rng, training)?;
        self.l2.forward(&a)
    }
}

pub struct GinEncoder<T: Scalar> {
    layers: Vec<GinLayer<T>>,
    dropout: f64,
}

impl<T: Scalar> GinEncoder<T> {
    fn new(cfg: &EncoderConfig, rng: &mut RngState) -> NumResult<Self> {
        Ok(GinEncoder {
            layers: vec![
                GinLayer::new(cfg.in_features, cfg.hidden, rng)?,
                GinLayer::new(cfg.hidden, cfg.hidden, rng)?,
            ],
            dropout: cfg.dropout,
        })
    }

    fn forward(
        &self,
        op: &Arc<PropagationOperator<T>>,
        x: &Tensor<T>,
        rng: &mut RngState,
        training: bool,
    ) -> NumResult<Tensor<T>> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward(op, &h, self.dropout, rng, training)?;
        }
        Ok(h)
    }
}

/// Generalized-PageRank propagation: `H = sum_k gamma_k op^k H0` with a
/// two-layer MLP producing `H0` and trainable propagation weights `gamma`,
/// initialized `gamma_k = alpha (1-alpha)^k`, `gamma_K = (1-alpha)^K`.
pub struct GprEncoder<T: Scalar> {
    l1: Dense<T>,
    l2: Dense<T>,
    gamma: Parameter<T>,
    steps: usize,
    dropout: f64,
}

impl<T: Scalar> GprEncoder<T> {
    fn new(cfg: &EncoderConfig, rng: &mut RngState) -> NumResult<Self> {
        let k = cfg.gpr_steps;
        let alpha = cfg.gpr_alpha;
        let mut gamma = Vec::with_capacity(k + 1);
        for step in 0..k {
            gamma.push(T::from_f64(alpha * (1.0 - alpha).powi(step as i32)));
        }
        gamma.push(T::from_f64((1.0 - alpha).powi(k as i32)));
        if k == 0 {
            log::warn!("gpr_steps = 0 degenerates to the MLP scaled by gamma_0");
        }
        Ok(GprEncoder {
            l1: Dense::new(cfg.in_features, cfg.hidden, true, rng)?,
            l2: Dense::new(cfg.hidden, cfg.hidden, true, rng)?,
            gamma: Parameter::new(Tensor::new(k + 1, 1, gamma)?),
            steps: k,
            dropout: cfg.dropout,
        })
    }

    fn forward(
        &self,
        op: &Arc<PropagationOperator<T>>,
        x: &Tensor<T>,
        rng: &mut RngState,
        training: bool,
    ) -> NumResult<Tensor<T>> {
        let h = dropout(x, self.dropout, rng, training)?;
        let h = self.l1.forward(&h)?.relu();
        let h = dropout(&h, self.dropout, rng, training)?;
        let h0 = self.l2.forward(&h)?;
        let mut acc = h0.mul_scalar_tensor(&self.gamma.value().entry(0, 0)?)?;
        let mut cur = h0;
        for k in 1..=self.steps {
            cur = op.apply(&cur)?;
            let term = cur.mul_scalar_tensor(&self.gamma.value().entry(k, 0)?)?;
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }
}

/// The shared encoder `f` applied to both views.
pub enum Encoder<T: Scalar> {
    Gcn(GcnEncoder<T>),
    Gin(GinEncoder<T>),
    Gpr(GprEncoder<T>),
}

impl<T: Scalar> Encoder<T> {
    pub fn new(cfg: &EncoderConfig, rng: &mut RngState) -> NumResult<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            EncoderKind::Gcn => Encoder::Gcn(GcnEncoder::new(cfg, rng)?),
            EncoderKind::Gin => Encoder::Gin(GinEncoder::new(cfg, rng)?),
            EncoderKind::GprGnn => Encoder::Gpr(GprEncoder::new(cfg, rng)?),
        })
    }

    pub fn forward(
        &self,
        op: &Arc<PropagationOperator<T>>,
        x: &Tensor<T>,
        rng: &mut RngState,
        training: bool,
    ) -> NumResult<Tensor<T>> {
        match self {
            Encoder::Gcn(e) => e.forward(op, x, rng, training),
            Encoder::Gin(e) => e.forward(op, x, rng, training),
            Encoder::Gpr(e) => e.forward(op, x, rng, training),
        }
    }

    pub fn params(&self) -> Vec<&Parameter<T>> {
        match self {
            Encoder::Gcn(e) => vec![&e.w0, &e.w1],
            Encoder::Gin(e) => e
                .layers
                .iter()
                .flat_map(|l| {
                    let mut p = vec![&l.eps];
                    p.extend(l.l1.params());
                    p.extend(l.l2.params());
                    p
                })
                .collect(),
            Encoder::Gpr(e) => {
                let mut p = e.l1.params();
                p.extend(e.l2.params());
                p.push(&e.gamma);
                p
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        match self {
            Encoder::Gcn(e) => vec![&mut e.w0, &mut e.w1],
            Encoder::Gin(e) => e
                .layers
                .iter_mut()
                .flat_map(|l| {
                    let mut p = vec![&mut l.eps];
                    p.extend(l.l1.params_mut());
                    p.extend(l.l2.params_mut());
                    p
                })
                .collect(),
            Encoder::Gpr(e) => {
                let mut p = e.l1.params_mut();
                p.extend(e.l2.params_mut());
                p.push(&mut e.gamma);
                p
            }
        }
    }
}

/// Non-linear projection `g`: two-layer perceptron `m -> m -> m` with ReLU.
pub struct ProjectionHead<T: Scalar> {
    l1: Dense<T>,
    l2: Dense<T>,
}

impl<T: Scalar> ProjectionHead<T> {
    pub fn new(hidden: usize, rng: &mut RngState) -> NumResult<Self> {
        Ok(ProjectionHead {
            l1: Dense::new(hidden, hidden, true, rng)?,
            l2: Dense::new(hidden, hidden, true, rng)?,
        })
    }

    pub fn forward(&self, h: &Tensor<T>) -> NumResult<Tensor<T>> {
        self.l2.forward(&self.l1.forward(h)?.relu())
    }

    pub fn params(&self) -> Vec<&Parameter<T>> {
        let mut p = self.l1.params();
        p.extend(self.l2.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut p = self.l1.params_mut();
        p.extend(self.l2.params_mut());
        p
    }
}

/// Node classifier `c`: logits `m -> C` (optionally with one hidden layer).
pub struct Classifier<T: Scalar> {
    hidden: Option<Dense<T>>,
    out: Dense<T>,
}

impl<T: Scalar> Classifier<T> {
    pub fn new(
        hidden_in: usize,
        num_classes: usize,
        hidden: Option<usize>,
        rng: &mut RngState,
    ) -> NumResult<Self> {
        let (hidden, out_in) = match hidden {
            Some(h) => (Some(Dense::new(hidden_in, h, true, rng)?), h),
            None => (None, hidden_in),
        };
        Ok(Classifier {
            hidden,
            out: Dense::new(out_in, num_classes, true, rng)?,
        })
    }

    pub fn logits(&self, h: &Tensor<T>) -> NumResult<Tensor<T>> {
        let h = match &self.hidden {
            Some(l) => l.forward(h)?.relu(),
            None => h.clone(),
        };
        self.out.forward(&h)
    }

    /// Prediction matrix P with softmax rows.
    pub fn predict(&self, h: &Tensor<T>) -> NumResult<Tensor<T>> {
        Ok(self.logits(h)?.row_softmax())
    }

    pub fn params(&self) -> Vec<&Parameter<T>> {
        let mut p = Vec::new();
        if let Some(l) = &self.hidden {
            p.extend(l.params());
        }
        p.extend(self.out.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut p = Vec::new();
        if let Some(l) = &mut self.hidden {
            p.extend(l.params_mut());
        }
        p.extend(self.out.params_mut());
        p
    }
}

/// Encoder + projection head + classifier, the full trainable stack.
pub struct Model<T: Scalar> {
    pub encoder: Encoder<T>,
    pub projector: ProjectionHead<T>,
    pub classifier: Classifier<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(cfg: &EncoderConfig, rng: &mut RngState) -> NumResult<Self> {
        Ok(Model {
            encoder: Encoder::new(cfg, rng)?,
            projector: ProjectionHead::new(cfg.hidden, rng)?,
            classifier: Classifier::new(cfg.hidden, cfg.num_classes, cfg.classifier_hidden, rng)?,
        })
    }

    pub fn params(&self) -> Vec<&Parameter<T>> {
        let mut p = self.encoder.params();
        p.extend(self.projector.params());
        p.extend(self.classifier.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.projector.params_mut());
        p.extend(self.classifier.params_mut());
        p
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn accumulate_grads(&mut self, store: &crate::tensor::GradStore<T>) {
        for p in self.params_mut() {
            p.accumulate(store);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph};
    use crate::svd::SvdFactors;

    fn explicit_op(g: &Graph<f64>) -> Arc<PropagationOperator<f64>> {
        Arc::new(PropagationOperator::Explicit(Arc::new(normalize_adjacency(g))))
    }

    fn cfg(kind: EncoderKind, f: usize, hidden: usize) -> EncoderConfig {
        let mut c = EncoderConfig::new(kind, f, 2);
        c.hidden = hidden;
        c.dropout = 0.0;
        c.gpr_steps = 3;
        c
    }

    fn single_node_graph(f: usize) -> Graph<f64> {
        Graph::new(
            Tensor::from_rows(vec![(0..f).map(|i| i as f64 - 1.0).collect()]).unwrap(),
            vec![],
            vec![0],
            1,
        )
        .unwrap()
    }

    #[test]
    fn gcn_isolated_node_identity_weights() {
        let f = 3;
        let g = single_node_graph(f);
        let op = explicit_op(&g);
        let mut rng = RngState::new(1);
        let mut enc = match Encoder::new(&cfg(EncoderKind::Gcn, f, f), &mut rng).unwrap() {
            Encoder::Gcn(e) => e,
            _ => unreachable!(),
        };
        let mut eye = vec![0.0; f * f];
        for i in 0..f {
            eye[i * f + i] = 1.0;
        }
        enc.w0.set_data(eye.clone());
        enc.w1.set_data(eye);
        let h = enc
            .forward(&op, g.features(), &mut rng, false)
            .unwrap();
        let expect: Vec<f64> = g.features().data().iter().map(|&v| v.max(0.0)).collect();
        assert_eq!(h.data(), expect.as_slice());
    }

    #[test]
    fn encoders_map_zero_features_to_zero() {
        let g = Graph::new(Tensor::<f64>::zeros(4, 3), vec![(0, 1), (2, 3)], vec![0; 4], 1)
            .unwrap();
        let op = explicit_op(&g);
        let mut rng = RngState::new(2);
        for kind in [EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::GprGnn] {
            let enc = Encoder::new(&cfg(kind, 3, 5), &mut rng).unwrap();
            let h = enc.forward(&op, g.features(), &mut rng, false).unwrap();
            assert!(
                h.data().iter().all(|&v| v == 0.0),
                "{kind} broke the zero case"
            );
        }
    }

    #[test]
    fn gin_without_neighbors_is_just_the_mlp() {
        // zero operator: factored form with all-zero singular values
        let m = 3;
        let zero_op = Arc::new(PropagationOperator::Factored(Arc::new(
            SvdFactors::zero(m, 1),
        )));
        let mut rng = RngState::new(3);
        let enc = Encoder::new(&cfg(EncoderKind::Gin, 2, 4), &mut rng).unwrap();
        let x = Tensor::from_rows(vec![
            vec![0.5, -1.0],
            vec![1.5, 0.25],
            vec![-0.75, 2.0],
        ])
        .unwrap();
        let h = enc.forward(&zero_op, &x, &mut rng, false).unwrap();
        // with eps = 0 and op h = 0 each layer reduces to MLP(h)
        let Encoder::Gin(gin) = &enc else { unreachable!() };
        let mut manual = x.clone();
        for layer in &gin.layers {
            manual = layer.l2.forward(&layer.l1.forward(&manual).unwrap().relu()).unwrap();
        }
        assert_eq!(h.data(), manual.data());
    }

    #[test]
    fn gpr_gamma_one_hot_returns_h0() {
        let g = single_node_graph(2);
        let op = explicit_op(&g);
        let mut rng = RngState::new(4);
        let mut enc = match Encoder::new(&cfg(EncoderKind::GprGnn, 2, 4), &mut rng).unwrap() {
            Encoder::Gpr(e) => e,
            _ => unreachable!(),
        };
        let mut gamma = vec![0.0; enc.steps + 1];
        gamma[0] = 1.0;
        enc.gamma.set_data(gamma);
        let h = enc.forward(&op, g.features(), &mut rng, false).unwrap();
        let h0 = enc
            .l2
            .forward(&enc.l1.forward(g.features()).unwrap().relu())
            .unwrap();
        assert_eq!(h.data(), h0.data());
    }

    #[test]
    fn gpr_initial_gamma_sums_to_one() {
        let mut c = cfg(EncoderKind::GprGnn, 2, 4);
        c.gpr_steps = 10;
        c.gpr_alpha = 0.1;
        let mut rng = RngState::new(5);
        let Encoder::Gpr(enc) = Encoder::new(&c, &mut rng).unwrap() else {
            unreachable!()
        };
        let total: f64 = enc.gamma.value().data().iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "gamma sums to {total}");
    }

    #[test]
    fn encoders_are_permutation_equivariant() {
        let n = 10;
        let f = 4;
        let mut rng = RngState::new(6);
        let feats: Vec<f64> = (0..n * f).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                if rng.bernoulli(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let g = Graph::new(
            Tensor::new(n, f, feats.clone()).unwrap(),
            edges.clone(),
            vec![0; n],
            1,
        )
        .unwrap();

        // random permutation pi: new index of old node i is pi[i]
        let mut pi: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut pi);
        let mut permuted_feats = vec![0.0; n * f];
        for i in 0..n {
            permuted_feats[pi[i] * f..(pi[i] + 1) * f].copy_from_slice(&feats[i * f..(i + 1) * f]);
        }
        let permuted_edges: Vec<(u32, u32)> = edges
            .iter()
            .map(|&(a, b)| {
                let (pa, pb) = (pi[a as usize] as u32, pi[b as usize] as u32);
                (pa.min(pb), pa.max(pb))
            })
            .collect();
        let g2 = Graph::new(
            Tensor::new(n, f, permuted_feats).unwrap(),
            permuted_edges,
            vec![0; n],
            1,
        )
        .unwrap();

        for kind in [EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::GprGnn] {
            let mut init_rng = RngState::new(77);
            let enc = Encoder::new(&cfg(kind, f, 6), &mut init_rng).unwrap();
            let h1 = enc
                .forward(&explicit_op(&g), g.features(), &mut rng, false)
                .unwrap();
            let h2 = enc
                .forward(&explicit_op(&g2), g2.features(), &mut rng, false)
                .unwrap();
            for i in 0..n {
                for j in 0..6 {
                    let d = (h1.at(i, j) - h2.at(pi[i], j)).abs();
                    assert!(d < 1e-10, "{kind}: node {i} col {j} differs by {d}");
                }
            }
        }
    }

    #[test]
    fn classifier_rows_are_probabilities() {
        let mut rng = RngState::new(7);
        let c = Classifier::<f64>::new(4, 3, None, &mut rng).unwrap();
        let h = Tensor::from_rows(vec![vec![0.3, -0.4, 1.2, 0.0]]).unwrap();
        let p = c.predict(&h).unwrap();
        let sum: f64 = p.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // two-layer variant
        let c2 = Classifier::<f64>::new(4, 3, Some(8), &mut rng).unwrap();
        let p2 = c2.predict(&h).unwrap();
        let sum2: f64 = p2.data().iter().sum();
        assert!((sum2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_with_identity_weights_preserves_relu_pattern() {
        let mut rng = RngState::new(8);
        let mut head = ProjectionHead::<f64>::new(3, &mut rng).unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        head.l1.w.set_data(eye.clone());
        head.l2.w.set_data(eye);
        if let Some(b) = &mut head.l1.b {
            b.set_data(vec![0.0; 3]);
        }
        if let Some(b) = &mut head.l2.b {
            b.set_data(vec![0.0; 3]);
        }
        let h = Tensor::from_rows(vec![vec![1.0, -2.0, 0.5]]).unwrap();
        let p = head.forward(&h).unwrap();
        assert_eq!(p.data(), &[1.0, 0.0, 0.5]);
    }

    #[test]
    fn shared_parameters_receive_gradients_from_both_views() {
        let g = Graph::new(
            Tensor::from_rows(vec![vec![1.0, 0.5], vec![-0.5, 2.0], vec![0.25, 0.75]]).unwrap(),
            vec![(0, 1), (1, 2)],
            vec![0, 0, 0],
            1,
        )
        .unwrap();
        let adj = Arc::new(normalize_adjacency(&g));
        let op1 = Arc::new(PropagationOperator::Explicit(adj.clone()));
        let mut rng = RngState::new(9);
        let factors = Arc::new(
            crate::svd::approx_svd(&adj, 2, 2, 2, &mut rng).unwrap(),
        );
        let op2 = Arc::new(PropagationOperator::Factored(factors));
        let mut enc = Encoder::new(&cfg(EncoderKind::Gcn, 2, 3), &mut rng).unwrap();
        let h = enc.forward(&op1, g.features(), &mut rng, false).unwrap();
        let z = enc.forward(&op2, g.features(), &mut rng, false).unwrap();
        let loss = h.sum_all().add(&z.sum_all()).unwrap();
        let store = loss.backward().unwrap();
        for p in enc.params_mut() {
            p.accumulate(&store);
            assert!(
                p.grad().iter().any(|&v| v != 0.0),
                "parameter untouched by the two-view loss"
            );
        }
    }
}
