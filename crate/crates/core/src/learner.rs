//! Time-point sorter: four independent two-layer heads (one per point pair)
//! map an event-pair feature vector to the eight question probabilities,
//! `p = sigmoid(logit / tau)`. Training backpropagates the cross-entropy of
//! the gold relation's soft value through the compiled schema expressions.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, convert, Semantics};
use crate::logic::{Assignment, Atom, Gradient, QVector, NUM_ATOMS};
use crate::metrics;
use crate::par;
use crate::point::{enumerate_consistent_configurations, ConsistencyMode, PointConfiguration, PointPair, QuestionAnswers};
use crate::schema::{project, RelationSchema};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One point pair's head. Weights are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// `hidden x input_dim`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `2 x hidden`; row 0 produces the first question's logit.
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

impl Head {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        Head {
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: [0.0; 2],
        }
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }
}

/// Parameters of the four heads (also used to hold their gradients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SorterParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    /// Indexed by [`PointPair::index`].
    pub heads: [Head; 4],
}

impl SorterParams {
    pub fn zeros(input_dim: usize, hidden: usize, activation: Activation) -> Self {
        SorterParams {
            input_dim,
            hidden,
            activation,
            heads: std::array::from_fn(|_| Head::zeros(input_dim, hidden)),
        }
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn random(input_dim: usize, hidden: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden, activation);
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        for head in &mut p.heads {
            head.w1.iter_mut().for_each(|w| *w = rng.random_range(-b1..b1));
            head.w2.iter_mut().for_each(|w| *w = rng.random_range(-b2..b2));
        }
        p
    }

    pub fn num_params(&self) -> usize {
        4 * (self.hidden * self.input_dim + self.hidden + 2 * self.hidden + 2)
    }

    /// Parameters flattened head by head as `w1, b1, w2, b2`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.heads.iter().flat_map(|h| h.params().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        for (slot, v) in self.heads.iter_mut().flat_map(|h| h.params_mut()).zip(flat) {
            *slot = *v;
        }
    }

    fn add_scaled(&mut self, other: &SorterParams, scale: f64) {
        for (a, b) in self
            .heads
            .iter_mut()
            .flat_map(|h| h.params_mut())
            .zip(other.heads.iter().flat_map(|h| h.params()))
        {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.heads.iter().flat_map(|h| h.params()).all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

struct HeadTrace {
    hidden: Vec<f64>,
    probs: [f64; 2],
}

fn head_forward(head: &Head, x: &[f64], hidden: usize, act: Activation, tau: f64) -> HeadTrace {
    let d = x.len();
    let h: Vec<f64> = (0..hidden)
        .map(|j| {
            let row = &head.w1[j * d..(j + 1) * d];
            let z = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + head.b1[j];
            act.apply(z)
        })
        .collect();
    let probs = std::array::from_fn(|i| {
        let row = &head.w2[i * hidden..(i + 1) * hidden];
        let logit = row.iter().zip(&h).map(|(w, hj)| w * hj).sum::<f64>() + head.b2[i];
        sigmoid(logit / tau)
    });
    HeadTrace { hidden: h, probs }
}

fn forward_traces(x: &[f64], params: &SorterParams, tau: f64) -> Result<[HeadTrace; 4]> {
    params.check_input(x)?;
    Ok(std::array::from_fn(|k| {
        head_forward(&params.heads[k], x, params.hidden, params.activation, tau)
    }))
}

fn probs_of(traces: &[HeadTrace; 4]) -> QVector {
    let mut v = [0.0; NUM_ATOMS];
    for (k, t) in traces.iter().enumerate() {
        v[2 * k] = t.probs[0];
        v[2 * k + 1] = t.probs[1];
    }
    QVector::new(v).expect("sigmoid outputs lie in [0, 1]")
}

/// The eight question probabilities for one feature vector.
pub fn forward(x: &[f64], params: &SorterParams, tau: f64) -> Result<QVector> {
    Ok(probs_of(&forward_traces(x, params, tau)?))
}

/// Thresholded answers per point pair (index by [`PointPair::index`]).
pub fn hard_answers(x: &[f64], params: &SorterParams, tau: f64) -> Result<[QuestionAnswers; 4]> {
    let m = forward(x, params, tau)?.threshold();
    Ok(PointPair::ALL.map(|p| m.answers(p)))
}

/// How the gold relation's probability is formed before the log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub semantics: Semantics,
    /// Divide the gold value by the sum over all relations.
    pub normalize: bool,
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            semantics: Semantics::Product,
            normalize: false,
            epsilon: 1e-8,
        }
    }
}

/// `-ln(P(gold) + epsilon)` and its gradient with respect to the eight
/// question probabilities.
pub fn loss_with_grad(q: &QVector, gold: usize, s: &RelationSchema, cfg: &LossConfig) -> (f64, Gradient) {
    let (values, grads) = inference::relation_values_with_grad(q, s, cfg.semantics);
    let (p, dp): (f64, Gradient) = if cfg.normalize {
        let total: f64 = values.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let mut dtotal = [0.0; NUM_ATOMS];
        for g in &grads {
            for (d, x) in dtotal.iter_mut().zip(g) {
                *d += x;
            }
        }
        let p = values[gold] / total;
        let dp = std::array::from_fn(|i| (grads[gold][i] * total - values[gold] * dtotal[i]) / (total * total));
        (p, dp)
    } else {
        (values[gold], grads[gold])
    };
    let denom = p + cfg.epsilon;
    (-denom.ln(), dp.map(|d| -d / denom))
}

pub fn loss(q: &QVector, gold: &str, s: &RelationSchema, cfg: &LossConfig) -> Result<f64> {
    let g = s.require_index(gold)?;
    Ok(loss_with_grad(q, g, s, cfg).0)
}

/// Loss and exact gradient with respect to every sorter parameter.
pub fn backward(
    x: &[f64],
    params: &SorterParams,
    tau: f64,
    gold: &str,
    s: &RelationSchema,
    cfg: &LossConfig,
) -> Result<(f64, SorterParams)> {
    let g = s.require_index(gold)?;
    backward_index(x, params, tau, g, s, cfg)
}

fn backward_index(
    x: &[f64],
    params: &SorterParams,
    tau: f64,
    gold: usize,
    s: &RelationSchema,
    cfg: &LossConfig,
) -> Result<(f64, SorterParams)> {
    let traces = forward_traces(x, params, tau)?;
    let q = probs_of(&traces);
    let (value, dq) = loss_with_grad(&q, gold, s, cfg);
    let hidden = params.hidden;
    let d = params.input_dim;
    let mut grad = SorterParams::zeros(d, hidden, params.activation);
    for (k, (head, trace)) in params.heads.iter().zip(&traces).enumerate() {
        let gh = &mut grad.heads[k];
        let dlogit: [f64; 2] = std::array::from_fn(|i| {
            let p = trace.probs[i];
            dq[2 * k + i] * p * (1.0 - p) / tau
        });
        for i in 0..2 {
            gh.b2[i] = dlogit[i];
            for j in 0..hidden {
                gh.w2[i * hidden + j] = dlogit[i] * trace.hidden[j];
            }
        }
        for j in 0..hidden {
            let dh = dlogit[0] * head.w2[j] + dlogit[1] * head.w2[hidden + j];
            let dz = dh * params.activation.derivative_from_output(trace.hidden[j]);
            gh.b1[j] = dz;
            for (w, xi) in gh.w1[j * d..(j + 1) * d].iter_mut().zip(x) {
                *w = dz * xi;
            }
        }
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub tau: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub hidden: usize,
    pub activation: Activation,
    pub semantics: Semantics,
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
            tau: 10.0,
            seed: 0,
            epsilon: 1e-8,
            hidden: 8,
            activation: Activation::Tanh,
            semantics: Semantics::Product,
            normalize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return bad("epsilon must lie in (0, 1e-3]");
        }
        if self.hidden == 0 {
            return bad("hidden width must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            semantics: self.semantics,
            normalize: self.normalize,
            epsilon: self.epsilon,
        }
    }
}

/// A training or evaluation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub id: String,
    pub features: Vec<f64>,
    pub gold: String,
    pub gold_config: Option<PointConfiguration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's updates.
    pub loss: f64,
    /// Vague-excluded micro F1 on the training data after the epoch.
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: SorterParams,
    pub history: Vec<EpochStats>,
}

fn check_dataset(data: &[LabeledPair], s: &RelationSchema) -> Result<(usize, Vec<usize>)> {
    let first = data.first().ok_or(Error::EmptyDataset)?;
    let dim = first.features.len();
    let mut gold = Vec::with_capacity(data.len());
    for ex in data {
        if ex.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ex.features.len(),
            });
        }
        gold.push(s.require_index(&ex.gold).map_err(|_| Error::UnknownRelation {
            relation: ex.gold.clone(),
            context: Some(format!("record `{}`", ex.id)),
        })?);
    }
    Ok((dim, gold))
}

/// Mini-batch gradient descent on the summed batch loss. Per-example
/// gradients may be computed in parallel but are always summed in batch order.
pub fn train(data: &[LabeledPair], s: &RelationSchema, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (dim, gold) = check_dataset(data, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = SorterParams::random(dim, cfg.hidden, cfg.activation, &mut rng);
    let loss_cfg = cfg.loss_config();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = par::map(batch, |&i| {
                backward_index(&data[i].features, &params, cfg.tau, gold[i], s, &loss_cfg)
            });
            let mut total = SorterParams::zeros(dim, cfg.hidden, cfg.activation);
            for r in results {
                let (l, g) = r?;
                loss_sum += l;
                total.add_scaled(&g, 1.0);
            }
            params.add_scaled(&total, -cfg.learning_rate);
        }
        let predicted = predict_labels(&params, data, s, cfg.tau, cfg.semantics)?;
        let golds: Vec<&str> = data.iter().map(|e| e.gold.as_str()).collect();
        let f1 = metrics::micro_f1_excluding_vague(&golds, &predicted, s.vague_name())?.f1;
        log::debug!("epoch {epoch}: loss {:.6} micro-F1 {f1:.4}", loss_sum / data.len() as f64);
        history.push(EpochStats {
            epoch,
            loss: loss_sum / data.len() as f64,
            micro_f1: f1,
        });
    }
    Ok(TrainOutcome { params, history })
}

/// Soft-argmax relation for every example.
pub fn predict_labels<'a>(
    params: &SorterParams,
    data: &[LabeledPair],
    s: &'a RelationSchema,
    tau: f64,
    semantics: Semantics,
) -> Result<Vec<&'a str>> {
    par::map(data, |ex| forward(&ex.features, params, tau).map(|q| inference::predict(&q, s, semantics)))
        .into_iter()
        .collect()
}

/// Threshold-then-match relation for every example.
pub fn convert_labels<'a>(params: &SorterParams, data: &[LabeledPair], s: &'a RelationSchema, tau: f64) -> Result<Vec<&'a str>> {
    par::map(data, |ex| forward(&ex.features, params, tau).map(|q| convert(q.threshold(), s).relation))
        .into_iter()
        .collect()
}

/// Consistent configurations whose projection under `s` is unambiguous.
pub fn synth_configurations(s: &RelationSchema) -> Vec<PointConfiguration> {
    enumerate_consistent_configurations(ConsistencyMode::Satisfiable)
        .into_iter()
        .filter(|c| !convert(Assignment::from_configuration(c), s).ambiguous)
        .collect()
}

/// Synthetic separable data. Each configuration gets a fixed anchor in
/// `R^dim`: a seeded Gaussian map applied to the +-1 encoding of its eight
/// question answers, so every answer is a linear function of the anchor.
/// Examples are anchors plus isotropic noise, labelled by projecting their
/// configuration through `s`.
pub fn synth_generate(n: usize, dim: usize, noise_sigma: f64, seed: u64, s: &RelationSchema) -> Vec<LabeledPair> {
    let configs = synth_configurations(s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (NUM_ATOMS as f64).sqrt();
    let map: Vec<[f64; NUM_ATOMS]> = (0..dim)
        .map(|_| std::array::from_fn(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng)))
        .collect();
    let anchors: Vec<Vec<f64>> = configs
        .iter()
        .map(|c| {
            let m = Assignment::from_configuration(c);
            map.iter()
                .map(|row| (0..NUM_ATOMS).map(|a| if m.get(Atom::from_index(a)) { row[a] } else { -row[a] }).sum())
                .collect()
        })
        .collect();
    (0..n)
        .map(|i| {
            let k = rng.random_range(0..configs.len());
            let features = anchors[k]
                .iter()
                .map(|a| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    a + noise_sigma * z
                })
                .collect();
            LabeledPair {
                id: format!("synth-{i}"),
                features,
                gold: project(&configs[k], s).to_string(),
                gold_config: Some(configs[k]),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub tau: f64,
    pub schema: String,
    pub params: SorterParams,
}

impl Checkpoint {
    pub fn new(params: SorterParams, tau: f64, schema: impl Into<String>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            tau,
            schema: schema.into(),
            params,
        }
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(r)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                expected: CHECKPOINT_VERSION,
                found,
            });
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        let p = &ckpt.params;
        let shapes_ok = p.heads.iter().all(|h| {
            h.w1.len() == p.hidden * p.input_dim && h.b1.len() == p.hidden && h.w2.len() == 2 * p.hidden
        });
        if !shapes_ok || p.hidden == 0 || !p.is_finite() || !(ckpt.tau > 0.0) {
            return Err(Error::InvalidConfig("checkpoint weights have inconsistent shapes or values".into()));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::builtin;
    use approx::assert_abs_diff_eq;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn zero_params_give_one_half() {
        let p = SorterParams::zeros(6, 4, Activation::Tanh);
        let q = forward(&[0.3; 6], &p, 10.0).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.5));
        assert_eq!(hard_answers(&[0.3; 6], &p, 10.0).unwrap(), [QuestionAnswers::new(false, false); 4]);
    }

    #[test]
    fn large_tau_flattens() {
        let p = SorterParams::random(6, 4, Activation::Tanh, &mut rng());
        let x = [0.5, -1.0, 2.0, 0.1, 0.0, 1.5];
        let near: f64 = forward(&x, &p, 1e6).unwrap().values().iter().map(|v| (v - 0.5).abs()).sum();
        let far: f64 = forward(&x, &p, 1.0).unwrap().values().iter().map(|v| (v - 0.5).abs()).sum();
        assert!(near < 1e-5);
        assert!(far > near);
    }

    #[test]
    fn tau_scale_invariance() {
        let p = SorterParams::random(6, 4, Activation::Tanh, &mut rng());
        let mut doubled = p.clone();
        for h in &mut doubled.heads {
            h.w2.iter_mut().for_each(|w| *w *= 2.0);
            h.b2.iter_mut().for_each(|b| *b *= 2.0);
        }
        let x = [0.5, -1.0, 2.0, 0.1, 0.0, 1.5];
        let a = forward(&x, &p, 3.0).unwrap();
        let b = forward(&x, &doubled, 6.0).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = SorterParams::zeros(6, 4, Activation::Tanh);
        assert!(matches!(
            forward(&[0.0; 5], &p, 1.0),
            Err(Error::DimensionMismatch { expected: 6, found: 5 })
        ));
    }

    #[test]
    fn loss_examples() {
        let matres = builtin::matres();
        let cfg = LossConfig::default();
        let mut v = [0.0; NUM_ATOMS];
        v[0] = 1.0;
        let exact = QVector::new(v).unwrap();
        assert_abs_diff_eq!(loss(&exact, "Before", matres, &cfg).unwrap(), -(1.0f64 + 1e-8).ln());
        let half = QVector::uniform(0.5);
        assert_abs_diff_eq!(loss(&half, "Before", matres, &cfg).unwrap(), -(0.25f64 + 1e-8).ln(), epsilon = 1e-12);
        assert!(matches!(loss(&half, "Includes", matres, &cfg), Err(Error::UnknownRelation { .. })));
    }

    #[test]
    fn loss_monotone_towards_gold() {
        let matres = builtin::matres();
        let cfg = LossConfig::default();
        let mut prev = f64::INFINITY;
        for step in 0..=20 {
            let t = 0.5 + 0.5 * step as f64 / 20.0;
            let mut v = [0.5; NUM_ATOMS];
            v[0] = t;
            v[1] = 1.0 - t;
            let l = loss(&QVector::new(v).unwrap(), "Before", matres, &cfg).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn saturated_correct_prediction_has_zero_gradient() {
        let tb = builtin::tbdense();
        let mut p = SorterParams::random(4, 3, Activation::Tanh, &mut rng());
        // Push the es head's second logit to -inf: Before holds with certainty.
        p.heads[PointPair::ES.index()].b2 = [0.0, -1e6];
        let (l, g) = backward(&[0.1, 0.2, 0.3, 0.4], &p, 1.0, "Before", tb, &LossConfig::default()).unwrap();
        assert!(l < 1e-7);
        assert!(g.to_flat().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn normalized_loss_gradient_matches_differences() {
        let tb = builtin::tbdense();
        let cfg = LossConfig {
            normalize: true,
            ..LossConfig::default()
        };
        let q = QVector::new([0.3, 0.6, 0.2, 0.9, 0.55, 0.4, 0.7, 0.1]).unwrap();
        let gold = tb.require_index("Includes").unwrap();
        let (_, g) = loss_with_grad(&q, gold, tb, &cfg);
        for i in 0..NUM_ATOMS {
            let mut plus = *q.values();
            let mut minus = *q.values();
            plus[i] += 1e-6;
            minus[i] -= 1e-6;
            let lp = loss_with_grad(&QVector::new(plus).unwrap(), gold, tb, &cfg).0;
            let lm = loss_with_grad(&QVector::new(minus).unwrap(), gold, tb, &cfg).0;
            assert_abs_diff_eq!(g[i], (lp - lm) / 2e-6, epsilon = 1e-6);
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig { tau: 0.0, ..Default::default() },
            TrainConfig { epsilon: 0.0, ..Default::default() },
            TrainConfig { epsilon: 1e-2, ..Default::default() },
            TrainConfig { hidden: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn train_rejects_bad_data() {
        let tb = builtin::tbdense();
        assert!(matches!(train(&[], tb, &TrainConfig::default()), Err(Error::EmptyDataset)));
        let a = LabeledPair {
            id: "a".into(),
            features: vec![0.0; 3],
            gold: "Before".into(),
            gold_config: None,
        };
        let b = LabeledPair {
            id: "b".into(),
            features: vec![0.0; 4],
            ..a.clone()
        };
        assert!(matches!(
            train(&[a, b], tb, &TrainConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn synth_without_noise_equals_anchors() {
        let tb = builtin::tbdense();
        let clean = synth_generate(200, 8, 0.0, 3, tb);
        let noisy = synth_generate(200, 8, 0.3, 3, tb);
        for (a, b) in clean.iter().zip(&clean[1..]) {
            if a.gold_config == b.gold_config {
                assert_eq!(a.features, b.features);
            }
        }
        for (c, n) in clean.iter().zip(&noisy) {
            assert_eq!(c.gold, n.gold);
            assert_eq!(c.gold_config, n.gold_config);
        }
    }

    #[test]
    fn checkpoint_round_trip_and_version_check() {
        let p = SorterParams::random(5, 3, Activation::Sigmoid, &mut rng());
        let ckpt = Checkpoint::new(p, 10.0, "tbdense");
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        assert_eq!(Checkpoint::read_from(buf.as_slice()).unwrap(), ckpt);
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["format_version"] = 99.into();
        let bad = serde_json::to_vec(&v).unwrap();
        assert!(matches!(
            Checkpoint::read_from(bad.as_slice()),
            Err(Error::CheckpointVersion { found: 99, .. })
        ));
    }
}
