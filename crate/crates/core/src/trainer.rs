//! Softmax classifier (linear or one tanh hidden layer) trained by seeded
//! mini-batch gradient descent with early stopping on tune-set referable AUC.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassScheme, Dataset, Example};
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::scalar::{softmax_into, Scalar};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive epochs without tune-AUC improvement before stopping.
    pub patience: usize,
    /// 0 for a linear softmax model.
    pub hidden_units: usize,
    pub l2: f64,
    /// Per-epoch inverse-time decay: `lr / (1 + decay * (epoch - 1))`.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.05,
            batch_size: 32,
            max_epochs: 40,
            patience: 5,
            hidden_units: 16,
            l2: 1e-4,
            lr_decay: 0.0,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.l2 >= 0.0) || !(self.lr_decay >= 0.0) {
            return bad("l2 and lr_decay must be non-negative");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Hyperparams { seed, ..self.clone() }
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn uniform(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut layer = Dense::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = T::lit(rng.random_range(-bound..=bound));
        }
        layer
    }

    #[inline]
    fn forward(&self, x: &[T], out: &mut [T]) {
        for (o, (row, &b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v);
        }
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    /// 1-based epoch whose parameters were kept.
    pub stopped_epoch: usize,
    pub epochs_run: usize,
    pub tune_auc_at_stop: f64,
    pub train_loss_history: Vec<f64>,
    pub tune_auc_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    scheme: ClassScheme,
    feature_dim: usize,
    hidden: Option<Dense<T>>,
    output: Dense<T>,
    pub meta: TrainingMeta,
}

/// Scratch buffers for one forward/backward pass.
struct Workspace<T> {
    hidden: Vec<T>,
    logits: Vec<T>,
    probs: Vec<T>,
    d_logits: Vec<T>,
    d_hidden: Vec<T>,
}

impl<T: Scalar> Model<T> {
    /// Model with all weights and biases zero; predicts the uniform vector.
    pub fn zeros(scheme: ClassScheme, feature_dim: usize, hidden_units: usize) -> Self {
        let k = scheme.num_classes();
        let (hidden, out_in) = if hidden_units > 0 {
            (Some(Dense::zeros(feature_dim, hidden_units)), hidden_units)
        } else {
            (None, feature_dim)
        };
        Model {
            scheme,
            feature_dim,
            hidden,
            output: Dense::zeros(out_in, k),
            meta: TrainingMeta::default(),
        }
    }

    /// Seeded uniform initialization in `±1/sqrt(fan_in)`; biases start at 0.
    pub fn init(scheme: ClassScheme, feature_dim: usize, hidden_units: usize, rng: &mut impl Rng) -> Self {
        let k = scheme.num_classes();
        let (hidden, out_in) = if hidden_units > 0 {
            (Some(Dense::uniform(feature_dim, hidden_units, rng)), hidden_units)
        } else {
            (None, feature_dim)
        };
        Model {
            scheme,
            feature_dim,
            hidden,
            output: Dense::uniform(out_in, k, rng),
            meta: TrainingMeta::default(),
        }
    }

    /// Linear softmax model from explicit `classes × features` weights.
    pub fn linear(scheme: ClassScheme, weights: Vec<Vec<T>>, bias: Vec<T>) -> Result<Self> {
        let k = scheme.num_classes();
        let d = weights.first().map_or(0, Vec::len);
        if weights.len() != k || bias.len() != k || d == 0 || weights.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidConfig("linear weights must be classes × features".into()));
        }
        Ok(Model {
            scheme,
            feature_dim: d,
            hidden: None,
            output: Dense {
                inputs: d,
                outputs: k,
                weights: weights.into_iter().flatten().collect(),
                bias,
            },
            meta: TrainingMeta::default(),
        })
    }

    pub fn scheme(&self) -> &ClassScheme {
        &self.scheme
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden.as_ref().map_or(0, |h| h.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.output.len() + self.hidden.as_ref().map_or(0, Dense::len)
    }

    fn workspace(&self) -> Workspace<T> {
        let k = self.scheme.num_classes();
        let h = self.hidden_units();
        Workspace {
            hidden: vec![T::zero(); h],
            logits: vec![T::zero(); k],
            probs: vec![T::zero(); k],
            d_logits: vec![T::zero(); k],
            d_hidden: vec![T::zero(); h],
        }
    }

    fn forward(&self, x: &[T], ws: &mut Workspace<T>) {
        match &self.hidden {
            Some(layer) => {
                layer.forward(x, &mut ws.hidden);
                for v in &mut ws.hidden {
                    *v = v.tanh();
                }
                self.output.forward(&ws.hidden, &mut ws.logits);
            }
            None => self.output.forward(x, &mut ws.logits),
        }
        softmax_into(&ws.logits, &mut ws.probs);
    }

    fn check_dim(&self, features: &[T]) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Raw class logits.
    pub fn logits(&self, features: &[T]) -> Result<Vec<T>> {
        self.check_dim(features)?;
        let mut ws = self.workspace();
        self.forward(features, &mut ws);
        Ok(ws.logits)
    }

    /// Softmax distribution over classes.
    pub fn predict(&self, features: &[T]) -> Result<Vec<T>> {
        self.check_dim(features)?;
        let mut ws = self.workspace();
        self.forward(features, &mut ws);
        Ok(ws.probs)
    }

    /// Summed probability of the referable classes.
    pub fn referable_score(&self, features: &[T]) -> Result<T> {
        Ok(referable_mass(&self.predict(features)?, &self.scheme))
    }

    pub fn predict_all(&self, dataset: &Dataset<T>) -> Result<Vec<Vec<T>>> {
        let mut ws = self.workspace();
        dataset
            .iter()
            .map(|e| {
                self.check_dim(&e.features)?;
                self.forward(&e.features, &mut ws);
                Ok(ws.probs.clone())
            })
            .collect()
    }

    pub fn referable_scores(&self, dataset: &Dataset<T>) -> Result<Vec<T>> {
        Ok(self
            .predict_all(dataset)?
            .iter()
            .map(|p| referable_mass(p, &self.scheme))
            .collect())
    }

    /// Binary AUC of referable scores against binarized observed labels.
    pub fn referable_auc(&self, dataset: &Dataset<T>) -> Result<T> {
        Ok(roc_auc(&self.referable_scores(dataset)?, &dataset.binary_labels())?.auc)
    }

    /// Parameters in a fixed order: hidden weights, hidden bias, output
    /// weights, output bias.
    pub fn flat_params(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.num_params());
        if let Some(h) = &self.hidden {
            v.extend_from_slice(&h.weights);
            v.extend_from_slice(&h.bias);
        }
        v.extend_from_slice(&self.output.weights);
        v.extend_from_slice(&self.output.bias);
        v
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        let hidden = self
            .hidden
            .iter_mut()
            .flat_map(|h| h.weights.iter_mut().chain(h.bias.iter_mut()));
        hidden.chain(self.output.weights.iter_mut().chain(self.output.bias.iter_mut()))
    }

    /// Accumulates the cross-entropy gradient of one example into `grad`
    /// (same layout as the model) and returns its loss.
    fn backprop(&self, x: &[T], label: usize, ws: &mut Workspace<T>, grad: &mut Model<T>) -> T {
        self.forward(x, ws);
        let loss = -ws.probs[label].max(T::min_positive_value()).ln();
        for (j, d) in ws.d_logits.iter_mut().enumerate() {
            *d = ws.probs[j] - if j == label { T::one() } else { T::zero() };
        }
        let out_in: &[T] = if self.hidden.is_some() { &ws.hidden } else { x };
        let go = &mut grad.output;
        for (j, &d) in ws.d_logits.iter().enumerate() {
            go.bias[j] = go.bias[j] + d;
            let row = &mut go.weights[j * go.inputs..(j + 1) * go.inputs];
            for (g, &a) in row.iter_mut().zip(out_in) {
                *g = *g + d * a;
            }
        }
        if let (Some(layer), Some(gh)) = (&self.hidden, grad.hidden.as_mut()) {
            for (i, dh) in ws.d_hidden.iter_mut().enumerate() {
                let back = ws
                    .d_logits
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (j, &d)| acc + d * self.output.weights[j * self.output.inputs + i]);
                let h = ws.hidden[i];
                *dh = back * (T::one() - h * h);
            }
            for (i, &da) in ws.d_hidden.iter().enumerate() {
                gh.bias[i] = gh.bias[i] + da;
                let row = &mut gh.weights[i * layer.inputs..(i + 1) * layer.inputs];
                for (g, &v) in row.iter_mut().zip(x) {
                    *g = *g + da * v;
                }
            }
        }
        loss
    }

    fn zeroed_like(&self) -> Model<T> {
        Model::zeros(self.scheme.clone(), self.feature_dim, self.hidden_units())
    }

    /// Mean cross-entropy over `batch` (no weight decay).
    pub fn loss(&self, batch: &[Example<T>]) -> Result<T> {
        let mut ws = self.workspace();
        let mut total = T::zero();
        for e in batch {
            self.check_dim(&e.features)?;
            self.forward(&e.features, &mut ws);
            total = total - ws.probs[e.label].max(T::min_positive_value()).ln();
        }
        Ok(total / T::from_count(batch.len().max(1)))
    }
}

/// Summed probability over the scheme's positive classes.
pub fn referable_mass<T: Scalar>(probs: &[T], scheme: &ClassScheme) -> T {
    scheme.positive_indices().iter().map(|&i| probs[i]).sum()
}

/// Trains on the observed labels of `train_set`, early-stopping on the
/// referable AUC of `tune_set`, and returns the best-epoch snapshot.
pub fn train<T: Scalar>(train_set: &Dataset<T>, tune_set: &Dataset<T>, hp: &Hyperparams) -> Result<Model<T>> {
    hp.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_set.scheme() != tune_set.scheme() {
        return Err(Error::InvalidDataset("train and tune sets use different schemes".into()));
    }
    if train_set.feature_dim() != tune_set.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: train_set.feature_dim(),
            got: tune_set.feature_dim(),
        });
    }
    let tune_labels = tune_set.binary_labels();
    if tune_labels.iter().all(|&l| l) || tune_labels.iter().all(|&l| !l) {
        return Err(Error::DegenerateTuneSet);
    }

    let mut rng = seed::rng_from(hp.seed);
    let mut model = Model::init(
        train_set.scheme().clone(),
        train_set.feature_dim(),
        hp.hidden_units,
        &mut rng,
    );
    let mut grad = model.zeroed_like();
    let mut ws = model.workspace();
    let mut order = train_set.id_order();
    let examples = train_set.examples();
    let l2 = T::lit(hp.l2);

    let mut best: Option<(T, Model<T>, usize)> = None;
    let mut since_best = 0;
    let mut losses = Vec::new();
    let mut aucs = Vec::new();
    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut rng);
        let lr = T::lit(hp.learning_rate / (1.0 + hp.lr_decay * (epoch - 1) as f64));
        let mut epoch_loss = T::zero();
        for batch in order.chunks(hp.batch_size) {
            for g in grad.params_mut() {
                *g = T::zero();
            }
            for &i in batch {
                let e = &examples[i];
                epoch_loss = epoch_loss + model.backprop(&e.features, e.label, &mut ws, &mut grad);
            }
            let scale = lr / T::from_count(batch.len());
            apply_update(&mut model, &grad, scale, lr * l2);
        }
        let epoch_loss = epoch_loss / T::from_count(examples.len());
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        losses.push(epoch_loss.as_f64());
        let auc = model.referable_auc(tune_set).map_err(|e| match e {
            Error::NonFiniteScore(_) => Error::Diverged { epoch },
            other => other,
        })?;
        aucs.push(auc.as_f64());
        // A tie does not reset patience but does move the snapshot forward,
        // so a saturated tune AUC keeps the longest-trained parameters.
        match &best {
            Some((b, _, _)) if auc < *b => since_best += 1,
            Some((b, _, _)) if auc == *b => {
                best = Some((auc, model.clone(), epoch));
                since_best += 1;
            }
            _ => {
                best = Some((auc, model.clone(), epoch));
                since_best = 0;
            }
        }
        if since_best >= hp.patience {
            break;
        }
    }
    let (auc, mut kept, epoch) = best.expect("at least one epoch ran");
    kept.meta = TrainingMeta {
        seed: hp.seed,
        stopped_epoch: epoch,
        epochs_run: losses.len(),
        tune_auc_at_stop: auc.as_f64(),
        train_loss_history: losses,
        tune_auc_history: aucs,
    };
    Ok(kept)
}

/// `params -= scale * grad + decay * weights` (decay skips biases).
fn apply_update<T: Scalar>(model: &mut Model<T>, grad: &Model<T>, scale: T, decay: T) {
    fn step<T: Scalar>(layer: &mut Dense<T>, g: &Dense<T>, scale: T, decay: T) {
        for (w, &d) in layer.weights.iter_mut().zip(&g.weights) {
            *w = *w - scale * d - decay * *w;
        }
        for (b, &d) in layer.bias.iter_mut().zip(&g.bias) {
            *b = *b - scale * d;
        }
    }
    if let (Some(h), Some(gh)) = (model.hidden.as_mut(), grad.hidden.as_ref()) {
        step(h, gh, scale, decay);
    }
    step(&mut model.output, &grad.output, scale, decay);
}

/// Backpropagated gradient of the mean cross-entropy over `batch`, in
/// [`Model::flat_params`] order.
pub fn analytic_gradient<T: Scalar>(model: &Model<T>, batch: &[Example<T>]) -> Result<Vec<T>> {
    let mut grad = model.zeroed_like();
    let mut ws = model.workspace();
    for e in batch {
        model.check_dim(&e.features)?;
        model.backprop(&e.features, e.label, &mut ws, &mut grad);
    }
    let n = T::from_count(batch.len().max(1));
    Ok(grad.flat_params().into_iter().map(|g| g / n).collect())
}

/// Max relative error between `analytic` and central finite differences
/// (step `1e-5`) of the mean cross-entropy, over every parameter.
pub fn compare_gradient<T: Scalar>(model: &Model<T>, batch: &[Example<T>], analytic: &[T]) -> Result<T> {
    if analytic.len() != model.num_params() {
        return Err(Error::LengthMismatch {
            left: analytic.len(),
            right: model.num_params(),
        });
    }
    let h = T::lit(1e-5);
    let floor = T::lit(1e-6);
    let mut probe = model.clone();
    let mut worst = T::zero();
    for (i, &a) in analytic.iter().enumerate() {
        let original = *probe.params_mut().nth(i).unwrap();
        *probe.params_mut().nth(i).unwrap() = original + h;
        let up = probe.loss(batch)?;
        *probe.params_mut().nth(i).unwrap() = original - h;
        let down = probe.loss(batch)?;
        *probe.params_mut().nth(i).unwrap() = original;
        let numeric = (up - down) / (h + h);
        let err = (a - numeric).abs() / (a.abs().max(numeric.abs()).max(floor));
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Harness for the backpropagation code: analytic vs numeric gradient.
pub fn gradient_check<T: Scalar>(model: &Model<T>, batch: &[Example<T>]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let analytic = analytic_gradient(model, batch)?;
    compare_gradient(model, batch, &analytic)
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    scheme: ClassScheme,
    feature_dim: usize,
    hidden_units: usize,
    hidden: Option<LayerFile>,
    output: LayerFile,
    metadata: TrainingMeta,
}

impl<T: Scalar> Dense<T> {
    fn to_file(&self) -> LayerFile {
        LayerFile {
            weights: self
                .weights
                .chunks_exact(self.inputs)
                .map(|r| r.iter().map(|w| w.as_f64()).collect())
                .collect(),
            bias: self.bias.iter().map(|b| b.as_f64()).collect(),
        }
    }

    fn from_file(f: &LayerFile, inputs: usize, outputs: usize) -> Result<Self> {
        if f.weights.len() != outputs || f.bias.len() != outputs || f.weights.iter().any(|r| r.len() != inputs) {
            return Err(Error::InvalidConfig(format!(
                "layer shape mismatch: expected {outputs}×{inputs}"
            )));
        }
        Ok(Dense {
            inputs,
            outputs,
            weights: f.weights.iter().flatten().map(|&w| T::lit(w)).collect(),
            bias: f.bias.iter().map(|&b| T::lit(b)).collect(),
        })
    }
}

impl<T: Scalar> Model<T> {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            scheme: self.scheme.clone(),
            feature_dim: self.feature_dim,
            hidden_units: self.hidden_units(),
            hidden: self.hidden.as_ref().map(Dense::to_file),
            output: self.output.to_file(),
            metadata: self.meta.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                f.format_version
            )));
        }
        let k = f.scheme.num_classes();
        let hidden = match (&f.hidden, f.hidden_units) {
            (None, 0) => None,
            (Some(h), units) if units > 0 => Some(Dense::from_file(h, f.feature_dim, units)?),
            _ => return Err(Error::InvalidConfig("hidden layer does not match hidden_units".into())),
        };
        let out_in = if f.hidden_units > 0 { f.hidden_units } else { f.feature_dim };
        Ok(Model {
            output: Dense::from_file(&f.output, out_in, k)?,
            scheme: f.scheme,
            feature_dim: f.feature_dim,
            hidden,
            meta: f.metadata,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}
