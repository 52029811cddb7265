//! The trained scorer: embeddings for categorical features, a dense network,
//! its training loop, and the JSON model file.

use ndarray::{Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Encoder, FeatureVector, RawFeatures, CATEGORICAL, NUMERIC};
use super::mlp::{cross_entropy, Adam, Dense, Mlp};
use super::{top_kappa_metric, Predictor, ScorerError, Split, SplitRatios, TrainingSet};

const FORMAT: &str = "resub-scorer";
const VERSION: u32 = 1;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub hidden_layers: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    pub optimizer: String,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub loss: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub split: SplitRatios,
    pub stratify: bool,
    pub embedding_dim: usize,
    /// Validation TOP_κ is checked every this many epochs.
    pub eval_every: usize,
    /// Consecutive validation declines that stop training.
    pub patience: usize,
    pub early_stopping_kappa: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden_layers: vec![128, 64],
            hidden_activation: "relu".into(),
            output_activation: "softmax".into(),
            optimizer: "adam".into(),
            learning_rate: 0.001,
            dropout_rate: 0.3,
            loss: "categorical_crossentropy".into(),
            epochs: 50,
            batch_size: 32,
            split: SplitRatios::default(),
            stratify: true,
            embedding_dim: 8,
            eval_every: 10,
            patience: 2,
            early_stopping_kappa: 3,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ScorerError> {
        let fixed = [
            ("hidden_activation", &self.hidden_activation, "relu"),
            ("output_activation", &self.output_activation, "softmax"),
            ("optimizer", &self.optimizer, "adam"),
            ("loss", &self.loss, "categorical_crossentropy"),
        ];
        for (key, got, want) in fixed {
            if got != want {
                return Err(ScorerError::Config(format!(
                    "{key} `{got}` is not supported (only `{want}`)"
                )));
            }
        }
        if !self.stratify {
            return Err(ScorerError::Config(
                "unstratified splits are not supported".into(),
            ));
        }
        if self.hidden_layers.contains(&0) {
            return Err(ScorerError::Config(
                "hidden layer widths must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ScorerError::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ScorerError::Config(
                "dropout_rate must lie in [0, 1)".into(),
            ));
        }
        if self.batch_size == 0 || self.embedding_dim == 0 || self.early_stopping_kappa == 0 {
            return Err(ScorerError::Config(
                "batch_size, embedding_dim and early_stopping_kappa must be positive".into(),
            ));
        }
        self.split.validate()
    }

    pub fn from_json_str(s: &str) -> Result<Self, ScorerError> {
        let c: TrainingConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, with dropout active.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    /// Validation TOP_κ at checkpoint epochs.
    pub validation_top: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Training loss before the first update and after the last, without dropout.
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub final_validation_loss: Option<f64>,
    pub train_examples: usize,
    pub validation_examples: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    resources: Vec<String>,
    encoder: Encoder,
    embeddings: Vec<Array2<f64>>,
    net: Mlp,
    config: TrainingConfig,
    meta: TrainingMeta,
    /// Free-form provenance written by callers (e.g. run configuration).
    pub run: serde_json::Value,
}

fn input_width(dim: usize) -> usize {
    CATEGORICAL * dim + NUMERIC
}

impl ScorerModel {
    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    /// Input, hidden and output widths.
    pub fn widths(&self) -> Vec<usize> {
        self.net.widths()
    }

    fn dim(&self) -> usize {
        self.embeddings[0].ncols()
    }

    /// Same shape with every weight zero; predicts the uniform distribution.
    pub fn zeroed(&self) -> Self {
        let mut m = self.clone();
        for e in &mut m.embeddings {
            e.fill(0.0);
        }
        m.net = Mlp::zeros(&self.net.widths());
        m
    }

    fn assemble(&self, rows: &[&FeatureVector]) -> Array2<f64> {
        assemble(&self.embeddings, rows)
    }

    /// Probability vector over [`Self::resources`] for an encoded input.
    pub fn predict_encoded(&self, x: &FeatureVector) -> Result<Vec<f64>, ScorerError> {
        for (k, &idx) in x.categorical.iter().enumerate() {
            let rows = self.embeddings[k].nrows();
            if idx >= rows {
                return Err(ScorerError::Dimension {
                    what: "categorical index",
                    expected: rows,
                    got: idx,
                });
            }
        }
        let p = self.net.predict(self.assemble(&[x]).view());
        Ok(p.row(0).to_vec())
    }

    pub fn predict_batch(&self, xs: &[FeatureVector]) -> Array2<f64> {
        let rows: Vec<&FeatureVector> = xs.iter().collect();
        self.net.predict(self.assemble(&rows).view())
    }

    pub fn to_json_pretty(&self) -> String {
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            resources: self.resources.clone(),
            widths: self.net.widths(),
            encoder: self.encoder.clone(),
            config: self.config.clone(),
            embeddings: self.embeddings.iter().map(Matrix::from).collect(),
            layers: self
                .net
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: Matrix::from(&l.w),
                    bias: l.b.to_vec(),
                })
                .collect(),
            meta: self.meta.clone(),
            run: self.run.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, ScorerError> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(ScorerError::Format(format!(
                "expected {FORMAT} version {VERSION}, found {} version {}",
                f.format, f.version
            )));
        }
        let embeddings = f
            .embeddings
            .iter()
            .map(Matrix::to_array)
            .collect::<Result<Vec<_>, _>>()?;
        let layers = f
            .layers
            .iter()
            .map(|l| {
                let w = l.weights.to_array()?;
                if l.bias.len() != w.nrows() {
                    return Err(ScorerError::Dimension {
                        what: "bias",
                        expected: w.nrows(),
                        got: l.bias.len(),
                    });
                }
                Ok(Dense {
                    w,
                    b: l.bias.clone().into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let model = ScorerModel {
            resources: f.resources,
            encoder: f.encoder,
            embeddings,
            net: Mlp { layers },
            config: f.config,
            meta: f.meta,
            run: f.run,
        };
        model.check_shapes()?;
        if model.widths() != f.widths {
            return Err(ScorerError::Format(format!(
                "declared widths {:?} differ from the stored layers {:?}",
                f.widths,
                model.widths()
            )));
        }
        Ok(model)
    }

    fn check_shapes(&self) -> Result<(), ScorerError> {
        let dim_err = |what, expected, got| {
            Err(ScorerError::Dimension {
                what,
                expected,
                got,
            })
        };
        if self.embeddings.len() != CATEGORICAL {
            return dim_err("embedding tables", CATEGORICAL, self.embeddings.len());
        }
        if self.encoder.vocabs.len() != CATEGORICAL {
            return dim_err("vocabularies", CATEGORICAL, self.encoder.vocabs.len());
        }
        let dim = self.dim();
        for (e, v) in self.embeddings.iter().zip(&self.encoder.vocabs) {
            if e.nrows() != v.size() {
                return dim_err("embedding rows", v.size(), e.nrows());
            }
            if e.ncols() != dim {
                return dim_err("embedding width", dim, e.ncols());
            }
        }
        let Some(first) = self.net.layers.first() else {
            return Err(ScorerError::Format("no layers".into()));
        };
        if first.inputs() != input_width(dim) {
            return dim_err("input width", input_width(dim), first.inputs());
        }
        for w in self.net.layers.windows(2) {
            if w[1].inputs() != w[0].outputs() {
                return dim_err("layer input", w[0].outputs(), w[1].inputs());
            }
        }
        let out = self.net.layers.last().map_or(0, Dense::outputs);
        if out != self.resources.len() {
            return dim_err("output width", self.resources.len(), out);
        }
        Ok(())
    }
}

impl Predictor for ScorerModel {
    fn resources(&self) -> &[String] {
        &self.resources
    }

    fn predict(&self, features: &RawFeatures) -> Vec<f64> {
        self.predict_encoded(&self.encoder.encode(features))
            .expect("encoder indices fit the embedding tables")
    }
}

fn assemble(embeddings: &[Array2<f64>], rows: &[&FeatureVector]) -> Array2<f64> {
    let dim = embeddings[0].ncols();
    let mut x = Array2::zeros((rows.len(), input_width(dim)));
    for (i, fv) in rows.iter().enumerate() {
        let mut row = x.row_mut(i);
        for k in 0..CATEGORICAL {
            row.slice_mut(ndarray::s![k * dim..(k + 1) * dim])
                .assign(&embeddings[k].row(fv.categorical[k]));
        }
        for j in 0..NUMERIC {
            row[CATEGORICAL * dim + j] = fv.numeric[j];
        }
    }
    x
}

/// Train a scorer on the train split of `ts`.
pub fn train_scorer(
    ts: &TrainingSet,
    config: &TrainingConfig,
    seed: u64,
) -> Result<ScorerModel, ScorerError> {
    config.validate()?;
    let train: Vec<_> = ts.split(Split::Train).collect();
    if train.is_empty() {
        return Err(ScorerError::EmptyTrain);
    }
    let width = ts.resources.len();
    for e in &ts.examples {
        if e.label.len() != width {
            return Err(ScorerError::Dimension {
                what: "label",
                expected: width,
                got: e.label.len(),
            });
        }
    }
    let val: Vec<_> = ts.split(Split::Validation).collect();
    let raws: Vec<&RawFeatures> = train.iter().map(|e| &e.features).collect();
    let encoder = Encoder::fit(&raws);
    let encode = |es: &[&super::Example]| -> (Vec<FeatureVector>, Array2<f64>) {
        let xs = es.iter().map(|e| encoder.encode(&e.features)).collect();
        let mut y = Array2::zeros((es.len(), width));
        for (i, e) in es.iter().enumerate() {
            for (r, &v) in e.label.iter().enumerate() {
                y[[i, r]] = v;
            }
        }
        (xs, y)
    };
    let (train_x, train_y) = encode(&train);
    let (val_x, val_y) = encode(&val);
    let val_labels: Vec<Vec<f64>> = val.iter().map(|e| e.label.clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = config.embedding_dim;
    let emb_init = Uniform::new_inclusive(-0.05, 0.05);
    let mut embeddings: Vec<Array2<f64>> = encoder
        .vocab_sizes()
        .into_iter()
        .map(|n| Array2::from_shape_fn((n, dim), |_| emb_init.sample(&mut rng)))
        .collect();
    let mut widths = vec![input_width(dim)];
    widths.extend(&config.hidden_layers);
    widths.push(width);
    let mut net = Mlp::new(&widths, &mut rng);

    let mut sizes: Vec<usize> = embeddings.iter().map(|e| e.len()).collect();
    for l in &net.layers {
        sizes.push(l.w.len());
        sizes.push(l.b.len());
    }
    let mut adam = Adam::new(config.learning_rate, &sizes);

    let full_loss = |emb: &[Array2<f64>], net: &Mlp, xs: &[FeatureVector], y: &Array2<f64>| {
        let rows: Vec<&FeatureVector> = xs.iter().collect();
        cross_entropy(&net.predict(assemble(emb, &rows).view()), y.view())
    };
    let initial_train_loss = full_loss(&embeddings, &net, &train_x, &train_y);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut previous_top: Option<f64> = None;
    let mut declines = 0;
    let mut stopped_early = false;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let rows: Vec<&FeatureVector> = chunk.iter().map(|&i| &train_x[i]).collect();
            let x = assemble(&embeddings, &rows);
            let y = train_y.select(Axis(0), chunk);
            let (loss, grads) =
                net.loss_and_gradients(x.view(), y.view(), config.dropout_rate, Some(&mut rng));
            if !loss.is_finite() {
                return Err(ScorerError::NonFinite { epoch, batch });
            }
            loss_sum += loss * chunk.len() as f64;

            let mut emb_grads: Vec<Array2<f64>> = embeddings
                .iter()
                .map(|e| Array2::zeros(e.raw_dim()))
                .collect();
            for (i, fv) in rows.iter().enumerate() {
                let g = grads.input.row(i);
                for k in 0..CATEGORICAL {
                    let mut target = emb_grads[k].row_mut(fv.categorical[k]);
                    target += &g.slice(ndarray::s![k * dim..(k + 1) * dim]);
                }
            }
            let mut params: Vec<&mut [f64]> = embeddings
                .iter_mut()
                .map(|e| e.as_slice_mut().expect("standard layout"))
                .collect();
            for l in net.layers.iter_mut() {
                params.push(l.w.as_slice_mut().expect("standard layout"));
                params.push(l.b.as_slice_mut().expect("standard layout"));
            }
            let mut gs: Vec<&[f64]> = emb_grads
                .iter()
                .map(|g| g.as_slice().expect("standard layout"))
                .collect();
            for l in &grads.layers {
                gs.push(l.w.as_slice().expect("standard layout"));
                gs.push(l.b.as_slice().expect("standard layout"));
            }
            adam.step(params, gs);
        }

        let mut record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train.len() as f64,
            validation_loss: None,
            validation_top: None,
        };
        if !val.is_empty() {
            record.validation_loss = Some(full_loss(&embeddings, &net, &val_x, &val_y));
            if config.eval_every > 0 && (epoch + 1) % config.eval_every == 0 {
                let rows: Vec<&FeatureVector> = val_x.iter().collect();
                let p = net.predict(assemble(&embeddings, &rows).view());
                let preds: Vec<Vec<f64>> = p.rows().into_iter().map(|r| r.to_vec()).collect();
                let top = top_kappa_metric(&preds, &val_labels, config.early_stopping_kappa)?;
                record.validation_top = Some(top);
                if previous_top.is_some_and(|prev| top < prev) {
                    declines += 1;
                } else {
                    declines = 0;
                }
                previous_top = Some(top);
            }
        }
        history.push(record);
        if config.patience > 0 && declines >= config.patience {
            stopped_early = true;
            break;
        }
    }

    let final_train_loss = full_loss(&embeddings, &net, &train_x, &train_y);
    let meta = TrainingMeta {
        seed,
        epochs_run: history.len(),
        stopped_early,
        initial_train_loss,
        final_train_loss,
        final_validation_loss: history.last().and_then(|r| r.validation_loss),
        train_examples: train.len(),
        validation_examples: val.len(),
        history,
    };
    Ok(ScorerModel {
        resources: ts.resources.clone(),
        encoder,
        embeddings,
        net,
        config: config.clone(),
        meta,
        run: serde_json::Value::Null,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    resources: Vec<String>,
    widths: Vec<usize>,
    encoder: Encoder,
    config: TrainingConfig,
    embeddings: Vec<Matrix>,
    layers: Vec<LayerFile>,
    meta: TrainingMeta,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    run: serde_json::Value,
}

/// Row-major matrix.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&Array2<f64>> for Matrix {
    fn from(a: &Array2<f64>) -> Self {
        Matrix {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }
}

impl Matrix {
    fn to_array(&self) -> Result<Array2<f64>, ScorerError> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone()).map_err(|_| {
            ScorerError::Dimension {
                what: "matrix data",
                expected: self.rows * self.cols,
                got: self.data.len(),
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    /// `outputs × inputs`.
    weights: Matrix,
    bias: Vec<f64>,
}
