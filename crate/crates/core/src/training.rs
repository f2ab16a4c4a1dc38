//! Minibatch training with a plateau learning-rate schedule, and fit metrics.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{fmt_f64, EncodedTable, NormalizationSpec, OUTPUT_DIM, OUTPUT_NAMES};
use crate::nn::{BatchWorkspace, NetworkConfig, NetworkParameters, OptimizerMode, OptimizerState};
use crate::par::Exec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without a new best validation MSE before the rate is cut.
    pub patience: usize,
    /// Divisor applied to the learning rate on a plateau.
    pub factor: f64,
    pub seed: u64,
    pub optimizer: OptimizerMode,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 20,
            learning_rate: 0.0005,
            patience: 5,
            factor: 2.0,
            seed: 0,
            optimizer: OptimizerMode::Adam,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.factor > 1.0) {
            return Err(Error::Config(format!("reduction factor must exceed 1, got {}", self.factor)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn best_val_mse(&self) -> f64 {
        self.epochs.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_mse", "val_mse", "lr"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                fmt_f64(e.train_mse),
                fmt_f64(e.val_mse),
                fmt_f64(e.learning_rate),
            ])?;
        }
        w.flush()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }
}

/// Reduce-on-plateau bookkeeping. Improvement means strictly below the best
/// validation MSE seen so far; no threshold, no cooldown.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    pub learning_rate: f64,
    best: f64,
    wait: usize,
    patience: usize,
    factor: f64,
}

impl PlateauSchedule {
    pub fn new(learning_rate: f64, patience: usize, factor: f64) -> Self {
        PlateauSchedule {
            learning_rate,
            best: f64::INFINITY,
            wait: 0,
            patience,
            factor,
        }
    }

    /// Records an epoch's validation MSE; returns true if the rate was cut.
    pub fn observe(&mut self, val_mse: f64) -> bool {
        if val_mse < self.best {
            self.best = val_mse;
            self.wait = 0;
            return false;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.learning_rate /= self.factor;
            self.wait = 0;
            return true;
        }
        false
    }
}

/// Mean squared error over every sample and output, in normalized units.
pub fn mse(params: &NetworkParameters, config: &NetworkConfig, table: &EncodedTable, exec: Exec) -> f64 {
    let preds = predict_table(params, config, table, exec);
    let total: f64 = preds
        .iter()
        .zip(&table.targets)
        .map(|(p, y)| p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    total / (table.len() * OUTPUT_DIM) as f64
}

const PREDICT_CHUNK: usize = 4096;

/// Normalized predictions for every row of `table`, in row order.
pub fn predict_table(
    params: &NetworkParameters,
    config: &NetworkConfig,
    table: &EncodedTable,
    exec: Exec,
) -> Vec<[f64; OUTPUT_DIM]> {
    let n_chunks = table.len().div_ceil(PREDICT_CHUNK);
    exec.map_range(0..n_chunks, |c| {
        let mut trace = crate::nn::ForwardTrace::for_config(config);
        let end = ((c + 1) * PREDICT_CHUNK).min(table.len());
        table.inputs[c * PREDICT_CHUNK..end]
            .iter()
            .map(|x| {
                let y = params.predict_into(config, x, &mut trace);
                [y[0], y[1], y[2]]
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Trains freshly initialized parameters (seeded by `cfg.seed`).
pub fn train(
    config: &NetworkConfig,
    train_set: &EncodedTable,
    validation: &EncodedTable,
    cfg: &TrainConfig,
) -> Result<(NetworkParameters, TrainHistory)> {
    let params = NetworkParameters::init(config, cfg.seed)?;
    train_from(params, config, train_set, validation, cfg)
}

/// Runs exactly `cfg.epochs` epochs starting from `params`.
///
/// Each epoch shuffles the training rows with a stream derived from
/// `(cfg.seed, epoch)`, takes one optimizer step per batch on the batch-mean
/// gradient (the final short batch is kept), then evaluates the whole
/// validation set and updates the plateau schedule.
pub fn train_from(
    mut params: NetworkParameters,
    config: &NetworkConfig,
    train_set: &EncodedTable,
    validation: &EncodedTable,
    cfg: &TrainConfig,
) -> Result<(NetworkParameters, TrainHistory)> {
    cfg.validate()?;
    config.validate_surrogate()?;
    params.check_shapes(config)?;
    if train_set.is_empty() || validation.is_empty() {
        return Err(Error::Config("training and validation sets must be nonempty".into()));
    }

    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &params)?;
    let mut schedule = PlateauSchedule::new(cfg.learning_rate, cfg.patience, cfg.factor);
    let mut ws = BatchWorkspace::new(config, cfg.batch_size);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let lr = schedule.learning_rate;
        opt.learning_rate = lr;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut cost_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let cost = params.batch_gradients_into(
                config,
                &train_set.inputs,
                &train_set.targets,
                batch,
                &mut ws,
                cfg.exec,
            );
            if !cost.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    parameter_norm: params.norm(),
                });
            }
            cost_sum += cost * batch.len() as f64;
            opt.step(&mut params, &ws.gradients);
        }
        // Quadratic cost is half the summed squared error.
        let train_mse = 2.0 * cost_sum / (train_set.len() * OUTPUT_DIM) as f64;
        let val_mse = mse(&params, config, validation, cfg.exec);
        if !val_mse.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
                parameter_norm: params.norm(),
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            learning_rate: lr,
        });
        schedule.observe(val_mse);
    }
    Ok((params, history))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMetrics {
    pub mse: f64,
    /// `None` when the actual values have zero variance.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub per_output: [OutputMetrics; OUTPUT_DIM],
    /// Mean of the per-output MSEs.
    pub mse: f64,
    /// `(actual, predicted)` in physical units, one list per output.
    pub pairs: [Vec<(f64, f64)>; OUTPUT_DIM],
}

impl Evaluation {
    /// One CSV per output, `actual,predicted`.
    pub fn write_pairs_csv_to<W: Write>(&self, output: usize, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["actual", "predicted"])?;
        for (a, p) in &self.pairs[output] {
            w.write_record([fmt_f64(*a), fmt_f64(*p)])?;
        }
        w.flush()
    }

    pub fn write_pairs_csv(&self, dir: &Path, prefix: &str) -> Result<()> {
        for (k, name) in OUTPUT_NAMES.iter().enumerate() {
            let path = dir.join(format!("{prefix}_{name}.csv"));
            let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            self.write_pairs_csv_to(k, std::io::BufWriter::new(f))
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// `(MSE, R²)` of one series. R² = 1 − SS_res / SS_tot.
pub fn fit_metrics(actual: &[f64], predicted: &[f64]) -> OutputMetrics {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    OutputMetrics {
        mse: ss_res / n,
        r2: if ss_tot > 0.0 { Some(1.0 - ss_res / ss_tot) } else { None },
    }
}

/// Per-output MSE and R² (normalized units) plus physical-unit pairs.
pub fn evaluate(
    params: &NetworkParameters,
    config: &NetworkConfig,
    norm: &NormalizationSpec,
    table: &EncodedTable,
    exec: Exec,
) -> Result<Evaluation> {
    if table.is_empty() {
        return Err(Error::Config("cannot evaluate an empty table".into()));
    }
    let preds = predict_table(params, config, table, exec);
    let per_output = std::array::from_fn(|k| {
        let a: Vec<f64> = table.targets.iter().map(|y| y[k]).collect();
        let p: Vec<f64> = preds.iter().map(|y| y[k]).collect();
        fit_metrics(&a, &p)
    });
    let mut pairs: [Vec<(f64, f64)>; OUTPUT_DIM] = Default::default();
    for (y, p) in table.targets.iter().zip(&preds) {
        let a = norm.decode_outputs(y);
        let q = norm.decode_outputs(p);
        pairs[0].push((a.0, q.0));
        pairs[1].push((a.1, q.1));
        pairs[2].push((a.2, q.2));
    }
    let mse = per_output.iter().map(|m: &OutputMetrics| m.mse).sum::<f64>() / OUTPUT_DIM as f64;
    Ok(Evaluation { per_output, mse, pairs })
}
