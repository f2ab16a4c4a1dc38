//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sensorsweep::nn::{NetworkConfig, OptimizerMode};
use sensorsweep::par::Exec;
use sensorsweep::sensor::{GridSpec, SensorGroundTruth};
use sensorsweep::sweep::{Axis, CriteriaSubset, InterpolationSpec, DEFAULT_ROW_BUDGET};
use sensorsweep::training::TrainConfig;
use sensorsweep::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub scale: f64,
    /// Dataset path; defaults to `<out>/dataset.csv`.
    pub dataset: Option<PathBuf>,
    /// Model path; defaults to `<out>/model.bin`.
    pub model: Option<PathBuf>,
    /// Run data-parallel loops on the thread pool.
    pub parallel: bool,
    pub oracle: SensorGroundTruth,
    pub train: TrainSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("reports"),
            scale: 1.0,
            dataset: None,
            model: None,
            parallel: true,
            oracle: SensorGroundTruth::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub factor: f64,
    pub optimizer: String,
    pub hidden: Vec<usize>,
    pub alpha: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            factor: t.factor,
            optimizer: t.optimizer.to_string(),
            hidden: vec![64, 64, 64],
            alpha: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSection {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Input1, Input2, Input3, Input4, Input6.
    pub axes: Vec<AxisSection>,
    pub row_budget: u64,
    /// Extra criteria subset, e.g. `["c1", "c2"]`, selected alongside the
    /// full and Output3-free subsets.
    pub criteria: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let axes = InterpolationSpec::default()
            .axes
            .iter()
            .map(|a| match a {
                Axis::Range { min, max, step } => AxisSection { min: *min, max: *max, step: *step },
                Axis::Values(_) => unreachable!("default sweep uses ranges"),
            })
            .collect();
        SweepSection {
            axes,
            row_budget: DEFAULT_ROW_BUDGET,
            criteria: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::Config(format!("scale must be in (0, 1], got {}", self.scale)));
        }
        self.oracle.validate()?;
        self.train_config()?.validate()?;
        self.network_config()?;
        self.interpolation_spec()?;
        self.extra_subset()?;
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset.csv"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out.join("model.bin"))
    }

    pub fn grid(&self) -> Result<GridSpec, Error> {
        GridSpec::scaled(self.scale)
    }

    pub fn truth(&self) -> SensorGroundTruth {
        SensorGroundTruth {
            seed: self.seed,
            ..self.oracle.clone()
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, Error> {
        let t = &self.train;
        Ok(TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            factor: t.factor,
            seed: self.seed,
            optimizer: t.optimizer.parse::<OptimizerMode>()?,
            exec: self.exec(),
        })
    }

    pub fn network_config(&self) -> Result<NetworkConfig, Error> {
        let mut c = NetworkConfig::with_hidden(&self.train.hidden);
        c.alpha = self.train.alpha;
        c.validate_surrogate()?;
        Ok(c)
    }

    /// The configured axes; with `scale < 1` each axis keeps
    /// `max(2, round(count·scale))` evenly spaced values over its range.
    pub fn interpolation_spec(&self) -> Result<InterpolationSpec, Error> {
        if self.sweep.axes.len() != 5 {
            return Err(Error::Config(format!(
                "sweep needs 5 axes (input1-4, input6), got {}",
                self.sweep.axes.len()
            )));
        }
        let axes: Vec<Axis> = self
            .sweep
            .axes
            .iter()
            .map(|a| Axis::Range { min: a.min, max: a.max, step: a.step })
            .collect();
        let mut spec = InterpolationSpec {
            axes: axes.try_into().expect("five axes"),
            row_budget: self.sweep.row_budget,
        };
        spec.validate(&GridSpec::full_factorial().bounds())?;
        if self.scale < 1.0 {
            let scaled: Vec<Axis> = spec
                .axes
                .iter()
                .map(|a| {
                    let n = ((a.len() as f64 * self.scale).round() as usize).max(2).min(a.len());
                    let (lo, hi) = (a.value(0), a.value(a.len() - 1));
                    if n < 2 || hi == lo {
                        Axis::Values(vec![lo])
                    } else {
                        Axis::Range { min: lo, max: hi, step: (hi - lo) / (n - 1) as f64 }
                    }
                })
                .collect();
            spec.axes = scaled.try_into().expect("five axes");
        }
        Ok(spec)
    }

    pub fn extra_subset(&self) -> Result<Option<CriteriaSubset>, Error> {
        if self.sweep.criteria.is_empty() {
            return Ok(None);
        }
        let mut mask = [false; 4];
        for name in &self.sweep.criteria {
            let k = match name.to_ascii_lowercase().as_str() {
                "c1" => 0,
                "c2" => 1,
                "c3" => 2,
                "c4" => 3,
                other => return Err(Error::Config(format!("unknown criterion {other:?}"))),
            };
            mask[k] = true;
        }
        Ok(Some(CriteriaSubset(mask)))
    }
}
