use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use sensorsweep::curves::{fit_line, CriteriaValues};
use sensorsweep::dataset::{self, EncodedTable, NormalizationSpec, Partition, OUTPUT_NAMES};
use sensorsweep::nn::Surrogate;
use sensorsweep::sensor::{generate_dataset, GridSpec, SensorGroundTruth};
use sensorsweep::sweep::{
    build_interpolated_grid, predict_curve, rank_candidates, select, sweep, write_report, CandidateScore,
    CriteriaSubset, SelectionResult,
};
use sensorsweep::training::{self, evaluate as evaluate_model};
use sensorsweep::SettingsCombination;

use crate::config::RunConfig;
use crate::manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PartitionArg {
    Train,
    Validation,
    Test,
}

impl From<PartitionArg> for Partition {
    fn from(p: PartitionArg) -> Self {
        match p {
            PartitionArg::Train => Partition::Train,
            PartitionArg::Validation => Partition::Validation,
            PartitionArg::Test => Partition::Test,
        }
    }
}

fn create_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    create_out(cfg)?;
    let truth = cfg.truth();
    let grid = cfg.grid()?;
    let rows = generate_dataset(&truth, &grid, cfg.exec())?;
    // Outputs stay under the reports directory whatever `dataset` says.
    let data = cfg.out.join("dataset.csv");
    dataset::write_csv(&rows, &data)?;
    let oracle = cfg.out.join("oracle.toml");
    truth.save(&oracle)?;
    manifest::write(cfg, "generate", &[], &[data.clone(), oracle])?;
    println!(
        "wrote {} rows ({} combinations) to {}",
        rows.len(),
        grid.combination_count(),
        data.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    create_out(cfg)?;
    let data = cfg.dataset_path();
    let rows = dataset::read_csv(&data)?;
    let parts = dataset::split(rows.len(), cfg.seed)?;
    let norm = NormalizationSpec::fit(parts.select(&rows, Partition::Train))?;
    let train_set = EncodedTable::encode(parts.select(&rows, Partition::Train), &norm)?;
    let val_set = EncodedTable::encode(parts.select(&rows, Partition::Validation), &norm)?;
    let net = cfg.network_config()?;
    let tc = cfg.train_config()?;
    println!(
        "training {:?} on {} rows, validating on {}",
        net.layer_sizes,
        train_set.len(),
        val_set.len()
    );
    let (params, history) = training::train(&net, &train_set, &val_set, &tc)?;
    let model = Surrogate::new(net, params, norm)?;
    let model_path = cfg.out.join("model.bin");
    model.save(&model_path)?;
    let history_path = cfg.out.join("history.csv");
    history.write_csv(&history_path)?;
    manifest::write(cfg, "train", &[data], &[model_path.clone(), history_path])?;
    if let Some(last) = history.last() {
        println!(
            "epoch {}: train mse {:.6e}, val mse {:.6e}, lr {:.3e}",
            last.epoch, last.train_mse, last.val_mse, last.learning_rate
        );
    }
    println!("best val mse {:.6e}; model saved to {}", history.best_val_mse(), model_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct OutputReport {
    name: &'static str,
    mse: f64,
    r2: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    partition: String,
    rows: usize,
    mse: f64,
    outputs: Vec<OutputReport>,
}

pub fn evaluate(cfg: &RunConfig, partition: PartitionArg) -> Result<()> {
    create_out(cfg)?;
    let data = cfg.dataset_path();
    let model_path = cfg.model_path();
    let rows = dataset::read_csv(&data)?;
    let model = Surrogate::load(&model_path)?;
    let parts = dataset::split(rows.len(), cfg.seed)?;
    let which = Partition::from(partition);
    let table = EncodedTable::encode(parts.select(&rows, which), &model.norm)?;
    let ev = evaluate_model(&model.params, &model.config, &model.norm, &table, cfg.exec())?;

    let report = MetricsReport {
        partition: format!("{which:?}").to_lowercase(),
        rows: table.len(),
        mse: ev.mse,
        outputs: OUTPUT_NAMES
            .iter()
            .zip(&ev.per_output)
            .map(|(name, m)| OutputReport { name, mse: m.mse, r2: m.r2 })
            .collect(),
    };
    let metrics = cfg.out.join("metrics.json");
    write_json(&metrics, &report)?;
    ev.write_pairs_csv(&cfg.out, "pred_vs_actual")?;
    let mut outputs = vec![metrics];
    outputs.extend(OUTPUT_NAMES.iter().map(|n| cfg.out.join(format!("pred_vs_actual_{n}.csv"))));
    manifest::write(cfg, "evaluate", &[data, model_path], &outputs)?;

    println!("{} rows, mse {:.6e}", report.rows, report.mse);
    for o in &report.outputs {
        match o.r2 {
            Some(r2) => println!("  {:<8} mse {:.6e}  r2 {:.6}", o.name, o.mse, r2),
            None => println!("  {:<8} mse {:.6e}  r2 undefined", o.name, o.mse),
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TruthCheck {
    /// Dip depth of the chosen combination under the synthetic oracle, dB.
    true_dip_depth: f64,
    /// Fraction of swept combinations with a strictly shallower true dip.
    depth_quantile: f64,
    bottom_decile: bool,
}

#[derive(Debug, Serialize)]
struct SelectionReport {
    name: String,
    criteria_subset: String,
    settings: SettingsCombination,
    c1: f64,
    c2: Option<f64>,
    c3: f64,
    c4: f64,
    ranks: [Option<usize>; 4],
    /// Smallest top-K at which all criteria agree.
    k: usize,
    /// Whether the chosen candidate is the only one with its worst and summed
    /// rank, i.e. no lexicographic tie-break was needed.
    unique: bool,
    truth: Option<TruthCheck>,
}

#[derive(Debug, Serialize)]
struct OptimizeReport {
    combinations: usize,
    undefined_c2: usize,
    selections: Vec<SelectionReport>,
}

fn rank_profile(c: &CandidateScore, subset: CriteriaSubset) -> Option<(usize, usize)> {
    let ranks: Option<Vec<usize>> = subset.members().map(|k| c.ranks[k]).collect();
    let ranks = ranks?;
    Some((ranks.iter().copied().max().unwrap_or(0), ranks.iter().sum()))
}

fn truth_check(truth: &SensorGroundTruth, depths: &[f64], s: &SettingsCombination) -> TruthCheck {
    let d = truth.dip_depth(s);
    let shallower = depths.iter().filter(|x| **x < d).count();
    let q = shallower as f64 / depths.len() as f64;
    TruthCheck {
        true_dip_depth: d,
        depth_quantile: q,
        bottom_decile: q < 0.1,
    }
}

fn selection_report(
    name: &str,
    sel: &SelectionResult,
    ranked: &[CandidateScore],
    truth: Option<(&SensorGroundTruth, &[f64])>,
) -> SelectionReport {
    let profile = rank_profile(&sel.chosen, sel.subset);
    let ties = ranked.iter().filter(|c| rank_profile(c, sel.subset) == profile).count();
    let CriteriaValues { c1, c2, c3, c4 } = sel.chosen.criteria;
    SelectionReport {
        name: name.to_string(),
        criteria_subset: sel.subset.to_string(),
        settings: sel.chosen.settings,
        c1,
        c2,
        c3,
        c4,
        ranks: sel.chosen.ranks,
        k: sel.depth,
        unique: ties == 1,
        truth: truth.map(|(t, depths)| truth_check(t, depths, &sel.chosen.settings)),
    }
}

fn write_curve(model: &Surrogate, s: &SettingsCombination, path: &Path) -> Result<()> {
    let curve = predict_curve(model, s, &mut model.trace())?;
    let line = fit_line(&curve).ok();
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    curve
        .write_csv_to(line.as_ref(), std::io::BufWriter::new(f))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn optimize(cfg: &RunConfig, oracle: Option<&Path>) -> Result<()> {
    create_out(cfg)?;
    let model_path = cfg.model_path();
    let model = Surrogate::load(&model_path)?;
    let spec = cfg.interpolation_spec()?;
    let grid = build_interpolated_grid(&spec, &GridSpec::full_factorial().bounds())?;
    println!("sweeping {} combinations", grid.combination_count());
    let candidates = sweep(&model, &grid, cfg.exec())?;
    let ranked = rank_candidates(&candidates, CriteriaSubset::ALL)?;

    let mut subsets = vec![
        ("full", CriteriaSubset::ALL),
        ("no_c4", CriteriaSubset::WITHOUT_OUTPUT3),
    ];
    if let Some(extra) = cfg.extra_subset()? {
        subsets.push(("extra", extra));
    }
    let selections: Vec<(&str, SelectionResult)> = subsets
        .iter()
        .map(|(name, subset)| Ok((*name, select(&ranked, *subset)?)))
        .collect::<Result<_>>()?;

    let mut inputs = vec![model_path];
    let oracle_path = oracle.map(Path::to_path_buf).or_else(|| {
        let p = cfg.out.join("oracle.toml");
        p.exists().then_some(p)
    });
    let truth = match &oracle_path {
        Some(p) => {
            inputs.push(p.clone());
            Some(SensorGroundTruth::load(p)?)
        }
        None => None,
    };
    let depths: Vec<f64> = match &truth {
        Some(t) => candidates.iter().map(|c| t.dip_depth(&c.settings)).collect(),
        None => Vec::new(),
    };
    let truth_ref = truth.as_ref().map(|t| (t, depths.as_slice()));

    let report = OptimizeReport {
        combinations: candidates.len(),
        undefined_c2: candidates.iter().filter(|c| c.criteria.c2.is_none()).count(),
        selections: selections
            .iter()
            .map(|(name, sel)| selection_report(name, sel, &ranked, truth_ref))
            .collect(),
    };

    let report_path = cfg.out.join("sweep_report.csv");
    let named: Vec<(&str, &SelectionResult)> = selections.iter().map(|(n, s)| (*n, s)).collect();
    write_report(&ranked, &named, &report_path)?;
    let selection_path = cfg.out.join("selection.json");
    write_json(&selection_path, &report)?;
    let mut outputs = vec![report_path, selection_path];
    for (name, sel) in &selections {
        let path = cfg.out.join(format!("curve_{name}.csv"));
        write_curve(&model, &sel.chosen.settings, &path)?;
        outputs.push(path);
    }
    manifest::write(cfg, "optimize", &inputs, &outputs)?;

    for s in &report.selections {
        println!(
            "{} [{}]: {:?} K={} c1 {:.4} c2 {} c3 {:.4} c4 {:.4}{}",
            s.name,
            s.criteria_subset,
            s.settings.to_array(),
            s.k,
            s.c1,
            s.c2.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
            s.c3,
            s.c4,
            s.truth
                .as_ref()
                .map(|t| format!(" true depth {:.3} dB (quantile {:.3})", t.true_dip_depth, t.depth_quantile))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
