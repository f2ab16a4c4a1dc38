//! Interpolated settings sweep through a trained surrogate, per-criterion
//! ranking and rank-intersection selection.

use std::io::Write;
use std::path::Path;

use crate::curves::{criteria, CriteriaValues, Curve};
use crate::dataset::fmt_f64;
use crate::nn::{ForwardTrace, Surrogate};
use crate::par::Exec;
use crate::sensor::{GridSpec, SettingsCombination, CATEGORIES, INPUT5_STEPS, INPUT_NAMES, ROWS_PER_COMBINATION};
use crate::{Error, Result};

/// `resolution ^ n_inputs`: experiments needed for a full factorial design.
pub fn count_experiments(resolution: u64, n_inputs: u32) -> Result<u64> {
    if resolution == 0 || n_inputs == 0 {
        return Err(Error::Config("resolution and input count must be >= 1".into()));
    }
    resolution
        .checked_pow(n_inputs)
        .ok_or_else(|| Error::Overflow(format!("{resolution}^{n_inputs} does not fit in 64 bits")))
}

/// Values one tunable input takes during the sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    /// `min, min + step, …` up to and including `max` (within 1e-9 steps).
    Range { min: f64, max: f64, step: f64 },
    /// Explicit list.
    Values(Vec<f64>),
}

impl Axis {
    pub fn len(&self) -> usize {
        match self {
            Axis::Range { min, max, step } => ((max - min) / step + 1e-9).floor() as usize + 1,
            Axis::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            Axis::Range { min, step, .. } => min + i as f64 * step,
            Axis::Values(v) => v[i],
        }
    }

    fn extent(&self) -> (f64, f64) {
        match self {
            Axis::Range { min, .. } => (*min, self.value(self.len() - 1)),
            Axis::Values(v) => (
                v.iter().cloned().fold(f64::INFINITY, f64::min),
                v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }
}

/// Default cap on swept rows (combinations × 200).
pub const DEFAULT_ROW_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSpec {
    /// Input1, Input2, Input3, Input4, Input6.
    pub axes: [Axis; 5],
    pub row_budget: u64,
}

impl Default for InterpolationSpec {
    /// About 59,400 combinations (≈ 11.9 million curve rows) over the
    /// original ranges.
    fn default() -> Self {
        InterpolationSpec {
            axes: [
                Axis::Range { min: 418.0, max: 510.0, step: 4.0 },
                Axis::Range { min: 112.0, max: 144.0, step: 8.0 },
                Axis::Range { min: 400.0, max: 500.0, step: 10.0 },
                Axis::Range { min: 2850.0, max: 3650.0, step: 100.0 },
                Axis::Range { min: 3200.0, max: 4000.0, step: 200.0 },
            ],
            row_budget: DEFAULT_ROW_BUDGET,
        }
    }
}

impl InterpolationSpec {
    /// The raw value lists of a factorial grid, unchanged.
    pub fn from_grid(grid: &GridSpec) -> Self {
        InterpolationSpec {
            axes: grid.values.clone().map(Axis::Values),
            row_budget: DEFAULT_ROW_BUDGET,
        }
    }

    /// Evenly stepped axes with `counts[i]` values spanning each grid range.
    pub fn uniform(grid: &GridSpec, counts: [usize; 5]) -> Result<Self> {
        let bounds = grid.bounds();
        let mut axes: Vec<Axis> = Vec::with_capacity(5);
        for (i, (&(lo, hi), &n)) in bounds.iter().zip(&counts).enumerate() {
            if n == 0 {
                return Err(Error::Config(format!("{}: zero values requested", INPUT_NAMES[i])));
            }
            axes.push(if n == 1 || hi == lo {
                Axis::Values(vec![lo])
            } else {
                Axis::Range { min: lo, max: hi, step: (hi - lo) / (n - 1) as f64 }
            });
        }
        Ok(InterpolationSpec {
            axes: axes.try_into().expect("five axes"),
            row_budget: DEFAULT_ROW_BUDGET,
        })
    }

    pub fn combination_count(&self) -> u64 {
        self.axes.iter().map(|a| a.len() as u64).product()
    }

    /// Checks steps, checks every axis stays inside `bounds` (per input
    /// `(min, max)`), and enforces the row budget.
    pub fn validate(&self, bounds: &[(f64, f64); 5]) -> Result<()> {
        for (i, axis) in self.axes.iter().enumerate() {
            let name = INPUT_NAMES[i];
            match axis {
                Axis::Range { min, max, step } => {
                    if !(*step > 0.0) || !step.is_finite() {
                        return Err(Error::Config(format!("{name}: step must be positive")));
                    }
                    if !(max >= min) {
                        return Err(Error::Config(format!("{name}: max below min")));
                    }
                }
                Axis::Values(v) => {
                    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Config(format!("{name}: empty or non-finite value list")));
                    }
                }
            }
            let (lo, hi) = axis.extent();
            let (blo, bhi) = bounds[i];
            if lo < blo - 1e-9 || hi > bhi + 1e-9 {
                return Err(Error::Config(format!(
                    "{name}: sweep range [{lo}, {hi}] leaves the original range [{blo}, {bhi}]"
                )));
            }
        }
        let rows = self
            .combination_count()
            .checked_mul(ROWS_PER_COMBINATION as u64)
            .ok_or_else(|| Error::Overflow("sweep row count".into()))?;
        if rows > self.row_budget {
            return Err(Error::Config(format!(
                "sweep needs {rows} rows, budget is {}",
                self.row_budget
            )));
        }
        Ok(())
    }
}

/// Lazily enumerated lexicographic product of the axes (Input6 fastest).
#[derive(Debug, Clone)]
pub struct InterpolatedGrid {
    axes: [Axis; 5],
    lens: [usize; 5],
    next: usize,
    total: usize,
}

impl InterpolatedGrid {
    /// Total combinations, independent of iteration progress.
    pub fn combination_count(&self) -> usize {
        self.total
    }

    /// The `index`-th combination in lexicographic order.
    pub fn get(&self, mut index: usize) -> SettingsCombination {
        let mut v = [0.0; 5];
        for k in (0..5).rev() {
            v[k] = self.axes[k].value(index % self.lens[k]);
            index /= self.lens[k];
        }
        SettingsCombination::from_array(v)
    }
}

impl Iterator for InterpolatedGrid {
    type Item = SettingsCombination;

    fn next(&mut self) -> Option<SettingsCombination> {
        if self.next >= self.total {
            return None;
        }
        let s = self.get(self.next);
        self.next += 1;
        Some(s)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.total - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for InterpolatedGrid {}

/// Validates `spec` against `bounds` and returns the streaming grid.
pub fn build_interpolated_grid(spec: &InterpolationSpec, bounds: &[(f64, f64); 5]) -> Result<InterpolatedGrid> {
    spec.validate(bounds)?;
    let lens = std::array::from_fn(|k| spec.axes[k].len());
    Ok(InterpolatedGrid {
        axes: spec.axes.clone(),
        lens,
        next: 0,
        total: spec.combination_count() as usize,
    })
}

/// Surrogate prediction of the 200-point curve of `s`.
pub fn predict_curve(model: &Surrogate, s: &SettingsCombination, trace: &mut ForwardTrace) -> Result<Curve> {
    let mut points = Vec::with_capacity(ROWS_PER_COMBINATION);
    for input5 in 0..INPUT5_STEPS {
        for category in 0..CATEGORIES {
            points.push(model.predict(s, input5, category, trace)?);
        }
    }
    Curve::new(*s, points)
}

/// One predicted curve per combination, produced on demand.
pub fn predict_curves<'a, I>(model: &'a Surrogate, grid: I) -> impl Iterator<Item = Result<Curve>> + 'a
where
    I: IntoIterator<Item = SettingsCombination> + 'a,
{
    let mut trace = model.trace();
    grid.into_iter().map(move |s| predict_curve(model, &s, &mut trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub settings: SettingsCombination,
    pub criteria: CriteriaValues,
}

const SWEEP_CHUNK: usize = 256;

/// Predicts and scores every combination of `grid`, keeping only the scores.
/// Output is in grid order whatever the execution policy.
pub fn sweep(model: &Surrogate, grid: &InterpolatedGrid, exec: Exec) -> Result<Vec<Candidate>> {
    let n = grid.combination_count();
    let chunks = exec.map_range(0..n.div_ceil(SWEEP_CHUNK), |c| -> Result<Vec<Candidate>> {
        let mut trace = model.trace();
        (c * SWEEP_CHUNK..((c + 1) * SWEEP_CHUNK).min(n))
            .map(|i| {
                let s = grid.get(i);
                let curve = predict_curve(model, &s, &mut trace)?;
                Ok(Candidate {
                    settings: s,
                    criteria: criteria(&curve)?,
                })
            })
            .collect()
    });
    let mut out = Vec::with_capacity(n);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Which of the four criteria take part in ranking and selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriteriaSubset(pub [bool; 4]);

impl CriteriaSubset {
    pub const ALL: CriteriaSubset = CriteriaSubset([true; 4]);
    pub const WITHOUT_OUTPUT3: CriteriaSubset = CriteriaSubset([true, true, true, false]);

    pub fn single(k: usize) -> Self {
        let mut m = [false; 4];
        m[k] = true;
        CriteriaSubset(m)
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0[k]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..4).filter(|k| self.0[*k])
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|b| *b)
    }
}

impl std::fmt::Display for CriteriaSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = self.members().map(|k| format!("c{}", k + 1)).collect();
        f.write_str(&names.join("+"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub settings: SettingsCombination,
    pub criteria: CriteriaValues,
    /// Dense ascending rank per criterion; `None` outside the subset or when
    /// the criterion is undefined for this candidate.
    pub ranks: [Option<usize>; 4],
}

impl CandidateScore {
    /// Worst and summed rank over `subset`, or `None` if any is missing.
    fn rank_profile(&self, subset: CriteriaSubset) -> Option<(usize, usize)> {
        let mut worst = 0;
        let mut sum = 0;
        for k in subset.members() {
            let r = self.ranks[k]?;
            worst = worst.max(r);
            sum += r;
        }
        Some((worst, sum))
    }
}

/// Dense ascending ranks (ties share a rank) per criterion of `subset`.
/// The returned list keeps the input order.
pub fn rank_candidates(candidates: &[Candidate], subset: CriteriaSubset) -> Result<Vec<CandidateScore>> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to rank".into()));
    }
    if subset.is_empty() {
        return Err(Error::Config("criteria subset is empty".into()));
    }
    let mut ranks = vec![[None; 4]; candidates.len()];
    for k in subset.members() {
        let mut distinct: Vec<f64> = candidates.iter().filter_map(|c| c.criteria.get(k)).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for (r, c) in ranks.iter_mut().zip(candidates) {
            r[k] = c
                .criteria
                .get(k)
                .map(|v| distinct.partition_point(|d| d.total_cmp(&v).is_lt()));
        }
    }
    Ok(candidates
        .iter()
        .zip(ranks)
        .map(|(c, ranks)| CandidateScore {
            settings: c.settings,
            criteria: c.criteria,
            ranks,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub chosen: CandidateScore,
    /// Smallest K at which every criterion's top-K set shares a candidate.
    pub depth: usize,
    pub subset: CriteriaSubset,
}

/// Rank-intersection selection.
///
/// The top-K set of a criterion holds the candidates whose rank is below K.
/// The smallest K with a nonempty intersection over `subset` is the first K
/// exceeding some candidate's worst rank; among the candidates in that
/// intersection the lowest rank sum wins, then the lexicographically
/// smallest settings.
pub fn select(ranked: &[CandidateScore], subset: CriteriaSubset) -> Result<SelectionResult> {
    let best = ranked
        .iter()
        .filter_map(|c| c.rank_profile(subset).map(|p| (p, c)))
        .min_by(|((wa, sa), a), ((wb, sb), b)| {
            wa.cmp(wb)
                .then(sa.cmp(sb))
                .then_with(|| a.settings.lex_cmp(&b.settings))
        });
    let ((worst, _), chosen) = best.ok_or(Error::NoCandidate)?;
    // The first nonempty intersection holds exactly the candidates whose
    // worst rank is minimal, so ordering by (worst, sum, settings) finds it.
    Ok(SelectionResult {
        chosen: *chosen,
        depth: worst + 1,
        subset,
    })
}

/// Sweep report: one row per candidate with criteria, ranks over all four
/// criteria and a flag per selection.
pub fn write_report_to<W: Write>(
    ranked: &[CandidateScore],
    selections: &[(&str, &SelectionResult)],
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = INPUT_NAMES.iter().map(|s| s.to_string()).collect();
    header.extend(["c1", "c2", "c3", "c4", "rank1", "rank2", "rank3", "rank4"].map(String::from));
    header.extend(selections.iter().map(|(name, _)| format!("selected_{name}")));
    w.write_record(&header)?;
    for c in ranked {
        let mut rec: Vec<String> = c.settings.to_array().iter().map(|v| fmt_f64(*v)).collect();
        for k in 0..4 {
            rec.push(c.criteria.get(k).map(fmt_f64).unwrap_or_default());
        }
        for r in c.ranks {
            rec.push(r.map(|r| r.to_string()).unwrap_or_default());
        }
        for (_, sel) in selections {
            rec.push(u8::from(sel.chosen.settings == c.settings).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn write_report(
    ranked: &[CandidateScore],
    selections: &[(&str, &SelectionResult)],
    path: &Path,
) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_report_to(ranked, selections, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}
