//! Reference implementations shared by the integration tests. They are kept
//! deliberately naive so they can serve as oracles for the library code.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::Rng;
use sensorsweep::curves::CriteriaValues;
use sensorsweep::nn::{NetworkConfig, NetworkParameters};
use sensorsweep::sweep::{Candidate, CriteriaSubset};
use sensorsweep::SettingsCombination;

/// Forward pass with plain loops; leaky ReLU on hidden layers, identity out.
pub fn reference_output(params: &NetworkParameters, alpha: f64, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let w = &layer.weights;
        let mut z = vec![0.0; w.rows()];
        for (j, zj) in z.iter_mut().enumerate() {
            let mut s = layer.bias[j];
            for (k, ak) in a.iter().enumerate() {
                s += w[(j, k)] * ak;
            }
            *zj = s;
        }
        if l < last {
            for v in &mut z {
                if *v < 0.0 {
                    *v *= alpha;
                }
            }
        }
        a = z;
    }
    a
}

pub fn reference_cost(params: &NetworkParameters, alpha: f64, x: &[f64], y: &[f64]) -> f64 {
    let a = reference_output(params, alpha, x);
    0.5 * a.iter().zip(y).map(|(a, y)| (a - y) * (a - y)).sum::<f64>()
}

/// Worst finite-difference disagreement over every weight and bias.
#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub entries: usize,
    pub failures: usize,
    /// Largest relative error among entries with magnitude above 1e-4.
    pub worst_rel: f64,
    pub worst_abs: f64,
}

/// Compares analytic gradients to central differences with step `h`. An
/// entry passes when its relative error is below `rel` or its absolute error
/// is below `abs`.
pub fn check_gradients(
    config: &NetworkConfig,
    params: &NetworkParameters,
    x: &[f64],
    y: &[f64],
    h: f64,
    rel: f64,
    abs: f64,
) -> GradCheck {
    let trace = params.forward(config, x).unwrap();
    let grads = params.backprop(config, &trace, y).unwrap();
    let mut probe = params.clone();
    let mut out = GradCheck::default();
    let alpha = config.alpha;
    let mut judge = |analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let r = if scale > 0.0 { err / scale } else { 0.0 };
        out.entries += 1;
        if !(r < rel || err < abs) {
            out.failures += 1;
        }
        if scale > 1e-4 {
            out.worst_rel = out.worst_rel.max(r);
        }
        out.worst_abs = out.worst_abs.max(err);
    };
    for l in 0..params.layers.len() {
        for i in 0..params.layers[l].weights.as_slice().len() {
            let w0 = params.layers[l].weights.as_slice()[i];
            probe.layers[l].weights.as_mut_slice()[i] = w0 + h;
            let cp = reference_cost(&probe, alpha, x, y);
            probe.layers[l].weights.as_mut_slice()[i] = w0 - h;
            let cm = reference_cost(&probe, alpha, x, y);
            probe.layers[l].weights.as_mut_slice()[i] = w0;
            judge(grads.weights[l].as_slice()[i], (cp - cm) / (2.0 * h));
        }
        for j in 0..params.layers[l].bias.len() {
            let b0 = params.layers[l].bias[j];
            probe.layers[l].bias[j] = b0 + h;
            let cp = reference_cost(&probe, alpha, x, y);
            probe.layers[l].bias[j] = b0 - h;
            let cm = reference_cost(&probe, alpha, x, y);
            probe.layers[l].bias[j] = b0;
            judge(grads.biases[l][j], (cp - cm) / (2.0 * h));
        }
    }
    out
}

/// Random network of the given shape with uniform weights and biases.
pub fn random_params<R: Rng>(rng: &mut R, sizes: &[usize]) -> NetworkParameters {
    let config = NetworkConfig::new(sizes.to_vec(), 0.3).unwrap();
    let mut p = NetworkParameters::init(&config, rng.random()).unwrap();
    for layer in &mut p.layers {
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    p
}

/// Number of distinct values strictly below `v`.
fn dense_rank(values: &[f64], v: f64) -> usize {
    let below: HashSet<u64> = values.iter().filter(|x| **x < v).map(|x| x.to_bits()).collect();
    below.len()
}

/// Exhaustive selection: grow K from 1, intersect the per-criterion top-K
/// sets, and stop at the first nonempty intersection. Ties there go to the
/// lowest rank sum, then to the lexicographically smallest settings.
/// Returns the chosen settings and K.
pub fn brute_force_select(cands: &[Candidate], subset: CriteriaSubset) -> Option<(SettingsCombination, usize)> {
    let members: Vec<usize> = subset.members().collect();
    let ranks: Vec<Vec<Option<usize>>> = members
        .iter()
        .map(|&k| {
            let defined: Vec<f64> = cands.iter().filter_map(|c| c.criteria.get(k)).collect();
            cands.iter().map(|c| c.criteria.get(k).map(|v| dense_rank(&defined, v))).collect()
        })
        .collect();
    for big_k in 1..=cands.len() + 1 {
        let mut inter: Option<HashSet<usize>> = None;
        for r in &ranks {
            let top: HashSet<usize> = (0..cands.len())
                .filter(|&i| matches!(r[i], Some(x) if x < big_k))
                .collect();
            inter = Some(match inter {
                None => top,
                Some(prev) => prev.intersection(&top).copied().collect(),
            });
        }
        let inter = inter.unwrap_or_default();
        if inter.is_empty() {
            continue;
        }
        let best = inter
            .into_iter()
            .min_by(|&a, &b| {
                let sa: usize = ranks.iter().map(|r| r[a].unwrap()).sum();
                let sb: usize = ranks.iter().map(|r| r[b].unwrap()).sum();
                sa.cmp(&sb).then_with(|| cands[a].settings.lex_cmp(&cands[b].settings))
            })
            .unwrap();
        return Some((cands[best].settings, big_k));
    }
    None
}

/// Random candidate set. Criterion values come from a small pool so ties are
/// common; about one candidate in ten has an undefined dip criterion. Settings
/// are distinct.
pub fn random_candidates<R: Rng>(rng: &mut R, n: usize) -> Vec<Candidate> {
    let pool = rng.random_range(2..8);
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let draw = |rng: &mut R| {
        if rng.random_bool(0.5) {
            rng.random_range(0..pool) as f64
        } else {
            rng.random_range(0.0..pool as f64)
        }
    };
    ids.into_iter()
        .map(|id| {
            let settings = SettingsCombination::from_array([
                (id / 10) as f64,
                (id % 10) as f64,
                rng.random_range(0..3) as f64,
                0.0,
                0.0,
            ]);
            let criteria = CriteriaValues {
                c1: draw(rng),
                c2: if rng.random_bool(0.1) { None } else { Some(draw(rng)) },
                c3: draw(rng),
                c4: draw(rng),
            };
            Candidate { settings, criteria }
        })
        .collect()
}

pub fn random_subset<R: Rng>(rng: &mut R) -> CriteriaSubset {
    loop {
        let m = [rng.random_bool(0.5), rng.random_bool(0.5), rng.random_bool(0.5), rng.random_bool(0.5)];
        if m.iter().any(|b| *b) {
            return CriteriaSubset(m);
        }
    }
}
