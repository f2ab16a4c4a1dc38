mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensorsweep::curves::{criteria, fit_line, Curve, FIT_BOUND};
use sensorsweep::dataset::{EncodedTable, NormalizationSpec};
use sensorsweep::nn::{quadratic_cost_batch, NetworkConfig, NetworkParameters, OptimizerState, Surrogate};
use sensorsweep::par::Exec;
use sensorsweep::sensor::{GridSpec, SensorGroundTruth, CATEGORIES, INPUT5_MAX};
use sensorsweep::sweep::{
    build_interpolated_grid, predict_curve, rank_candidates, select, sweep, CriteriaSubset, InterpolationSpec,
};
use sensorsweep::SettingsCombination;

fn settings_in_range() -> impl Strategy<Value = SettingsCombination> {
    let b = GridSpec::full_factorial().bounds();
    (b[0].0..=b[0].1, b[1].0..=b[1].1, b[2].0..=b[2].1, b[3].0..=b[3].1, b[4].0..=b[4].1)
        .prop_map(|(a, b, c, d, e)| SettingsCombination::from_array([a, b, c, d, e]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>(), h1 in 2usize..9, h2 in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [10, h1, h2, 3];
        let config = NetworkConfig::new(sizes.to_vec(), 0.3).unwrap();
        let params = common::random_params(&mut rng, &sizes);
        let x: Vec<f64> = (0..10).map(|i| ((seed >> (i % 60)) & 0xff) as f64 / 255.0 - 0.5).collect();
        let y = [0.3, -0.2, 0.9];
        let check = common::check_gradients(&config, &params, &x, &y, 1e-6, 1e-5, 1e-8);
        prop_assert_eq!(check.failures, 0);
    }

    #[test]
    fn small_sgd_step_lowers_batch_cost(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [10, 6, 6, 3];
        let config = NetworkConfig::new(sizes.to_vec(), 0.3).unwrap();
        let mut params = common::random_params(&mut rng, &sizes);
        let xs: Vec<[f64; 10]> = (0..8).map(|i| std::array::from_fn(|k| ((i * 7 + k * 3) % 11) as f64 / 10.0)).collect();
        let ys: Vec<[f64; 3]> = (0..8).map(|i| [i as f64 / 8.0, 0.5, -0.25]).collect();
        let (grads, before) = params.batch_gradients(&config, &xs, &ys, Exec::Sequential);
        let norm2: f64 = grads.blocks().flatten().map(|g| g * g).sum();
        prop_assume!(norm2 > 1e-12);
        OptimizerState::sgd(1e-6, &params).unwrap().step(&mut params, &grads);
        let outs: Vec<Vec<f64>> = xs.iter().map(|x| common::reference_output(&params, 0.3, x)).collect();
        let after = quadratic_cost_batch(&ys, &outs).unwrap();
        prop_assert!(after < before, "{} -> {}", before, after);
    }

    #[test]
    fn selection_ignores_candidate_order(seed in any::<u64>(), n in 1usize..40) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cands = common::random_candidates(&mut rng, n);
        let subset = common::random_subset(&mut rng);
        let pick = |c: &[sensorsweep::sweep::Candidate]| {
            rank_candidates(c, subset).and_then(|r| select(&r, subset)).ok().map(|s| (s.chosen.settings, s.depth))
        };
        let first = pick(&cands);
        prop_assert_eq!(first, common::brute_force_select(&cands, subset));
        cands.reverse();
        for i in (1..n).rev() {
            cands.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(pick(&cands), first);
    }

    /// Improving the winner on any criterion cannot dethrone it.
    #[test]
    fn improving_the_winner_keeps_it(seed in any::<u64>(), n in 2usize..40, k in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cands = common::random_candidates(&mut rng, n);
        let subset = CriteriaSubset::ALL;
        let Ok(sel) = rank_candidates(&cands, subset).and_then(|r| select(&r, subset)) else {
            return Ok(());
        };
        let winner = cands.iter_mut().find(|c| c.settings == sel.chosen.settings).unwrap();
        match k {
            0 => winner.criteria.c1 -= 100.0,
            1 => winner.criteria.c2 = winner.criteria.c2.map(|v| v - 100.0),
            2 => winner.criteria.c3 -= 100.0,
            _ => winner.criteria.c4 -= 100.0,
        }
        let again = select(&rank_candidates(&cands, subset).unwrap(), subset).unwrap();
        prop_assert_eq!(again.chosen.settings, sel.chosen.settings);
        prop_assert!(again.depth <= sel.depth);
    }

    #[test]
    fn single_criterion_is_argmin(seed in any::<u64>(), n in 1usize..40, k in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands = common::random_candidates(&mut rng, n);
        let subset = CriteriaSubset::single(k);
        let best = cands
            .iter()
            .filter_map(|c| c.criteria.get(k).map(|v| (v, c.settings)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1)));
        let got = rank_candidates(&cands, subset).and_then(|r| select(&r, subset));
        match best {
            Some((_, s)) => {
                let got = got.unwrap();
                prop_assert_eq!(got.chosen.settings, s);
                prop_assert_eq!(got.depth, 1);
            }
            None => prop_assert!(got.is_err()),
        }
    }

    #[test]
    fn noise_free_sensor_tracks_ideal_below_fit_bound(s in settings_in_range(), input5 in 0..=INPUT5_MAX, cat in 0..CATEGORIES) {
        let truth = SensorGroundTruth::default();
        let r = truth.simulate(&s, input5, cat).unwrap();
        prop_assert!(r.signal > 0.0 && r.snr.is_finite() && r.output3.is_finite());
        prop_assert!(r.snr <= 5.0 * r.signal.log10() + 1e-12);
        if r.signal < FIT_BOUND {
            prop_assert!((r.snr - 5.0 * r.signal.log10()).abs() < 0.5);
        }
        if input5 < INPUT5_MAX {
            let next = truth.simulate(&s, input5 + 1, cat).unwrap();
            prop_assert!(next.signal > r.signal);
        }
        prop_assert_eq!(truth.simulate(&s, input5, cat).unwrap(), r);
    }

    #[test]
    fn ideal_curves_score_zero(offset in -2.0f64..2.0, n in 20usize..120) {
        let pts: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| {
                let s = 10f64.powf(offset + 6.0 * i as f64 / (n - 1) as f64);
                (s, 5.0 * s.log10(), 3.0)
            })
            .collect();
        let curve = Curve::new(SettingsCombination::from_array([0.0; 5]), pts).unwrap();
        let c = criteria(&curve).unwrap();
        prop_assert!(c.c1 < 1e-9 && c.c3 < 1e-9);
        prop_assert!(c.c2.is_none_or(|p| p < 1e-9));
        prop_assert!((c.c4 - 3.0).abs() < 1e-12);
        let line = fit_line(&curve).unwrap();
        prop_assert!((line.slope - 5.0).abs() < 1e-9);
    }
}

#[test]
fn sweep_is_identical_across_execution_policies() {
    let grid = GridSpec::scaled(0.2).unwrap();
    let rows = sensorsweep::sensor::generate_dataset(&SensorGroundTruth::default(), &grid, Exec::Sequential).unwrap();
    let norm = NormalizationSpec::fit(rows.iter()).unwrap();
    let table = EncodedTable::encode(rows.iter(), &norm).unwrap();
    assert_eq!(table.len(), 6400);
    let config = NetworkConfig::with_hidden(&[12, 12]);
    let params = NetworkParameters::init(&config, 3).unwrap();
    let model = Surrogate::new(config, params, norm).unwrap();
    let spec = InterpolationSpec::uniform(&GridSpec::full_factorial(), [3, 2, 3, 2, 2]).unwrap();
    let g = build_interpolated_grid(&spec, &GridSpec::full_factorial().bounds()).unwrap();
    let a = sweep(&model, &g, Exec::Sequential).unwrap();
    let b = sweep(&model, &g, Exec::Parallel).unwrap();
    assert_eq!(a.len(), 72);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.settings, y.settings);
        assert_eq!(format!("{:?}", x.criteria), format!("{:?}", y.criteria));
    }
    // Sweep scores equal scoring the curve directly.
    let curve = predict_curve(&model, &a[5].settings, &mut model.trace()).unwrap();
    assert_eq!(criteria(&curve).unwrap(), a[5].criteria);
}
