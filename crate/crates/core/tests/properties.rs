mod common;

use msmkl::dataio::{decode_tensor, encode_tensor};
use msmkl::kernels::combine_weighted;
use msmkl::pipeline::{mean_std, ConfusionMatrix};
use msmkl::spp::window_ranges;
use msmkl::{
    gram, make_splits, mkl_train, normalize_gram, outer_objective, spp_pool, svm_solve, FeatureMap, GramMatrix,
    KernelSpec, MklOptions, MklProblem, PyramidSpec, SimplexWeights, SolverOptions, SplitPlan, TrainSet,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn min_eigenvalue(g: &GramMatrix) -> f64 {
    let n = g.order();
    let m = DMatrix::from_row_slice(n, n, g.as_slice());
    SymmetricEigen::new(m).eigenvalues.min()
}

fn feature_map() -> impl Strategy<Value = FeatureMap> {
    (1usize..=4, 4usize..=20).prop_flat_map(|(c, a)| {
        prop::collection::vec(-5.0f32..5.0, c * a * a).prop_map(move |v| FeatureMap::new(c, a, v).unwrap())
    })
}

fn points(max_n: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    (2usize..=max_n, 1usize..=5)
        .prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-3.0f32..3.0, d), n))
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::Linear),
        (0.05f64..2.0).prop_map(|gamma| KernelSpec::Gaussian { gamma })
    ]
}

fn labelled(max_n: usize) -> impl Strategy<Value = (Vec<Vec<f32>>, Vec<f64>)> {
    points(max_n).prop_flat_map(|x| {
        let n = x.len();
        prop::collection::vec(prop::bool::ANY, n).prop_map(move |signs| {
            let mut y: Vec<f64> = signs.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
            y[0] = 1.0;
            y[n - 1] = -1.0;
            (x.clone(), y)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spp_length_is_independent_of_map_size(map in feature_map()) {
        let spec = PyramidSpec::default();
        let d = spp_pool(&map, &spec, 0).unwrap();
        prop_assert_eq!(d.values.len(), map.channels() * 21);
        for c in 0..map.channels() {
            let top = map.channel(c).iter().copied().fold(f32::NEG_INFINITY, f32::max);
            prop_assert_eq!(d.values[c], top);
        }
    }

    #[test]
    fn spp_is_monotone(map in feature_map(), bump in 0.0f32..2.0) {
        let spec = PyramidSpec::default();
        let before = spp_pool(&map, &spec, 0).unwrap();
        let raised: Vec<f32> = map.data().iter().map(|v| v + bump).collect();
        let after = spp_pool(&FeatureMap::new(map.channels(), map.side(), raised).unwrap(), &spec, 0).unwrap();
        for (b, a) in before.values.iter().zip(&after.values) {
            prop_assert!((a - (b + bump)).abs() <= 1e-5 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn windows_cover_every_cell(a in 1usize..=80, n in 1usize..=9) {
        prop_assume!(a >= n);
        let ranges = window_ranges(a, n).unwrap();
        prop_assert_eq!(ranges.len(), n);
        let mut hit = vec![false; a];
        for (lo, hi) in ranges {
            prop_assert!(lo < hi && hi <= a);
            hit[lo..hi].iter_mut().for_each(|h| *h = true);
        }
        prop_assert!(hit.into_iter().all(|h| h));
    }

    #[test]
    fn gram_is_symmetric_psd(x in points(12), k in kernel()) {
        let g = gram(&x, &k).unwrap();
        let n = g.order();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        let trace: f64 = g.diagonal().iter().sum();
        prop_assert!(min_eigenvalue(&g) >= -1e-9 * (1.0 + trace));
    }

    #[test]
    fn normalized_gram_has_unit_diagonal(x in points(10), k in kernel()) {
        prop_assume!(x.iter().all(|v| v.iter().any(|&e| e.abs() > 1e-3)));
        let g = normalize_gram(&gram(&x, &k).unwrap()).unwrap();
        for (i, d) in g.diagonal().into_iter().enumerate() {
            prop_assert!((d - 1.0).abs() < 1e-12, "diag {i} = {d}");
        }
        prop_assert!(g.as_slice().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn simplex_combination_stays_psd(x in points(10), w in 0.0f64..=1.0) {
        let a = gram(&x, &KernelSpec::Linear).unwrap();
        let b = gram(&x, &KernelSpec::Gaussian { gamma: 0.5 }).unwrap();
        let c = combine_weighted(&[a.clone(), b.clone()], &[w, 1.0 - w]).unwrap();
        let trace: f64 = c.diagonal().iter().sum();
        prop_assert!(min_eigenvalue(&c) >= -1e-9 * (1.0 + trace));
        prop_assert!((c.get(0, 1) - (w * a.get(0, 1) + (1.0 - w) * b.get(0, 1))).abs() < 1e-12);
    }

    #[test]
    fn svm_solution_is_feasible_and_kkt((x, y) in labelled(16), k in kernel(), c in 0.05f64..20.0) {
        let g = gram(&x, &k).unwrap();
        let ts = TrainSet::new(&g, &y, c).unwrap();
        let opts = SolverOptions::default();
        let m = svm_solve(&ts, &opts).unwrap();
        prop_assert!(m.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        let eq: f64 = m.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(eq.abs() <= 1e-8 * y.len() as f64 * c);
        prop_assert!(m.kkt_residual <= opts.tol);
        prop_assert!(m.objective >= 0.0);
        prop_assert!((m.objective - ts.objective(&m.alpha)).abs() < 1e-9 * (1.0 + m.objective.abs()));
    }

    #[test]
    fn mkl_weights_on_simplex_and_no_worse_than_uniform(seed in 0u64..10_000, m in 2usize..=3) {
        let mut rng = common::rng(seed);
        let (grams, y) = common::random_mkl_problem(&mut rng, 12, m);
        let p = MklProblem::new(&grams, &y, 1.0).unwrap();
        let model = mkl_train(&p, &MklOptions::default()).unwrap();
        let d = model.weights.as_slice();
        prop_assert!(d.iter().all(|&w| w >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let tight = SolverOptions::with_tol(1e-8);
        let at_uniform = outer_objective(&p, &SimplexWeights::uniform(m), &tight).unwrap();
        let at_final = outer_objective(&p, &model.weights, &tight).unwrap();
        prop_assert!(at_final <= at_uniform + 1e-6 * (1.0 + at_uniform.abs()));
        for pair in model.trace.windows(2) {
            prop_assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn tensor_round_trip_is_bitwise(dims in prop::collection::vec(1u32..5, 1..=4), seed in any::<u64>()) {
        let count: u32 = dims.iter().product();
        let mut rng = common::rng(seed);
        let values: Vec<f32> = common::gaussian_points(&mut rng, 1, count as usize).remove(0);
        let bytes = encode_tensor(&dims, &values).unwrap();
        let t = decode_tensor(&bytes).unwrap();
        prop_assert_eq!(t.dims, dims);
        prop_assert!(t.values.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn confusion_invariants(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let (actual, predicted): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let classes = (0..4).map(|k| k.to_string()).collect();
        let cm = ConfusionMatrix::from_predictions(classes, &actual, &predicted).unwrap();
        for (k, row) in cm.counts().iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<u64>() as usize, actual.iter().filter(|&&a| a == k).count());
        }
        prop_assert_eq!(cm.overall_accuracy(), cm.trace() as f64 / cm.total() as f64);
    }

    #[test]
    fn population_std_bounds(v in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let (mean, std) = mean_std(&v);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= mean && mean <= hi + 1e-12);
        prop_assert!(std >= 0.0 && std <= 0.5 * (hi - lo) + 1e-12);
    }

    #[test]
    fn splits_are_disjoint_and_stratified(train in 1usize..5, reps in 1usize..4, seed in any::<u64>()) {
        let ds = common::multiscale_dataset(6, 3);
        let splits = make_splits(&ds, &SplitPlan { train_per_class: train, repetitions: reps, seed }).unwrap();
        prop_assert_eq!(splits.len(), reps);
        for s in &splits {
            prop_assert_eq!(s.train.len(), 3 * train);
            prop_assert_eq!(s.train.len() + s.test.len(), ds.len());
            prop_assert!(s.train.iter().all(|i| !s.test.contains(i)));
            for k in 0..3 {
                prop_assert_eq!(s.train.iter().filter(|&&i| ds.labels()[i] == k).count(), train);
            }
        }
        let again = make_splits(&ds, &SplitPlan { train_per_class: train, repetitions: reps, seed }).unwrap();
        prop_assert_eq!(splits, again);
    }
}
