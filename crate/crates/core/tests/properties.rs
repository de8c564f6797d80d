use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradeoff::banditron::{sign_grid, FeedbackChannel, Halving, LinearMulticlass, Stream};
use tradeoff::crypto::{self, CryptoDistribution, RDistribution};
use tradeoff::gf2::{inner_product, BitVec, Gf2Basis};
use tradeoff::harness::{self, ExperimentConfig};
use tradeoff::kernel::{self, Gaussian, Kernel, NormalizedLinear, SigmoidTransfer, SolverConfig};
use tradeoff::learners;
use tradeoff::owp::{FeistelPermutation, PermutationOracle, TablePermutation, Trapdoor};
use tradeoff::par::Execution;
use tradeoff::preferences::{self, PairPredictor, PrefExample, WeightPredictor};
use tradeoff::sparse_pca::{self, SpikedModel};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_mixture(
    perm: Arc<TablePermutation>,
    parts: usize,
    r: &mut ChaCha8Rng,
) -> CryptoDistribution {
    let n = perm.n();
    let comps = (0..parts)
        .map(|i| {
            let rd = if i % 2 == 0 {
                RDistribution::Uniform
            } else {
                let mut dirs = Gf2Basis::new(n);
                for _ in 0..r.random_range(0..n) {
                    dirs.insert(&BitVec::random(n, r)).unwrap();
                }
                RDistribution::Affine {
                    offset: BitVec::random(n, r),
                    directions: dirs,
                }
            };
            (BitVec::random(n, r), r.random_range(0.1..1.0), rd)
        })
        .collect::<Vec<_>>();
    let total: f64 = comps.iter().map(|c| c.1).sum();
    let comps = comps
        .into_iter()
        .map(|(x, w, rd)| (x, w / total, rd))
        .collect();
    CryptoDistribution::mixture(comps, perm).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feistel_is_a_bijection(half in 1usize..=6, rounds in 4usize..8, seed in any::<u64>()) {
        let n = 2 * half;
        let p = FeistelPermutation::new(n, rounds, seed).unwrap();
        let mut seen = vec![false; 1 << n];
        for x in 0..1u64 << n {
            let y = p.forward_u64(x) as usize;
            prop_assert!(!seen[y]);
            seen[y] = true;
            prop_assert_eq!(p.forward_u64(x), y as u64);
        }
    }

    #[test]
    fn generated_examples_satisfy_the_hidden_label(n in 2usize..=12, parts in 1usize..4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let perm = Arc::new(TablePermutation::random(n, seed).unwrap());
        let dist = random_mixture(perm.clone(), parts, &mut r);
        for ex in crypto::sample(&dist, 200, &mut r) {
            let x = perm.trapdoor_inverse(&ex.s).unwrap();
            prop_assert_eq!(ex.b, inner_product(&x, &ex.r).unwrap());
        }
    }

    #[test]
    fn improper_predictor_rows_carry_true_labels(n in 2usize..=12, m in 1usize..300, seed in any::<u64>()) {
        let mut r = rng(seed);
        let perm = Arc::new(TablePermutation::random(n, seed ^ 1).unwrap());
        let dist = random_mixture(perm.clone(), 2, &mut r);
        let data = crypto::sample(&dist, m, &mut r);
        let (pred, report) = learners::train_efficient(&data).unwrap();
        prop_assert!(report.matching <= m);
        let x = perm.trapdoor_inverse(pred.s_prime()).unwrap();
        for (row, &tag) in pred.basis().rows().iter().zip(pred.basis().tags()) {
            prop_assert_eq!(tag, inner_product(&x, row).unwrap());
        }
        // spanned queries are answered deterministically and correctly
        for _ in 0..20 {
            let q = pred.basis().random_member(&mut r);
            prop_assert_eq!(
                pred.deterministic_output(&q, pred.s_prime()).unwrap(),
                Some(inner_product(&x, &q).unwrap())
            );
        }
    }

    #[test]
    fn lookup_erm_reaches_the_majority_floor(d in 2usize..8, m in 1usize..200, seed in any::<u64>()) {
        let mut r = rng(seed);
        let data: Vec<PrefExample> = (0..m)
            .map(|_| {
                let i = r.random_range(1..=d);
                let j = (i + r.random_range(1..d) - 1) % d + 1;
                PrefExample::new(i, j, r.random(), d).unwrap()
            })
            .collect();
        let mut cells: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for e in &data {
            let c = cells.entry((e.i, e.j)).or_default();
            if e.label { c.0 += 1 } else { c.1 += 1 }
        }
        let floor: usize = cells.values().map(|&(a, b)| a.min(b)).sum();
        let pred = preferences::lookup_erm(&data, d).unwrap();
        let err = preferences::eval_pref(&pred, &data);
        prop_assert!((err - floor as f64 / m as f64).abs() < 1e-12);
    }

    #[test]
    fn weight_predictor_follows_its_order(order in Just((1..=7usize).collect::<Vec<_>>()).prop_shuffle()) {
        let w = WeightPredictor::from_order(&order);
        prop_assert_eq!(w.order(), order.clone());
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                if i != j {
                    prop_assert_eq!(w.predict(i, j), a < b);
                }
            }
        }
    }

    #[test]
    fn kernels_are_symmetric_bounded_and_psd(
        pts in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 2..12),
        sigma in 0.2f64..3.0,
    ) {
        let bases: [Arc<dyn Kernel>; 2] = [Arc::new(NormalizedLinear), Arc::new(Gaussian { sigma })];
        for base in bases {
            for a in &pts {
                prop_assert!(base.eval(a, a).unwrap() <= 1.0 + 1e-12);
                for b in &pts {
                    prop_assert_eq!(base.eval(a, b).unwrap(), base.eval(b, a).unwrap());
                }
            }
            let t = kernel::transformed_kernel(base);
            let k = kernel::gram(t.as_ref(), &pts, Execution::Sequential).unwrap();
            prop_assert!(kernel::min_eigenvalue(&k) >= -1e-8);
        }
    }

    #[test]
    fn sigmoid_is_bounded_and_lipschitz(l in 0.05f64..2.0, a in -3.0f64..3.0, h in 1e-6f64..1e-2) {
        let phi = SigmoidTransfer { l };
        let v = phi.eval(a);
        prop_assert!(v > 0.0 && v < 1.0);
        prop_assert_eq!(phi.eval(0.0), 0.5);
        prop_assert!((phi.eval(a + h) - v).abs() <= l * h * (1.0 + 1e-9));
    }

    #[test]
    fn convex_solution_stays_in_the_norm_ball(m in 2usize..30, bound in 0.01f64..3.0, seed in any::<u64>()) {
        let mut r = rng(seed);
        let x: Vec<Vec<f64>> = (0..m).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..m).map(|_| r.random()).collect();
        let data = kernel::KernelData::new(x, y).unwrap();
        let cfg = SolverConfig { steps: 200, ..SolverConfig::default() };
        let (pred, _) = kernel::erm_convex(&data, kernel::transformed_kernel(Arc::new(NormalizedLinear)), bound, cfg).unwrap();
        prop_assert!(pred.norm_sq().unwrap() <= bound * bound + 1e-6);
    }

    #[test]
    fn spiked_model_shape(d in 2usize..40, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let model = SpikedModel::random(d, k, &mut rng(seed)).unwrap();
        prop_assert!((model.z().norm_squared() - 1.0).abs() < 1e-12);
        let cov = model.covariance();
        for c in 0..d {
            let want = if model.support().contains(&c) { 1.0 + 1.0 / k as f64 } else { 1.0 };
            prop_assert!((cov[(c, c)] - want).abs() < 1e-12);
        }
        let x = sparse_pca::sample_gaussian(&model, 30, &mut rng(seed ^ 2)).unwrap();
        let mut s = sparse_pca::diagonal_thresholding(&x, k).unwrap();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), k);
        prop_assert!(s.iter().all(|&c| c < d));
    }

    #[test]
    fn multiclass_prediction_is_lowest_argmax(
        k in 2usize..6,
        ws in proptest::collection::vec(-2i8..=2, 30),
        xs in proptest::collection::vec(-2i8..=2, 5),
    ) {
        // small integer weights make ties common
        let mut model = LinearMulticlass::zeros(k, 5);
        for r in 0..k {
            for c in 0..5 {
                model.w[(r, c)] = f64::from(ws[r * 5 + c]);
            }
        }
        let x: Vec<f64> = xs.iter().map(|&v| f64::from(v)).collect();
        let s: DVector<f64> = model.scores(&x);
        let top = s.max();
        let first = (0..k).find(|&r| s[r] == top).unwrap();
        prop_assert_eq!(model.predict(&x), first);
    }

    #[test]
    fn halving_keeps_the_target(seed in any::<u64>()) {
        let grid = sign_grid(2, 4).unwrap();
        let mut r = rng(seed);
        let target = grid[r.random_range(0..grid.len())].clone();
        let stream = Stream::from_target(target.clone(), 0.0).unwrap();
        let mut h = Halving::new(grid).unwrap();
        for _ in 0..100 {
            let (x, y) = stream.next_example(&mut r);
            h.step(&x, &FeedbackChannel::new(y)).unwrap();
        }
        prop_assert!(h.survivors().contains(&target));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn curve_points_are_well_formed(seed in any::<u64>(), family in 0usize..3) {
        let text = match family {
            0 => r#"{"family":"crypto","params":{"n":10},"m_grid":[5,50],"epsilon":0.1,"trials":2}"#,
            1 => r#"{"family":"preferences","params":{"d":4},"m_grid":[5,50],"epsilon":0.1,"trials":2}"#,
            _ => r#"{"family":"sparse_pca","params":{"d":10,"k":2},"m_grid":[5,50],"epsilon":0.1,"trials":2}"#,
        };
        let mut cfg = ExperimentConfig::from_json(text).unwrap();
        cfg.base_seed = seed;
        for p in harness::run_curve(&cfg).unwrap() {
            prop_assert!(p.train_time_ns > 0);
            prop_assert!((0.0..=1.0).contains(&p.eval_error));
        }
    }
}
