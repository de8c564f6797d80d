use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradeoff::banditron::{sign_grid, FeedbackChannel, Halving, Stream};
use tradeoff::dnf::{dnf_to_conjunction, greedy_conjunction_erm, ThreeDnf, TripleExpansion};
use tradeoff::gf2::BitVec;
use tradeoff::harness::{self, ExperimentConfig, PlantedSigmoid};
use tradeoff::kernel::{self, NormalizedLinear, SigmoidTransfer, SolverConfig};
use tradeoff::par::Execution;
use tradeoff::sparse_pca::{self, RecoveryResult, SpikedModel};
use tradeoff::stats::{self, binomial_sigma};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn greedy_erm_keeps_target_coordinates_and_generalizes() {
    let d = 10;
    let eps = 0.1;
    let m = (2.0 * (d * d * d) as f64 / eps) as usize;
    let te = TripleExpansion::new(d);
    for t in 0..5 {
        let mut r = rng(t);
        let target = ThreeDnf::random(d, 1, 3, &mut r);
        let xs: Vec<BitVec> = (0..m).map(|_| BitVec::random(d, &mut r)).collect();
        let psi = te.expand_all(&xs, Execution::Parallel).unwrap();
        let data: Vec<(BitVec, bool)> = psi
            .into_iter()
            .zip(&xs)
            .map(|(p, x)| (p, target.eval(x).unwrap()))
            .collect();
        let learned = greedy_conjunction_erm(te.dimension(), &data).unwrap();
        let truth = dnf_to_conjunction(&target, &te).unwrap();
        assert!(truth.kept().is_subset_of(learned.kept()).unwrap());
        // uniform inputs: the exact error is the truth-table disagreement rate
        let wrong = (0..1u64 << d)
            .filter(|&v| {
                let x = BitVec::from_u64(v, d);
                learned.eval(&te.expand(&x).unwrap()).unwrap() != target.eval(&x).unwrap()
            })
            .count();
        assert!(wrong as f64 / 1024.0 <= eps, "trial {t}: {wrong}/1024");
    }
}

#[test]
fn convex_solver_tracks_subset_oracle() {
    let (l, eps, m) = (0.4, 0.2, 40);
    let base: Arc<dyn kernel::Kernel> = Arc::new(NormalizedLinear);
    let transfer = SigmoidTransfer { l };
    let size = kernel::subset_size(l, eps);
    assert_eq!(size, 4);
    for t in 0..5 {
        let mut r = rng(50 + t);
        let target = PlantedSigmoid::random(3, 3, base.clone(), transfer, &mut r).unwrap();
        let train = target.sample(m, &mut r).unwrap();
        let test = target.sample(5000, &mut r).unwrap();
        let bound = kernel::norm_bound(l, eps, 1.0).value;
        let (convex, _) = kernel::erm_convex(
            &train,
            kernel::transformed_kernel(base.clone()),
            bound,
            SolverConfig::default(),
        )
        .unwrap();
        let subset = kernel::erm_subset_search(
            &train,
            base.clone(),
            transfer,
            size,
            kernel::DEFAULT_SUBSET_CAP,
            Execution::Parallel,
        )
        .unwrap();
        let (a, b) = (convex.loss(&test).unwrap(), subset.loss(&test).unwrap());
        assert!(a <= b + eps, "trial {t}: convex {a}, subset {b}");
        assert!(convex.norm_sq().unwrap() <= bound * bound + 1e-6);
    }
}

fn recovery_rate(d: usize, k: usize, m: usize, trials: u64, oracle: bool, seed: u64) -> f64 {
    let hits = (0..trials)
        .filter(|t| {
            let mut r = rng(seed + t);
            let model = SpikedModel::random(d, k, &mut r).unwrap();
            let x = sparse_pca::sample_gaussian(&model, m, &mut r).unwrap();
            let s = if oracle {
                sparse_pca::exhaustive_support_oracle(&x, k).unwrap()
            } else {
                sparse_pca::diagonal_thresholding(&x, k).unwrap()
            };
            RecoveryResult::compare(s, &model).exact
        })
        .count();
    hits as f64 / trials as f64
}

fn slack(a: f64, b: f64, n: u64) -> f64 {
    3.0 * (binomial_sigma(a, n).powi(2) + binomial_sigma(b, n).powi(2)).sqrt()
}

#[test]
fn thresholding_rate_grows_with_m() {
    let trials = 100;
    let rates: Vec<f64> = [100, 300, 1000, 3000]
        .iter()
        .map(|&m| recovery_rate(100, 5, m, trials, false, 7_000))
        .collect();
    for w in rates.windows(2) {
        assert!(w[1] >= w[0] - slack(w[0], w[1], trials), "{rates:?}");
    }
}

#[test]
fn oracle_dominates_thresholding() {
    let trials = 200;
    for m in [10, 25, 50, 100, 200] {
        let thr = recovery_rate(12, 2, m, trials, false, 9_000);
        let orc = recovery_rate(12, 2, m, trials, true, 9_000);
        assert!(
            orc >= thr - slack(thr, orc, trials),
            "m={m}: oracle {orc}, thresholding {thr}"
        );
    }
}

#[test]
fn sample_size_gap_between_methods() {
    let (d, k, trials) = (20, 3, 40);
    let grid = [10, 20, 40, 80, 160, 320, 640, 1280];
    let first_ok = |oracle: bool| {
        grid.iter()
            .copied()
            .find(|&m| recovery_rate(d, k, m, trials, oracle, 11_000) >= 0.9)
    };
    let (thr, orc) = (first_ok(false), first_ok(true));
    println!("d={d} k={k}: thresholding reaches 0.9 at m={thr:?}, oracle at m={orc:?}");
    assert!(orc.unwrap() <= thr.unwrap());
}

#[test]
fn halving_survivors_shrink_and_keep_target() {
    let grid = sign_grid(2, 5).unwrap();
    for seed in 0..5 {
        let mut r = rng(300 + seed);
        let target = grid[r.random_range(0..grid.len())].clone();
        let stream = Stream::from_target(target.clone(), 0.0).unwrap();
        let mut h = Halving::new(grid.clone()).unwrap();
        let mut prev = h.survivors().len();
        for _ in 0..300 {
            let (x, y) = stream.next_example(&mut r);
            h.step(&x, &FeedbackChannel::new(y)).unwrap();
            assert!(h.survivors().len() <= prev);
            prev = h.survivors().len();
        }
        assert!(h.survivors().contains(&target));
    }
}

#[test]
fn crypto_curve_error_falls_with_m() {
    let cfg = ExperimentConfig::from_json(
        r#"{"family":"crypto","params":{"n":16,"algorithms":["efficient"]},
            "m_grid":[16,160,25600],"epsilon":0.1,"trials":20,"base_seed":11}"#,
    )
    .unwrap();
    let points = harness::run_curve(&cfg).unwrap();
    let at = |m: usize| -> Vec<f64> {
        points
            .iter()
            .filter(|p| p.m == m)
            .map(|p| p.eval_error)
            .collect()
    };
    let (small, large) = (at(16), at(25600));
    let sd = |v: &[f64]| {
        let mu = stats::mean(v);
        (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64 / v.len() as f64)
            .sqrt()
    };
    assert!(
        stats::mean(&large)
            <= stats::mean(&small) + 3.0 * (sd(&small).powi(2) + sd(&large).powi(2)).sqrt()
    );
    assert!(stats::mean(&large) <= 0.1);
}

#[test]
fn timing_excludes_evaluation() {
    // Kernel evaluation scores 10^4 held-out points against every support
    // point; training at m = 5 with 10 steps is far cheaper than that.
    let cfg = ExperimentConfig::from_json(
        r#"{"family":"kernel","params":{"dim":3,"l":1.0,"steps":10},
            "m_grid":[5],"epsilon":0.5,"trials":1}"#,
    )
    .unwrap();
    let start = std::time::Instant::now();
    let points = harness::run_curve(&cfg).unwrap();
    let total = start.elapsed().as_nanos() as u64;
    assert!(
        points[0].train_time_ns * 5 < total,
        "{} of {total}",
        points[0].train_time_ns
    );
}

#[test]
#[ignore = "unattainable: exploration alone costs about gamma*(1-1/k)*T mistakes, far above Perceptron's total"]
fn banditron_within_five_times_perceptron() {
    use tradeoff::banditron::{run_stream, OnlineAlgorithm, StreamConfig};
    let cfg = StreamConfig {
        k: 4,
        d: 50,
        margin: 0.2,
        horizon: 100_000,
        noise: 0.0,
    };
    let mut r = rng(77);
    let stream = Stream::with_margin(&cfg, &mut r).unwrap();
    let bandit = run_stream(
        OnlineAlgorithm::Banditron {
            gamma_explore: None,
        },
        &stream,
        cfg.horizon,
        &mut rng(1),
    );
    let full = run_stream(
        OnlineAlgorithm::Perceptron,
        &stream,
        cfg.horizon,
        &mut rng(1),
    );
    assert!(
        bandit.total() <= 5 * full.total(),
        "banditron {} vs perceptron {}",
        bandit.total(),
        full.total()
    );
}
