use featmix_core::eval::mse;
use featmix_core::regressors::{
    ForestParams, Gamma, KnnRegressor, Predictor, RandomForest, RegressionTree, SvrModel, SvrParams, TreeParams,
};
use featmix_core::{Dataset, Sample, SeedSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(n: usize, m: usize, grid: bool, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..m)
                .map(|_| {
                    let v: f64 = rng.random_range(-3.0..3.0);
                    if grid {
                        v.round()
                    } else {
                        v
                    }
                })
                .collect();
            let y = x.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v.sin()).sum::<f64>()
                + rng.random_range(-0.2..0.2);
            Sample::new(x, y, None)
        })
        .collect();
    let names = (0..m).map(|j| format!("f{j}")).collect();
    Dataset::new(names, "y", samples).unwrap()
}

#[test]
fn knn_matches_exhaustive_search() {
    // Coarse grid coordinates force many distance ties.
    let train = random_dataset(300, 3, true, 11);
    let queries = random_dataset(200, 3, false, 12);
    let k = 5;
    let model = KnnRegressor::fit(&train, k).unwrap();
    for q in queries.samples() {
        let mut all: Vec<(f64, usize)> = train
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let d: f64 = s.features.iter().zip(&q.features).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: f64 = all[..k].iter().map(|&(_, i)| train.samples()[i].target).sum::<f64>() / k as f64;
        assert_eq!(model.predict(&q.features).unwrap(), expected);
    }
}

#[test]
fn forest_of_one_unbagged_tree_is_the_tree() {
    let train = random_dataset(250, 2, false, 5);
    let queries = random_dataset(200, 2, false, 6);
    let params = ForestParams {
        n_trees: 1,
        bootstrap: false,
        tree: TreeParams::default(),
    };
    let rf = RandomForest::fit(&train, &params, &SeedSpec::new(1, "rf")).unwrap();
    let dt = RegressionTree::fit(&train, &TreeParams::default()).unwrap();
    for q in queries.samples().iter().chain(train.samples()) {
        assert_eq!(rf.predict(&q.features).unwrap(), dt.predict(&q.features).unwrap());
    }
}

fn training_mse(model: &dyn Predictor, d: &Dataset) -> f64 {
    mse(&d.targets(), &model.predict_dataset(d).unwrap()).unwrap()
}

#[test]
fn tree_training_error_falls_with_depth() {
    let d = random_dataset(400, 2, false, 21);
    let mut last = f64::INFINITY;
    for depth in 1..=8 {
        let p = TreeParams {
            max_depth: Some(depth),
            ..TreeParams::default()
        };
        let e = training_mse(&RegressionTree::fit(&d, &p).unwrap(), &d);
        assert!(e <= last, "depth {depth}: {e} > {last}");
        last = e;
    }
    let full = RegressionTree::fit(&d, &TreeParams::default()).unwrap();
    assert_eq!(training_mse(&full, &d), 0.0);
}

#[test]
fn constant_target_forest_is_constant() {
    let samples = (0..40).map(|i| Sample::new(vec![i as f64, (i % 3) as f64], 4.25, None)).collect();
    let d = Dataset::new(vec!["a".into(), "b".into()], "y", samples).unwrap();
    let rf = RandomForest::fit(&d, &ForestParams { n_trees: 7, ..ForestParams::default() }, &SeedSpec::new(2, "rf"))
        .unwrap();
    for q in [[0.0, 0.0], [100.0, -4.0], [17.5, 2.0]] {
        assert_eq!(rf.predict(&q).unwrap(), 4.25);
    }
}

/// Reference solver for the same doubled dual:
/// minimise 0.5 b'Qb + p'b over 0 <= b <= C, sum(y b) = 0, by accelerated
/// projected gradient with an exact projection.
struct DenseDual {
    q: Vec<Vec<f64>>,
    p: Vec<f64>,
    y: Vec<f64>,
    c: f64,
}

impl DenseDual {
    fn new(design: &[f64], dim: usize, z: &[f64], gamma: f64, c: f64, eps: f64) -> Self {
        let n = z.len();
        let k = |a: usize, b: usize| {
            let d2: f64 = (0..dim).map(|j| (design[a * dim + j] - design[b * dim + j]).powi(2)).sum();
            (-gamma * d2).exp()
        };
        let y: Vec<f64> = (0..2 * n).map(|t| if t < n { 1.0 } else { -1.0 }).collect();
        let q = (0..2 * n)
            .map(|i| (0..2 * n).map(|j| y[i] * y[j] * k(i % n, j % n)).collect())
            .collect();
        let p = (0..2 * n).map(|t| if t < n { eps - z[t] } else { eps + z[t - n] }).collect();
        Self { q, p, y, c }
    }

    fn objective(&self, b: &[f64]) -> f64 {
        let quad: f64 = (0..b.len()).map(|i| b[i] * (0..b.len()).map(|j| self.q[i][j] * b[j]).sum::<f64>()).sum();
        0.5 * quad + b.iter().zip(&self.p).map(|(x, y)| x * y).sum::<f64>()
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        let at = |nu: f64| -> Vec<f64> { v.iter().zip(&self.y).map(|(x, y)| (x - nu * y).clamp(0.0, self.c)).collect() };
        let g = |nu: f64| at(nu).iter().zip(&self.y).map(|(b, y)| b * y).sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi))
    }

    fn solve(&self, iters: usize) -> Vec<f64> {
        let l = self.p.len();
        let lip = self.q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut x = vec![0.0; l];
        let mut w = x.clone();
        let mut t = 1.0f64;
        for _ in 0..iters {
            let grad: Vec<f64> = (0..l).map(|i| (0..l).map(|j| self.q[i][j] * w[j]).sum::<f64>() + self.p[i]).collect();
            let step: Vec<f64> = (0..l).map(|i| w[i] - grad[i] / lip).collect();
            let next = self.project(&step);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            w = (0..l).map(|i| next[i] + (t - 1.0) / t_next * (next[i] - x[i])).collect();
            x = next;
            t = t_next;
        }
        x
    }
}

fn linear_fixture() -> Dataset {
    let samples = (0..20)
        .map(|i| {
            let x = -2.0 + 4.0 * i as f64 / 19.0;
            Sample::new(vec![x], x, None)
        })
        .collect();
    Dataset::new(vec!["x".into()], "y", samples).unwrap()
}

#[test]
fn svr_agrees_with_dense_dual_solver() {
    let d = linear_fixture();
    let params = SvrParams {
        c: 100.0,
        epsilon: 0.05,
        gamma: Gamma::Scale,
        kkt_tol: 1e-6,
        max_passes: 1000,
    };
    let (model, trace) = SvrModel::fit_traced(&d, &params).unwrap();
    assert!(model.converged);
    let n = d.len();

    for s in d.samples() {
        let r = (model.predict(&s.features).unwrap() - s.target).abs();
        assert!(r <= params.epsilon + 1e-3, "residual {r}");
    }

    let dual = DenseDual::new(&trace.design, 1, &d.targets(), trace.gamma, params.c, params.epsilon);
    let reference = dual.solve(20_000);
    let ours: Vec<f64> = trace.alpha.iter().chain(&trace.alpha_star).copied().collect();
    let (f_ours, f_ref) = (dual.objective(&ours), dual.objective(&reference));
    assert!(f_ours <= f_ref + 1e-4 * (1.0 + f_ref.abs()), "smo {f_ours} vs reference {f_ref}");
    assert!((trace.objective.last().unwrap() + f_ours).abs() <= 1e-6 * (1.0 + f_ours.abs()));

    // Compare decision values through the reference coefficients (bias from
    // our model; identical data and kernel).
    let coef_ref: Vec<f64> = (0..n).map(|i| reference[i] - reference[i + n]).collect();
    for s in d.samples() {
        let q = model.scaler.transform(&s.features);
        let f_ref_x: f64 = (0..n)
            .map(|i| coef_ref[i] * (-trace.gamma * (trace.design[i] - q[0]).powi(2)).exp())
            .sum::<f64>()
            + model.intercept;
        assert!((model.predict(&s.features).unwrap() - f_ref_x).abs() < 5e-3);
    }
}

#[test]
fn svr_dual_feasibility_and_monotone_objective() {
    let d = linear_fixture();
    let params = SvrParams {
        c: 100.0,
        epsilon: 0.05,
        ..SvrParams::default()
    };
    let (model, trace) = SvrModel::fit_traced(&d, &params).unwrap();
    assert!(model.converged);
    let mut balance = 0.0;
    for (a, s) in trace.alpha.iter().zip(&trace.alpha_star) {
        assert!((0.0..=params.c).contains(a) && (0.0..=params.c).contains(s));
        assert_eq!(a * s, 0.0);
        balance += a - s;
    }
    assert!(balance.abs() <= 1e-6);
    for w in trace.objective.windows(2) {
        assert!(w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
    }

    // A noisier problem with many bounded variables exercises the clipping paths.
    let noisy = random_dataset(60, 2, false, 31);
    let (_, trace) = SvrModel::fit_traced(&noisy, &SvrParams::default()).unwrap();
    for w in trace.objective.windows(2) {
        assert!(w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()));
    }
    assert!(trace.alpha.iter().any(|&a| a == 1.0) || trace.alpha_star.iter().any(|&a| a == 1.0));
}
