use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tagsim_core::mlcore::gbdt::Loss;
use tagsim_core::mlcore::linear::{lambda_grid, lambda_max, lasso_path, loss_and_gradient};
use tagsim_core::mlcore::{fit_gbdt, fit_linear, CscMatrix, DesignMatrix, GbdtParams, LinearParams, Link};

struct Problem {
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn gaussian_problem(seed: u64, n: usize, d: usize, logistic: bool) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0 + 1.0).collect()).collect();
    let y = rows
        .iter()
        .map(|r| {
            let eta: f64 = r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() * 0.5;
            if logistic {
                f64::from(u8::from(rng.random_bool(1.0 / (1.0 + (-eta).exp()))))
            } else {
                eta + rng.sample::<f64, _>(StandardNormal)
            }
        })
        .collect();
    Problem { rows, y }
}

fn design(p: &Problem) -> DesignMatrix {
    DesignMatrix::from_rows(&p.rows, p.y.clone()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn logistic_gradient_matches_central_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let p = gaussian_problem(seed, 40, 4, true);
        let x = CscMatrix::from_design(&design(&p));
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let (_, grad, g0) = loss_and_gradient(&x, &p.y, Link::Logistic, &w, b);
        let h = 1e-5;
        for j in 0..=4 {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < 4 {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                loss_and_gradient(&x, &p.y, Link::Logistic, &w2, b2).0
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let analytic = if j < 4 { grad[j] } else { g0 };
            worst = worst.max(rel_err(analytic, fd));
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn unpenalized_fit_matches_normal_equations() {
    for seed in 0..10 {
        let p = gaussian_problem(seed, 120, 5, false);
        let m = fit_linear(&design(&p), &LinearParams { tol: 1e-12, max_iter: 200_000, ..LinearParams::default() }).unwrap();
        let n = p.rows.len();
        let x = DMatrix::from_fn(n, 6, |i, j| if j == 0 { 1.0 } else { p.rows[i][j - 1] });
        let y = DVector::from_vec(p.y.clone());
        let xt = x.transpose();
        let beta = (&xt * &x).lu().solve(&(&xt * y)).unwrap();
        assert!((m.intercept - beta[0]).abs() < 1e-6);
        for j in 0..5 {
            assert!((m.weights[j] - beta[j + 1]).abs() < 1e-6, "seed {seed} weight {j}");
        }
    }
}

#[test]
fn single_feature_lasso_is_a_soft_threshold() {
    let p = gaussian_problem(3, 200, 1, false);
    let n = p.rows.len() as f64;
    let xs: Vec<f64> = p.rows.iter().map(|r| r[0]).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n).sqrt();
    let my = p.y.iter().sum::<f64>() / n;
    let z = xs.iter().zip(&p.y).map(|(x, y)| (x - mx) / sd * (y - my)).sum::<f64>() / n;
    for lambda in [0.0, 0.1 * z.abs(), 0.7 * z.abs(), 1.5 * z.abs()] {
        let m = fit_linear(&design(&p), &LinearParams { l1_lambda: lambda, tol: 1e-12, ..LinearParams::default() }).unwrap();
        let expected = z.signum() * (z.abs() - lambda).max(0.0) / sd;
        assert!((m.weights[0] - expected).abs() < 1e-9, "λ={lambda}");
    }
}

#[test]
fn lasso_support_shrinks_along_the_grid() {
    for (seed, link) in [(1, Link::Identity), (2, Link::Logistic), (5, Link::Identity)] {
        let p = gaussian_problem(seed, 300, 12, link == Link::Logistic);
        let x = CscMatrix::from_design(&design(&p));
        let lmax = lambda_max(&x, &p.y, link);
        let grid = lambda_grid(lmax, 8, 1e-3);
        let path = lasso_path(&x, &p.y, &LinearParams { link, ..LinearParams::default() }, &grid).unwrap();
        let nnz: Vec<usize> = path.iter().map(|m| m.n_nonzero()).collect();
        // λ_max itself sits on the threshold; just above it nothing enters
        let above = lasso_path(&x, &p.y, &LinearParams { link, ..LinearParams::default() }, &[lmax * 1.001]).unwrap();
        assert_eq!(above[0].n_nonzero(), 0);
        assert!(nnz.windows(2).all(|w| w[0] <= w[1]), "{nnz:?}");
    }
}

fn gbdt_losses(data: &DesignMatrix, params: &GbdtParams) -> Vec<f64> {
    let m = fit_gbdt(data, params).unwrap();
    (0..=m.trees.len())
        .map(|k| {
            (0..data.n_rows()).map(|i| params.loss.value(m.raw_score_n(data.row(i), k), data.target()[i])).sum::<f64>()
                / data.n_rows() as f64
        })
        .collect()
}

#[test]
fn gbdt_training_loss_never_increases() {
    for (seed, loss) in [(4, Loss::Squared), (6, Loss::Logistic), (8, Loss::Squared)] {
        let p = gaussian_problem(seed, 400, 3, loss == Loss::Logistic);
        let params = GbdtParams { n_trees: 40, loss, min_leaf: 5, ..GbdtParams::default() };
        let losses = gbdt_losses(&design(&p), &params);
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{losses:?}");
        assert!(losses.last() < losses.first());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn squared_gradient_matches_central_differences(seed in any::<u64>(), d in 1usize..5) {
        let p = gaussian_problem(seed, 25, d, false);
        let x = CscMatrix::from_design(&design(&p));
        let w = vec![0.3; d];
        let (_, grad, _) = loss_and_gradient(&x, &p.y, Link::Identity, &w, 0.1);
        for j in 0..d {
            let at = |delta: f64| {
                let mut w2 = w.clone();
                w2[j] += delta;
                loss_and_gradient(&x, &p.y, Link::Identity, &w2, 0.1).0
            };
            let fd = (at(1e-4) - at(-1e-4)) / 2e-4;
            prop_assert!(rel_err(grad[j], fd) < 1e-6);
        }
    }

    #[test]
    fn l1_nonzero_count_is_monotone_on_random_problems(seed in any::<u64>()) {
        let p = gaussian_problem(seed, 80, 6, false);
        let x = CscMatrix::from_design(&design(&p));
        let grid = lambda_grid(lambda_max(&x, &p.y, Link::Identity), 8, 1e-2);
        let path = lasso_path(&x, &p.y, &LinearParams::default(), &grid).unwrap();
        let nnz: Vec<usize> = path.iter().map(|m| m.n_nonzero()).collect();
        prop_assert!(nnz.windows(2).all(|w| w[0] <= w[1]), "{:?}", nnz);
    }
}
