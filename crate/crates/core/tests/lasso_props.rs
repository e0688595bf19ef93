use gtrex::lasso::{lambda_max_node, lasso_node, lasso_objective, lasso_path_node, LassoProblem};
use gtrex::{DataMatrix, Normalization};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn data(seed: u64, n: usize, p: usize) -> DataMatrix {
    let mut r = gtrex::rng::seeded(seed);
    DataMatrix::new(DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal)))
        .unwrap()
        .normalize(Normalization::ColumnsSqrtN)
        .unwrap()
}

fn kkt(x: &DataMatrix, k: usize, beta: &[f64], lambda: f64) -> f64 {
    let xm = x.x();
    let mut r = xm.column(k).clone_owned();
    for (j, &b) in beta.iter().enumerate() {
        r.axpy(-b, &xm.column(j), 1.0);
    }
    (0..x.p())
        .filter(|&j| j != k)
        .map(|j| {
            let g = 2.0 * xm.column(j).dot(&r);
            if beta[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * beta[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_satisfy_kkt(seed in any::<u64>(), n in 5usize..60, p in 2usize..20, frac in 0.01f64..1.0, k_raw in any::<usize>()) {
        let x = data(seed, n, p);
        let k = k_raw % p;
        let lambda = frac * lambda_max_node(&x, k).unwrap();
        let sol = lasso_node(&LassoProblem { x: &x, node_k: k, lambda }, None, 1e-7).unwrap();
        prop_assert_eq!(sol.beta[k], 0.0);
        prop_assert!(kkt(&x, k, &sol.beta, lambda) <= 1e-6);
        prop_assert!(lasso_objective(&x, k, &sol.beta, lambda) <= lasso_objective(&x, k, &vec![0.0; p], lambda) + 1e-9);
    }

    #[test]
    fn warm_start_does_not_change_the_answer(seed in any::<u64>(), frac in 0.05f64..0.9) {
        let x = data(seed, 30, 8);
        let lambda = frac * lambda_max_node(&x, 3).unwrap();
        let init: Vec<f64> = (0..8).map(|j| if j == 3 { 0.0 } else { 0.3 }).collect();
        let cold = lasso_node(&LassoProblem { x: &x, node_k: 3, lambda }, None, 1e-9).unwrap();
        let warm = lasso_node(&LassoProblem { x: &x, node_k: 3, lambda }, Some(&init), 1e-9).unwrap();
        let f_cold = lasso_objective(&x, 3, &cold.beta, lambda);
        let f_warm = lasso_objective(&x, 3, &warm.beta, lambda);
        prop_assert!((f_cold - f_warm).abs() <= 1e-7 * f_cold.max(1.0));
    }
}

#[test]
fn path_points_each_satisfy_kkt() {
    let x = data(11, 50, 10);
    let grid = gtrex::lasso::unit_grid();
    let lmax = lambda_max_node(&x, 0).unwrap();
    let path = lasso_path_node(&x, 0, &grid, 1e-7).unwrap();
    assert_eq!(path.len(), 100);
    for (f, sol) in grid.iter().zip(&path) {
        assert!(kkt(&x, 0, &sol.beta, f * lmax) <= 1e-6);
    }
    assert!(path.last().unwrap().beta.iter().all(|&b| b == 0.0));
}
