#![allow(clippy::needless_range_loop)]

use adapt_core::design::{DesignPoint, Normalizer};
use adapt_core::gp::{optimize_hyperparameters, GpModel, HyperBounds, Hyperparameters, KernelSpec, PriorMean};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Draws log-times from a zero-residual GP with a unit-lengthscale RBF.
fn sample_gp(seed: u64, n: usize, noise: f64) -> Vec<(DesignPoint, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let k = |a: f64, b: f64| (-0.5 * (a - b).powi(2)).exp();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k(xs[i], xs[j]) + if i == j { noise + 1e-9 } else { 0.0 };
            for m in 0..j {
                s -= l[i][m] * l[j][m];
            }
            l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
        }
    }
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (0..n)
        .map(|i| {
            let f: f64 = (0..=i).map(|j| l[i][j] * z[j]).sum();
            (DesignPoint::scalar(xs[i]), (3.0 + f).exp())
        })
        .collect()
}

#[test]
fn recovers_the_generating_lengthscale() {
    let prior = PriorMean::Constant { seconds: 3f64.exp() };
    for seed in 0..3 {
        let data = sample_gp(seed, 80, 0.01);
        let initial = Hyperparameters {
            kernel: KernelSpec::rbf(vec![3.0], 0.5),
            noise: 0.1,
        };
        let fitted = optimize_hyperparameters(
            &prior,
            &initial,
            &Normalizer::identity(1),
            &data,
            &HyperBounds::default(),
        )
        .unwrap();
        let KernelSpec::Rbf { lengthscales, .. } = &fitted.kernel else {
            panic!("kernel family changed");
        };
        assert!(
            (0.5..=2.0).contains(&lengthscales[0]),
            "seed {seed}: lengthscale {}",
            lengthscales[0]
        );
        let at = |h: &Hyperparameters| {
            GpModel::fit(prior.clone(), h.kernel.clone(), h.noise, &data)
                .unwrap()
                .log_marginal_likelihood()
                .unwrap()
        };
        assert!(at(&fitted) >= at(&initial));
    }
}

#[test]
fn fewer_than_two_points_keep_the_initial_values() {
    let initial = Hyperparameters {
        kernel: KernelSpec::rbf(vec![0.2], 1.0),
        noise: 0.1,
    };
    let one = vec![(DesignPoint::scalar(0.5), 10.0)];
    let got = optimize_hyperparameters(
        &PriorMean::Constant { seconds: 5.0 },
        &initial,
        &Normalizer::identity(1),
        &one,
        &HyperBounds::default(),
    )
    .unwrap();
    assert_eq!(got, initial);
}
