use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GpError, KernelSpec, PriorMean};
use crate::design::{DesignPoint, Normalizer};

/// Noise is multiplied by this factor on each failed factorization.
const JITTER_FACTOR: f64 = 10.0;
const REFINE_STEPS: usize = 2;
const MAX_JITTER_STEPS: usize = 3;

/// Pointwise posterior of log completion time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub std: f64,
}

impl Posterior {
    pub fn seconds(&self) -> f64 {
        self.mean.exp()
    }
}

/// A fitted GP. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    noise: f64,
    prior: PriorMean,
    normalizer: Normalizer,
    train_points: Vec<DesignPoint>,
    train_x: Vec<Vec<f64>>,
    train_logt: Vec<f64>,
    residuals: DVector<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Fits on raw coordinates (no normalization).
    pub fn fit(
        prior: PriorMean,
        kernel: KernelSpec,
        noise: f64,
        data: &[(DesignPoint, f64)],
    ) -> Result<Self, GpError> {
        let dim = data
            .first()
            .map(|(p, _)| p.dim())
            .or(kernel.dimension())
            .unwrap_or(1);
        Self::fit_with(prior, kernel, noise, Normalizer::identity(dim), data)
    }

    /// Fits with kernel inputs mapped through `normalizer`. Times are seconds.
    pub fn fit_with(
        prior: PriorMean,
        kernel: KernelSpec,
        noise: f64,
        normalizer: Normalizer,
        data: &[(DesignPoint, f64)],
    ) -> Result<Self, GpError> {
        let mut logt = Vec::with_capacity(data.len());
        for (_, t) in data {
            if !(t.is_finite() && *t > 0.0) {
                return Err(GpError::NonPositiveTime(*t));
            }
            logt.push(t.ln());
        }
        let points = data.iter().map(|(p, _)| p.clone()).collect();
        Self::fit_log(prior, kernel, noise, normalizer, points, logt)
    }

    /// Fits directly on log-seconds targets.
    pub fn fit_log(
        prior: PriorMean,
        kernel: KernelSpec,
        noise: f64,
        normalizer: Normalizer,
        train_points: Vec<DesignPoint>,
        train_logt: Vec<f64>,
    ) -> Result<Self, GpError> {
        assert_eq!(train_points.len(), train_logt.len());
        kernel.validate()?;
        if !(noise.is_finite() && noise > 0.0) {
            return Err(GpError::InvalidNoise(noise));
        }
        let dim = normalizer.dim();
        for p in &train_points {
            check_dim(dim, p.dim())?;
            if let Some(d) = kernel.dimension() {
                check_dim(d, p.dim())?;
            }
        }
        let train_x: Vec<Vec<f64>> = train_points
            .iter()
            .map(|p| normalizer.apply(p.coords()))
            .collect();
        let n = train_points.len();
        let residuals = DVector::from_iterator(
            n,
            train_points
                .iter()
                .zip(&train_logt)
                .map(|(p, lt)| lt - prior.log_seconds(p.coords())),
        );

        if n == 0 {
            return Ok(GpModel {
                kernel,
                noise,
                prior,
                normalizer,
                train_points,
                train_x,
                train_logt,
                residuals,
                factor: None,
                alpha: DVector::zeros(0),
            });
        }

        let gram = gram_matrix(&kernel, &train_x);
        let (factor, noise) = factorize(&gram, noise)?;
        let mut alpha = factor.solve(&residuals);
        // Iterative refinement; matters when the noise is tiny and the Gram
        // matrix is badly conditioned.
        for _ in 0..REFINE_STEPS {
            let fitted = &gram * &alpha + &alpha * noise;
            alpha += factor.solve(&(&residuals - fitted));
        }
        Ok(GpModel {
            kernel,
            noise,
            prior,
            normalizer,
            train_points,
            train_x,
            train_logt,
            residuals,
            factor: Some(factor),
            alpha,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Noise actually used, after any jitter escalation.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn prior(&self) -> &PriorMean {
        &self.prior
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn len(&self) -> usize {
        self.train_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_points.is_empty()
    }

    pub fn train_points(&self) -> &[DesignPoint] {
        &self.train_points
    }

    pub fn train_logt(&self) -> &[f64] {
        &self.train_logt
    }

    pub fn residuals(&self) -> &[f64] {
        self.residuals.as_slice()
    }

    pub fn posterior(&self, x: &DesignPoint) -> Result<Posterior, GpError> {
        check_dim(self.normalizer.dim(), x.dim())?;
        let z = self.normalizer.apply(x.coords());
        let prior_mean = self.prior.log_seconds(x.coords());
        let kxx = self.kernel.eval_unchecked(&z, &z);
        let Some(factor) = &self.factor else {
            return Ok(Posterior {
                mean: prior_mean,
                std: kxx.max(0.0).sqrt(),
            });
        };
        let kstar = DVector::from_iterator(
            self.train_x.len(),
            self.train_x.iter().map(|xi| self.kernel.eval_unchecked(xi, &z)),
        );
        let mean = prior_mean + kstar.dot(&self.alpha);
        let v = factor
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a positive diagonal");
        let var = (kxx - v.norm_squared()).max(0.0);
        Ok(Posterior {
            mean,
            std: var.sqrt(),
        })
    }

    /// `n` independent draws of log-seconds from the pointwise posterior at `x`.
    pub fn sample_posterior<R: Rng + ?Sized>(
        &self,
        x: &DesignPoint,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>, GpError> {
        let post = self.posterior(x)?;
        Ok(sample_normal(post, n, rng))
    }

    /// Log evidence of the training log-residuals under the current kernel.
    pub fn log_marginal_likelihood(&self) -> Result<f64, GpError> {
        let factor = self.factor.as_ref().ok_or(GpError::Unfitted)?;
        let n = self.residuals.len() as f64;
        let quad = self.residuals.dot(&self.alpha);
        let half_logdet: f64 = factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        Ok(-0.5 * quad - half_logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
    }
}

fn sample_normal<R: Rng + ?Sized>(post: Posterior, n: usize, rng: &mut R) -> Vec<f64> {
    if post.std == 0.0 {
        return vec![post.mean; n];
    }
    let normal = Normal::new(post.mean, post.std).expect("finite std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

fn check_dim(expected: usize, got: usize) -> Result<(), GpError> {
    if expected == got {
        Ok(())
    } else {
        Err(GpError::Dimension { expected, got })
    }
}

pub(crate) fn gram_matrix(kernel: &KernelSpec, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval_unchecked(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `gram + noise I`, escalating the noise on failure.
pub(crate) fn factorize(
    gram: &DMatrix<f64>,
    noise: f64,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let mut noise = noise;
    for step in 0..=MAX_JITTER_STEPS {
        let mut m = gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += noise;
        }
        if let Some(c) = Cholesky::new(m) {
            if c.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok((c, noise));
            }
        }
        if step < MAX_JITTER_STEPS {
            noise *= JITTER_FACTOR;
        }
    }
    Err(GpError::Factorization(noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn sudoku_prior() -> PriorMean {
        PriorMean::piecewise(vec![(17.0, 600.0), (80.0, 3.0)])
    }

    #[test]
    fn empty_model_is_the_prior() {
        let k = KernelSpec::rbf(vec![1.0], 0.7);
        let m = GpModel::fit(sudoku_prior(), k, 0.1, &[]).unwrap();
        let p = m.posterior(&DesignPoint::scalar(80.0)).unwrap();
        assert_relative_eq!(p.mean, 3f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(p.std, 0.7f64.sqrt(), epsilon = 1e-15);
        assert_eq!(m.log_marginal_likelihood(), Err(GpError::Unfitted));
    }

    #[test]
    fn single_point_interpolates() {
        let k = KernelSpec::rbf(vec![1.0], 1.0);
        let x = DesignPoint::scalar(0.4);
        let m = GpModel::fit(sudoku_prior(), k, 1e-10, &[(x.clone(), 42.0)]).unwrap();
        let p = m.posterior(&x).unwrap();
        assert!((p.mean - 42f64.ln()).abs() < 1e-6);
        assert!(p.std < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = KernelSpec::rbf(vec![1.0], 1.0);
        let x = DesignPoint::scalar(1.0);
        assert_eq!(
            GpModel::fit(sudoku_prior(), k.clone(), 0.1, &[(x.clone(), 0.0)]).unwrap_err(),
            GpError::NonPositiveTime(0.0)
        );
        assert_eq!(
            GpModel::fit(sudoku_prior(), k.clone(), 0.0, &[(x.clone(), 1.0)]).unwrap_err(),
            GpError::InvalidNoise(0.0)
        );
        let m = GpModel::fit(sudoku_prior(), k, 0.1, &[(x, 1.0)]).unwrap();
        assert!(matches!(
            m.posterior(&DesignPoint::new(vec![1.0, 2.0])),
            Err(GpError::Dimension { .. })
        ));
    }

    #[test]
    fn lml_single_point_zero_residual() {
        // k(x,x) + noise = 1 and residual 0 leaves only the normalizer.
        let prior = PriorMean::Constant { seconds: 5.0 };
        let k = KernelSpec::rbf(vec![1.0], 0.75);
        let m = GpModel::fit(prior, k, 0.25, &[(DesignPoint::scalar(0.0), 5.0)]).unwrap();
        assert_relative_eq!(
            m.log_marginal_likelihood().unwrap(),
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(m.log_marginal_likelihood().unwrap(), -0.91894, epsilon = 1e-5);
    }

    #[test]
    fn duplicate_points_escalate_jitter_when_needed() {
        // A linear kernel on identical inputs is singular without noise.
        let k = KernelSpec::linear(0.0);
        let x = DesignPoint::scalar(1.0);
        let data = [(x.clone(), 10.0), (x.clone(), 20.0)];
        let prior = PriorMean::Constant { seconds: 10.0 };
        let m = GpModel::fit(prior.clone(), k.clone(), 1e-18, &data).unwrap();
        assert!(m.noise() > 1e-18 && m.noise() <= 1e-15 * 1.0001);
        assert!(m.posterior(&x).unwrap().mean.is_finite());
        assert!(matches!(
            GpModel::fit(prior, k, 1e-300, &data),
            Err(GpError::Factorization(_))
        ));
    }

    #[test]
    fn zero_std_samples_are_constant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = sample_normal(Posterior { mean: 1.5, std: 0.0 }, 10, &mut rng);
        assert!(s.iter().all(|v| *v == 1.5));
    }
}
