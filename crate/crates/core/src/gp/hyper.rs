use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::kernel::ParamRole;
use super::model::{factorize, gram_matrix};
use super::simplex::{self, SimplexOptions};
use super::{GpError, KernelSpec, PriorMean};
use crate::design::{DesignPoint, Normalizer};

/// Kernel plus observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub kernel: KernelSpec,
    pub noise: f64,
}

/// Closed search intervals per hyperparameter role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub sigma0: (f64, f64),
    pub noise: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            lengthscale: (1e-2, 1e2),
            signal_variance: (1e-3, 1e2),
            sigma0: (0.0, 1e2),
            noise: (1e-4, 1.0),
        }
    }
}

/// Smallest sigma0 the log-space search can reach; stands in for 0.
const SIGMA0_FLOOR: f64 = 1e-6;
const RANDOM_STARTS: usize = 5;
const START_SEED: u64 = 0x6a09_e667_f3bc_c908;

impl HyperBounds {
    fn check(&self) -> Result<(), GpError> {
        let named = [
            ("lengthscale", self.lengthscale, true),
            ("signal_variance", self.signal_variance, true),
            ("sigma0", self.sigma0, false),
            ("noise", self.noise, true),
        ];
        for (name, (lo, hi), strictly_positive) in named {
            let ok_lo = if strictly_positive { lo > 0.0 } else { lo >= 0.0 };
            if !(lo.is_finite() && hi.is_finite() && ok_lo && lo <= hi) {
                return Err(GpError::EmptyBounds(format!("{name} = [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Bounds in log space for the kernel's parameters followed by noise.
    fn log_box(&self, roles: &[ParamRole]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(roles.len() + 1);
        let mut hi = Vec::with_capacity(roles.len() + 1);
        for role in roles {
            let (a, b) = match role {
                ParamRole::Lengthscale => self.lengthscale,
                ParamRole::SignalVariance => self.signal_variance,
                ParamRole::Sigma0 => (
                    self.sigma0.0.max(SIGMA0_FLOOR),
                    self.sigma0.1.max(SIGMA0_FLOOR),
                ),
            };
            lo.push(a.ln());
            hi.push(b.ln());
        }
        lo.push(self.noise.0.ln());
        hi.push(self.noise.1.ln());
        (lo, hi)
    }
}

/// Maximizes the log marginal likelihood of `data` over the kernel's
/// hyperparameters and the noise, with a multi-start bounded simplex search
/// in log space. With fewer than two points the initial values are returned.
pub fn optimize_hyperparameters(
    prior: &PriorMean,
    initial: &Hyperparameters,
    normalizer: &Normalizer,
    data: &[(DesignPoint, f64)],
    bounds: &HyperBounds,
) -> Result<Hyperparameters, GpError> {
    bounds.check()?;
    initial.kernel.validate()?;
    if data.len() < 2 {
        return Ok(initial.clone());
    }
    let mut xs = Vec::with_capacity(data.len());
    let mut residuals = Vec::with_capacity(data.len());
    for (p, t) in data {
        if !(t.is_finite() && *t > 0.0) {
            return Err(GpError::NonPositiveTime(*t));
        }
        if p.dim() != normalizer.dim() {
            return Err(GpError::Dimension {
                expected: normalizer.dim(),
                got: p.dim(),
            });
        }
        xs.push(normalizer.apply(p.coords()));
        residuals.push(t.ln() - prior.log_seconds(p.coords()));
    }
    let r = nalgebra::DVector::from_vec(residuals);

    let shape = initial.kernel.clone();
    let roles = shape.param_roles();
    let (lo, hi) = bounds.log_box(&roles);
    let linear: Vec<(f64, f64)> = roles
        .iter()
        .map(|role| match role {
            ParamRole::Lengthscale => bounds.lengthscale,
            ParamRole::SignalVariance => bounds.signal_variance,
            ParamRole::Sigma0 => bounds.sigma0,
        })
        .chain(std::iter::once(bounds.noise))
        .collect();
    // exp(ln(b)) can overshoot b by an ulp; clamp in linear space too.
    let to_hyper = |u: &[f64]| -> Hyperparameters {
        let vals: Vec<f64> = u
            .iter()
            .zip(&linear)
            .map(|(v, (a, b))| v.exp().clamp(*a, *b))
            .collect();
        Hyperparameters {
            kernel: shape.with_params(&vals[..roles.len()]),
            noise: vals[roles.len()],
        }
    };
    let neg_lml = |u: &[f64]| -> f64 {
        let h = to_hyper(u);
        let gram = gram_matrix(&h.kernel, &xs);
        match factorize(&gram, h.noise) {
            Ok((factor, _)) => {
                let alpha = factor.solve(&r);
                let half_logdet: f64 = factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
                0.5 * r.dot(&alpha) + half_logdet
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut u0: Vec<f64> = initial
        .kernel
        .params()
        .iter()
        .zip(&roles)
        .map(|(v, role)| match role {
            ParamRole::Sigma0 => v.max(SIGMA0_FLOOR).ln(),
            _ => v.ln(),
        })
        .collect();
    u0.push(initial.noise.ln());
    for ((v, a), b) in u0.iter_mut().zip(&lo).zip(&hi) {
        *v = v.clamp(*a, *b);
    }

    let mut starts = vec![u0.clone()];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(START_SEED);
    for _ in 0..RANDOM_STARTS {
        starts.push(
            lo.iter()
                .zip(&hi)
                .map(|(a, b)| if b > a { rng.random_range(*a..=*b) } else { *a })
                .collect(),
        );
    }

    let opts = SimplexOptions {
        initial_step: 0.1,
        max_evals: 300,
        f_tol: 1e-10,
        x_tol: 1e-6,
    };
    let mut best_u = u0.clone();
    let mut best_v = neg_lml(&u0);
    for s in &starts {
        let res = simplex::minimize(neg_lml, s, &lo, &hi, &opts);
        if res.value < best_v {
            best_v = res.value;
            best_u = res.x;
        }
    }
    Ok(to_hyper(&best_u))
}
