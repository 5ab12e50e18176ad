use serde::{Deserialize, Serialize};

use super::GpError;

/// Covariance function over (normalized) design coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `sv * exp(-1/2 * sum_i ((x_i - x'_i) / l_i)^2)`
    Rbf {
        lengthscales: Vec<f64>,
        signal_variance: f64,
    },
    /// `sigma0 + x . x'`
    Linear { sigma0: f64 },
    Sum {
        left: Box<KernelSpec>,
        right: Box<KernelSpec>,
    },
}

impl KernelSpec {
    pub fn rbf(lengthscales: Vec<f64>, signal_variance: f64) -> Self {
        KernelSpec::Rbf {
            lengthscales,
            signal_variance,
        }
    }

    pub fn linear(sigma0: f64) -> Self {
        KernelSpec::Linear { sigma0 }
    }

    pub fn sum(left: KernelSpec, right: KernelSpec) -> Self {
        KernelSpec::Sum {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Input dimension fixed by the kernel, if any. Linear kernels accept any.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            KernelSpec::Rbf { lengthscales, .. } => Some(lengthscales.len()),
            KernelSpec::Linear { .. } => None,
            KernelSpec::Sum { left, right } => left.dimension().or(right.dimension()),
        }
    }

    pub fn validate(&self) -> Result<(), GpError> {
        match self {
            KernelSpec::Rbf {
                lengthscales,
                signal_variance,
            } => {
                if lengthscales.is_empty() {
                    return Err(GpError::InvalidKernel("RBF needs a lengthscale".into()));
                }
                if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return Err(GpError::InvalidKernel(format!(
                        "lengthscales must be positive: {lengthscales:?}"
                    )));
                }
                if !(signal_variance.is_finite() && *signal_variance > 0.0) {
                    return Err(GpError::InvalidKernel(format!(
                        "signal variance must be positive: {signal_variance}"
                    )));
                }
                Ok(())
            }
            KernelSpec::Linear { sigma0 } => {
                if sigma0.is_finite() && *sigma0 >= 0.0 {
                    Ok(())
                } else {
                    Err(GpError::InvalidKernel(format!(
                        "sigma0 must be nonnegative: {sigma0}"
                    )))
                }
            }
            KernelSpec::Sum { left, right } => {
                left.validate()?;
                right.validate()?;
                if let (Some(a), Some(b)) = (left.dimension(), right.dimension()) {
                    if a != b {
                        return Err(GpError::InvalidKernel(format!(
                            "sum operands have dimensions {a} and {b}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Kernel value with dimension checks.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64, GpError> {
        if x.len() != x2.len() {
            return Err(GpError::Dimension {
                expected: x.len(),
                got: x2.len(),
            });
        }
        if let Some(d) = self.dimension() {
            if d != x.len() {
                return Err(GpError::Dimension {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        Ok(self.eval_unchecked(x, x2))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf {
                lengthscales,
                signal_variance,
            } => {
                let sq: f64 = x
                    .iter()
                    .zip(x2)
                    .zip(lengthscales)
                    .map(|((a, b), l)| {
                        let d = (a - b) / l;
                        d * d
                    })
                    .sum();
                signal_variance * (-0.5 * sq).exp()
            }
            KernelSpec::Linear { sigma0 } => {
                sigma0 + x.iter().zip(x2).map(|(a, b)| a * b).sum::<f64>()
            }
            KernelSpec::Sum { left, right } => {
                left.eval_unchecked(x, x2) + right.eval_unchecked(x, x2)
            }
        }
    }

    /// Hyperparameters in a fixed traversal order (lengthscales, then signal
    /// variance; sigma0; left before right).
    pub(crate) fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut Vec<f64>) {
        match self {
            KernelSpec::Rbf {
                lengthscales,
                signal_variance,
            } => {
                out.extend_from_slice(lengthscales);
                out.push(*signal_variance);
            }
            KernelSpec::Linear { sigma0 } => out.push(*sigma0),
            KernelSpec::Sum { left, right } => {
                left.collect_params(out);
                right.collect_params(out);
            }
        }
    }

    /// Rebuilds a kernel of the same shape from `params()`-ordered values.
    pub(crate) fn with_params(&self, params: &[f64]) -> KernelSpec {
        let mut it = params.iter().copied();
        let k = self.rebuild(&mut it);
        debug_assert!(it.next().is_none());
        k
    }

    fn rebuild(&self, it: &mut impl Iterator<Item = f64>) -> KernelSpec {
        match self {
            KernelSpec::Rbf { lengthscales, .. } => {
                let ls = lengthscales.iter().map(|_| it.next().unwrap()).collect();
                KernelSpec::Rbf {
                    lengthscales: ls,
                    signal_variance: it.next().unwrap(),
                }
            }
            KernelSpec::Linear { .. } => KernelSpec::Linear {
                sigma0: it.next().unwrap(),
            },
            KernelSpec::Sum { left, right } => {
                let l = left.rebuild(it);
                let r = right.rebuild(it);
                KernelSpec::sum(l, r)
            }
        }
    }

    /// Parameter roles matching `params()` order.
    pub(crate) fn param_roles(&self) -> Vec<ParamRole> {
        let mut out = Vec::new();
        self.collect_roles(&mut out);
        out
    }

    fn collect_roles(&self, out: &mut Vec<ParamRole>) {
        match self {
            KernelSpec::Rbf { lengthscales, .. } => {
                out.extend(lengthscales.iter().map(|_| ParamRole::Lengthscale));
                out.push(ParamRole::SignalVariance);
            }
            KernelSpec::Linear { .. } => out.push(ParamRole::Sigma0),
            KernelSpec::Sum { left, right } => {
                left.collect_roles(out);
                right.collect_roles(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ParamRole {
    Lengthscale,
    SignalVariance,
    Sigma0,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rbf_at_zero_distance_is_signal_variance() {
        let k = KernelSpec::rbf(vec![1.0], 1.0);
        assert_eq!(k.eval(&[0.3], &[0.3]).unwrap(), 1.0);
        let k = KernelSpec::rbf(vec![0.5, 2.0], 2.5);
        assert_eq!(k.eval(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 2.5);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = KernelSpec::rbf(vec![1.0], 1.0);
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(v, 0.60653, epsilon = 1e-5);
    }

    #[test]
    fn linear_is_offset_dot_product() {
        assert_eq!(KernelSpec::linear(0.0).eval(&[2.0], &[3.0]).unwrap(), 6.0);
        assert_eq!(
            KernelSpec::linear(0.5).eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            11.5
        );
    }

    #[test]
    fn sum_adds_operands() {
        let k = KernelSpec::sum(KernelSpec::rbf(vec![1.0], 1.0), KernelSpec::linear(0.0));
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = KernelSpec::rbf(vec![1.0, 1.0], 1.0);
        assert!(matches!(
            k.eval(&[0.0], &[1.0]),
            Err(GpError::Dimension { .. })
        ));
        assert!(k.eval(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::rbf(vec![0.0], 1.0).validate().is_err());
        assert!(KernelSpec::rbf(vec![1.0], -1.0).validate().is_err());
        assert!(KernelSpec::linear(-0.1).validate().is_err());
        let bad = KernelSpec::sum(
            KernelSpec::rbf(vec![1.0], 1.0),
            KernelSpec::rbf(vec![1.0, 1.0], 1.0),
        );
        assert!(bad.validate().is_err());
    }

    #[test]
    fn params_round_trip() {
        let k = KernelSpec::sum(
            KernelSpec::rbf(vec![0.3, 0.4], 1.5),
            KernelSpec::linear(0.2),
        );
        let p = k.params();
        assert_eq!(p, vec![0.3, 0.4, 1.5, 0.2]);
        assert_eq!(k.with_params(&p), k);
        assert_eq!(
            k.param_roles(),
            vec![
                ParamRole::Lengthscale,
                ParamRole::Lengthscale,
                ParamRole::SignalVariance,
                ParamRole::Sigma0
            ]
        );
    }
}
