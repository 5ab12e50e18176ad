use adapt_core::engine::Domain;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Synthetic player with a parametric completion-time curve and
/// multiplicative log-normal noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SimPlayer {
    /// `log t = a + b (80 - hints)`.
    Sudoku { a: f64, b: f64, noise_sigma: f64 },
    /// `log t = log(base + c_l l + c_r r)`.
    Roguelike {
        base: f64,
        c_l: f64,
        c_r: f64,
        noise_sigma: f64,
    },
}

pub const SUDOKU_NOISE: f64 = 0.25;
pub const ROGUELIKE_NOISE: f64 = 0.15;

impl SimPlayer {
    /// Draws from the synthetic population of `domain`.
    pub fn sample<R: Rng + ?Sized>(domain: Domain, noise_sigma: f64, rng: &mut R) -> Self {
        match domain {
            Domain::Sudoku => {
                let a = Normal::new(20f64.ln(), 0.3).expect("valid").sample(rng);
                SimPlayer::Sudoku {
                    a,
                    b: rng.random_range(0.05..=0.12),
                    noise_sigma,
                }
            }
            Domain::Roguelike => SimPlayer::Roguelike {
                base: rng.random_range(0.5..=2.0),
                c_l: rng.random_range(0.2..=0.6),
                c_r: rng.random_range(0.1..=0.3),
                noise_sigma,
            },
        }
    }

    pub fn default_noise(domain: Domain) -> f64 {
        match domain {
            Domain::Sudoku => SUDOKU_NOISE,
            Domain::Roguelike => ROGUELIKE_NOISE,
        }
    }

    pub fn noise_sigma(&self) -> f64 {
        match self {
            SimPlayer::Sudoku { noise_sigma, .. } | SimPlayer::Roguelike { noise_sigma, .. } => {
                *noise_sigma
            }
        }
    }

    pub fn noiseless(self) -> Self {
        match self {
            SimPlayer::Sudoku { a, b, .. } => SimPlayer::Sudoku {
                a,
                b,
                noise_sigma: 0.0,
            },
            SimPlayer::Roguelike { base, c_l, c_r, .. } => SimPlayer::Roguelike {
                base,
                c_l,
                c_r,
                noise_sigma: 0.0,
            },
        }
    }

    pub fn mean_log_time(&self, x: &[f64]) -> f64 {
        match *self {
            SimPlayer::Sudoku { a, b, .. } => a + b * (80.0 - x[0]),
            SimPlayer::Roguelike { base, c_l, c_r, .. } => (base + c_l * x[0] + c_r * x[1]).ln(),
        }
    }

    /// Noise-free completion time in seconds.
    pub fn expected_time(&self, x: &[f64]) -> f64 {
        self.mean_log_time(x).exp()
    }

    pub fn sample_time<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let s = self.noise_sigma();
        let eps = if s > 0.0 {
            Normal::new(0.0, s).expect("valid").sample(rng)
        } else {
            0.0
        };
        (self.mean_log_time(x) + eps).exp()
    }
}
