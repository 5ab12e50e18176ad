//! Player modelling with Gaussian-process regression over log completion time,
//! target-time acquisition functions, and the content-serving policies built
//! on top of them.
//!
//! The two bundled domains are Sudoku (one feature: number of given digits)
//! and a small turn-based roguelike (two features: leniency and reachability).

pub mod acquisition;
pub mod design;
pub mod engine;
pub mod gp;
pub mod roguelike;
pub mod sudoku;

pub use acquisition::{AcquisitionKind, AcquisitionSpec};
pub use design::{Candidate, DesignPoint, DesignSpace};
pub use engine::{Observation, PolicyKind, SessionState};
pub use gp::{GpModel, KernelSpec, Posterior, PriorMean};

/// Session and content-generation randomness. ChaCha keeps draws identical
/// across platforms, which the replay guarantees depend on.
pub type SessionRng = rand_chacha::ChaCha8Rng;
