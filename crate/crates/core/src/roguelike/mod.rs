//! Grid roguelike: levels, features, corpus and game rules.

mod astar;
mod game;
mod generate;
mod level;

pub use astar::{astar_path, astar_path_length};
pub use game::{step_game, Action, GameRng, GameState, IllegalAction, Status};
pub use generate::{
    apply_mutation, build_corpus, generate_level, in_corpus_bounds, mutate_level, Corpus,
    CorpusEntry, CorpusError, LevelTargets, Mutation, CORPUS_SIZE, LENIENCY_RANGE,
    REACHABILITY_RANGE,
};
pub use level::{Cell, Dir, Level, LevelError, TileGrid};

use crate::acquisition::AcquisitionKind;
use crate::design::{Candidate, DesignPoint, DesignSpace};
use crate::engine::{AdaptationContext, Domain};
use crate::gp::{KernelSpec, PriorMean};

pub const GOAL_SECONDS: f64 = 10.0;
pub const UCB_KAPPA: f64 = 0.05;
/// Prior plane: 1 s at (0, 4), 20 s at (14, 50), split evenly between axes.
pub const PRIOR_BASE_SECONDS: f64 = 1.0;
pub const PRIOR_SLOPE_L: f64 = 9.5 / 14.0;
pub const PRIOR_SLOPE_R: f64 = 9.5 / 46.0;

pub fn prior_mean() -> PriorMean {
    PriorMean::Plane2D {
        base_seconds: PRIOR_BASE_SECONDS,
        origin: vec![0.0, 4.0],
        slopes: vec![PRIOR_SLOPE_L, PRIOR_SLOPE_R],
    }
}

pub fn roguelike_prior(l: f64, r: f64) -> f64 {
    prior_mean().seconds(&[l, r])
}

pub fn default_kernel() -> KernelSpec {
    KernelSpec::sum(
        KernelSpec::rbf(vec![0.3, 0.3], 0.5),
        KernelSpec::linear(0.1),
    )
}

pub fn design_space(corpus: &Corpus) -> DesignSpace {
    let candidates = corpus
        .entries()
        .iter()
        .map(|e| Candidate {
            point: DesignPoint::new(vec![e.level.leniency as f64, e.level.reachability as f64]),
            content_id: e.id.to_string(),
        })
        .collect();
    DesignSpace::new(candidates).expect("corpus is non-empty and finite")
}

pub fn context(corpus: &Corpus) -> AdaptationContext {
    AdaptationContext::new(
        Domain::Roguelike,
        design_space(corpus),
        prior_mean(),
        default_kernel(),
        AcquisitionKind::ModifiedUcb { kappa: UCB_KAPPA },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_plane_anchors() {
        assert!((roguelike_prior(0.0, 4.0) - 1.0).abs() < 1e-12);
        assert!((roguelike_prior(14.0, 50.0) - 20.0).abs() < 1e-12);
        assert!((roguelike_prior(7.0, 27.0) - 10.5).abs() < 1e-12);
    }
}
