//! Offline skill discovery and policy distillation for language agents.

pub mod domain;
pub mod env;
pub mod gateway;
pub mod simlm;
pub mod templates;
pub mod discovery;
pub mod distill;
pub mod eval;
pub mod executor;
pub mod trajectory;

pub use domain::Domain;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/gateway.md")]
    mod gateway {}
    #[doc = include_str!("../../../book/src/discovery.md")]
    mod discovery {}
    #[doc = include_str!("../../../book/src/distillation.md")]
    mod distillation {}
    #[doc = include_str!("../../../book/src/executor.md")]
    mod executor {}
    #[doc = include_str!("../../../book/src/environments.md")]
    mod environments {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
