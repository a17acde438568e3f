//! Online model selection over bandit learners by regret bound balancing
//! and elimination.
//!
//! See `book/` for a guide and `configs/` for the experiment presets.

pub mod adversarial;
pub mod balancing;
pub mod bounds;
pub mod concentration;
pub mod env;
pub mod harness;
mod error;
pub mod ledger;
pub mod learners;
pub mod math;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/master.md")]
    mod master {}
    #[doc = include_str!("../../../book/src/adversarial.md")]
    mod adversarial {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
