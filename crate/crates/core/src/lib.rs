//! Beta-expansions and the beta-shift.
//!
//! The crate is layered bottom-up:
//!
//! - [`numerics`]: dyadic interval arithmetic ([`BoundedReal`]) and bracketing root finders.
//! - [`expansion`]: greedy expansions, the infinite expansion of 1 and base approximations.
//! - [`symbolic`]: admissible words, the follower automaton, full words and cylinders.
//! - [`recurrence`]: return distances `|T^n x - x|`, recurrence exponents and return profiles.
//! - [`cantor`]: the Cantor subset built from full words, its sampler and its mass distribution.
//! - [`dimension`]: closed-form dimension formulas, local-dimension series and box counting.

pub mod cantor;
pub mod dimension;
mod error;
pub mod expansion;
pub mod numerics;
pub mod recurrence;
pub mod symbolic;

pub use error::{Error, Result};
pub use expansion::{BetaContext, Word};
pub use numerics::{BoundedReal, Dyadic};
