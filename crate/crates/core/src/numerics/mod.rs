//! Exact dyadic arithmetic, certified intervals and root finding.

mod bounded;
mod dyadic;
mod root;

pub use bounded::{BoundedReal, Comparison};
pub use dyadic::{Dyadic, Round};
#[allow(unused_imports)]
pub(crate) use dyadic::ldexp;
pub use root::{bisect_root, IntPoly, RatPoly};
