//! Deterministic random generation of small, well-typed programs, witness
//! argument lists, and bug-template files. Everything is a pure function of
//! the seed, so failures reproduce exactly; generated programs always
//! analyze cleanly and terminate well inside the step budget.

mod program;
mod rng;
mod template;

pub use program::{gen_args, gen_program, GenConfig};
pub use rng::Rng;
pub use template::gen_template;
