//! Exact and numerical experiments on topological generation of groups.
//!
//! - [`dyadic`]: exact arithmetic in `Z[1/2]` and signed-digit expansions.
//! - [`stevens`]: weighted group norms on `Z[1/2]` and their circle quotient.
//! - [`genpair`]: certified dense generator pairs with exact Bezout witnesses.
//! - [`kronecker`]: rank test and orbit coverage for torus translations.
//! - [`words`]: word balls in finitely generated groups.
//! - [`permgroups`]: submeasure metrics on finitary permutations.
//! - [`liegen`]: covering radius of word balls in SO(3).

pub mod dyadic;
pub mod genpair;
pub mod kronecker;
pub mod liegen;
pub mod permgroups;
pub mod stevens;
pub mod words;
