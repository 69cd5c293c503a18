pub mod banded;
pub mod error;
pub mod sme;
pub mod special;
pub mod spin;
pub mod stochastic;
pub mod cog;
pub mod ode;
pub mod filters;
pub mod bounds;
pub mod control;
pub mod harness;
