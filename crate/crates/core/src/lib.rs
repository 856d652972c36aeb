//! Odds-informed hierarchical Poisson modelling of football scores.

pub mod betting;
pub mod numeric;
pub mod odds;
pub mod data;
pub mod model;
pub mod root;
pub mod skellam;
pub mod mcmc;
pub mod predict;
pub mod synth;
