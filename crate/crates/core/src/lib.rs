//! Constrained multi-objective Bayesian optimization over mixed
//! continuous/integer/categorical design spaces.

pub mod design_space;
pub mod local;
pub mod surrogate;
pub mod pareto;
pub mod acquisition;
pub mod infill;
pub mod moea;
pub mod bench;
pub mod driver;
