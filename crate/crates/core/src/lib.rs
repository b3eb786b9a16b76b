pub mod error;
pub mod format;
pub mod montecarlo;
pub mod oracle;
pub mod payoff;
pub mod solver;
pub mod types;
