pub mod config;
pub mod distribution;
pub mod kendall;
pub mod mse;
pub mod rng;
pub mod samplers;

pub use config::{BinRule, StudyConfig, StudyKind};
pub use distribution::{run_distribution_study, DistributionReport};
pub use kendall::{kendall_tau_b, run_kendall_study, KendallReport};
pub use mse::{run_mse_study, MseReport, MseRow};
