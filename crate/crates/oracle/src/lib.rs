//! Reference evaluators for certifying `kbc-core`.
//!
//! Everything here is written for obvious correctness: full scans, no
//! indexes, no filtering shortcuts. Inputs beyond a small size are refused.

pub mod brute;
pub mod generate;
pub mod numeric;
pub mod world;

pub use brute::{average_precision, brute_force_score, Refusal};
pub use generate::{random_case, RandomCase};
pub use numeric::{finite_difference_gradient, relative_error};
pub use world::World;
