pub mod config;
pub mod fixed_points;
pub mod perturbation;
pub mod germ;
pub mod jet;
pub mod orbit;
pub mod pseudogroup;
pub mod word;

pub use num_complex::Complex64;
