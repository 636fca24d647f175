pub mod bump;
pub mod complex2d;
pub mod config;
pub mod construction;
pub mod export;
pub mod multifractal;
pub mod scenario;
pub mod term_algebra;
pub mod verifier;
