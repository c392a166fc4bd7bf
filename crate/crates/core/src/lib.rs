pub mod analysis;
pub mod bench;
pub mod data;
pub mod loss;
pub mod rng;
pub mod solver;
