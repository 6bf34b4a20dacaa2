pub mod amuse;
pub mod competitors;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod ptfce;
pub mod rng;
pub mod signal;
pub mod simgen;
pub mod stats;
