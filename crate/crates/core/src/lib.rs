pub mod bounds;
pub mod classifier;
pub mod comparisons;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod noise;
pub mod optim;
pub mod quadrature;
pub mod sampler;
