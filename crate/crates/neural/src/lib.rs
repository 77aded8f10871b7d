pub mod gradcheck;
pub mod graph;
pub mod spectral;
pub mod tensor;

mod error;
pub use error::NeuralError;

#[cfg(test)]
mod graph_tests;
