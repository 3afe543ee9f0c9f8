//! Dense tensors with tape-based reverse-mode differentiation.

mod checkpoint;
mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use checkpoint::*;
pub use gradcheck::*;
pub use param::*;
pub use tape::*;
pub use tensor::*;

#[cfg(test)]
mod tests;
