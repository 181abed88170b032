//! Multitime quantum processes as quantum combs, with work extraction
//! protocols and non-Markovianity estimates.

pub mod channel;
pub mod comb;
pub mod entropy;
pub mod error;
pub mod io;
pub mod linalg;
pub mod link;
pub mod nonmarkov;
pub mod optim;
pub mod param;
pub mod protocols;
pub mod random;
pub mod state;
pub mod thermo;

pub use channel::QuantumChannel;
pub use entropy::ExtReal;
pub use error::{CombError, Result};
pub use linalg::{ComplexMatrix, C64};
pub use state::DensityMatrix;
