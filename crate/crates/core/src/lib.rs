pub mod error;
pub mod logic;

pub use error::{Error, Result};
pub mod cli;
pub mod dp;
pub mod mdp;
pub mod optim;
pub mod pg;
pub mod scorer;
pub mod sld;
pub mod tasks;
