pub mod cli;
pub mod closed_form;
pub mod error;
pub mod oracle;
pub mod qubit;
pub mod scheme;
pub mod search;
pub mod simplex;

pub use error::{Error, Result};
