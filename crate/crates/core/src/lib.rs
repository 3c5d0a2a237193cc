pub mod cli;
pub mod config;
pub mod correspondence;
pub mod dimension;
pub mod error;
pub mod io;
pub mod measures;
pub mod poly;
pub mod rational;
pub mod sphere;

pub use error::{Error, Result};
