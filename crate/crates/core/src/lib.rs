#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
