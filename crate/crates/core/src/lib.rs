#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod evalbench;
pub mod lake;
pub mod modelling;
pub mod nn;
pub mod selection;
pub mod seed;
pub mod timing;
pub mod vectorizer;

pub use error::{Result, VenomError};
