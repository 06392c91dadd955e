//! Exact-rational polyhedral clinching auctions for two-sided markets with
//! budgets and polymatroid supply constraints.

pub mod auction;
pub mod error;
pub mod generate;
pub mod market;
pub mod opt;
pub mod polymatroid;
pub mod rational;
pub mod single_sample;
pub mod verify;

pub use error::{Error, Result};
pub use rational::{ExtRat, Rat};
