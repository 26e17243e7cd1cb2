//! Bespoke approximate MLP circuits.
//!
//! Turns a trained single-hidden-layer perceptron into a family of hardwired
//! circuits whose multipliers are replaced by wiring (power-of-two weights),
//! whose adder trees are pruned bit by bit (genetic search against a
//! full-adder area model) and whose output argmax compares only the bits that
//! matter.
//!
//! The crate is `no_std` + `alloc`. File formats, CSV ingestion and the
//! command-line flow live in the companion `bespoke` crate. Enable the
//! `parallel` feature to evaluate genetic populations and argmax cost
//! matrices with rayon.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adder_tree;
pub mod argmax;
pub mod dataset;
pub mod error;
pub mod hdl;
pub mod infer;
pub mod mlp;
pub mod nsga2;
pub mod reduce;
pub mod rng;

pub use error::{Error, Result};
