//! Core algorithms for a slot-memory aerial navigation stack.
//!
//! Everything in this crate is deterministic and `no_std`-compatible
//! (`alloc` required): numeric kernels with reverse-mode autodiff, a
//! procedurally generated 3-D world, frozen feature encoders, the
//! slot-history compressor, the trajectory encoder, the prompt-guided
//! reasoner, a training loop, and closed-loop evaluation metrics.
//!
//! File formats, the command-line interface, and anything else that needs
//! an operating system live in the companion `slotnav-cli` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod encoders;
pub mod evalkit;
pub mod model;
pub mod numkit;
pub mod pgm;
pub mod shic;
pub mod ste;
pub mod trainer;
pub mod worldsim;

pub mod rng;
