#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod assets;
pub mod digest;
pub mod episode;
pub mod geo;
pub mod gui;
pub mod predicate;
pub mod task;
pub mod vehicle;

pub use digest::Digest;
