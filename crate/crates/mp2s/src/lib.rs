//! Simulation and verification toolkit for mp2s-automata: finite-state
//! machines that process two read-only data streams with `kf` forward and
//! `kb` backward heads per stream and an `m`-state memory.
//!
//! The crate provides:
//!
//! - [`model`]: the machine definition (domains, streams, parameters,
//!   states, transition mappings) plus a line-oriented description format
//!   for toy machines given by explicit transition tables.
//! - [`engine`]: a step-exact simulator with trace capture, stall
//!   detection, and a JSON-lines trace format.
//! - [`disjointness`]: the two-stream set-disjointness problem over the
//!   2n-item domain `{a_1, b_1, ..., a_n, b_n}`, a brute-force oracle, and
//!   the adversarial subset-family input instances in both the reversed
//!   and the block-permuted layouts.
//! - [`builders`]: reference automata that solve disjointness (a
//!   subset-storing machine and a `sqrt(n)`-head machine), plus a
//!   deliberately memory-starved machine used as a search fixture.
//! - [`foolbox`]: block partitions, the head-pair checking relation,
//!   exit-configuration bucketing, the fooling-pair search that exhibits
//!   false accepts of under-resourced machines, and the head/memory
//!   trade-off inequality calculators.

pub mod builders;
pub mod disjointness;
pub mod engine;
pub mod foolbox;
pub mod model;

pub use engine::{run, EngineError, RunResult, Trace};
pub use model::{Automaton, AutomatonParams, DataItem, Stream};
