//! Deterministic simulation and exact analysis of a clock-driven election
//! protocol on a unidirectional ring of uniquely named processors.
//!
//! The crate is organised in layers: [`codec`] defines the bijective base-2
//! numerals used to charge message bits, [`protocol`] is the pure election
//! automaton, [`simulator`] runs it under an event-jump discrete-event
//! engine, [`bounds`] evaluates the analytic message and time bounds as
//! exact rationals, [`scenarios`] packages adversarial, random, and
//! comparison experiments, and [`cli`] is the command-line front end.

pub mod bounds;
pub mod cli;
pub mod codec;
pub mod protocol;
pub mod scenarios;
pub mod simulator;
