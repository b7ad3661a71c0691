//! Hybrid business-process simulation: discovery, conformance, sequence and
//! arrival generation, timestamp prediction and evaluation.

pub mod eventlog;
pub mod graph;
pub mod assignment;
pub mod conformance;
pub mod discovery;
pub mod semantics;
pub mod search;
pub mod simulation;
pub mod distributions;
pub mod arrival;
pub mod embedding;
pub mod timing;
pub mod evaluation;
pub mod synthetic;
pub mod project;
pub mod pipeline;
pub mod service;
pub mod cli;
