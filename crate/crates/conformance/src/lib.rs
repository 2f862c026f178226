//! Random knowledge-base generators and brute-force oracles used by the
//! property suites and the acceptance runner.

pub mod kbgen;
pub mod oracle;

pub use kbgen::{random_kb, random_kb_with, GenConfig, PlantedQuestion, RandomKb};
