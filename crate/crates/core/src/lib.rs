//! Toolchain for a small process-simulation language: a validating parser,
//! an interpreter that records the memory state after every executed
//! instruction, syntactic (BLEU) and run-time (state-transition) program
//! similarity, and an execution-guided synthesis loop that answers
//! simulation questions by generating and running programs.

pub mod frontend;
pub mod generate;
pub mod interp;
pub mod similarity;
pub mod dataset;
pub mod policy;
pub mod harness;
