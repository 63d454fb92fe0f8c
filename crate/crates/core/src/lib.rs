//! A toolchain for the Jaqal quantum assembly language.

pub mod analyzer;
pub mod ast;
pub mod corpus;
pub mod diagnostic;
pub mod emitter;
pub mod expander;
pub mod gateset;
pub mod parser;
pub mod pipeline;
pub mod scheduler;
pub mod simulator;
