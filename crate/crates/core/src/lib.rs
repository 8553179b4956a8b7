pub mod callgraph;
pub mod checkmining;
pub mod cli;
pub mod cpfilter;
pub mod ir;
pub mod matchlang;
pub mod report;
pub mod rulemine;
