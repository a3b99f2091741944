pub mod abstraction;
pub mod dsl;
pub mod graph;
pub mod lexicon;
pub mod llm;
pub mod trajectory;
pub mod sim;
pub mod extrapolation;
pub mod pipeline;
pub mod cli;
