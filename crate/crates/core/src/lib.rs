pub mod cli;
pub mod distributed;
pub mod evaluator;
pub mod runner;
pub mod state;
pub mod syntax;
pub mod vocabulary;
