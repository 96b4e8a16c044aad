pub mod env;
pub mod evaluation;
pub mod orchestrator;
pub mod policies;
pub mod store;
pub mod tasks;
pub mod telecom;
pub mod world;
