pub mod config;
pub mod construction;
pub mod descriptors;
pub mod eval;
pub mod ids;
pub mod index;
pub mod model;
pub mod prompts;
pub mod providers;
pub mod retrieval;
pub mod store;
pub mod synthetic;
pub mod text;
