//! Semantic wiki engine for structured mathematical documents.

pub mod extract;
pub mod model;
pub mod omdoc;
pub mod ontology;
pub mod render;
pub mod wiki;
pub mod store;
