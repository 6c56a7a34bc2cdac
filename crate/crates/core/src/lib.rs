pub mod config;
pub mod embedder;
pub mod extractor;
pub mod metrics;
pub mod pipeline;
pub mod reporter;
pub mod search;
pub mod synth;
