pub mod config;
pub mod datagen;
pub mod domain;
pub mod dqn;
pub mod encode;
pub mod error;
pub mod eval;
pub mod forest;
pub mod lexicon;
pub mod nn;
pub mod pipeline;
pub mod policy;
pub mod preprocess;
pub mod rng;
pub mod sim;
pub mod stages;
