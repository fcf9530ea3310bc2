pub mod config;
pub mod entropy;
pub mod experiment;
pub mod rng;
pub mod selftest;
pub mod table;
