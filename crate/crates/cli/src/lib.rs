//! Configuration, data ingestion and report emission for the `expo-entropy` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod output;
