pub mod annotation;
pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod models;
pub mod nn;
pub mod synthetic;
