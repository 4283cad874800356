pub mod world;
pub mod affordance;
pub mod backend;
pub mod harness;
pub mod planner;
pub mod prompts;
pub mod scenarios;

#[cfg(test)]
mod fixtures;
