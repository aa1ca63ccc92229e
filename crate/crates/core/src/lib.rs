//! Voxel survival world with a five-role embodied agent: a task parser, a
//! percipient that answers questions about ego-view frames, a situation-aware
//! planner, a performer driving compound actions, and a patroller that checks
//! progress and routes failures back into planning.

pub mod world;
pub mod observation;
pub mod percipient;
pub mod actions;
pub mod memory;
pub mod agent;
pub mod bench;
pub mod datagen;
