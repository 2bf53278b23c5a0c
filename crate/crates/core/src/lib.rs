//! Simulated multi-finger grasping in bins: geometry, gripper layouts, a
//! quasi-static grasp simulator, scene rendering, a fully convolutional grasp
//! planner and the experiment bench.

pub mod bench;
pub mod catalog;
pub mod error;
pub mod geometry;
pub mod gripper;
pub mod kv;
pub mod lp;
pub mod planner;
pub mod scene;
pub mod sim;

pub use error::{Error, Result};
