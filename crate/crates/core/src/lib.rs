//! Multi-agent hybrid-airspace simulator: level-k pilot models trained by
//! reinforcement learning, UAS sense-and-avoid, and the study drivers built
//! on top of them.

pub mod config;
pub mod dynamics;
pub mod engine;
pub mod learning;
pub mod levelk;
pub mod perception;
pub mod reward;
pub mod par;
pub mod saa;
pub mod units;
pub mod validation;

pub use units::Vec3;
