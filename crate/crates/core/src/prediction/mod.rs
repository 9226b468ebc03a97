//! Wrist motion models and the two intention trackers built on them.

pub mod gilm;
pub mod hierarchy;
pub mod mif;
pub mod tracker;
