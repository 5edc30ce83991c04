//! Simulation and analysis of free-fermion chains under partially
//! post-selected continuous monitoring.

pub mod config;
pub mod fss;
pub mod gaussian;
pub mod linalg;
pub mod manifest;
pub mod quad;
pub mod rg;
pub mod stats;
pub mod toy;
pub mod trajectory;
