//! Simulation and reward computation for tactile-sensing quadruped object
//! transport.
//!
//! The crate models a 17×13 piezoresistive taxel array on a robot's back,
//! the binary signal path a policy observes, the adaptive gait reward built
//! around a symmetricity score of diagonal-pair air times, the full set of
//! training reward terms, the observation pipeline and the training
//! curricula. [`replay`] ties these together for offline trajectory replay.
//!
//! With the default `parallel` feature, batch entry points in [`batch`] fan
//! out over rayon; without it they run sequentially with identical results.
//!
//! ```
//! use tactile_loco::geometry::{active_taxels, CylinderPose};
//! use tactile_loco::replay::run_episode;
//! use tactile_loco::SimConfig;
//!
//! let cfg = SimConfig::default();
//! let o = &cfg.replay_object;
//! let pose = CylinderPose::new(0.01, 0.0, 0.3, o.radius, o.length, o.mass);
//! let map = active_taxels(&cfg.grid, &pose, &cfg.contact_model);
//! assert!(map.count_active() > 0);
//! let run = run_episode(&cfg, 42, 1000)?;
//! assert!(run.gait.symmetry_ratio < 0.05);
//! # Ok::<(), tactile_loco::ReplayError>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod config;
pub mod curriculum;
pub mod error;
pub mod gait;
pub mod geometry;
pub mod grid;
pub mod observation;
pub mod replay;
pub mod reward;
pub mod signal;

pub use config::SimConfig;
pub use error::{ConfigError, ReplayError};
pub use grid::Grid;

/// Standard gravity used for weight distribution, m/s².
pub const GRAVITY: f64 = 9.81;
