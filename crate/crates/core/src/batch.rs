//! Batch entry points. With the `parallel` feature these fan out over the
//! rayon pool; results are ordered and identical to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::ReplayError;
use crate::geometry::{active_taxels, ContactModel, CylinderPose, TaxelGrid};
use crate::grid::BinaryMap;
use crate::replay::{run_episode, EpisodeRun};

/// Order-preserving map over a slice.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Sequential reference for [`par_map`].
pub fn seq_map<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}

pub fn active_taxels_batch(grid: &TaxelGrid, poses: &[CylinderPose], model: &ContactModel) -> Vec<BinaryMap> {
    par_map(poses, |p| active_taxels(grid, p, model))
}

pub fn active_taxels_batch_seq(grid: &TaxelGrid, poses: &[CylinderPose], model: &ContactModel) -> Vec<BinaryMap> {
    seq_map(poses, |p| active_taxels(grid, p, model))
}

/// One scripted episode per seed, each with its own random stream.
pub fn run_episodes(cfg: &SimConfig, seeds: &[u64], ticks: usize) -> Result<Vec<EpisodeRun>, ReplayError> {
    par_map(seeds, |&s| run_episode(cfg, s, ticks)).into_iter().collect()
}

pub fn run_episodes_seq(cfg: &SimConfig, seeds: &[u64], ticks: usize) -> Result<Vec<EpisodeRun>, ReplayError> {
    seq_map(seeds, |&s| run_episode(cfg, s, ticks)).into_iter().collect()
}
