//! Path skeletons: extraction, skeleton-restricted beam search, skeleton
//! distance, threshold tuning, and the per-BS skeleton database.

mod codebook;
mod database;
mod distance;
mod search;
mod threshold;

pub use codebook::{Codebook, Side};
pub use database::{
    find_volunteer, zero_acceptance_probability, DatabaseSnapshot, GridId, QueryOutcome,
    SkeletonDatabase, SnapshotEntry,
};
pub use distance::{skeleton_distance, DistanceWeights};
pub use search::{beam_search, exhaustive_sparse, skeleton_sparse, BeamChoice, Scope, SparseChannel};
pub use threshold::{golden_section_max, optimize_threshold, ThresholdEval, ThresholdOutcome, ThresholdPolicy};

use serde::{Deserialize, Serialize};

use crate::channel::{Angles, PathCluster};

/// One dominant path of a skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonPath {
    pub aod: Angles,
    pub aoa: Angles,
    /// Linear amplitude gain.
    pub gain: f64,
}

impl SkeletonPath {
    pub fn gain_db(&self) -> f64 {
        20.0 * self.gain.max(1e-300).log10()
    }
}

/// Dominant paths between a BS and a grid location, strongest first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSkeleton {
    pub bs_id: usize,
    pub grid_id: GridId,
    pub paths: Vec<SkeletonPath>,
}

impl PathSkeleton {
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }
}

/// Keep up to `max_paths` clusters ranked by their dominant-subpath gain.
pub fn extract_skeleton(
    clusters: &[PathCluster],
    bs_id: usize,
    grid_id: GridId,
    max_paths: usize,
) -> PathSkeleton {
    let mut paths: Vec<SkeletonPath> = clusters
        .iter()
        .map(|c| SkeletonPath { aod: c.center_aod, aoa: c.center_aoa, gain: c.dominant_gain() })
        .collect();
    paths.sort_by(|a, b| b.gain.total_cmp(&a.gain));
    paths.truncate(max_paths);
    PathSkeleton { bs_id, grid_id, paths }
}
