//! Counter-based seeding for resampling and simulation.
//!
//! Replication `r` of a run seeded with `seed` always draws from the ChaCha
//! stream `(seed, r)`, so results do not depend on execution order or on the
//! number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ReplicationRng = ChaCha8Rng;

pub fn replication_rng(seed: u64, replication: u64) -> ReplicationRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// `n` row indices drawn uniformly with replacement.
pub fn pairs_indices<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Groups rows by cluster label, clusters ordered by first appearance.
#[derive(Debug, Clone)]
pub struct Clusters {
    members: Vec<Vec<usize>>,
}

impl Clusters {
    pub fn from_labels<T: PartialEq + Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut index = std::collections::HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (row, label) in labels.iter().enumerate() {
            let g = *index.entry(label).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[g].push(row);
        }
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Total number of rows across clusters.
    pub fn len_rows(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    /// Draw `len()` clusters with replacement and concatenate their rows.
    ///
    /// With singleton clusters this consumes the generator exactly like
    /// [`pairs_indices`] and returns the same rows.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let g = self.members.len();
        let mut rows = Vec::new();
        for _ in 0..g {
            rows.extend_from_slice(&self.members[rng.random_range(0..g)]);
        }
        rows
    }
}
