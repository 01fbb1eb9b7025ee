use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// A named position in a tree of random streams.
///
/// The generator for `(seed, path)` is a pure function of those two values, so
/// work split across threads draws the same numbers no matter how it is
/// scheduled.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
}

/// Stream tags for the top-level stages of a run.
pub mod tag {
    pub const SIMULATE: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const TEST: u64 = 3;
    pub const INIT: u64 = 10;
    pub const TASK: u64 = 11;
    pub const SUBSPACE: u64 = 12;
    pub const PHI: u64 = 13;
    pub const CLASS: u64 = 14;
    pub const LATENT: u64 = 15;
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            path: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn child(&self, ids: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(ids);
        RngStream {
            seed: self.seed,
            path,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(b"metasub-stream");
        h.update(self.seed.to_le_bytes());
        h.update((self.path.len() as u64).to_le_bytes());
        for id in &self.path {
            h.update(id.to_le_bytes());
        }
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    /// Seed summary used in manifests.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for id in &self.path {
            h.update(id.to_le_bytes());
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
