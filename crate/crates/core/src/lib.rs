//! Frugal interactive change detection.
//!
//! A learner is trained from very few oracle answers. At each round the next
//! batch of patch pairs ("display") is chosen by minimizing an entropy
//! regularized criterion that mixes representativity (closeness to K-means
//! centroids), diversity (spread of the batch across clusters) and
//! ambiguity (entropy of the current classifier's scores). The criterion is
//! solved on the probability simplex by a fixed-point iteration, see
//! [`display`].
//!
//! The crate also holds the comparison strategies, the simulated-oracle
//! harness, dataset ingestion and persistence, and (with the `service`
//! feature) the `frugal` command line tool and HTTP annotation service.

pub mod classifier;
pub mod clustering;
pub mod datasets;
pub mod display;
pub mod error;
pub mod model;
pub mod report;
pub mod samplers;
pub mod session;

#[cfg(feature = "service")]
pub mod cli;
#[cfg(feature = "service")]
pub mod service;

pub use classifier::{LinearModel, ScoreMatrix, SvmConfig};
pub use clustering::{ClusterModel, DistanceMatrix, IndicatorMatrix};
pub use display::{solve, Membership, SolverReport};
pub use error::{Error, ErrorKind, Result};
pub use model::{Dataset, Hyperparams, Label, LabelVector, Matrix};
pub use samplers::SamplerKind;
pub use session::{init_session, run_simulated, MetricsTrace, Session};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every random choice. Distinct `stream`s of one seed
/// are independent sequences.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a run seed with a purpose tag and a round number (splitmix64
/// finalizer), so each step of a run draws from its own seed.
pub fn derive_seed(seed: u64, tag: u64, round: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(round.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
