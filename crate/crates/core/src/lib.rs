//! Learning compact binary codes from sets of local image features.
//!
//! The pipeline has three layers:
//!
//! * [`gmp`] turns a variable-size set of local descriptors into one fixed-length
//!   vector by equalizing its dot product with every descriptor (a ridge solve).
//! * [`rba`] learns a linear encoder/decoder pair whose bottleneck is a sign
//!   matrix, alternating closed-form weight updates with a row-wise coordinate
//!   descent over the codes. [`itq`] provides the code initialization and a
//!   baseline. [`sah`] and [`sash`] fold the aggregation step into the training
//!   loop, unsupervised and supervised respectively.
//! * [`retrieval`] packs codes into machine words and evaluates XOR/popcount
//!   ranking against Euclidean or label ground truth with mean average precision.
//!
//! All matrices are column-per-sample, `f64`, dense. Every operation that draws
//! randomness takes an explicit seed and is bit-reproducible across runs and
//! thread counts.

pub mod binary;
pub mod error;
pub mod gmp;
pub mod io;
pub mod itq;
mod linalg;
pub mod rba;
pub mod retrieval;
pub mod sah;
pub mod sash;
pub mod synth;
pub mod types;

pub use binary::{sign, PackedCodes, SignMatrix};
pub use error::{Error, Result};
pub use gmp::{gmp_aggregate, gmp_batch};
pub use itq::{itq_encode, itq_train, itq_train_logged, ItqConfig, ItqModel};
pub use rba::{
    b_step, rba_encode, rba_objective, rba_reconstruct, rba_train, wc_step, HashModel, RbaConfig,
    RbaOutcome,
};
pub use retrieval::{
    euclidean_knn, hamming_rank, label_ground_truth, mean_average_precision, GroundTruth, Ranking,
};
pub use sah::{
    sah_encode, sah_encode_batch, sah_objective, sah_phi_step, sah_train, SahConfig, SahModel,
    SahOutcome,
};
pub use sash::{
    learn_mapping, multi_hot, one_hot, sash_encode, sash_encode_batch, sash_phi_step, sash_train,
    supervised_wc_step, LabelMatrix, SashConfig, SashModel, SashOutcome,
};
pub use synth::{clustered_matrix, clustered_sets};
pub use types::{AggregatedVector, FeatureMatrix, LocalFeatureSet};

/// Seed used when a config does not override it. Pinned so default runs are
/// reproducible end to end.
pub const DEFAULT_SEED: u64 = 0x5EED;
