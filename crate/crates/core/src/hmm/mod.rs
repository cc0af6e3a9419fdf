//! Hybrid network/HMM classifier.
//!
//! Each class is a left-to-right HMM whose states emit through one shared
//! network: the network maps a spliced context of observation columns to a
//! posterior over every (class, state) pair, and the HMM uses the posterior
//! divided by the state prior as its emission likelihood. Observation rows
//! are standardized with statistics of the training set before splicing.

pub mod align;
pub mod mlp;
pub mod model;
pub mod topology;
pub mod train;
pub mod viterbi;

pub use align::{flat_start_align, splice_context, CONTEXT_WINDOW};
pub use mlp::{Mlp, MlpSpec, Real};
pub use model::{load_model, store_model, Classification, HmmModel, InputNorm, TrainConfig};
pub use topology::{LeftToRight, STATES_PER_CLASS};
pub use train::{train, train_with_log, Example, TrainLog};
pub use viterbi::{viterbi, Decoded};
