//! End-to-end tasks: multi-digit addition, knowledge-graph completion and
//! proof export.

pub mod addition;
pub mod kg;
pub mod kg_train;
pub mod mask;
pub mod proof;

pub use kg::{generate_kinship, load_kg, rank_metrics, KgDataset, RankMetrics, RankResult, TieBreak, Triple};
pub use mask::{column_total, digit_mask, max_suffix};
pub use proof::{beam_search, Proof, ProofNode};
