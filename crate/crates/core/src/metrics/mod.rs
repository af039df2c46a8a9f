//! Disentanglement metrics and cross-validated probing classifiers.

pub mod classifiers;
pub mod cv;
pub mod dci;
pub mod gcn;
pub mod irs;
pub mod matrix;
pub mod mi;
pub mod modexp;
pub mod report;
pub mod stats;
pub mod table;
pub mod task;
pub mod traversal;

pub use classifiers::ClassifierKind;
pub use cv::{stratified_kfold, CvConfig};
pub use dci::{dci_from_importance, dci_scores, DciConfig, DciReport};
pub use gcn::{gcn_score, GcnResult};
pub use irs::{irs_score, IrsReport};
pub use matrix::Matrix;
pub use mi::{mi_matrix, MiMatrix};
pub use modexp::{modularity_explicitness, ModExpReport};
pub use report::{config_hash, MetricReport};
pub use stats::Estimate;
pub use table::{EmbeddingTable, FactorTable};
pub use task::{task_eval_cv, TaskReport};
pub use traversal::{latent_traversal_response, DimRole, TraversalResponse};
