//! Loss, metrics, the epoch loop, checkpoint persistence and reporting.

pub mod checkpoint;
pub mod metrics;
pub mod report;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use metrics::{cross_entropy, top_k_accuracy};
pub use report::{render_report, EvalReport};
pub use trainer::{evaluate, train, CurvePoint, TrainPlan, TrainReport};
