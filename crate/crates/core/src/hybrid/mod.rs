//! The adaptive hybrid detector: a random forest for misuse detection, an
//! E-DBSCAN density model of normal traffic for anomaly detection, and the
//! splitter that shares traffic between them.

pub mod asch;
pub mod edbscan;
pub mod forest;

pub use asch::{hybrid_classify, AschConfig, AschState, SplitterMode, TraceRow, WindowCounts};
pub use edbscan::{edbscan_fit, suggest_eps, EDbscanConfig, EDbscanModel, PointKind};
pub use forest::{train_forest, Forest, ForestConfig};
