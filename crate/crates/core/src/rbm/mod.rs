//! Stacked restricted Boltzmann machine classifier.

pub mod layer;
pub mod stack;

pub use layer::{cd1_train_layer, exhaustive_distribution, Cd1Config, JointDistribution, RbmLayer};
pub use stack::{train_stack, HeadConfig, RbmStack, SoftmaxHead, StackConfig};
