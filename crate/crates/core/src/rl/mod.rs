//! Tabular reinforcement-learning detectors and the MDP tools used to check
//! them.

pub mod agent;
pub mod discretize;
pub mod mdp;
pub mod table;

pub use agent::{
    rl_classify, train_agent, train_on_mdp, train_td_ids, td_evaluate_policy, AgentConfig, Algorithm, EpisodeTrace,
    Exploration, StepSize, TdIds,
};
pub use discretize::{Discretizer, StateId};
pub use mdp::{evaluate_policy, value_iteration, MdpSpec, ValueIteration};
pub use table::{q_update, sarsa_update, td_update, Action, QTable, VTable};
