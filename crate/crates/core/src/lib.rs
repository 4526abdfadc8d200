//! Tourist-information dialogue engine.
//!
//! A scenario file scripts the dialogue as a state-transition network.
//! Each user turn runs candidate-pattern matching, a yes/no classifier and an
//! age-switched sentiment estimator, picks a transition, runs the target
//! state's actions and answers with either the hand-written utterance (when a
//! candidate matched) or an LLM-generated one. The flow ends with a two-spot
//! sightseeing plan.

pub mod dialogue;
pub mod llm;
pub mod nlu;
pub mod plan;
pub mod response;
pub mod scenario;
pub mod service;
pub mod simulator;
pub mod spotdb;
pub mod text;
pub mod wire;
