//! Contextual-integrity legal compliance engine.
//!
//! Regulations and legal cases are modelled as contextual information flows
//! (sender, subject, recipient, information type, transmission principle).
//! On top of that model the crate provides:
//!
//! * [`ci`]: norm vocabularies, transmission principles and flow evaluation;
//! * [`regulation`]: a law → chapter → article → point store with norm attachment;
//! * [`cases`] and [`kg`]: the legal-case database, stratified splitting and a
//!   sender/subject/recipient triple store;
//! * [`trajectory`]: the thought / CI / solution reasoning format;
//! * [`verifier`]: compliance prompts, response verification and the binary reward;
//! * [`mcq`]: contextual-understanding multiple-choice generation and grading;
//! * [`metrics`]: accuracy, balanced accuracy, macro-F1 and normalized log distance;
//! * [`ppo`]: a small linear-softmax PPO trainer driven by the reward;
//! * [`api`]: JSON wire types shared by the reward service and its clients.

pub mod api;
pub mod cases;
pub mod ci;
mod hashing;
pub mod kg;
pub mod mcq;
pub mod metrics;
pub mod ppo;
pub mod regulation;
pub mod trajectory;
pub mod verifier;

pub use ci::{ComplianceVerdict, Context, Domain, InformationFlow, TransmissionPrinciple};
pub use regulation::{Law, RegulationPath, RegulationStore};
