//! Knowledge distillation with token-level data augmentation.
//!
//! The crate is organised around five pieces:
//!
//! * [`corpus`] holds vocabularies, embedding tables, labelled datasets, the
//!   synthetic task generator and the evaluation metrics.
//! * [`augment`] implements token-level augmentation (kNN replacement, synonym
//!   replacement, random replacement and the four EDA edits) with an exact,
//!   seeded semantic-shift degree, in offline and online modes.
//! * [`model`] is a small mean-pooling text classifier with hand-written
//!   reverse-mode gradients and an Adam optimiser. It plays both teacher and
//!   student.
//! * [`distill`] contains the weighted KD objectives and the training loops for
//!   fine-tuning, vanilla KD and KD with augmentation.
//! * [`theory`] is a Monte-Carlo simulator for KDE-style augmentation: a
//!   Gaussian world, a bounded-error teacher, the bound formulas and the
//!   source/target error gap.

pub mod augment;
pub mod corpus;
pub mod distill;
pub mod model;
pub mod seed;
pub mod theory;

pub use corpus::{Dataset, EmbeddingTable, LabeledExample, TokenId, TokenSequence, Vocabulary};
