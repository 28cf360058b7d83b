//! Bilingual neural text classification: skip-gram embeddings, stacked LSTM
//! and self-attentive BiLSTM classifiers, transfer and joint training.

pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod networks;
pub mod numerics;
pub mod text;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngState, Scalar};

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type EmbeddingTable32 = embeddings::EmbeddingTable<f32>;
pub type LstmClassifier32 = networks::LstmClassifier<f32>;
pub type LstmClassifier64 = networks::LstmClassifier<f64>;
pub type JointModel32 = networks::JointModel<f32>;
pub type JointModel64 = networks::JointModel<f64>;
