//! Stacked LSTM, BiLSTM, structured self-attention, classifier heads and
//! the two full classifiers built from them.

mod attention;
mod bilstm;
mod dropout;
mod head;
mod lstm;
mod models;

pub use attention::{
    penalization, penalization_grad, AttentionBundle, SelfAttention, ROW_SUM_TOLERANCE,
};
pub use bilstm::{BiLstm, BiLstmCache};
pub use dropout::{apply_mask, dropout_mask};
pub use head::{AttentionHead, AttentionHeadCache, LinearHead, LinearHeadCache};
pub use lstm::{LayerCache, LstmLayer, LstmStack, StackCache};
pub use models::{
    JointCache, JointConfig, JointModel, JointOutput, LstmClassifier, LstmClassifierCache,
    LstmClassifierConfig, SequenceClassifier,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
