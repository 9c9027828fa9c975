//! End-to-end fitting: semantic space over the training split, then the
//! context model on top of it.

use std::sync::Arc;

use crate::corpus::{Corpus, Mashup};
use crate::error::Result;
use crate::model::ModelParams;
use crate::semantic::{train_semantic, PvdmConfig};
use crate::trainer::{train, Hyperparams, TrainingReport};

/// Trains PV-DM over all service descriptions plus the goals of `train_set`
/// (test goals stay unseen and are inferred later), then the context model.
pub fn fit(
    corpus: &Corpus,
    train_set: &[Mashup],
    pvdm: &PvdmConfig,
    hp: &Hyperparams,
) -> Result<(ModelParams, TrainingReport)> {
    hp.validate()?;
    let semantic = train_semantic(&corpus.with_mashups(train_set), hp.dim, pvdm)?;
    train(train_set, Arc::new(semantic), hp)
}
