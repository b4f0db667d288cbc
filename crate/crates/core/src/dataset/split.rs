use std::collections::BTreeMap;
use std::fmt::Debug;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetManifest, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    Holdout { train_frac: f64 },
    KFold { k: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitAssignment {
    /// `train[i]` is true when sample `i` goes to the training side.
    Holdout { train: Vec<bool> },
    /// `fold_of[i]` is the held-out fold of sample `i`.
    KFold { k: usize, fold_of: Vec<usize> },
}

impl SplitAssignment {
    /// Sample indices of every fold (k-fold) or `[train, test]` (holdout).
    pub fn groups(&self) -> Vec<Vec<usize>> {
        match self {
            SplitAssignment::Holdout { train } => {
                let pick = |side: bool| {
                    train
                        .iter()
                        .enumerate()
                        .filter(|(_, &t)| t == side)
                        .map(|(i, _)| i)
                        .collect()
                };
                vec![pick(true), pick(false)]
            }
            SplitAssignment::KFold { k, fold_of } => {
                let mut folds = vec![Vec::new(); *k];
                for (i, &f) in fold_of.iter().enumerate() {
                    folds[f].push(i);
                }
                folds
            }
        }
    }
}

/// Groups indices by key in key order, shuffling each stratum with one
/// generator drawn from sequentially.
fn shuffled_strata<K: Ord + Clone>(keys: &[K], seed: u64) -> Vec<(K, Vec<usize>)> {
    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(k.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    strata
        .into_iter()
        .map(|(k, mut idx)| {
            idx.shuffle(&mut rng);
            (k, idx)
        })
        .collect()
}

/// Stratified fold assignment. Within a stratum fold sizes differ by at most
/// one; the round-robin offset carries across strata so global fold sizes are
/// balanced too.
pub fn stratified_folds<K: Ord + Clone + Debug>(keys: &[K], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > keys.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 2..={}, got {k}",
            keys.len()
        )));
    }
    let strata = shuffled_strata(keys, seed);
    if let Some((key, idx)) = strata.iter().find(|(_, idx)| idx.len() < k) {
        return Err(Error::StratumTooSmall {
            stratum: format!("{key:?}"),
            size: idx.len(),
            k,
        });
    }
    let mut fold_of = vec![0; keys.len()];
    let mut offset = 0;
    for (_, idx) in strata {
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = (offset + pos) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(fold_of)
}

/// Stratified holdout: `round(n * train_frac)` of each stratum train.
pub fn stratified_holdout<K: Ord + Clone>(keys: &[K], train_frac: f64, seed: u64) -> Result<Vec<bool>> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_frac must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut train = vec![false; keys.len()];
    for (_, idx) in shuffled_strata(keys, seed) {
        let n_train = (idx.len() as f64 * train_frac).round() as usize;
        for &i in &idx[..n_train] {
            train[i] = true;
        }
    }
    Ok(train)
}

/// Splits a manifest stratified by `(letter, label)`.
pub fn split(manifest: &DatasetManifest, mode: SplitMode, seed: u64) -> Result<SplitAssignment> {
    if manifest.is_empty() {
        return Err(Error::InvalidParameter("cannot split an empty manifest".into()));
    }
    let keys: Vec<(String, Label)> = manifest
        .samples
        .iter()
        .map(|s| (s.letter.clone(), s.label))
        .collect();
    match mode {
        SplitMode::Holdout { train_frac } => Ok(SplitAssignment::Holdout {
            train: stratified_holdout(&keys, train_frac, seed)?,
        }),
        SplitMode::KFold { k } => Ok(SplitAssignment::KFold {
            k,
            fold_of: stratified_folds(&keys, k, seed)?,
        }),
    }
}
