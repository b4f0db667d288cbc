use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DatasetManifest, Label, LabeledSample, Origin};
use crate::audio::{interpolate, load_wav, save_wav, AudioClip};
use crate::error::{Error, Result};

pub const MIN_FACTOR: f64 = 0.5;
pub const MAX_FACTOR: f64 = 2.0;

/// Shifts pitch by `factor` by reading the samples as if recorded at
/// `rate * factor` and resampling back to `rate`. Duration scales by
/// `1 / factor`.
pub fn pitch_shift(clip: &AudioClip, factor: f64) -> Result<AudioClip> {
    if !(MIN_FACTOR..=MAX_FACTOR).contains(&factor) {
        return Err(Error::FactorOutOfRange(factor));
    }
    let out_len = ((clip.len() as f64 / factor).round() as usize).max(1);
    Ok(AudioClip::from_parts_unchecked(
        interpolate(clip.samples(), factor, out_len),
        clip.sample_rate_hz(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentOptions {
    pub per_letter_target: usize,
    pub factor_lo: f64,
    pub factor_hi: f64,
    pub seed: u64,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            per_letter_target: 100,
            factor_lo: 0.9,
            factor_hi: 1.1,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedClip {
    pub path: PathBuf,
    pub source: PathBuf,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    pub manifest: DatasetManifest,
    pub created: Vec<AugmentedClip>,
}

/// Grows every letter to `per_letter_target` samples with pitch-shifted copies,
/// keeping each letter's correct/incorrect ratio. New clips are written under
/// `<root>/augmented/<letter>/<label>/`; source files are never touched.
pub fn augment_to_count(manifest: &DatasetManifest, opts: &AugmentOptions) -> Result<AugmentOutcome> {
    let AugmentOptions {
        per_letter_target: target,
        factor_lo: lo,
        factor_hi: hi,
        seed,
    } = *opts;
    for f in [lo, hi] {
        if !(MIN_FACTOR..=MAX_FACTOR).contains(&f) {
            return Err(Error::FactorOutOfRange(f));
        }
    }
    if lo > hi {
        return Err(Error::InvalidParameter(format!("factor range {lo}:{hi} is reversed")));
    }
    if manifest.is_empty() {
        return Err(Error::EmptyGroup("manifest has no samples to augment".into()));
    }

    let mut groups: BTreeMap<&str, BTreeMap<Label, Vec<&LabeledSample>>> = BTreeMap::new();
    for s in &manifest.samples {
        groups
            .entry(s.letter.as_str())
            .or_default()
            .entry(s.label)
            .or_default()
            .push(s);
    }

    let mut taken: HashSet<PathBuf> = manifest.samples.iter().map(|s| s.path.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = Vec::new();
    for (letter, by_label) in &groups {
        let current: usize = by_label.values().map(Vec::len).sum();
        if target < current {
            return Err(Error::InvalidParameter(format!(
                "target {target} is below the {current} samples already present for {letter:?}"
            )));
        }
        for (label, sources) in group_quotas(by_label, target) {
            if sources.0.is_empty() && sources.1 > 0 {
                return Err(Error::EmptyGroup(format!("{letter}/{label}")));
            }
            let (sources, wanted) = sources;
            let mut serial = 0usize;
            for i in 0..wanted {
                let source = sources[i % sources.len()];
                let factor = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                let path = loop {
                    let stem = source
                        .path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "clip".into());
                    let candidate = PathBuf::from("augmented")
                        .join(letter)
                        .join(label.as_str())
                        .join(format!("{stem}_aug{serial:04}.wav"));
                    serial += 1;
                    if taken.insert(candidate.clone()) {
                        break candidate;
                    }
                };
                plan.push((source, path, factor));
            }
        }
    }

    plan.par_iter()
        .map(|(source, path, factor)| {
            let clip = load_wav(manifest.resolve(source))?;
            save_wav(&pitch_shift(&clip, *factor)?, manifest.root.join(path))
        })
        .collect::<Result<Vec<()>>>()?;

    let mut samples = manifest.samples.clone();
    let mut created = Vec::with_capacity(plan.len());
    for (source, path, factor) in plan {
        samples.push(LabeledSample {
            path: path.clone(),
            letter: source.letter.clone(),
            label: source.label,
            origin: Origin::Augmented,
        });
        created.push(AugmentedClip {
            path,
            source: source.path.clone(),
            factor,
        });
    }
    Ok(AugmentOutcome {
        manifest: DatasetManifest {
            version: manifest.version,
            samples,
            root: manifest.root.clone(),
        },
        created,
    })
}

/// For each label of one letter: its sources and how many copies to add so
/// the letter reaches `target` with the label ratio rounded to nearest.
fn group_quotas<'a>(
    by_label: &BTreeMap<Label, Vec<&'a LabeledSample>>,
    target: usize,
) -> Vec<(Label, (Vec<&'a LabeledSample>, usize))> {
    let current: usize = by_label.values().map(Vec::len).sum();
    let mut remaining = target;
    let n_groups = by_label.len();
    by_label
        .iter()
        .enumerate()
        .map(|(i, (label, sources))| {
            let desired = if i + 1 == n_groups {
                remaining
            } else {
                ((target * sources.len()) as f64 / current as f64).round() as usize
            };
            remaining -= desired;
            (*label, (sources.clone(), desired - sources.len()))
        })
        .collect()
}
