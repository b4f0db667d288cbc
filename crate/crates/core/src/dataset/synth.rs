//! Seeded synthetic corpus: per (letter, label) cell, a few sine "formants"
//! with frequency and noise jitter.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, Label, LabeledSample, Origin};
use crate::audio::{save_wav, AudioClip, CANONICAL_RATE_HZ};
use crate::error::{Error, Result};

/// Minimum spacing between the correct and incorrect templates of a letter.
pub const MIN_TEMPLATE_GAP_HZ: f64 = 200.0;
const FREQ_JITTER: f64 = 0.03;
const NOISE_JITTER_DB: f64 = 6.0;
const FADE_SECS: f64 = 0.02;
const PEAK_AMPLITUDE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneTemplate {
    pub freqs_hz: Vec<f64>,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetterRecipe {
    pub letter: String,
    pub correct: ToneTemplate,
    pub incorrect: ToneTemplate,
}

impl LetterRecipe {
    pub fn template(&self, label: Label) -> &ToneTemplate {
        match label {
            Label::Correct => &self.correct,
            Label::Incorrect => &self.incorrect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRecipe {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: u32,
    #[serde(default = "default_duration")]
    pub duration_secs: f64,
    pub letters: Vec<LetterRecipe>,
}

fn default_rate() -> u32 {
    CANONICAL_RATE_HZ
}

fn default_duration() -> f64 {
    0.5
}

impl Default for SynthRecipe {
    /// Three letters whose incorrect variants move one formant.
    fn default() -> Self {
        let t = |f: [f64; 3]| ToneTemplate {
            freqs_hz: f.to_vec(),
            noise_level: 0.02,
        };
        Self {
            sample_rate_hz: CANONICAL_RATE_HZ,
            duration_secs: 0.5,
            letters: vec![
                LetterRecipe {
                    letter: "raa".into(),
                    correct: t([650.0, 1250.0, 2500.0]),
                    incorrect: t([650.0, 1800.0, 2500.0]),
                },
                LetterRecipe {
                    letter: "ghaa".into(),
                    correct: t([550.0, 1000.0, 2300.0]),
                    incorrect: t([850.0, 1000.0, 2300.0]),
                },
                LetterRecipe {
                    letter: "thaa".into(),
                    correct: t([500.0, 1400.0, 2800.0]),
                    incorrect: t([500.0, 1400.0, 3600.0]),
                },
            ],
        }
    }
}

impl SynthRecipe {
    pub fn from_json(text: &str) -> Result<Self> {
        let recipe: Self = serde_json::from_str(text).map_err(|e| Error::BadRecipe(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadRecipe(msg));
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive".into());
        }
        if !(self.duration_secs.is_finite() && self.duration_secs > 0.0) {
            return bad(format!("duration_secs must be positive, got {}", self.duration_secs));
        }
        if self.letters.is_empty() {
            return bad("recipe lists no letters".into());
        }
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        let mut seen = HashSet::new();
        for l in &self.letters {
            if l.letter.trim().is_empty() {
                return bad("empty letter id".into());
            }
            if !seen.insert(&l.letter) {
                return bad(format!("letter {:?} listed twice", l.letter));
            }
            for (label, t) in [("correct", &l.correct), ("incorrect", &l.incorrect)] {
                if !(2..=3).contains(&t.freqs_hz.len()) {
                    return bad(format!(
                        "{}/{label}: need 2 or 3 frequencies, got {}",
                        l.letter,
                        t.freqs_hz.len()
                    ));
                }
                // jittered tones must stay below Nyquist
                if let Some(f) = t
                    .freqs_hz
                    .iter()
                    .find(|f| !(f.is_finite() && **f > 0.0 && **f * (1.0 + FREQ_JITTER) < nyquist))
                {
                    return bad(format!("{}/{label}: frequency {f} Hz out of range", l.letter));
                }
                if !(t.noise_level.is_finite() && (0.0..1.0).contains(&t.noise_level)) {
                    return bad(format!("{}/{label}: noise_level must lie in [0, 1)", l.letter));
                }
            }
            if !templates_differ(&l.correct, &l.incorrect) {
                return bad(format!(
                    "{}: correct and incorrect templates must differ in a frequency by >= {MIN_TEMPLATE_GAP_HZ} Hz",
                    l.letter
                ));
            }
        }
        Ok(())
    }
}

/// True when some tone of either template lies at least
/// [`MIN_TEMPLATE_GAP_HZ`] away from every tone of the other.
fn templates_differ(a: &ToneTemplate, b: &ToneTemplate) -> bool {
    let isolated = |x: &ToneTemplate, y: &ToneTemplate| {
        x.freqs_hz
            .iter()
            .any(|f| y.freqs_hz.iter().all(|g| (f - g).abs() >= MIN_TEMPLATE_GAP_HZ))
    };
    isolated(a, b) || isolated(b, a)
}

/// Renders one clip from a template with the given generator.
pub fn synth_clip(template: &ToneTemplate, rate_hz: u32, duration_secs: f64, rng: &mut impl Rng) -> AudioClip {
    let rate = f64::from(rate_hz);
    let n = ((duration_secs * rate).round() as usize).max(1);
    let tones: Vec<(f64, f64)> = template
        .freqs_hz
        .iter()
        .map(|f| {
            let freq = f * (1.0 + rng.random_range(-FREQ_JITTER..=FREQ_JITTER));
            let phase = rng.random_range(0.0..2.0 * PI);
            (freq, phase)
        })
        .collect();
    let noise_std =
        template.noise_level * 10f64.powf(rng.random_range(-NOISE_JITTER_DB..=NOISE_JITTER_DB) / 20.0);
    let amp = PEAK_AMPLITUDE / tones.len() as f64;
    let fade = (FADE_SECS * rate).max(1.0);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let edge = (i.min(n - 1 - i) as f64 / fade).min(1.0);
            let env = 0.5 - 0.5 * (PI * edge).cos();
            let voiced: f64 = tones
                .iter()
                .map(|(f, p)| amp * (2.0 * PI * f * t + p).sin())
                .sum();
            let noise: f64 = rng.sample(StandardNormal);
            env * voiced + noise_std * noise
        })
        .collect();
    AudioClip::from_clamped(samples, rate_hz).expect("non-empty clip at positive rate")
}

fn clip_rng(seed: u64, serial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(serial);
    rng
}

/// Writes `n_per_cell` clips for every (letter, label) cell under `out_dir`
/// plus `out_dir/manifest.json`. Each clip draws from its own seeded stream,
/// so output is independent of thread scheduling.
pub fn generate_synthetic_corpus(
    recipe: &SynthRecipe,
    n_per_cell: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    recipe.validate()?;
    if n_per_cell == 0 {
        return Err(Error::BadRecipe("n_per_cell must be positive".into()));
    }
    let mut jobs = Vec::new();
    for l in &recipe.letters {
        for label in [Label::Correct, Label::Incorrect] {
            for i in 0..n_per_cell {
                let rel = PathBuf::from(&l.letter)
                    .join(label.as_str())
                    .join(format!("{}_{}_{i:03}.wav", l.letter, label));
                jobs.push((l, label, rel));
            }
        }
    }
    jobs.par_iter()
        .enumerate()
        .map(|(serial, (l, label, rel))| {
            let mut rng = clip_rng(seed, serial as u64);
            let clip = synth_clip(l.template(*label), recipe.sample_rate_hz, recipe.duration_secs, &mut rng);
            save_wav(&clip, out_dir.join(rel))
        })
        .collect::<Result<Vec<()>>>()?;

    let samples = jobs
        .into_iter()
        .map(|(l, label, path)| LabeledSample {
            path,
            letter: l.letter.clone(),
            label,
            origin: Origin::Synthetic,
        })
        .collect();
    let manifest = DatasetManifest::new(out_dir, samples);
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{trim_silence, PreprocessConfig};

    #[test]
    fn default_recipe_is_valid() {
        SynthRecipe::default().validate().unwrap();
        let json = serde_json::to_string(&SynthRecipe::default()).unwrap();
        assert_eq!(SynthRecipe::from_json(&json).unwrap(), SynthRecipe::default());
    }

    #[test]
    fn bad_recipes() {
        let mut r = SynthRecipe::default();
        r.letters[0].incorrect.freqs_hz = vec![660.0, 1300.0, 2450.0];
        assert!(matches!(r.validate(), Err(Error::BadRecipe(_))));

        let mut r = SynthRecipe::default();
        r.letters[1].correct.freqs_hz = vec![500.0];
        assert!(r.validate().is_err());

        let mut r = SynthRecipe::default();
        r.letters[2].correct.freqs_hz[2] = 7900.0;
        assert!(r.validate().is_err());

        let mut r = SynthRecipe::default();
        r.letters[1].letter = "raa".into();
        assert!(r.validate().is_err());

        assert!(SynthRecipe::from_json("{\"letters\": 3}").is_err());
        assert!(SynthRecipe::from_json("{\"letters\": []}").is_err());
    }

    #[test]
    fn clips_are_half_second_and_pass_trimming() {
        let recipe = SynthRecipe::default();
        let cfg = PreprocessConfig::default();
        for (serial, l) in recipe.letters.iter().enumerate() {
            for label in [Label::Correct, Label::Incorrect] {
                let mut rng = clip_rng(9, serial as u64);
                let clip = synth_clip(l.template(label), 16_000, 0.5, &mut rng);
                assert_eq!(clip.len(), 8000);
                trim_silence(&clip, &cfg).unwrap();
            }
        }
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let recipe = SynthRecipe::default();
        let ma = generate_synthetic_corpus(&recipe, 3, 11, a.path()).unwrap();
        let mb = generate_synthetic_corpus(&recipe, 3, 11, b.path()).unwrap();
        assert_eq!(ma.len(), 18);
        assert_eq!(mb.samples, ma.samples);
        assert!(ma.samples.iter().all(|s| s.origin == Origin::Synthetic));
        for s in &ma.samples {
            let x = std::fs::read(a.path().join(&s.path)).unwrap();
            let y = std::fs::read(b.path().join(&s.path)).unwrap();
            assert_eq!(x, y, "{}", s.path.display());
        }
        assert_eq!(
            std::fs::read(a.path().join("manifest.json")).unwrap(),
            std::fs::read(b.path().join("manifest.json")).unwrap()
        );
        let loaded = crate::dataset::load_manifest(a.path().join("manifest.json")).unwrap();
        assert_eq!(loaded.samples, ma.samples);
    }
}
