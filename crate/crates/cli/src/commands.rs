use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use arpa_core::audio::load_wav;
use arpa_core::classifiers::{
    save_model, train as train_model, vectors_from_manifest, FeatureVector, ModelKind, ModelParams,
};
use arpa_core::config::ArpaConfig;
use arpa_core::dataset::{augment_to_count, generate_synthetic_corpus, load_manifest, AugmentOptions, DatasetManifest, SynthRecipe};
use arpa_core::evaluation::{evaluate_vectors, render_report, render_to_string, report_file_name, EvalReport, ReportFormat};
use arpa_core::features::FeatureExtractor;
use arpa_core::imaging::{render_png, Colormap};
use arpa_service::{AppState, DiagnoseError, Diagnoser, ModelRegistry, ServiceError, SystemClock};
use clap::Args;
use rayon::prelude::*;

use crate::CliError;

type CmdResult = Result<u8, CliError>;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Recipe JSON; the built-in three-letter recipe when omitted.
    #[arg(long)]
    recipe: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Clips per (letter, label) cell.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn synth(cfg: &ArpaConfig, a: SynthArgs) -> CmdResult {
    let recipe = match &a.recipe {
        Some(p) => SynthRecipe::load(p)?,
        None => SynthRecipe::default(),
    };
    let seed = a.seed.unwrap_or(cfg.pipeline.seed);
    let manifest = generate_synthetic_corpus(&recipe, a.n, seed, &a.out)?;
    println!(
        "wrote {} clips for {} letters to {}",
        manifest.len(),
        recipe.letters.len(),
        a.out.display()
    );
    Ok(0)
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Samples per letter after augmentation.
    #[arg(long, default_value_t = 100)]
    target: usize,
    /// Pitch factor range as `lo:hi`.
    #[arg(long, default_value = "0.9:1.1")]
    factors: String,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_factors(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::usage(format!("--factors expects lo:hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

/// `dir/name.json` becomes `dir/name.augmented.json`.
fn augmented_manifest_path(src: &Path) -> PathBuf {
    let stem = src
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".into());
    src.with_file_name(format!("{stem}.augmented.json"))
}

pub fn augment(cfg: &ArpaConfig, a: AugmentArgs) -> CmdResult {
    let (factor_lo, factor_hi) = parse_factors(&a.factors)?;
    let manifest = load_manifest(&a.manifest)?;
    let opts = AugmentOptions {
        per_letter_target: a.target,
        factor_lo,
        factor_hi,
        seed: a.seed.unwrap_or(cfg.pipeline.seed),
    };
    let out = augment_to_count(&manifest, &opts)?;
    let path = augmented_manifest_path(&a.manifest);
    out.manifest.save(&path)?;
    println!(
        "created {} clips; {} samples in {}",
        out.created.len(),
        out.manifest.len(),
        path.display()
    );
    Ok(0)
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also render colormap PNGs with JSON sidecars.
    #[arg(long)]
    images: bool,
}

/// Output stem for a sample: its manifest-relative path without extension.
fn output_stem(manifest: &DatasetManifest, path: &Path) -> PathBuf {
    let rel = if path.is_absolute() {
        path.strip_prefix(&manifest.root)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| PathBuf::from(path.file_name().unwrap_or_default()))
    } else {
        path.to_path_buf()
    };
    rel.with_extension("")
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn extract(cfg: &ArpaConfig, a: ExtractArgs) -> CmdResult {
    let manifest = load_manifest(&a.manifest)?;
    let extractor = FeatureExtractor::new(&cfg.pipeline)?;
    let cmap = Colormap::plasma();
    manifest
        .samples
        .par_iter()
        .map(|s| -> arpa_core::Result<()> {
            let src = manifest.resolve(s);
            let wrap = |e| arpa_core::Error::Sample {
                path: src.clone(),
                source: Box::new(e),
            };
            let clip = load_wav(&src)?;
            let feats = extractor.extract_any_rate(&clip).map_err(wrap)?;
            let stem = a.out.join(output_stem(&manifest, &s.path));
            if let Some(dir) = stem.parent() {
                std::fs::create_dir_all(dir).map_err(|e| arpa_core::Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            for m in [&feats.mel, &feats.mfcc] {
                let tag = m.kind().tag();
                m.write_binary(&with_suffix(&stem, &format!(".{tag}.arpf")))?;
                if a.images {
                    render_png(m, &cmap, with_suffix(&stem, &format!(".{tag}.png")))?;
                }
            }
            Ok(())
        })
        .collect::<arpa_core::Result<Vec<()>>>()?;
    let per_clip = if a.images { 4 } else { 2 };
    println!(
        "extracted {} clips into {} ({} files per clip)",
        manifest.len(),
        a.out.display(),
        per_clip
    );
    Ok(0)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: ModelKind,
    /// Train only this letter; all letters when omitted.
    #[arg(long)]
    letter: Option<String>,
    /// Comma-separated `key=value` overrides, e.g. `k=5`.
    #[arg(long, default_value = "")]
    params: String,
    /// Output directory (`<letter>-<kind>.json` per letter), or a `.json`
    /// file when a single letter is trained.
    #[arg(long)]
    out: PathBuf,
}

fn group_by_letter(data: Vec<FeatureVector>) -> BTreeMap<String, Vec<FeatureVector>> {
    let mut groups: BTreeMap<String, Vec<FeatureVector>> = BTreeMap::new();
    for v in data {
        groups.entry(v.letter.clone()).or_default().push(v);
    }
    groups
}

pub fn train(cfg: &ArpaConfig, a: TrainArgs) -> CmdResult {
    let params = ModelParams::parse(a.model, &a.params, &cfg.pipeline.classifier)?;
    let mut manifest = load_manifest(&a.manifest)?;
    if let Some(letter) = &a.letter {
        manifest = manifest.for_letter(letter);
        if manifest.is_empty() {
            return Err(CliError::usage(format!("manifest has no samples for letter {letter:?}")));
        }
    }
    let groups = group_by_letter(vectors_from_manifest(&manifest, &cfg.pipeline)?);
    let single_file = a.out.extension().is_some_and(|e| e == "json");
    if single_file && groups.len() != 1 {
        return Err(CliError::usage("a .json output file needs exactly one letter; pass --letter or a directory"));
    }
    for (letter, data) in &groups {
        let model = train_model(data, &params)?;
        let hits = data
            .iter()
            .filter(|v| model.predict(&v.values).map(|p| p.label == v.label).unwrap_or(false))
            .count();
        let path = if single_file {
            a.out.clone()
        } else {
            a.out.join(format!("{letter}-{}.json", a.model))
        };
        save_model(&model, &path)?;
        println!(
            "{letter}: {} ({params}) on {} samples, training accuracy {:.4} -> {}",
            a.model,
            data.len(),
            hits as f64 / data.len() as f64,
            path.display()
        );
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Model kinds to evaluate; repeat or separate with commas.
    #[arg(long = "model-kind", value_delimiter = ',', default_value = "knn")]
    model_kind: Vec<ModelKind>,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    cv: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file (`.md`, `.json` or `.csv`), or an existing directory to
    /// receive a timestamped report. Markdown goes to stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn dataset_name(manifest_path: &Path) -> String {
    std::fs::canonicalize(manifest_path)
        .ok()
        .and_then(|p| p.parent().and_then(|d| d.file_name()).map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "dataset".into())
}

pub fn eval(cfg: &ArpaConfig, a: EvalArgs) -> CmdResult {
    let seed = a.seed.unwrap_or(cfg.pipeline.seed);
    let manifest = load_manifest(&a.manifest)?;
    let data = vectors_from_manifest(&manifest, &cfg.pipeline)?;
    let mut kinds = a.model_kind.clone();
    kinds.dedup();
    let mut evals = Vec::new();
    for kind in &kinds {
        let params = cfg.pipeline.classifier.params(*kind);
        let e = evaluate_vectors(&data, &params, a.cv, seed)?;
        println!(
            "{kind}: accuracy {:.4} (folds {:.4} ± {:.4}), tp={} tn={} fp={} fn={}",
            e.metrics.accuracy,
            e.fold_accuracy_mean,
            e.fold_accuracy_std,
            e.confusion.tp,
            e.confusion.tn,
            e.confusion.fp,
            e.confusion.fn_
        );
        evals.push(e);
    }
    let name = dataset_name(&a.manifest);
    let report = EvalReport::new(name.clone(), evals);
    match a.report {
        None => print!("{}", render_to_string(&report, ReportFormat::Markdown)),
        Some(path) => {
            let path = if path.is_dir() {
                let ts = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                let models: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
                path.join(report_file_name(&name, &models.join("+"), &ts.to_string(), ReportFormat::Markdown))
            } else {
                path
            };
            let format = ReportFormat::from_path(&path)
                .ok_or_else(|| CliError::usage(format!("cannot infer report format from {}", path.display())))?;
            render_report(&report, format, &path)?;
            println!("report written to {}", path.display());
        }
    }
    Ok(0)
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    wav: PathBuf,
    #[arg(long)]
    letter: String,
    /// Directory of trained model files.
    #[arg(long)]
    models: PathBuf,
    /// Preferred model kind when a letter has several.
    #[arg(long = "model-kind")]
    model_kind: Option<ModelKind>,
}

pub fn diagnose(cfg: &ArpaConfig, a: DiagnoseArgs) -> CmdResult {
    let registry = ModelRegistry::load_dir(&a.models, a.model_kind)
        .map_err(|e| CliError::usage(format!("{}: {e}", a.models.display())))?;
    if registry.get(&a.letter).is_none() {
        return Err(CliError::usage(format!(
            "no model for letter {:?} in {}",
            a.letter,
            a.models.display()
        )));
    }
    let diagnoser = Diagnoser::new(&cfg.pipeline, registry, cfg.service.max_audio_secs)?;
    let clip = load_wav(&a.wav)?;
    match diagnoser.diagnose_clip(&clip, &a.letter) {
        Ok(result) => {
            println!("{}", serde_json::to_string(&result).expect("result serializes"));
            Ok(match result.label {
                arpa_core::dataset::Label::Correct => 0,
                arpa_core::dataset::Label::Incorrect => 1,
            })
        }
        Err(e) => {
            let code = match e {
                DiagnoseError::Silence | DiagnoseError::TooShort => 4,
                _ => 2,
            };
            Err(CliError {
                code,
                message: format!("{e} ({})", e.reason()),
            })
        }
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address, overriding the config file.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutdown requested");
}

pub fn serve(mut cfg: ArpaConfig, a: ServeArgs) -> CmdResult {
    if let Some(l) = a.listen {
        cfg.service.listen = l;
    }
    if let Some(m) = a.models {
        cfg.service.model_dir = m;
    }
    if let Some(d) = a.data {
        cfg.service.data_dir = d;
    }
    let state = AppState::from_settings(&cfg.service, &cfg.pipeline, Arc::new(SystemClock)).map_err(|e| match e {
        ServiceError::NoModels(_) | ServiceError::Config(_) => CliError::usage(e.to_string()),
        other => CliError {
            code: 5,
            message: other.to_string(),
        },
    })?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError {
        code: 5,
        message: e.to_string(),
    })?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.service.listen)
            .await
            .map_err(|e| CliError::usage(format!("cannot listen on {}: {e}", cfg.service.listen)))?;
        let addr = listener.local_addr().map_err(|e| CliError::usage(e.to_string()))?;
        tracing::info!(%addr, letters = state.diagnoser.registry().letters().len(), "listening");
        eprintln!("listening on {addr}");
        arpa_service::serve(listener, state, shutdown_signal())
            .await
            .map_err(|e| CliError {
                code: 5,
                message: e.to_string(),
            })
    })?;
    Ok(0)
}
