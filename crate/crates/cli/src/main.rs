//! `eqcontour`: dataset generation, image preprocessing, training,
//! evaluation, property checks and plots. Metrics go to stdout as one line
//! of JSON; logs go to stderr.

mod config;
mod plot;

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use eqcontour::checks::{run_suite, Suite};
use eqcontour::data::{generate_curvature_dataset_with, read_idx, read_jsonl, write_jsonl, CurvatureConfig, DatasetRecord};
use eqcontour::model::{
    evaluate, fit, load_checkpoint, save_checkpoint, CircleFit, FiniteDifference, History, Metric, Model, Predictor,
    TaskKind,
};
use eqcontour::optim::Output;
use eqcontour::preprocess::{image_to_contour, radial_histogram, read_pgm, read_raw, GrayImage, RadialWeighting};
use eqcontour::{Contour, Error};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use config::{ResolvedRun, Settings};

const RADIAL_BINS: usize = 14;

#[derive(Parser)]
#[command(name = "eqcontour", version, about = "Rotation- and shift-equivariant learning on contours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as JSONL.
    Generate {
        #[arg(long, value_enum, default_value_t = GenTask::Curvature)]
        task: GenTask,
        #[arg(long, value_parser = at_least::<1>)]
        count: usize,
        #[arg(long, env = "EQCONTOUR_SEED", default_value_t = 0)]
        seed: u64,
        /// Samples per contour.
        #[arg(long, default_value_t = 100, value_parser = at_least::<3>)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert grayscale images into contour records.
    Preprocess {
        /// A directory of images, or the image file for `idx`.
        #[arg(long)]
        images: PathBuf,
        #[arg(long, value_enum)]
        format: ImageFormat,
        /// IDX label file matching `--images`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 128, value_parser = at_least::<3>)]
        points: usize,
        /// Treat dark pixels as foreground.
        #[arg(long)]
        invert: bool,
        /// Attach a 14-bin radial histogram as auxiliary features.
        #[arg(long)]
        rh: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write its checkpoint and history.
    Train {
        #[arg(long, value_parser = parse_task)]
        task: TaskKind,
        #[arg(long)]
        data: PathBuf,
        /// `key = value` file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra `key=value` settings, applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, env = "EQCONTOUR_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the checkpoint path with extension `history.json`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Score a checkpoint or a classical baseline on a dataset.
    Evaluate {
        #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
        ckpt: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        #[arg(long)]
        data: PathBuf,
        /// accuracy, test_error_pct, mae, mse, iou or iou:<raster>; defaults by task.
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        /// Rotate every record by a random angle first.
        #[arg(long)]
        rotate_test: bool,
        #[arg(long, env = "EQCONTOUR_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Run a randomized property suite; exits nonzero on any violation.
    Check {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long, env = "EQCONTOUR_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Write an SVG figure.
    Plot {
        #[command(subcommand)]
        figure: Figure,
    },
}

#[derive(Subcommand)]
enum Figure {
    /// Training and validation loss from a history file.
    Loss {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// A record's contour, with the reconstruction of an autoencoder checkpoint.
    Contours {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// A record colored by its curvature targets, or by a regressor's predictions.
    Curvature {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenTask {
    Curvature,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Pgm,
    Idx,
    /// 8-bit raw pixels with a `.dim` sidecar holding "width height".
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    FiniteDifference,
    CircleFit,
}

fn at_least<const MIN: usize>(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v < MIN {
        return Err(format!("must be at least {MIN}"));
    }
    Ok(v)
}

fn parse_task(s: &str) -> std::result::Result<TaskKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate {
            task: GenTask::Curvature,
            count,
            seed,
            points,
            out,
        } => generate(count, seed, points, &out),
        Command::Preprocess {
            images,
            format,
            labels,
            points,
            invert,
            rh,
            out,
        } => preprocess(&images, format, labels.as_deref(), points, invert, rh, &out),
        Command::Train {
            task,
            data,
            config,
            set,
            seed,
            epochs,
            lr,
            batch_size,
            out,
            history,
        } => {
            let mut settings = match &config {
                Some(path) => Settings::read(path)?,
                None => Settings::default(),
            };
            for pair in &set {
                settings.set_pair(pair)?;
            }
            if let Some(v) = epochs {
                settings.set("epochs", v);
            }
            if let Some(v) = lr {
                settings.set("lr", v);
            }
            if let Some(v) = batch_size {
                settings.set("batch_size", v);
            }
            let history = history.unwrap_or_else(|| out.with_extension("history.json"));
            train(task, &data, seed, &settings, &out, &history)
        }
        Command::Evaluate {
            ckpt,
            baseline,
            data,
            metric,
            rotate_test,
            seed,
        } => evaluate_cmd(ckpt.as_deref(), baseline, &data, metric, rotate_test, seed),
        Command::Check { suite, seed } => {
            let report = run_suite(suite, seed)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Plot { figure } => plot_cmd(figure),
    }
}

fn generate(count: usize, seed: u64, points: usize, out: &Path) -> Result<ExitCode> {
    let cfg = CurvatureConfig {
        points,
        ..Default::default()
    };
    let data = generate_curvature_dataset_with(count, seed, &cfg)?;
    write_jsonl(&data.records, out)?;
    log::info!("wrote {} records to {}", data.records.len(), out.display());
    println!(
        "{}",
        json!({"records": data.records.len(), "rejected": data.rejected, "seed": seed, "out": out})
    );
    Ok(ExitCode::SUCCESS)
}

fn list_dir(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case(extension)));
    files.sort();
    Ok(files)
}

fn preprocess(
    images: &Path,
    format: ImageFormat,
    labels: Option<&Path>,
    points: usize,
    invert: bool,
    rh: bool,
    out: &Path,
) -> Result<ExitCode> {
    let inputs: Vec<(String, GrayImage, Option<usize>)> = match format {
        ImageFormat::Idx => {
            let imgs = match labels {
                Some(l) => {
                    let (imgs, labels) = read_idx(images, l)?;
                    imgs.into_iter().zip(labels.into_iter().map(Some)).collect::<Vec<_>>()
                }
                None => {
                    let bytes = std::fs::read(images).with_context(|| format!("reading {}", images.display()))?;
                    eqcontour::data::parse_idx_images(&bytes)?
                        .into_iter()
                        .map(|i| (i, None))
                        .collect()
                }
            };
            imgs.into_iter()
                .enumerate()
                .map(|(i, (img, l))| (format!("image-{i:06}"), img, l))
                .collect()
        }
        ImageFormat::Pgm | ImageFormat::Raw => {
            if labels.is_some() {
                bail!("--labels is only supported with --format idx");
            }
            let (ext, read): (&str, fn(&Path) -> eqcontour::Result<GrayImage>) = match format {
                ImageFormat::Pgm => ("pgm", |p| read_pgm(p)),
                _ => ("raw", |p| read_raw(p)),
            };
            list_dir(images, ext)?
                .into_iter()
                .map(|p| {
                    let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok((id, read(&p)?, None))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut records = Vec::with_capacity(inputs.len());
    let mut skipped = 0;
    for (id, img, label) in inputs {
        let contour = match image_to_contour(&img, points, invert) {
            Ok(c) => c,
            Err(e @ (Error::NoContour | Error::DegenerateContour { .. })) => {
                log::warn!("skipping {id}: {e}");
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("image {id}")),
        };
        let mut record = DatasetRecord::new(id, contour);
        record.label = label;
        if rh {
            let fg = if invert { img.inverted() } else { img };
            record = record.with_features(radial_histogram(&fg, RADIAL_BINS, RadialWeighting::Intensity)?)?;
        }
        records.push(record);
    }
    if records.is_empty() {
        bail!("no image produced a contour ({skipped} skipped)");
    }
    write_jsonl(&records, out)?;
    println!("{}", json!({"records": records.len(), "skipped": skipped, "points": points, "out": out}));
    Ok(ExitCode::SUCCESS)
}

fn train(task: TaskKind, data: &Path, seed: u64, settings: &Settings, out: &Path, history_path: &Path) -> Result<ExitCode> {
    let records = read_jsonl(data)?;
    let run = ResolvedRun::resolve(task, seed, settings, &records)?;
    log::info!("resolved config: {}", serde_json::to_string(&run)?);
    let model = run.build()?;
    log::info!("{} parameters, {} records", model.num_params(), records.len());
    let (model, history) = fit(model, &records, &run.train)?;
    save_checkpoint(&model, out)?;
    let doc = json!({"config": run, "history": history});
    std::fs::write(history_path, serde_json::to_string_pretty(&doc)? + "\n")
        .with_context(|| format!("writing {}", history_path.display()))?;
    println!(
        "{}",
        json!({
            "task": task.name(),
            "epochs": history.epochs.len(),
            "best_epoch": history.best_epoch,
            "best_val_loss": history.best_val_loss(),
            "checkpoint": out,
            "history": history_path,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn rotate_records(records: &[DatasetRecord], seed: u64) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| {
            let w = Complex64::from_polar(1.0, rng.gen_range(0.0..TAU));
            DatasetRecord {
                contour: r.contour.scale(w),
                ..r.clone()
            }
        })
        .collect()
}

fn default_metric(task: TaskKind) -> Metric {
    match task {
        TaskKind::Classify => Metric::Accuracy,
        TaskKind::Regress => Metric::Mae,
        TaskKind::Autoencode => Metric::Mse,
    }
}

fn check_schema(model: &Model, records: &[DatasetRecord]) -> Result<()> {
    for r in records {
        if r.contour.k() != model.input_k() || r.contour.n() != model.input_n() {
            bail!(
                "record '{}' has shape {}x{} but the checkpoint expects {}x{}",
                r.id,
                r.contour.k(),
                r.contour.n(),
                model.input_k(),
                model.input_n()
            );
        }
    }
    Ok(())
}

fn evaluate_cmd(
    ckpt: Option<&Path>,
    baseline: Option<Baseline>,
    data: &Path,
    metric: Option<Metric>,
    rotate_test: bool,
    seed: u64,
) -> Result<ExitCode> {
    let records = read_jsonl(data)?;
    let test = if rotate_test {
        rotate_records(&records, seed)
    } else {
        records.clone()
    };
    let mut out = json!({"records": records.len(), "rotate_test": rotate_test});
    if rotate_test {
        out["seed"] = json!(seed);
    }
    let (metric, value) = match (ckpt, baseline) {
        (Some(path), _) => {
            let model = load_checkpoint(path)?;
            check_schema(&model, &records)?;
            let task = model.meta().task;
            let metric = metric.unwrap_or(default_metric(task));
            if rotate_test && task == TaskKind::Classify {
                let (agreement, diff) = rotation_consistency(&model, &records, &test)?;
                out["agreement"] = json!(agreement);
                out["max_logit_diff"] = json!(diff);
            }
            (metric, evaluate(&model, &test, metric)?)
        }
        (None, Some(b)) => {
            let metric = metric.unwrap_or(Metric::Mae);
            let value = match b {
                Baseline::FiniteDifference => evaluate(&FiniteDifference, &test, metric)?,
                Baseline::CircleFit => evaluate(&CircleFit, &test, metric)?,
            };
            (metric, value)
        }
        (None, None) => bail!("either --ckpt or --baseline is required"),
    };
    out["metric"] = json!(metric.name());
    out["value"] = json!(value);
    if let Metric::Iou { raster } = metric {
        out["raster"] = json!(raster);
    }
    println!("{out}");
    Ok(ExitCode::SUCCESS)
}

// Fraction of records whose predicted class is unchanged, and the largest
// logit difference.
fn rotation_consistency(model: &Model, plain: &[DatasetRecord], rotated: &[DatasetRecord]) -> Result<(f64, f64)> {
    let argmax = |v: &[f64]| {
        (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
    };
    let mut same = 0;
    let mut worst: f64 = 0.0;
    for (a, b) in plain.iter().zip(rotated) {
        let (pa, pb) = (model.predict(a)?, model.predict(b)?);
        let (la, lb) = (logits(&pa)?, logits(&pb)?);
        same += (argmax(la) == argmax(lb)) as usize;
        worst = la.iter().zip(lb).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok((same as f64 / plain.len().max(1) as f64, worst))
}

fn logits(out: &Output) -> Result<&[f64]> {
    out.as_real().context("classifier produced a non-real output")
}

fn record_at(data: &Path, index: usize) -> Result<DatasetRecord> {
    let mut records = read_jsonl(data)?;
    if index >= records.len() {
        bail!("index {index} is out of range for {} records", records.len());
    }
    Ok(records.swap_remove(index))
}

fn write_svg(path: &Path, svg: &str) -> Result<ExitCode> {
    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", json!({"figure": path}));
    Ok(ExitCode::SUCCESS)
}

fn plot_cmd(figure: Figure) -> Result<ExitCode> {
    match figure {
        Figure::Loss { history, out } => {
            let text = std::fs::read_to_string(&history).with_context(|| format!("reading {}", history.display()))?;
            let doc: serde_json::Value = serde_json::from_str(&text)?;
            let h: History = serde_json::from_value(doc.get("history").cloned().unwrap_or(doc))
                .context("history file has no training history")?;
            write_svg(&out, &plot::loss_curves(&h))
        }
        Figure::Contours { data, index, ckpt, out } => {
            let record = record_at(&data, index)?;
            let svg = match ckpt {
                Some(path) => {
                    let model = load_checkpoint(path)?;
                    let input: Contour = model.reference(&record)?;
                    let recon = model.predict(&record)?;
                    let recon = recon
                        .as_contour()
                        .context("--ckpt must be an autoencoder checkpoint")?;
                    plot::contour_overlay(&record.id, &[("input", &input), ("reconstruction", recon)])
                }
                None => plot::contour_overlay(&record.id, &[("input", &record.contour)]),
            };
            write_svg(&out, &svg)
        }
        Figure::Curvature { data, index, ckpt, out } => {
            let record = record_at(&data, index)?;
            let (title, values) = match ckpt {
                Some(path) => {
                    let model = load_checkpoint(path)?;
                    let pred = model.predict(&record)?;
                    let v = pred.as_real().context("--ckpt must be a regressor checkpoint")?.to_vec();
                    (format!("{} predicted curvature", record.id), v)
                }
                None => (
                    format!("{} curvature", record.id),
                    record.node_targets.clone().context("record has no node targets")?,
                ),
            };
            if values.len() != record.contour.n() {
                bail!("expected one value per node");
            }
            write_svg(&out, &plot::value_coloring(&title, &record.contour, &values))
        }
    }
}
