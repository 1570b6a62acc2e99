//! `park` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use park_core::ingest::{gap_fill, parse_track, parse_wav, track_kind_for, DEFAULT_MAX_GAP_S};
use park_core::learners::{load_bundle, save_bundle, EvalMetrics, GbdtParams, ModelBundle, SvmParams};
use park_core::screening::render_summary;
use park_core::{face, motor, speech, Modality, RiskReport, SessionId, SessionManifest, TaskKind};

use crate::config::ServiceConfig;
use crate::pipeline::Analyzer;
use crate::store::{artifact_file_name, write_manifest};
use crate::training::{self, TrainOptions};

#[derive(Debug, Parser)]
#[command(name = "park", version, about = "Screening pipeline: features, models, reports and the HTTP service")]
struct Cli {
    /// TOML config file (PARK_* environment variables override it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve,
    /// Analyze a session directory and write its report.json.
    Analyze {
        dir: PathBuf,
        #[command(flatten)]
        models: ModelArgs,
        /// Print the report JSON instead of the text summary.
        #[arg(long)]
        json: bool,
    },
    /// Extract the feature vector of one task artifact.
    Features {
        task: TaskKind,
        file: PathBuf,
        /// JSON instead of single-row CSV.
        #[arg(long)]
        json: bool,
    },
    /// Train one modality's model into a bundle (created if missing).
    Train {
        modality: Modality,
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Evaluate a bundle's model on a labelled CSV.
    Eval {
        modality: Modality,
        csv: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// K-fold cross-validation on a labelled CSV.
    Cv {
        modality: Modality,
        csv: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        hyper: HyperArgs,
        #[arg(long)]
        json: bool,
    },
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model bundle (default: from config).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Resource directory JSON (default: from config).
    #[arg(long)]
    resources: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HyperArgs {
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// SVM box constraint.
    #[arg(long)]
    c: Option<f64>,
    /// RBF width (default 1 / number of member features).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
}

impl HyperArgs {
    fn options(&self) -> TrainOptions {
        let d = GbdtParams::default();
        let s = SvmParams::default();
        TrainOptions {
            gbdt: GbdtParams {
                n_trees: self.trees.unwrap_or(d.n_trees),
                max_depth: self.depth.unwrap_or(d.max_depth),
                learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
                seed: self.train_seed,
                ..d
            },
            svm: SvmParams { c: self.c.unwrap_or(s.c), gamma: self.gamma.or(s.gamma), ..s },
        }
    }
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Labelled feature CSV for one modality.
    Cohort {
        modality: Modality,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A session directory with all six artifacts.
    Session {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        affected: bool,
        /// Motor severity 0-4 planted in both hands.
        #[arg(long, default_value_t = 0.0)]
        severity: f64,
        #[arg(long)]
        region: Option<String>,
        /// Only write these tasks (comma-separated); default all.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<TaskKind>,
        /// Creation and last-upload time.
        #[arg(long, default_value = "2026-01-01T00:00:00Z")]
        time: chrono::DateTime<chrono::Utc>,
    },
    /// A complete model bundle trained on synthetic cohorts.
    Bundle {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn config(path: Option<&Path>) -> anyhow::Result<ServiceConfig> {
    Ok(ServiceConfig::load(path)?)
}

fn write_json(out: &mut dyn Write, v: &impl serde::Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Serve => {
            let cfg = config(cfg_path)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(cfg, |addr| {
                // stdout so that supervisors (and tests) can find an ephemeral port
                println!("listening on http://{addr}");
            }))
        }
        Command::Analyze { dir, models, json } => {
            let cfg = config(cfg_path)?;
            let analyzer = Analyzer::load(
                models.model.as_deref().unwrap_or(&cfg.model_bundle),
                models.resources.as_deref().unwrap_or(&cfg.resource_directory),
            )?;
            let bytes = analyzer.analyze_dir(&dir)?;
            if json {
                out.write_all(&bytes)?;
            } else {
                let report: RiskReport = serde_json::from_slice(&bytes)?;
                out.write_all(render_summary(&report).as_bytes())?;
            }
            Ok(())
        }
        Command::Features { task, file, json } => features(task, &file, json, out),
        Command::Train { modality, csv, out: path, hyper } => {
            let data = training::load_dataset(modality, &csv)?;
            let mut bundle = if path.exists() { load_bundle(&path)? } else { ModelBundle::default() };
            training::train_into(&mut bundle, modality, &data, &hyper.options())?;
            save_bundle(&bundle, &path)?;
            writeln!(out, "trained {modality} model on {} rows into {}", data.len(), path.display())?;
            Ok(())
        }
        Command::Eval { modality, csv, model, json } => {
            let data = training::load_dataset(modality, &csv)?;
            let m = training::evaluate(&load_bundle(&model)?, modality, &data)?;
            print_metrics(out, &m, json)
        }
        Command::Cv { modality, csv, folds, seed, hyper, json } => {
            let data = training::load_dataset(modality, &csv)?;
            let m = training::cross_validate(modality, &data, folds, seed, &hyper.options())?;
            print_metrics(out, &m, json)
        }
        Command::Synth(cmd) => synth(cmd, out),
    }
}

fn print_metrics(out: &mut dyn Write, m: &EvalMetrics, json: bool) -> anyhow::Result<()> {
    if json {
        return write_json(out, m);
    }
    if let Some(a) = m.auc {
        writeln!(out, "auc {a:.4}")?;
    }
    if let (Some(mae), Some(r)) = (m.mae, m.pearson_r) {
        writeln!(out, "mae {mae:.4}")?;
        writeln!(out, "pearson_r {r:.4}")?;
    }
    Ok(())
}

fn features(task: TaskKind, file: &Path, json: bool, out: &mut dyn Write) -> anyhow::Result<()> {
    let bytes = std::fs::read(file).with_context(|| file.display().to_string())?;
    let Some(kind) = track_kind_for(task) else {
        let fv = speech::extract_speech_features(&parse_wav(&bytes)?)?;
        return if json { write_json(out, &fv) } else { Ok(out.write_all(fv.to_csv().as_bytes())?) };
    };
    let text = std::str::from_utf8(&bytes).context("track is not UTF-8")?;
    let track = gap_fill(&parse_track(text, kind)?, DEFAULT_MAX_GAP_S);
    match task.modality() {
        Modality::Face => {
            let block = face::extract_expression_features(task, &track)?;
            let combined = face::combine_expression_features(std::slice::from_ref(&block))?;
            if json {
                write_json(out, &serde_json::json!({ "task": block.features, "combined": combined }))
            } else {
                Ok(out.write_all(combined.to_csv().as_bytes())?)
            }
        }
        Modality::Motor => {
            let sig = motor::aperture(&track)?;
            let analysis = motor::analyze_signal(&sig, &motor::TapConfig::default())?;
            if json {
                write_json(out, &analysis)
            } else {
                Ok(out.write_all(analysis.features.to_csv().as_bytes())?)
            }
        }
        Modality::Speech => unreachable!("speech has no track"),
    }
}

fn synth(cmd: SynthCommand, out: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        SynthCommand::Cohort { modality, n, seed, out: path } => {
            let data = training::synthetic_cohort(modality, n, seed)?;
            data.write_csv(std::fs::File::create(&path).with_context(|| path.display().to_string())?)?;
            writeln!(out, "wrote {n} rows to {}", path.display())?;
        }
        SynthCommand::Session { dir, seed, affected, severity, region, tasks, time } => {
            let artifacts = park_core::synth::session_artifacts(seed, affected, severity);
            let id = SessionId::parse(&format!("synth-{seed}")).ok_or_else(|| anyhow!("bad seed"))?;
            let mut m = SessionManifest::new(id, time);
            m.region_code = region;
            if dir.exists() {
                bail!("{} already exists", dir.display());
            }
            std::fs::create_dir_all(&dir)?;
            for (task, bytes) in artifacts {
                if !tasks.is_empty() && !tasks.contains(&task) {
                    continue;
                }
                let name = artifact_file_name(task);
                std::fs::write(dir.join(&name), bytes)?;
                m.artifacts.insert(task, name);
            }
            write_manifest(&dir, &m)?;
            writeln!(out, "wrote session {} with {} artifacts", dir.display(), m.artifacts.len())?;
        }
        SynthCommand::Bundle { n, seed, out: path } => {
            let bundle = training::synthetic_bundle(n, seed)?;
            save_bundle(&bundle, &path)?;
            writeln!(out, "wrote bundle {}", path.display())?;
        }
    }
    Ok(())
}
