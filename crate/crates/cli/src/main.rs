use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};

use transcript_core::crnn::{load_weights, save_weights, ModelWeights};
use transcript_core::pipeline::{
    emit_csv, emit_json, evaluate, load_truths, process_image, read_json, synth_transcript, write_synth_support,
    PipelineConfig, RunOptions,
};
use transcript_core::raster::load_image;
use transcript_core::ExecMode;

#[derive(Parser)]
#[command(name = "transcriptor", version, about = "Read student IDs and scores from ruled transcript scans")]
struct Cli {
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Extract records from one page or every image in a directory.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        debug_dir: Option<PathBuf>,
    },
    /// Score extracted JSON against truth files.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// A truth file or a directory of `*.truth.json` files.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Render synthetic transcripts with ground truth.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        skew: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write deterministic untrained weights for smoke tests.
    FixtureWeights {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm" | "png")
    )
}

fn inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p) && p.file_name().is_some_and(|n| n != "anchor.pgm"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no images in {}", path.display());
    }
    Ok(files)
}

/// Returns whether every document succeeded.
fn extract(
    input: &Path,
    weights: &Path,
    config: Option<&Path>,
    format: Format,
    out: &Path,
    debug_dir: Option<PathBuf>,
    mode: ExecMode,
) -> Result<bool> {
    let config = match config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    let weights = load_weights(weights).with_context(|| format!("weights {}", weights.display()))?;
    let opts = RunOptions { mode, debug_dir };
    let files = inputs(input)?;
    let outcomes = mode.map(&files, |f| {
        let source = f.display().to_string();
        load_image(f)
            .map_err(Into::into)
            .and_then(|img| process_image(&img, &source, &config, &weights, &opts))
    });
    let mut results = Vec::new();
    let mut ok = true;
    for (f, r) in files.iter().zip(outcomes) {
        match r {
            Ok(r) => {
                info!("{}: {} records", f.display(), r.records.len());
                results.push(r);
            }
            Err(e) => {
                error!("{}: {e}", f.display());
                ok = false;
            }
        }
    }
    match format {
        Format::Csv => emit_csv(&results, out)?,
        Format::Json => emit_json(&results, out)?,
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let mode = if cli.sequential { ExecMode::Sequential } else { ExecMode::default() };
    match cli.command {
        Command::Extract {
            input,
            weights,
            config,
            format,
            out,
            debug_dir,
        } => extract(&input, &weights, config.as_deref(), format, &out, debug_dir, mode),
        Command::Eval { pred, truth } => {
            let pred = read_json(&pred).with_context(|| format!("predictions {}", pred.display()))?;
            let truth = load_truths(&truth).with_context(|| format!("truth {}", truth.display()))?;
            let metrics = evaluate(&pred, &truth)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(true)
        }
        Command::Synth {
            seed,
            rows,
            count,
            skew,
            noise,
            out,
        } => {
            write_synth_support(&out)?;
            for s in seed..seed + count {
                let (image, truth) = synth_transcript(s, rows, skew, noise, &out)?;
                println!("{}\t{}", image.display(), truth.display());
            }
            Ok(true)
        }
        Command::FixtureWeights { seed, out } => {
            save_weights(&ModelWeights::seeded(seed), &out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
