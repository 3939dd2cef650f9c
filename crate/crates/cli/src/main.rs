use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Refocus light fields, inspect focal stack spectra and remove refocus aliasing.
#[derive(Debug, Parser)]
#[command(name = "fss", version)]
struct Cli {
    /// Worker threads. Output does not depend on this.
    #[arg(long, global = true, env = "FSS_THREADS")]
    threads: Option<usize>,

    /// Print a JSON summary on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic light field from a JSON scene description.
    Gen {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Png16)]
        format: Format,
        /// Reseed textured planes: plane i gets seed + i.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the focal stack of a light field directory.
    Refocus {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        focal: FocalArgs,
        #[arg(long, value_parser = parse_rows)]
        rows: Option<Range<usize>>,
        /// Skip the per-layer PNG export.
        #[arg(long)]
        no_png: bool,
    },
    /// Spectrum of one row of a focal stack.
    Fss {
        stack: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        row: usize,
        /// Also write a log-magnitude heatmap here.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Spectrum, predicted line and cone masks, energy concentration and detected lines of one row.
    Analyze {
        stack: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Dilation (bins) of the rasterized spectral lines.
        #[arg(long, default_value_t = 2)]
        line_dilation: usize,
        /// Dilation (bins) of the cone support mask.
        #[arg(long, default_value_t = 1)]
        support_dilation: usize,
    },
    /// Anti-aliased focal stack of an undersampled light field.
    Antialias {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        focal: FocalArgs,
        #[arg(long, value_enum)]
        op: Op,
        /// Virtual views inserted per gap (analytic).
        #[arg(long)]
        m: Option<usize>,
        /// Cutoff as a fraction of Nyquist (lowpass).
        #[arg(long)]
        cutoff: Option<f64>,
        /// FSSW weights file (neural).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_parser = parse_rows)]
        rows: Option<Range<usize>>,
        /// Densely sampled light field of the same scene; enables the metrics report.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Per-layer PSNR and SSIM of a stack against a reference stack.
    Metrics {
        output: PathBuf,
        gt: PathBuf,
        /// Write the per-layer table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Png8,
    Png16,
    Pfm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Op {
    Analytic,
    Lowpass,
    Neural,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Renormalize,
    Zero,
}

#[derive(Debug, Clone, Args)]
struct FocalArgs {
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    d_min: f64,
    #[arg(long, default_value_t = 0.98, allow_hyphen_values = true)]
    d_max: f64,
    #[arg(long, default_value_t = 0.01)]
    delta_alpha: f64,
    /// Number of layers from d_min; overrides --d-max.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Policy::Renormalize)]
    policy: Policy,
}

/// View geometry, read from the stack's sidecar unless given here.
#[derive(Debug, Clone, Args)]
struct GeometryArgs {
    #[arg(long)]
    n_u: Option<usize>,
    #[arg(long)]
    u_ref: Option<usize>,
    #[arg(long)]
    baseline: Option<f64>,
}

fn parse_rows(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("bad row start: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("bad row end: {e}"))?;
    if b <= a {
        return Err(format!("empty row range {a}..{b}"));
    }
    Ok(a..b)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let threads = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
