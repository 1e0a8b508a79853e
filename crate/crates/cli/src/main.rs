use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod output;

use config::Format;

#[derive(Parser)]
#[command(name = "thinbasis", version, about = "Smooth Waring problem numerics and random thin bases")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "THINBASIS_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// τ(k), G₀(k), Δ*_s and the threshold inequality report.
    Constants(ConstantsArgs),
    /// Counts of 𝒜(P,R), optionally dumping the members.
    Smooth(SmoothArgs),
    /// Weyl sum values on a grid of α.
    Weylsum(WeylsumArgs),
    /// Major/minor classification of α values read from a file.
    Arcs(ArcsArgs),
    /// Moments of a Weyl sum over an arc set.
    Moments(MomentsArgs),
    /// Singular series 𝔖(n).
    Singular(SingularArgs),
    /// Exact representation counts.
    Repcount(RepcountArgs),
    /// Draw one random thin basis.
    SampleBasis(RunArgs),
    /// Run the almost-all experiment and upper-bound monitor on one sample.
    Verify(RunArgs),
}

#[derive(Args)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub k: u32,
    /// s for Δ*_s(t) (default: the smallest admissible s = max(⌊G₀⌋+1, 4k+1)).
    #[arg(long)]
    pub s: Option<u64>,
    /// t for Δ*_s(t) (default: s).
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModelArg::Transcendental)]
    pub model: ModelArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Transcendental,
    ZeroTail,
    /// k = 2 with Δ₈ = 0.
    K2Delta8Zero,
    /// k = 3 with Δ₁₂ = 0.
    K3Delta12Zero,
}

#[derive(Args)]
pub struct SmoothArgs {
    #[arg(long = "P")]
    pub p: f64,
    #[arg(long = "R", conflicts_with = "eta", required_unless_present = "eta")]
    pub r: Option<f64>,
    /// R = P^η.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Write the members (x, largest prime factor) to this CSV.
    #[arg(long)]
    pub members: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct WeylsumArgs {
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub s: u32,
    #[arg(long = "P")]
    pub p: f64,
    /// Smoothness bound (default: P).
    #[arg(long = "R")]
    pub r: Option<f64>,
    /// full, weighted, dyadic or truncated.
    #[arg(long, default_value = "weighted")]
    pub variant: thinbasis_core::Variant,
    /// Evaluate at α = j/G for j < G.
    #[arg(long, default_value_t = 64)]
    pub alpha_grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ArcsArgs {
    /// File with one α per line ("-" for stdin; blank lines and # comments skipped).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: u32,
    #[arg(long = "P")]
    pub p: f64,
    #[arg(long = "Q")]
    pub q: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ArcsArg {
    Full,
    Major,
    Truncated,
    Minor,
}

#[derive(Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub s: u32,
    #[arg(long = "P")]
    pub p: f64,
    #[arg(long = "R")]
    pub r: Option<f64>,
    #[arg(long, default_value = "weighted")]
    pub variant: thinbasis_core::Variant,
    /// Exponent of the quadrature moment ∫|f|^t.
    #[arg(long)]
    pub t: f64,
    /// Also compute the exact even moment ∫|f|^{2w}.
    #[arg(long)]
    pub w: Option<u32>,
    #[arg(long, value_enum, default_value_t = ArcsArg::Full)]
    pub arcs: ArcsArg,
    #[arg(long = "Q", required_if_eq_any = [("arcs", "major"), ("arcs", "truncated"), ("arcs", "minor")])]
    pub q: Option<f64>,
    /// Quadrature points (default: smallest power of two resolving the sum).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RouteArg {
    QSum,
    Euler,
}

#[derive(Args)]
pub struct SingularArgs {
    /// One or more n (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<i128>,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub s: u32,
    #[arg(long, value_enum, default_value_t = RouteArg::QSum)]
    pub route: RouteArg,
    /// q-sum truncation.
    #[arg(long = "Q", default_value_t = 100)]
    pub q: u64,
    /// Euler route: maximal extra depth per prime.
    #[arg(long, default_value_t = 6)]
    pub depth: u32,
    /// Euler route: target tail size.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepVariant {
    /// r_{s,k}(n,R).
    Plain,
    /// r_j(n,R): x₁..x_j > P₋.
    Rj,
    /// r^φ: every x > (n/φ(n))^{1/k}.
    Phi,
    /// Self-smooth x ∈ 𝒜(x, x^η) with the φ cutoff.
    Selfsmooth,
    /// F_{d,a}(n) with dilations --a.
    F,
}

#[derive(Args)]
pub struct RepcountArgs {
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub s: u32,
    #[arg(long, conflicts_with = "n_range", required_unless_present = "n_range")]
    pub n: Option<u64>,
    /// Inclusive range lo..hi.
    #[arg(long)]
    pub n_range: Option<String>,
    /// Scale parameter N, P = (2N)^{1/k} (default: n, or lo for a range).
    #[arg(long = "N")]
    pub big_n: Option<u64>,
    #[arg(long = "R", conflicts_with = "eta")]
    pub r: Option<f64>,
    /// R = P^η; also the self-smooth exponent.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum, default_value_t = RepVariant::Plain)]
    pub variant: RepVariant,
    #[arg(long, default_value_t = 0)]
    pub j: u32,
    /// φ as JSON, e.g. '{"family":"log","c":1}'.
    #[arg(long)]
    pub phi: Option<String>,
    /// Dilations for the F variant (comma separated); d = s − len.
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<u64>,
    /// Restrict to pairwise distinct x_i.
    #[arg(long)]
    pub distinct: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    /// JSON config (schema 1).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// k2s9-thm13 or k3s13.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "X-max")]
    pub x_max: Option<u64>,
    /// Directory for CSV/JSON outputs (default: JSON on stdout).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers == Some(0) {
        eprintln!("config error: --workers must be positive");
        return ExitCode::from(2);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        builder = builder.num_threads(w);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let explicit_workers = cli.workers.is_some();
    let result = pool.install(|| match cli.command {
        Command::Constants(a) => commands::constants(&a),
        Command::Smooth(a) => commands::smooth(&a),
        Command::Weylsum(a) => commands::weylsum(&a),
        Command::Arcs(a) => commands::arcs(&a),
        Command::Moments(a) => commands::moments(&a),
        Command::Singular(a) => commands::singular(&a),
        Command::Repcount(a) => commands::repcount(&a),
        Command::SampleBasis(a) => commands::sample_basis(&a, explicit_workers),
        Command::Verify(a) => commands::verify(&a, explicit_workers),
    });
    match result {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
