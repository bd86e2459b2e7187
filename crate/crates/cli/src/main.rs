use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use expmul_cli::commands::{
    cmd_compare, cmd_gen, cmd_run, cmd_sweep, with_threads, OutFormat, RunOptions, SweepOptions,
};
use expmul_cli::generate::GenSpec;
use expmul_core::{Dtype, ExpMode, KernelKind};

#[derive(Parser)]
#[command(
    name = "expmul",
    about = "Attention kernels with fused exponential-multiply operators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate deterministic Q, K, V tensor files
    Gen(GenArgs),
    /// Run one kernel and report its accuracy against the reference
    Run(RunArgs),
    /// Sweep kernels x dtypes x hidden dimensions and emit a CSV table
    Sweep(SweepArgs),
    /// Compare two tensor files, the second taken as reference
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    Fp32,
    Bf16,
}

impl From<DtypeArg> for Dtype {
    fn from(value: DtypeArg) -> Self {
        match value {
            DtypeArg::Fp32 => Dtype::Fp32,
            DtypeArg::Bf16 => Dtype::Bf16,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Baseline,
    Flash2,
    #[value(name = "flash2-expmul")]
    Flash2ExpMul,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpArg {
    Accurate,
    Pwl,
}

impl From<ExpArg> for ExpMode {
    fn from(value: ExpArg) -> Self {
        match value {
            ExpArg::Accurate => ExpMode::Accurate,
            ExpArg::Pwl => ExpMode::Pwl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutArg {
    Json,
    Csv,
}

impl From<OutArg> for OutFormat {
    fn from(value: OutArg) -> Self {
        match value {
            OutArg::Json => OutFormat::Json,
            OutArg::Csv => OutFormat::Csv,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "fp32")]
    dtype: DtypeArg,
    /// Hidden dimension d
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Number of key/value rows N
    #[arg(long, default_value_t = 64)]
    seqlen: usize,
    /// Number of query rows
    #[arg(long, default_value_t = 8)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Widen distributions to force clipping and flush-to-zero paths
    #[arg(long)]
    stress: bool,
    /// Output path for the query tensor
    #[arg(long = "q")]
    q_path: PathBuf,
    /// Output path for the key tensor
    #[arg(long = "k")]
    k_path: PathBuf,
    /// Output path for the value tensor
    #[arg(long = "v")]
    v_path: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    kernel: KernelArg,
    /// Exponential evaluation for the baseline and flash2 kernels
    #[arg(long, value_enum, default_value = "accurate")]
    exp: ExpArg,
    /// Scale scores by 1/sqrt(d)
    #[arg(long)]
    scale: bool,
    #[arg(long, value_enum, default_value = "json")]
    out: OutArg,
    /// Worker threads for query-parallel execution; 0 uses the default pool
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Report the seconds field as zero for byte-reproducible output
    #[arg(long)]
    no_timing: bool,
    /// Also write the kernel output as a tensor file
    #[arg(long)]
    save: Option<PathBuf>,
    #[arg(long = "q")]
    q_path: PathBuf,
    #[arg(long = "k")]
    k_path: PathBuf,
    #[arg(long = "v")]
    v_path: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 64)]
    seqlen: usize,
    #[arg(long, default_value_t = 8)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "accurate")]
    exp: ExpArg,
    #[arg(long)]
    scale: bool,
    #[arg(long)]
    stress: bool,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Tensor file under test
    a: PathBuf,
    /// Reference tensor file
    b: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    out: OutArg,
}

fn kernel_kind(kernel: KernelArg, exp: ExpArg) -> KernelKind {
    match kernel {
        KernelArg::Baseline => KernelKind::BaselineLazy { exp: exp.into() },
        KernelArg::Flash2 => KernelKind::Flash2Exact { exp: exp.into() },
        KernelArg::Flash2ExpMul => KernelKind::Flash2ExpMul,
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => {
            let spec = GenSpec {
                dtype: args.dtype.into(),
                dim: args.dim,
                seqlen: args.seqlen,
                queries: args.queries,
                seed: args.seed,
                stress: args.stress,
            };
            cmd_gen(&spec, &args.q_path, &args.k_path, &args.v_path)?;
        }
        Command::Run(args) => {
            let opts = RunOptions {
                kernel: kernel_kind(args.kernel, args.exp),
                scale: args.scale,
                out_format: args.out.into(),
                timing: !args.no_timing,
                save: args.save.clone(),
            };
            let report = with_threads(args.threads, || {
                cmd_run(&opts, &args.q_path, &args.k_path, &args.v_path)
            })?;
            println!("{report}");
        }
        Command::Sweep(args) => {
            let opts = SweepOptions {
                seqlen: args.seqlen,
                queries: args.queries,
                seed: args.seed,
                exp: args.exp.into(),
                scale: args.scale,
                stress: args.stress,
                timing: !args.no_timing,
            };
            let table = with_threads(args.threads, || cmd_sweep(&opts))?;
            println!("{table}");
        }
        Command::Compare(args) => {
            let report = cmd_compare(&args.a, &args.b, args.out.into())?;
            println!("{report}");
        }
    }
    Ok(())
}
