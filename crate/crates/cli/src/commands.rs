//! The logic behind each subcommand, kept binary-free so tests can call it
//! and compare emitted text byte for byte.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use expmul_core::{
    compare, oracle_attention, run_kernel, Dtype, ExpMode, KernelKind, MatF64, Tensor,
};

use crate::format::{read_tensor, write_tensor};
use crate::generate::{generate, GenSpec};
use crate::report::{ReportRow, CSV_HEADER};

/// Output encoding for single reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutFormat {
    Json,
    Csv,
}

/// Options for `run`.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub kernel: KernelKind,
    /// Scale scores by `1/sqrt(d)`, applied by pre-multiplying the query
    /// tensor so the kernels themselves stay scale-free.
    pub scale: bool,
    pub out_format: OutFormat,
    /// When false the seconds field is reported as zero, which makes the
    /// output byte-reproducible.
    pub timing: bool,
    pub save: Option<std::path::PathBuf>,
}

/// The fixed hidden-dimension grid the sweep walks.
pub const SWEEP_DIMS: [usize; 3] = [16, 64, 256];

/// Options for `sweep`.
#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub seqlen: usize,
    pub queries: usize,
    pub seed: u64,
    /// Exponential mode for the two exact kernels.
    pub exp: ExpMode,
    pub scale: bool,
    pub stress: bool,
    pub timing: bool,
}

/// Generate Q, K, V tensor files.
pub fn cmd_gen(spec: &GenSpec, q_path: &Path, k_path: &Path, v_path: &Path) -> Result<()> {
    if spec.dim == 0 || spec.seqlen == 0 || spec.queries == 0 {
        bail!("dim, seqlen and queries must all be at least 1");
    }
    let (q, k, v) = generate(spec);
    write_tensor(q_path, &q)?;
    write_tensor(k_path, &k)?;
    write_tensor(v_path, &v)?;
    Ok(())
}

fn load_instance(q_path: &Path, k_path: &Path, v_path: &Path) -> Result<(Tensor, Tensor, Tensor)> {
    let q = read_tensor(q_path)?;
    let k = read_tensor(k_path)?;
    let v = read_tensor(v_path)?;
    if q.dtype() != k.dtype() || q.dtype() != v.dtype() {
        bail!(
            "dtype mismatch: {} is {}, {} is {}, {} is {}",
            q_path.display(),
            q.dtype().name(),
            k_path.display(),
            k.dtype().name(),
            v_path.display(),
            v.dtype().name()
        );
    }
    Ok((q, k, v))
}

fn scale_queries(q: &Tensor) -> Result<Tensor> {
    let factor = 1.0 / (q.cols() as f32).sqrt();
    let data = q.data().iter().map(|&x| x * factor).collect();
    Ok(Tensor::from_f32(q.rows(), q.cols(), q.dtype(), data)?)
}

fn run_cell(
    kernel: KernelKind,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    timing: bool,
) -> Result<(ReportRow, Tensor, MatF64)> {
    let started = Instant::now();
    let run = run_kernel(kernel, q, k, v)?;
    let seconds = if timing {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let reference = oracle_attention(q, k, v)?;
    let report = compare(&run.output, &reference)?.with_flushed(run.flushed);
    let row = ReportRow::new(
        kernel.name(),
        q.dtype().name(),
        q.cols(),
        k.rows(),
        &report,
        seconds,
    );
    Ok((row, run.output, reference))
}

fn render(row: &ReportRow, format: OutFormat) -> String {
    match format {
        OutFormat::Json => row.json(),
        OutFormat::Csv => format!("{CSV_HEADER}\n{}", row.csv_line()),
    }
}

/// Run one kernel against the reference and render the report.
pub fn cmd_run(opts: &RunOptions, q_path: &Path, k_path: &Path, v_path: &Path) -> Result<String> {
    let (q, k, v) = load_instance(q_path, k_path, v_path)?;
    let q = if opts.scale { scale_queries(&q)? } else { q };
    let (row, output, _) = run_cell(opts.kernel, &q, &k, &v, opts.timing)
        .with_context(|| format!("running on {}", q_path.display()))?;
    if let Some(path) = &opts.save {
        write_tensor(path, &output)?;
    }
    Ok(render(&row, opts.out_format))
}

/// Walk the kernel x dtype x hidden-dimension grid and emit one CSV row per
/// cell. Every cell regenerates the instance from the same seed, so rows for
/// different kernels see identical data.
pub fn cmd_sweep(opts: &SweepOptions) -> Result<String> {
    let kernels = [
        KernelKind::BaselineLazy { exp: opts.exp },
        KernelKind::Flash2Exact { exp: opts.exp },
        KernelKind::Flash2ExpMul,
    ];
    let mut out = String::from(CSV_HEADER);
    for kernel in kernels {
        for dtype in [Dtype::Fp32, Dtype::Bf16] {
            for dim in SWEEP_DIMS {
                let spec = GenSpec {
                    dtype,
                    dim,
                    seqlen: opts.seqlen,
                    queries: opts.queries,
                    seed: opts.seed,
                    stress: opts.stress,
                };
                let (q, k, v) = generate(&spec);
                let q = if opts.scale { scale_queries(&q)? } else { q };
                let (row, _, _) = run_cell(kernel, &q, &k, &v, opts.timing)?;
                out.push('\n');
                out.push_str(&row.csv_line());
            }
        }
    }
    Ok(out)
}

/// Compare tensor file `a` against tensor file `b` taken as the reference.
pub fn cmd_compare(a_path: &Path, b_path: &Path, format: OutFormat) -> Result<String> {
    let a = read_tensor(a_path)?;
    let b = read_tensor(b_path)?;
    let reference = MatF64 {
        rows: b.rows(),
        cols: b.cols(),
        data: b.data().iter().map(|&x| x as f64).collect(),
    };
    let report = compare(&a, &reference).with_context(|| {
        format!(
            "comparing {} against {}",
            a_path.display(),
            b_path.display()
        )
    })?;
    let row = ReportRow::new(
        "compare",
        a.dtype().name(),
        a.cols(),
        a.rows(),
        &report,
        0.0,
    );
    Ok(render(&row, format))
}

/// Run `f` on a rayon pool with the requested thread count; 0 keeps the
/// global default pool.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("building rayon pool")
            .install(f)
    }
}
