//! `tilepack` command line: benchmark the GEMM variants or check them
//! against the naive oracle.
//!
//! Exit codes: 0 success, 1 correctness failure, 2 invalid arguments or an
//! infeasible configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tilepack::bench::{
    cube_sweep, default_outer_tile, default_tile, emit_csv, format_summary, parse_variants, run_bench,
    verify, BenchCase, BenchConfig, VerifyConfig, DEFAULT_REPEATS,
};
use tilepack::{CacheConfig, ElementType, KernelKind, TileParams};

#[derive(Parser)]
#[command(name = "tilepack", version, about = "Blocked and packed GEMM benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time the selected variants in shuffled rounds and cross-check outputs.
    Bench(BenchArgs),
    /// Compare blocked GEMM against the naive oracle over a size sweep.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// f32, f64, i16 or i8.
    #[arg(long, default_value = "f32")]
    dtype: ElementType,
    /// generic or outer.
    #[arg(long, default_value = "generic")]
    kernel: KernelKind,
    #[arg(long)]
    mr: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    kr: Option<usize>,
    /// L1 data cache bytes (suffixes K, M accepted).
    #[arg(long, value_parser = parse_bytes)]
    l1: Option<usize>,
    /// Effective L2 bytes.
    #[arg(long, value_parser = parse_bytes)]
    l2: Option<usize>,
    /// Effective L3 bytes.
    #[arg(long, value_parser = parse_bytes)]
    l3: Option<usize>,
    /// Elements per vector register.
    #[arg(long)]
    vl: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Comma-separated subset of naive,tiling,tiling_packing,outer_kernel.
    #[arg(long, default_value = "naive,tiling,tiling_packing,outer_kernel")]
    variants: String,
    /// Print a table of speedups over `naive`.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Edge lengths of the cube sweep, used when no explicit size is given.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 7, 16, 31, 64, 100, 128, 257])]
    sweep: Vec<usize>,
    /// Relative error tolerance for floating-point types.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

fn parse_bytes(s: &str) -> Result<usize, String> {
    let t = s.trim();
    let upper = t.to_ascii_uppercase();
    let (digits, scale) = if let Some(d) = upper.strip_suffix("KIB").or_else(|| upper.strip_suffix('K')) {
        (d.to_string(), 1024)
    } else if let Some(d) = upper.strip_suffix("MIB").or_else(|| upper.strip_suffix('M')) {
        (d.to_string(), 1024 * 1024)
    } else {
        (upper.clone(), 1)
    };
    digits
        .trim()
        .parse::<usize>()
        .map(|v| v * scale)
        .map_err(|_| format!("`{t}` is not a byte count"))
}

enum Failure {
    Usage(String),
    Correctness(String),
}

impl From<tilepack::Error> for Failure {
    fn from(e: tilepack::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl Common {
    fn cache(&self) -> Result<CacheConfig, Failure> {
        let d = CacheConfig::default();
        Ok(CacheConfig::new(
            self.l1.unwrap_or(d.l1_bytes),
            self.l2.unwrap_or(d.l2_bytes),
            self.l3.unwrap_or(d.l3_bytes),
            self.vl.unwrap_or(d.vl),
        )?)
    }

    fn explicit_tile(&self) -> bool {
        self.mr.is_some() || self.nr.is_some() || self.kr.is_some()
    }

    /// The tile for `kernel`, with any explicit `--mr/--kr/--nr` applied.
    fn tile_for(&self, kernel: KernelKind) -> Result<TileParams, Failure> {
        let base = match kernel {
            KernelKind::Generic => default_tile(),
            KernelKind::OuterProduct => default_outer_tile(self.dtype),
        };
        Ok(TileParams::new(
            self.mr.unwrap_or(base.mr),
            self.kr.unwrap_or(base.kr),
            self.nr.unwrap_or(base.nr),
        )?)
    }

    fn size(&self) -> Option<(usize, usize, usize)> {
        match (self.m, self.n, self.k) {
            (None, None, None) => None,
            (m, n, k) => {
                let d = m.or(n).or(k).unwrap_or(1);
                Some((m.unwrap_or(d), n.unwrap_or(d), k.unwrap_or(d)))
            }
        }
    }
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let c = &args.common;
    let (m, n, k) = c.size().unwrap_or((256, 256, 256));
    let variants = parse_variants(&args.variants)?;
    if variants.is_empty() {
        return Err(Failure::Usage("no variants selected".into()));
    }
    let cfg = BenchConfig {
        alpha: c.alpha,
        beta: c.beta.unwrap_or(0.0),
        cache: c.cache()?,
        tile: c.tile_for(c.kernel)?,
        outer_tile: if c.explicit_tile() {
            Some(c.tile_for(KernelKind::OuterProduct)?)
        } else {
            None
        },
        kernel: c.kernel,
        warmup: true,
    };
    let cases: Vec<BenchCase> = variants
        .into_iter()
        .map(|variant| BenchCase {
            variant,
            m,
            n,
            k,
            etype: c.dtype,
            repeats: args.repeats,
            seed: c.seed,
        })
        .collect();
    let report = run_bench(&cases, &cfg, c.seed)?;
    let csv = emit_csv(&report.results);
    match &args.csv {
        Some(path) => std::fs::write(path, &csv)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    if args.summary {
        println!("{}", format_summary(&report.results));
    }
    if report.passed() {
        Ok(())
    } else {
        let lines: Vec<String> = report.mismatches.iter().map(ToString::to_string).collect();
        Err(Failure::Correctness(lines.join("\n")))
    }
}

fn verify_cmd(args: VerifyArgs) -> Result<(), Failure> {
    let c = &args.common;
    let sizes = match c.size() {
        Some(s) => vec![s],
        None => cube_sweep(&args.sweep),
    };
    if sizes.iter().any(|&(m, n, k)| m == 0 || n == 0 || k == 0) {
        return Err(Failure::Usage("sizes must be positive".into()));
    }
    let cfg = VerifyConfig {
        alpha: c.alpha,
        beta: c.beta.unwrap_or(1.0),
        cache: c.cache()?,
        tile: c.tile_for(c.kernel)?,
        kernel: c.kernel,
        seed: c.seed,
        tolerance: args.tolerance,
    };
    let report = verify(&sizes, c.dtype, &cfg)?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let bad: Vec<String> = report
            .failures()
            .map(|r| format!("{}x{}x{}", r.m, r.n, r.k))
            .collect();
        Err(Failure::Correctness(format!("tolerance exceeded at {}", bad.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Correctness(msg)) => {
            eprintln!("correctness failure:\n{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
