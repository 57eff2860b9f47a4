//! Benchmark harness and correctness sweep.
//!
//! Every case is measured once per round; the case list is reshuffled with a
//! seeded RNG before each round and one warm-up round is discarded. Outputs
//! of variants sharing dims, element type and seed are cross-checked.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::element::{Element, ElementType, Scalar};
use crate::error::{Error, Result};
use crate::macro_kernel::{gemm, gemm_tiled, GemmPlan, KernelKind};
use crate::matrix::Matrix;
use crate::params::{CacheConfig, TileParams};
use crate::reference::{frobenius_rel_error, max_abs, max_abs_diff, naive_gemm};

pub const DEFAULT_REPEATS: usize = 20;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Naive,
    Tiling,
    TilingPacking,
    OuterKernel,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Naive,
        Variant::Tiling,
        Variant::TilingPacking,
        Variant::OuterKernel,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Naive => "naive",
            Variant::Tiling => "tiling",
            Variant::TilingPacking => "tiling_packing",
            Variant::OuterKernel => "outer_kernel",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// Parses a comma-separated variant list.
pub fn parse_variants(list: &str) -> Result<Vec<Variant>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCase {
    pub variant: Variant,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub etype: ElementType,
    pub repeats: usize,
    pub seed: u64,
}

impl BenchCase {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::InvalidArgument(format!(
                "dims must be positive, got {}x{}x{}",
                self.m, self.n, self.k
            )));
        }
        Ok(())
    }
}

/// Shared settings for every case in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub alpha: f64,
    pub beta: f64,
    pub cache: CacheConfig,
    /// Tile for the `tiling` and `tiling_packing` variants.
    pub tile: TileParams,
    /// Tile for `outer_kernel`; `None` picks [`default_outer_tile`].
    pub outer_tile: Option<TileParams>,
    /// Kernel used by `tiling` and `tiling_packing`.
    pub kernel: KernelKind,
    pub warmup: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            alpha: 1.0,
            beta: 0.0,
            cache: CacheConfig::default(),
            tile: default_tile(),
            outer_tile: None,
            kernel: KernelKind::Generic,
            warmup: true,
        }
    }
}

/// Register tile used by the generic-kernel variants.
pub fn default_tile() -> TileParams {
    TileParams {
        mr: 16,
        kr: 64,
        nr: 4,
    }
}

/// Largest tile the default 2x4 grid holds within the register budget.
pub fn default_outer_tile(etype: ElementType) -> TileParams {
    let (mr, kr, nr) = match etype {
        ElementType::F32 => (8, 5, 16),
        ElementType::F64 => (8, 5, 8),
        ElementType::I16ToI32 => (8, 10, 16),
        ElementType::I8ToI32 => (8, 20, 16),
    };
    TileParams { mr, kr, nr }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub label: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub etype: ElementType,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub ci95_low_ns: f64,
    pub ci95_high_ns: f64,
    pub gflops: f64,
    pub checksum: u64,
    pub samples: Vec<f64>,
}

/// A cross-variant disagreement.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub label: String,
    pub reference: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub etype: ElementType,
    pub max_abs_diff: f64,
    pub bound: f64,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} vs {} at {}x{}x{} {}: max |diff| {:e} exceeds {:e}",
            self.label, self.reference, self.m, self.n, self.k, self.etype, self.max_abs_diff, self.bound
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    /// One entry per case, in declaration order.
    pub results: Vec<BenchResult>,
    /// Case indices in measurement order, warm-up excluded.
    pub log: Vec<usize>,
    pub mismatches: Vec<Mismatch>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Timing summary of a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

/// Median, mean and a 95% interval for the median from the normal
/// approximation `median +- z * sqrt(pi/2) * s / sqrt(n)`.
pub fn summarize(samples: &[f64]) -> Stats {
    assert!(!samples.is_empty(), "no samples");
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let mean = samples.iter().sum::<f64>() / n;
    let sd = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = Z95 * (std::f64::consts::FRAC_PI_2).sqrt() * sd / n.sqrt();
    Stats {
        median,
        mean,
        ci95_low: (median - half).max(0.0).min(median),
        ci95_high: median + half,
    }
}

/// GEMM flop count over time: `2mnk / ns` is GFLOP/s.
pub fn gflops(m: usize, n: usize, k: usize, ns: f64) -> f64 {
    2.0 * m as f64 * n as f64 * k as f64 / ns.max(f64::MIN_POSITIVE)
}

/// Seeded input generation: floats uniform in `[-1, 1]`, integers full range.
pub trait Sample: Element {
    fn sample<R: Rng>(rng: &mut R) -> Self;
}

impl Sample for f32 {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen_range(-1.0..=1.0)
    }
}
impl Sample for f64 {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen_range(-1.0..=1.0)
    }
}
impl Sample for i16 {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen()
    }
}
impl Sample for i8 {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen()
    }
}

/// Seeded operands `(A, B, C)` for an `m x n x k` problem. The same seed and
/// dims always give the same matrices.
pub fn random_problem<T: Sample>(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
) -> (Matrix<T>, Matrix<T>, Matrix<T::Acc>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::from_fn(m, k, Default::default(), |_, _| T::sample(&mut rng));
    let b = Matrix::from_fn(k, n, Default::default(), |_, _| T::sample(&mut rng));
    let c = Matrix::from_fn(m, n, Default::default(), |_, _| T::sample(&mut rng).widen());
    (a, b, c)
}

/// FNV-1a over the column-major bit patterns.
pub fn checksum<A: Scalar>(c: &Matrix<A>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in c.to_col_major_vec() {
        for byte in v.to_bits_u64().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Worst-case per-element bound for two differently ordered evaluations of
/// `alpha * A * B + beta * C`.
fn float_bound<T: Element>(k: usize, a: &Matrix<T>, b: &Matrix<T>, alpha: f64, beta: f64, c: &Matrix<T::Acc>) -> f64 {
    let eps = T::Acc::EPSILON;
    let prod = max_abs(a) * max_abs(b);
    2.0 * ((k as f64 + 2.0) * eps * alpha.abs() * prod * k as f64 + 2.0 * eps * beta.abs() * max_abs(c))
}

struct Prepared<T: Element> {
    a: Matrix<T>,
    b: Matrix<T>,
    c0: Matrix<T::Acc>,
    alpha: T::Acc,
    beta: T::Acc,
    variant: Variant,
    plan: Option<GemmPlan>,
    out: Option<Matrix<T::Acc>>,
}

impl<T: Sample> Prepared<T> {
    fn new(case: &BenchCase, cfg: &BenchConfig) -> Result<Self> {
        let plan = match case.variant {
            Variant::Naive => None,
            Variant::Tiling | Variant::TilingPacking => {
                Some(GemmPlan::derive(&cfg.cache, T::ETYPE, cfg.tile, cfg.kernel)?)
            }
            Variant::OuterKernel => {
                let tile = cfg.outer_tile.unwrap_or_else(|| default_outer_tile(T::ETYPE));
                Some(GemmPlan::derive(&cfg.cache, T::ETYPE, tile, KernelKind::OuterProduct)?)
            }
        };
        let (a, b, c0) = random_problem::<T>(case.m, case.n, case.k, case.seed);
        Ok(Prepared {
            a,
            b,
            c0,
            alpha: T::Acc::from_f64(cfg.alpha),
            beta: T::Acc::from_f64(cfg.beta),
            variant: case.variant,
            plan,
            out: None,
        })
    }

    fn measure(&mut self) -> Result<f64> {
        let mut c = self.c0.clone();
        let start = Instant::now();
        match (self.variant, &self.plan) {
            (Variant::Naive, _) => c = naive_gemm(self.alpha, &self.a, &self.b, self.beta, &c)?,
            (Variant::Tiling, Some(plan)) => {
                gemm_tiled(self.alpha, &self.a, &self.b, self.beta, &mut c, plan)?;
            }
            (_, Some(plan)) => {
                gemm(self.alpha, &self.a, &self.b, self.beta, &mut c, plan)?;
            }
            (_, None) => unreachable!("blocked variants always carry a plan"),
        }
        let ns = start.elapsed().as_nanos() as f64;
        self.out = Some(c);
        Ok(ns)
    }

    fn checksum(&self) -> u64 {
        self.out.as_ref().map(checksum).unwrap_or(0)
    }

    fn compare(&self, other: &Self) -> Result<Option<(f64, f64)>> {
        let (Some(x), Some(y)) = (&self.out, &other.out) else {
            return Ok(None);
        };
        let diff = max_abs_diff(x, y)?;
        let bound = if T::ETYPE.is_integer() {
            0.0
        } else {
            float_bound(
                self.a.cols(),
                &self.a,
                &self.b,
                self.alpha.to_f64(),
                self.beta.to_f64(),
                &self.c0,
            )
        };
        Ok(if diff > bound { Some((diff, bound)) } else { None })
    }
}

enum AnyPrepared {
    F32(Prepared<f32>),
    F64(Prepared<f64>),
    I16(Prepared<i16>),
    I8(Prepared<i8>),
}

macro_rules! dispatch {
    ($value:expr, $p:ident => $body:expr) => {
        match $value {
            AnyPrepared::F32($p) => $body,
            AnyPrepared::F64($p) => $body,
            AnyPrepared::I16($p) => $body,
            AnyPrepared::I8($p) => $body,
        }
    };
}

impl AnyPrepared {
    fn new(case: &BenchCase, cfg: &BenchConfig) -> Result<Self> {
        Ok(match case.etype {
            ElementType::F32 => AnyPrepared::F32(Prepared::new(case, cfg)?),
            ElementType::F64 => AnyPrepared::F64(Prepared::new(case, cfg)?),
            ElementType::I16ToI32 => AnyPrepared::I16(Prepared::new(case, cfg)?),
            ElementType::I8ToI32 => AnyPrepared::I8(Prepared::new(case, cfg)?),
        })
    }

    fn measure(&mut self) -> Result<f64> {
        dispatch!(self, p => p.measure())
    }

    fn checksum(&self) -> u64 {
        dispatch!(self, p => p.checksum())
    }

    fn compare(&self, other: &Self) -> Result<Option<(f64, f64)>> {
        match (self, other) {
            (AnyPrepared::F32(x), AnyPrepared::F32(y)) => x.compare(y),
            (AnyPrepared::F64(x), AnyPrepared::F64(y)) => x.compare(y),
            (AnyPrepared::I16(x), AnyPrepared::I16(y)) => x.compare(y),
            (AnyPrepared::I8(x), AnyPrepared::I8(y)) => x.compare(y),
            _ => Ok(None),
        }
    }
}

/// Measures every case `repeats` times in seeded shuffled rounds and
/// cross-checks the outputs of variants run on the same inputs.
///
/// `shuffle_seed` drives only the round order.
pub fn run_bench(cases: &[BenchCase], cfg: &BenchConfig, shuffle_seed: u64) -> Result<BenchReport> {
    for case in cases {
        case.validate()?;
    }
    let mut prepared = cases
        .iter()
        .map(|c| AnyPrepared::new(c, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let rounds = cases.iter().map(|c| c.repeats).max().unwrap_or(0);
    let mut samples = vec![Vec::new(); cases.len()];
    let mut log = Vec::new();

    if cfg.warmup {
        for p in prepared.iter_mut() {
            p.measure()?;
        }
    }
    for round in 0..rounds {
        let mut order: Vec<usize> = (0..cases.len()).filter(|&i| cases[i].repeats > round).collect();
        order.shuffle(&mut rng);
        for i in order {
            samples[i].push(prepared[i].measure()?);
            log.push(i);
        }
    }

    let mut mismatches = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let reference = cases[..i].iter().position(|o| {
            (o.m, o.n, o.k, o.etype, o.seed) == (case.m, case.n, case.k, case.etype, case.seed)
        });
        if let Some(r) = reference {
            if let Some((diff, bound)) = prepared[i].compare(&prepared[r])? {
                mismatches.push(Mismatch {
                    label: case.variant.label().to_string(),
                    reference: cases[r].variant.label().to_string(),
                    m: case.m,
                    n: case.n,
                    k: case.k,
                    etype: case.etype,
                    max_abs_diff: diff,
                    bound,
                });
            }
        }
    }

    let results = cases
        .iter()
        .zip(samples)
        .zip(&prepared)
        .map(|((case, s), p)| {
            let st = summarize(&s);
            BenchResult {
                label: case.variant.label().to_string(),
                m: case.m,
                n: case.n,
                k: case.k,
                etype: case.etype,
                median_ns: st.median,
                mean_ns: st.mean,
                ci95_low_ns: st.ci95_low,
                ci95_high_ns: st.ci95_high,
                gflops: gflops(case.m, case.n, case.k, st.median),
                checksum: p.checksum(),
                samples: s,
            }
        })
        .collect();
    Ok(BenchReport {
        results,
        log,
        mismatches,
    })
}

/// One row of the emitted CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub label: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub etype: String,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub ci95_low_ns: f64,
    pub ci95_high_ns: f64,
    pub gflops: f64,
}

impl From<&BenchResult> for CsvRow {
    fn from(r: &BenchResult) -> Self {
        CsvRow {
            label: r.label.clone(),
            m: r.m,
            n: r.n,
            k: r.k,
            etype: r.etype.name().to_string(),
            median_ns: r.median_ns,
            mean_ns: r.mean_ns,
            ci95_low_ns: r.ci95_low_ns,
            ci95_high_ns: r.ci95_high_ns,
            gflops: r.gflops,
        }
    }
}

pub const CSV_HEADER: &str = "label,m,n,k,etype,median_ns,mean_ns,ci95_low_ns,ci95_high_ns,gflops";

pub fn emit_csv(results: &[BenchResult]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in results {
        w.serialize(CsvRow::from(r)).expect("writing to memory");
    }
    let body = String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 output");
    format!("{CSV_HEADER}\n{body}")
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rd
        .headers()
        .map_err(|e| Error::InvalidArgument(format!("bad CSV header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected CSV header `{header}`")));
    }
    rd.deserialize()
        .map(|row| row.map_err(|e| Error::InvalidArgument(format!("bad CSV row: {e}"))))
        .collect()
}

/// Aligned table of medians and speedups over the `naive` result with the
/// same dims and element type.
pub fn format_summary(results: &[BenchResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>6} {:>6} {:>6} {:>5} {:>14} {:>10} {:>9}",
        "variant", "m", "n", "k", "type", "median_ms", "GFLOP/s", "speedup"
    );
    for r in results {
        let naive = results
            .iter()
            .find(|o| o.label == Variant::Naive.label() && (o.m, o.n, o.k, o.etype) == (r.m, r.n, r.k, r.etype));
        let speedup = naive
            .map(|b| format!("{:.2}x", b.median_ns / r.median_ns.max(f64::MIN_POSITIVE)))
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>6} {:>6} {:>5} {:>14.3} {:>10.3} {:>9}",
            r.label,
            r.m,
            r.n,
            r.k,
            r.etype.name(),
            r.median_ns / 1e6,
            r.gflops,
            speedup
        );
    }
    out
}

/// Settings for [`verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub alpha: f64,
    pub beta: f64,
    pub cache: CacheConfig,
    pub tile: TileParams,
    pub kernel: KernelKind,
    pub seed: u64,
    /// Relative Frobenius tolerance for floats; integers must match exactly.
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            alpha: 1.0,
            beta: 1.0,
            cache: CacheConfig::default(),
            tile: default_tile(),
            kernel: KernelKind::Generic,
            seed: 0,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub rel_error: f64,
    pub max_abs_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub etype: ElementType,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyRow> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in &self.rows {
            writeln!(
                f,
                "{} {:<16} {} rel_error={:.3e} max_abs_diff={:.3e}",
                if r.passed { "PASS" } else { "FAIL" },
                format!("{}x{}x{}", r.m, r.n, r.k),
                self.etype,
                r.rel_error,
                r.max_abs_diff
            )?;
        }
        Ok(())
    }
}

fn verify_typed<T: Sample>(sizes: &[(usize, usize, usize)], cfg: &VerifyConfig) -> Result<VerifyReport> {
    let plan = GemmPlan::derive(&cfg.cache, T::ETYPE, cfg.tile, cfg.kernel)?;
    let alpha = T::Acc::from_f64(cfg.alpha);
    let beta = T::Acc::from_f64(cfg.beta);
    let mut rows = Vec::new();
    for &(m, n, k) in sizes {
        let (a, b, c0) = random_problem::<T>(m, n, k, cfg.seed);
        let expected = naive_gemm(alpha, &a, &b, beta, &c0)?;
        let mut c = c0.clone();
        gemm(alpha, &a, &b, beta, &mut c, &plan)?;
        let rel_error = frobenius_rel_error(&c, &expected)?;
        let diff = max_abs_diff(&c, &expected)?;
        let passed = if T::ETYPE.is_integer() {
            c == expected
        } else {
            rel_error <= cfg.tolerance
        };
        rows.push(VerifyRow {
            m,
            n,
            k,
            rel_error,
            max_abs_diff: diff,
            passed,
        });
    }
    Ok(VerifyReport { etype: T::ETYPE, rows })
}

/// Runs the blocked, packed `gemm` against the naive oracle on seeded
/// random inputs for each size.
pub fn verify(sizes: &[(usize, usize, usize)], etype: ElementType, cfg: &VerifyConfig) -> Result<VerifyReport> {
    match etype {
        ElementType::F32 => verify_typed::<f32>(sizes, cfg),
        ElementType::F64 => verify_typed::<f64>(sizes, cfg),
        ElementType::I16ToI32 => verify_typed::<i16>(sizes, cfg),
        ElementType::I8ToI32 => verify_typed::<i8>(sizes, cfg),
    }
}

/// Cubes of the given edge lengths.
pub fn cube_sweep(edges: &[usize]) -> Vec<(usize, usize, usize)> {
    edges.iter().map(|&e| (e, e, e)).collect()
}
