//! Python bindings: block-size derivation, blocked GEMM and SYR2K, the
//! outer-product schedule model and the benchmark harness.
//!
//! Matrices cross the boundary as lists of rows of floats; integer element
//! types round each value to the nearest integer on the way in.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tilepack::bench::{self, BenchCase, BenchConfig, Variant, VerifyConfig};
use tilepack::{
    AccumulatorGrid, CacheConfig, Element, ElementType, GemmPlan, KernelKind, Matrix, MicroShape, Scalar,
    StorageOrder, TileParams, Triangle,
};

fn err(e: tilepack::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = tilepack::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

type Rows = Vec<Vec<f64>>;

fn to_matrix<T: Scalar>(rows: &Rows) -> PyResult<Matrix<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(Matrix::from_fn(rows.len(), cols, StorageOrder::ColumnMajor, |r, c| {
        T::from_f64(rows[r][c])
    }))
}

fn to_rows<T: Scalar>(m: &Matrix<T>) -> Rows {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c).to_f64()).collect())
        .collect()
}

#[pyclass(name = "CacheConfig", module = "pytilepack", frozen)]
struct PyCacheConfig {
    inner: CacheConfig,
}

#[pymethods]
impl PyCacheConfig {
    #[new]
    #[pyo3(signature = (l1=32768, l2=524288, l3=10485760, vl=4))]
    fn new(l1: usize, l2: usize, l3: usize, vl: usize) -> PyResult<Self> {
        Ok(PyCacheConfig {
            inner: CacheConfig::new(l1, l2, l3, vl).map_err(err)?,
        })
    }

    #[getter]
    fn l1(&self) -> usize {
        self.inner.l1_bytes
    }
    #[getter]
    fn l2(&self) -> usize {
        self.inner.l2_bytes
    }
    #[getter]
    fn l3(&self) -> usize {
        self.inner.l3_bytes
    }
    #[getter]
    fn vl(&self) -> usize {
        self.inner.vl
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("CacheConfig(l1={}, l2={}, l3={}, vl={})", c.l1_bytes, c.l2_bytes, c.l3_bytes, c.vl)
    }
}

/// Blocking, tile and kernel choice for one element type.
#[pyclass(name = "GemmPlan", module = "pytilepack", frozen)]
struct PyGemmPlan {
    inner: GemmPlan,
    clamped: Vec<String>,
}

#[pymethods]
impl PyGemmPlan {
    /// Derives block sizes from the cache configuration.
    #[new]
    #[pyo3(signature = (dtype="f32", mr=16, kr=64, nr=4, kernel="generic", cache=None))]
    fn new(
        dtype: &str,
        mr: usize,
        kr: usize,
        nr: usize,
        kernel: &str,
        cache: Option<PyRef<'_, PyCacheConfig>>,
    ) -> PyResult<Self> {
        let etype: ElementType = parse(dtype)?;
        let kernel: KernelKind = parse(kernel)?;
        let cache = cache.map(|c| c.inner).unwrap_or_default();
        let tile = TileParams::new(mr, kr, nr).map_err(err)?;
        let derived = tilepack::derive_block_params(&cache, etype, &tile).map_err(err)?;
        let inner = GemmPlan::derive(&cache, etype, tile, kernel).map_err(err)?;
        Ok(PyGemmPlan {
            inner,
            clamped: derived.clamped.iter().map(ToString::to_string).collect(),
        })
    }

    #[getter]
    fn dtype(&self) -> &'static str {
        self.inner.etype().name()
    }
    #[getter]
    fn mc(&self) -> usize {
        self.inner.block().mc
    }
    #[getter]
    fn kc(&self) -> usize {
        self.inner.block().kc
    }
    #[getter]
    fn nc(&self) -> usize {
        self.inner.block().nc
    }
    #[getter]
    fn kl(&self) -> usize {
        self.inner.block().kl
    }
    #[getter]
    fn tile(&self) -> (usize, usize, usize) {
        let t = self.inner.tile();
        (t.mr, t.kr, t.nr)
    }
    #[getter]
    fn grid(&self) -> (usize, usize) {
        let g = self.inner.grid();
        (g.v_accs, g.h_accs)
    }
    /// Block dimensions that had to be raised to one tile.
    #[getter]
    fn clamped(&self) -> Vec<String> {
        self.clamped.clone()
    }

    fn __repr__(&self) -> String {
        let b = self.inner.block();
        let t = self.inner.tile();
        format!(
            "GemmPlan(dtype={}, mc={}, kc={}, nc={}, mr={}, kr={}, nr={}, kernel={:?})",
            self.dtype(),
            b.mc,
            b.kc,
            b.nc,
            t.mr,
            t.kr,
            t.nr,
            self.inner.kernel()
        )
    }
}

fn gemm_typed<T: Element>(plan: &GemmPlan, alpha: f64, a: &Rows, b: &Rows, beta: f64, c: &Rows) -> PyResult<Rows> {
    let a = to_matrix::<T>(a)?;
    let b = to_matrix::<T>(b)?;
    let mut c = to_matrix::<T::Acc>(c)?;
    tilepack::gemm(T::Acc::from_f64(alpha), &a, &b, T::Acc::from_f64(beta), &mut c, plan).map_err(err)?;
    Ok(to_rows(&c))
}

fn naive_typed<T: Element>(alpha: f64, a: &Rows, b: &Rows, beta: f64, c: &Rows) -> PyResult<Rows> {
    let a = to_matrix::<T>(a)?;
    let b = to_matrix::<T>(b)?;
    let c = to_matrix::<T::Acc>(c)?;
    let out = tilepack::naive_gemm(T::Acc::from_f64(alpha), &a, &b, T::Acc::from_f64(beta), &c).map_err(err)?;
    Ok(to_rows(&out))
}

fn syr2k_typed<T: Element>(
    plan: &GemmPlan,
    alpha: f64,
    a: &Rows,
    b: &Rows,
    beta: f64,
    c: &Rows,
    half: Triangle,
) -> PyResult<Rows> {
    let a = to_matrix::<T>(a)?;
    let b = to_matrix::<T>(b)?;
    let mut c = to_matrix::<T::Acc>(c)?;
    tilepack::syr2k(T::Acc::from_f64(alpha), &a, &b, T::Acc::from_f64(beta), &mut c, half, plan).map_err(err)?;
    Ok(to_rows(&c))
}

fn default_c(c: Option<Rows>, m: usize, n: usize) -> Rows {
    c.unwrap_or_else(|| vec![vec![0.0; n]; m])
}

/// `alpha * A * B + beta * C` with the blocked, packed driver.
#[pyfunction]
#[pyo3(signature = (plan, a, b, c=None, alpha=1.0, beta=0.0))]
fn gemm(plan: PyRef<'_, PyGemmPlan>, a: Rows, b: Rows, c: Option<Rows>, alpha: f64, beta: f64) -> PyResult<Rows> {
    let c = default_c(c, a.len(), b.first().map_or(0, Vec::len));
    let p = &plan.inner;
    match p.etype() {
        ElementType::F32 => gemm_typed::<f32>(p, alpha, &a, &b, beta, &c),
        ElementType::F64 => gemm_typed::<f64>(p, alpha, &a, &b, beta, &c),
        ElementType::I16ToI32 => gemm_typed::<i16>(p, alpha, &a, &b, beta, &c),
        ElementType::I8ToI32 => gemm_typed::<i8>(p, alpha, &a, &b, beta, &c),
    }
}

/// Triple-loop reference product.
#[pyfunction]
#[pyo3(signature = (a, b, c=None, alpha=1.0, beta=0.0, dtype="f32"))]
fn naive_gemm(a: Rows, b: Rows, c: Option<Rows>, alpha: f64, beta: f64, dtype: &str) -> PyResult<Rows> {
    let c = default_c(c, a.len(), b.first().map_or(0, Vec::len));
    match parse::<ElementType>(dtype)? {
        ElementType::F32 => naive_typed::<f32>(alpha, &a, &b, beta, &c),
        ElementType::F64 => naive_typed::<f64>(alpha, &a, &b, beta, &c),
        ElementType::I16ToI32 => naive_typed::<i16>(alpha, &a, &b, beta, &c),
        ElementType::I8ToI32 => naive_typed::<i8>(alpha, &a, &b, beta, &c),
    }
}

/// Updates one triangle of `C` with `alpha (A B^T + B A^T) + beta C`.
#[pyfunction]
#[pyo3(signature = (plan, a, b, c=None, alpha=1.0, beta=0.0, half="lower"))]
fn syr2k(
    plan: PyRef<'_, PyGemmPlan>,
    a: Rows,
    b: Rows,
    c: Option<Rows>,
    alpha: f64,
    beta: f64,
    half: &str,
) -> PyResult<Rows> {
    let half = match half {
        "lower" => Triangle::Lower,
        "upper" => Triangle::Upper,
        other => return Err(PyValueError::new_err(format!("unknown triangle `{other}`"))),
    };
    let c = default_c(c, a.len(), a.len());
    let p = &plan.inner;
    match p.etype() {
        ElementType::F32 => syr2k_typed::<f32>(p, alpha, &a, &b, beta, &c, half),
        ElementType::F64 => syr2k_typed::<f64>(p, alpha, &a, &b, beta, &c, half),
        ElementType::I16ToI32 => syr2k_typed::<i16>(p, alpha, &a, &b, beta, &c, half),
        ElementType::I8ToI32 => syr2k_typed::<i8>(p, alpha, &a, &b, beta, &c, half),
    }
}

/// Operand-register demand, issue count, cycle bound and any hardware
/// violations for an outer-product micro kernel.
#[pyfunction]
#[pyo3(signature = (mr, kr, nr, dtype="f32", v_accs=2, h_accs=4))]
fn schedule<'py>(
    py: Python<'py>,
    mr: usize,
    kr: usize,
    nr: usize,
    dtype: &str,
    v_accs: usize,
    h_accs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let etype: ElementType = parse(dtype)?;
    let shape = MicroShape::new(mr, kr, nr, etype).map_err(err)?;
    let grid = AccumulatorGrid::new(v_accs, h_accs, etype);
    let d = PyDict::new(py);
    d.set_item("operand_registers", grid.operand_register_demand(&shape))?;
    match tilepack::build_schedule(&shape, &grid) {
        Ok(s) => {
            let report = tilepack::validate_schedule(&s, &grid);
            d.set_item("feasible", true)?;
            d.set_item("issues", s.issues.len())?;
            d.set_item("span", s.span())?;
            d.set_item("min_cycles", report.min_cycles)?;
            let v: Vec<String> = report.violations.iter().map(|v| format!("{}: {}", v.constraint, v.detail)).collect();
            d.set_item("violations", v)?;
        }
        Err(e) => {
            d.set_item("feasible", false)?;
            d.set_item("error", e.to_string())?;
        }
    }
    Ok(d)
}

/// Blocked GEMM against the oracle over cubes of the given edges.
#[pyfunction]
#[pyo3(signature = (edges, dtype="f32", kernel="generic", mr=None, kr=None, nr=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    edges: Vec<usize>,
    dtype: &str,
    kernel: &str,
    mr: Option<usize>,
    kr: Option<usize>,
    nr: Option<usize>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let etype: ElementType = parse(dtype)?;
    let kernel: KernelKind = parse(kernel)?;
    let base = match kernel {
        KernelKind::Generic => bench::default_tile(),
        KernelKind::OuterProduct => bench::default_outer_tile(etype),
    };
    let cfg = VerifyConfig {
        tile: TileParams::new(mr.unwrap_or(base.mr), kr.unwrap_or(base.kr), nr.unwrap_or(base.nr)).map_err(err)?,
        kernel,
        seed,
        ..VerifyConfig::default()
    };
    let report = bench::verify(&bench::cube_sweep(&edges), etype, &cfg).map_err(err)?;
    report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("m", r.m)?;
            d.set_item("n", r.n)?;
            d.set_item("k", r.k)?;
            d.set_item("rel_error", r.rel_error)?;
            d.set_item("max_abs_diff", r.max_abs_diff)?;
            d.set_item("passed", r.passed)?;
            Ok(d)
        })
        .collect()
}

/// Runs the benchmark protocol and returns its CSV text.
#[pyfunction]
#[pyo3(signature = (m, n, k, dtype="f32", variants=None, repeats=bench::DEFAULT_REPEATS, seed=0))]
fn run_bench(
    m: usize,
    n: usize,
    k: usize,
    dtype: &str,
    variants: Option<Vec<String>>,
    repeats: usize,
    seed: u64,
) -> PyResult<String> {
    let etype: ElementType = parse(dtype)?;
    let variants: Vec<Variant> = match variants {
        Some(v) => v.iter().map(|s| parse(s)).collect::<PyResult<_>>()?,
        None => Variant::ALL.to_vec(),
    };
    let cases: Vec<BenchCase> = variants
        .into_iter()
        .map(|variant| BenchCase {
            variant,
            m,
            n,
            k,
            etype,
            repeats,
            seed,
        })
        .collect();
    let report = bench::run_bench(&cases, &BenchConfig::default(), seed).map_err(err)?;
    if !report.passed() {
        let msg: Vec<String> = report.mismatches.iter().map(ToString::to_string).collect();
        return Err(PyValueError::new_err(msg.join("\n")));
    }
    Ok(bench::emit_csv(&report.results))
}

#[pymodule]
fn pytilepack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCacheConfig>()?;
    m.add_class::<PyGemmPlan>()?;
    m.add_function(wrap_pyfunction!(gemm, m)?)?;
    m.add_function(wrap_pyfunction!(naive_gemm, m)?)?;
    m.add_function(wrap_pyfunction!(syr2k, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
