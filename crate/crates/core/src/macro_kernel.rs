//! Blocking and packing driver.
//!
//! Loop nest, outermost first:
//!
//! ```text
//! for j in 0..N step nc
//!   for k in 0..K step kc
//!     pack B[k.., j..]                      (kc x nc, kr x nr tiles)
//!     for i in 0..M step mc
//!       pack A[i.., k..]                    (mc x kc, mr x kr tiles)
//!       for jj in 0..nc step nr
//!         for ii in 0..mc step mr
//!           acc = 0
//!           for kk in 0..kc step kr
//!             acc += micro(A tile (ii, kk), B tile (kk, jj))
//!           C tile = (k == 0 ? beta * C tile : C tile) + alpha * acc
//! ```
//!
//! With the generic kernel each micro product lands in a scratch tile that
//! is then added to `acc`; the outer-product kernel assembles its
//! accumulators straight from `acc` and so accumulates in place. Both give
//! the same result up to float reassociation.

use crate::element::{Element, ElementType, Scalar};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, Triangle};
use crate::micro_kernel::{generic_kernel, AccumulatorGrid, MicroShape, OuterWorkspace, TileLayouts};
use crate::packing::{load_matrix_tile, pack_a, pack_b, store_tile, PackedBlock, TileLayout};
use crate::params::{derive_block_params, validate_params, BlockParams, CacheConfig, TileParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Generic,
    OuterProduct,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(KernelKind::Generic),
            "outer" | "outer_product" | "mma" => Ok(KernelKind::OuterProduct),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Everything [`gemm`] needs to know about blocking and the micro kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmPlan {
    etype: ElementType,
    block: BlockParams,
    tile: TileParams,
    grid: AccumulatorGrid,
    kernel: KernelKind,
    layouts: TileLayouts,
}

impl GemmPlan {
    /// Validates block/tile divisibility and, for the outer-product kernel,
    /// grid feasibility.
    pub fn new(
        etype: ElementType,
        block: BlockParams,
        tile: TileParams,
        kernel: KernelKind,
        grid: AccumulatorGrid,
        layouts: TileLayouts,
    ) -> Result<Self> {
        let tile = TileParams::new(tile.mr, tile.kr, tile.nr)?;
        let violations = validate_params(&block, &tile);
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        let shape = MicroShape::new(tile.mr, tile.kr, tile.nr, etype)?;
        if kernel == KernelKind::OuterProduct {
            grid.check(&shape)?;
        }
        Ok(GemmPlan {
            etype,
            block,
            tile,
            grid,
            kernel,
            layouts,
        })
    }

    /// Derives block sizes from `cache` and picks the best feasible grid.
    pub fn derive(
        cache: &CacheConfig,
        etype: ElementType,
        tile: TileParams,
        kernel: KernelKind,
    ) -> Result<Self> {
        let derived = derive_block_params(cache, etype, &tile)?;
        let shape = MicroShape::new(tile.mr, tile.kr, tile.nr, etype)?;
        let grid = match kernel {
            KernelKind::OuterProduct => AccumulatorGrid::fit(&shape)?,
            KernelKind::Generic => AccumulatorGrid::default_for(etype),
        };
        Self::new(etype, derived.block, tile, kernel, grid, TileLayouts::default())
    }

    pub fn etype(&self) -> ElementType {
        self.etype
    }
    pub fn block(&self) -> &BlockParams {
        &self.block
    }
    pub fn tile(&self) -> &TileParams {
        &self.tile
    }
    pub fn grid(&self) -> &AccumulatorGrid {
        &self.grid
    }
    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }
    pub fn layouts(&self) -> &TileLayouts {
        &self.layouts
    }

    pub fn shape(&self) -> MicroShape {
        MicroShape {
            mr: self.tile.mr,
            kr: self.tile.kr,
            nr: self.tile.nr,
            etype: self.etype,
        }
    }

    pub fn with_layouts(mut self, layouts: TileLayouts) -> Self {
        self.layouts = layouts;
        self
    }
}

/// Call counts from one driver invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GemmStats {
    pub pack_a_calls: usize,
    pub pack_b_calls: usize,
    pub micro_calls: usize,
}

/// Runs whichever micro kernel the plan selects, accumulating into `acc`.
struct TileEngine<T: Element> {
    shape: MicroShape,
    grid: AccumulatorGrid,
    kernel: KernelKind,
    layouts: TileLayouts,
    scratch: Vec<T::Acc>,
    outer: OuterWorkspace<T>,
}

impl<T: Element> TileEngine<T> {
    fn new(shape: MicroShape, grid: AccumulatorGrid, kernel: KernelKind, layouts: TileLayouts) -> Self {
        TileEngine {
            shape,
            grid,
            kernel,
            layouts,
            scratch: vec![T::Acc::zero(); shape.mr * shape.nr],
            outer: OuterWorkspace::new(),
        }
    }

    #[inline]
    fn accumulate(&mut self, a: &[T], b: &[T], acc: &mut [T::Acc]) {
        match self.kernel {
            KernelKind::Generic => {
                let s = &self.shape;
                generic_kernel(a, b, s.mr, s.kr, s.nr, &self.layouts, &mut self.scratch);
                for (x, &y) in acc.iter_mut().zip(&self.scratch) {
                    *x = x.plus(y);
                }
            }
            KernelKind::OuterProduct => {
                self.outer.run(a, b, &self.shape, &self.grid, &self.layouts, acc);
            }
        }
    }
}

fn check_gemm_dims<T: Scalar, A: Scalar>(a: &Matrix<T>, b: &Matrix<T>, c: &Matrix<A>) -> Result<()> {
    let (m, k) = a.shape();
    if b.rows() != k || c.rows() != m || c.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "A is {m}x{k}, B is {}x{}, C is {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    Ok(())
}

fn check_plan<T: Element>(plan: &GemmPlan) -> Result<()> {
    if plan.etype != T::ETYPE {
        return Err(Error::ElementTypeMismatch {
            plan: plan.etype.to_string(),
            operands: T::ETYPE.to_string(),
        });
    }
    Ok(())
}

/// Loads the C tile, applies beta (first k-block only) and alpha, stores
/// back the logical part.
#[allow(clippy::too_many_arguments)]
fn update_c_tile<A: Scalar>(
    c: &mut Matrix<A>,
    row: usize,
    col: usize,
    mr: usize,
    nr: usize,
    layout: TileLayout,
    acc: &[A],
    c_tile: &mut [A],
    alpha: A,
    beta: A,
    first_k_block: bool,
) -> Result<()> {
    let lr = mr.min(c.rows() - row);
    let lc = nr.min(c.cols() - col);
    load_matrix_tile(c, row, col, mr, nr, layout, c_tile)?;
    for (cv, &av) in c_tile.iter_mut().zip(acc) {
        let prior = if !first_k_block {
            *cv
        } else if beta == A::zero() {
            A::zero()
        } else {
            beta.times(*cv)
        };
        *cv = prior.plus(alpha.times(av));
    }
    store_tile(c, row, col, c_tile, mr, nr, layout, lr, lc)
}

/// `C <- alpha * A * B + beta * C` through blocking, packing and the
/// plan's micro kernel. A zero `beta` discards the prior contents of `C`.
pub fn gemm<T: Element>(
    alpha: T::Acc,
    a: &Matrix<T>,
    b: &Matrix<T>,
    beta: T::Acc,
    c: &mut Matrix<T::Acc>,
    plan: &GemmPlan,
) -> Result<GemmStats> {
    check_plan::<T>(plan)?;
    check_gemm_dims(a, b, c)?;
    let (m, k_dim) = a.shape();
    let n = b.cols();
    let mut stats = GemmStats::default();
    if m == 0 || n == 0 {
        return Ok(stats);
    }
    if k_dim == 0 {
        scale_in_place(c, beta);
        return Ok(stats);
    }
    let TileParams { mr, kr, nr } = plan.tile;
    let BlockParams { mc, kc, nc, .. } = plan.block;
    let layouts = plan.layouts;
    let mut engine = TileEngine::<T>::new(plan.shape(), plan.grid, plan.kernel, layouts);
    let mut acc = vec![T::Acc::zero(); mr * nr];
    let mut c_tile = vec![T::Acc::zero(); mr * nr];

    for j in (0..n).step_by(nc) {
        for k in (0..k_dim).step_by(kc) {
            let b_pack = pack_b(b, k, j, kc, nc, kr, nr, layouts.b)?;
            stats.pack_b_calls += 1;
            for i in (0..m).step_by(mc) {
                let a_pack = pack_a(a, i, k, mc, kc, mr, kr, layouts.a)?;
                stats.pack_a_calls += 1;
                for tc in 0..b_pack.tiles_across() {
                    for tr in 0..a_pack.tiles_down() {
                        acc.fill(T::Acc::zero());
                        for t in 0..a_pack.tiles_across() {
                            engine.accumulate(a_pack.tile(tr, t), b_pack.tile(t, tc), &mut acc);
                            stats.micro_calls += 1;
                        }
                        let (row, col) = (i + tr * mr, j + tc * nr);
                        update_c_tile(c, row, col, mr, nr, layouts.c, &acc, &mut c_tile, alpha, beta, k == 0)?;
                    }
                }
            }
        }
    }
    Ok(stats)
}

fn scale_in_place<A: Scalar>(c: &mut Matrix<A>, beta: A) {
    for col in 0..c.cols() {
        for row in 0..c.rows() {
            let v = if beta == A::zero() {
                A::zero()
            } else {
                beta.times(c.get(row, col))
            };
            c.set(row, col, v);
        }
    }
}

fn gather_tile<T: Scalar>(
    src: &Matrix<T>,
    row: usize,
    col: usize,
    rows: usize,
    cols: usize,
    layout: TileLayout,
    out: &mut [T],
) {
    out.fill(T::zero());
    let lr = rows.min(src.rows() - row);
    let lc = cols.min(src.cols() - col);
    for c in 0..lc {
        for r in 0..lr {
            out[layout.index(r, c, rows, cols)] = src.get(row + r, col + c);
        }
    }
}

/// Register tiling without cache blocking or packing: loops of step
/// `mr`/`nr`/`kr` call the micro kernel on tiles gathered straight from
/// the operands.
pub fn gemm_tiled<T: Element>(
    alpha: T::Acc,
    a: &Matrix<T>,
    b: &Matrix<T>,
    beta: T::Acc,
    c: &mut Matrix<T::Acc>,
    plan: &GemmPlan,
) -> Result<GemmStats> {
    check_plan::<T>(plan)?;
    check_gemm_dims(a, b, c)?;
    let (m, k_dim) = a.shape();
    let n = b.cols();
    let mut stats = GemmStats::default();
    if m == 0 || n == 0 {
        return Ok(stats);
    }
    if k_dim == 0 {
        scale_in_place(c, beta);
        return Ok(stats);
    }
    let TileParams { mr, kr, nr } = plan.tile;
    let layouts = plan.layouts;
    let mut engine = TileEngine::<T>::new(plan.shape(), plan.grid, plan.kernel, layouts);
    let mut acc = vec![T::Acc::zero(); mr * nr];
    let mut c_tile = vec![T::Acc::zero(); mr * nr];
    let mut a_tile = vec![T::zero(); mr * kr];
    let mut b_tile = vec![T::zero(); kr * nr];

    for j in (0..n).step_by(nr) {
        for i in (0..m).step_by(mr) {
            acc.fill(T::Acc::zero());
            for k in (0..k_dim).step_by(kr) {
                gather_tile(a, i, k, mr, kr, layouts.a, &mut a_tile);
                gather_tile(b, k, j, kr, nr, layouts.b, &mut b_tile);
                engine.accumulate(&a_tile, &b_tile, &mut acc);
                stats.micro_calls += 1;
            }
            update_c_tile(c, i, j, mr, nr, layouts.c, &acc, &mut c_tile, alpha, beta, true)?;
        }
    }
    Ok(stats)
}

/// Packs the `rows x kc` block of an N x K operand at `(row, k)` as the
/// `kc x rows` block of its transpose, tiled `kr x tile`.
#[allow(clippy::too_many_arguments)]
fn pack_transposed<T: Scalar>(
    src: &Matrix<T>,
    row: usize,
    k: usize,
    rows: usize,
    kc: usize,
    tile: usize,
    kr: usize,
    layout: TileLayout,
) -> Result<PackedBlock<T>> {
    Ok(pack_a(src, row, k, rows, kc, tile, kr, layout.flipped())?.transposed())
}

/// Updates one triangle of `C <- alpha * A * B^T + alpha * B * A^T + beta * C`
/// for N x K operands `a` and `b`. The other triangle is never written.
///
/// Each k-block packs A and B normally (row blocks) and transposed (column
/// blocks); each C tile takes two micro products, `A_i * B_j^T` and
/// `B_i * A_j^T`.
#[allow(clippy::too_many_arguments)]
pub fn syr2k<T: Element>(
    alpha: T::Acc,
    a: &Matrix<T>,
    b: &Matrix<T>,
    beta: T::Acc,
    c: &mut Matrix<T::Acc>,
    half: Triangle,
    plan: &GemmPlan,
) -> Result<GemmStats> {
    check_plan::<T>(plan)?;
    if c.rows() != c.cols() {
        return Err(Error::DimensionMismatch(format!(
            "C must be square, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let (n, k_dim) = a.shape();
    if b.shape() != (n, k_dim) || c.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {n}x{k_dim}, B is {}x{}, C is {}x{}",
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let mut stats = GemmStats::default();
    if n == 0 {
        return Ok(stats);
    }
    let TileParams { mr, kr, nr } = plan.tile;
    let BlockParams { mc, kc, nc, .. } = plan.block;
    let layouts = plan.layouts;
    let mut engine = TileEngine::<T>::new(plan.shape(), plan.grid, plan.kernel, layouts);
    let mut acc = vec![T::Acc::zero(); mr * nr];

    // Any element of rows lo..hi x cols lo..hi inside the triangle?
    let touches = |r0: usize, r1: usize, c0: usize, c1: usize| match half {
        Triangle::Lower => r1 > c0,
        Triangle::Upper => r0 < c1,
    };

    if k_dim == 0 {
        for col in 0..n {
            for row in 0..n {
                if half.contains(row, col) {
                    let v = if beta == T::Acc::zero() {
                        T::Acc::zero()
                    } else {
                        beta.times(c.get(row, col))
                    };
                    c.set(row, col, v);
                }
            }
        }
        return Ok(stats);
    }

    for j in (0..n).step_by(nc) {
        let j_hi = (j + nc).min(n);
        for k in (0..k_dim).step_by(kc) {
            let bt_pack = pack_transposed(b, j, k, nc, kc, nr, kr, layouts.b)?;
            let at_pack = pack_transposed(a, j, k, nc, kc, nr, kr, layouts.b)?;
            stats.pack_b_calls += 2;
            for i in (0..n).step_by(mc) {
                let i_hi = (i + mc).min(n);
                if !touches(i, i_hi, j, j_hi) {
                    continue;
                }
                let a_pack = pack_a(a, i, k, mc, kc, mr, kr, layouts.a)?;
                let b_pack = pack_a(b, i, k, mc, kc, mr, kr, layouts.a)?;
                stats.pack_a_calls += 2;
                for tc in 0..bt_pack.tiles_across() {
                    let col = j + tc * nr;
                    let col_hi = (col + nr).min(n);
                    for tr in 0..a_pack.tiles_down() {
                        let row = i + tr * mr;
                        let row_hi = (row + mr).min(n);
                        if !touches(row, row_hi, col, col_hi) {
                            continue;
                        }
                        acc.fill(T::Acc::zero());
                        for t in 0..a_pack.tiles_across() {
                            engine.accumulate(a_pack.tile(tr, t), bt_pack.tile(t, tc), &mut acc);
                            engine.accumulate(b_pack.tile(tr, t), at_pack.tile(t, tc), &mut acc);
                            stats.micro_calls += 2;
                        }
                        let lr = row_hi - row;
                        let lc = col_hi - col;
                        for cc in 0..lc {
                            for r in 0..lr {
                                let (gr, gc) = (row + r, col + cc);
                                if !half.contains(gr, gc) {
                                    continue;
                                }
                                let av = acc[layouts.c.index(r, cc, mr, nr)];
                                let cv = c.get(gr, gc);
                                let prior = if k != 0 {
                                    cv
                                } else if beta == T::Acc::zero() {
                                    T::Acc::zero()
                                } else {
                                    beta.times(cv)
                                };
                                c.set(gr, gc, prior.plus(alpha.times(av)));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(stats)
}
