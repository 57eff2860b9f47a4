//! Fixed-shape tile multiply `C(mr x nr) = A(mr x kr) * B(kr x nr)`.
//!
//! Two lowerings share one contract:
//!
//! * [`micro_multiply_generic`] unrolls the product into per-element dot
//!   products and runs on anything.
//! * [`micro_multiply_outer`] models a matrix engine with outer-product
//!   accumulators. The C tile is split into a `v_accs x h_accs` grid of
//!   accumulators (4x4 results for 32-bit accumulation, 4x2 for `f64`).
//!   All operand strips are extracted first, then every accumulator
//!   advances through `k` together, taking a rank-`n` update per step.
//!   Tiles larger than the grid are processed one grid-sized section at a
//!   time.
//!
//! The register file and issue ports are not real here. They are modeled
//! by [`MicroSchedule`] and checked by [`validate_schedule`]: at most 8
//! accumulators, at most 32 operand registers, 2 issues per cycle, 4
//! cycles between issues to one accumulator, one assemble and one
//! disassemble per accumulator.

use std::collections::{BTreeMap, HashMap};

use crate::element::{Element, ElementType, Scalar};
use crate::error::{Error, HwConstraint, Result};
use crate::packing::TileLayout;

pub const MAX_ACCUMULATORS: usize = 8;
pub const OPERAND_REGISTERS: usize = 32;
pub const ISSUE_WIDTH: usize = 2;
pub const ISSUE_LATENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MicroShape {
    pub mr: usize,
    pub kr: usize,
    pub nr: usize,
    pub etype: ElementType,
}

impl MicroShape {
    pub fn new(mr: usize, kr: usize, nr: usize, etype: ElementType) -> Result<Self> {
        if mr == 0 || kr == 0 || nr == 0 {
            return Err(Error::IncompatibleShape(format!(
                "tile dimensions must be positive, got {mr}x{kr}x{nr}"
            )));
        }
        let rank = etype.rank();
        if !kr.is_multiple_of(rank) {
            return Err(Error::IncompatibleShape(format!(
                "kr={kr} is not a multiple of the {etype} update rank {rank}"
            )));
        }
        Ok(MicroShape { mr, kr, nr, etype })
    }

    /// Number of rank-`n` update steps along `k`.
    pub fn k_steps(&self) -> usize {
        self.kr / self.etype.rank()
    }
}

/// Intra-tile layouts of the A, B and C tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileLayouts {
    pub a: TileLayout,
    pub b: TileLayout,
    pub c: TileLayout,
}

impl Default for TileLayouts {
    /// Column-major A, row-major B, row-major C.
    fn default() -> Self {
        TileLayouts {
            a: TileLayout::ColMajor,
            b: TileLayout::RowMajor,
            c: TileLayout::RowMajor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccumulatorGrid {
    pub v_accs: usize,
    pub h_accs: usize,
    pub acc_rows: usize,
    pub acc_cols: usize,
}

impl AccumulatorGrid {
    /// A 2x4 arrangement of the element type's accumulator shape.
    pub fn default_for(etype: ElementType) -> Self {
        Self::new(2, 4, etype)
    }

    pub fn new(v_accs: usize, h_accs: usize, etype: ElementType) -> Self {
        let (acc_rows, acc_cols) = etype.acc_shape();
        AccumulatorGrid {
            v_accs,
            h_accs,
            acc_rows,
            acc_cols,
        }
    }

    pub fn accumulators(&self) -> usize {
        self.v_accs * self.h_accs
    }

    pub fn section_rows(&self) -> usize {
        self.v_accs * self.acc_rows
    }

    pub fn section_cols(&self) -> usize {
        self.h_accs * self.acc_cols
    }

    /// Accumulator rows/columns actually used by a tile of `shape`.
    fn used(&self, shape: &MicroShape) -> (usize, usize) {
        (
            self.v_accs.min(shape.mr / self.acc_rows).max(1),
            self.h_accs.min(shape.nr / self.acc_cols).max(1),
        )
    }

    /// Operand strips live at once: `(v + h) * kr / rank`, counted over the
    /// accumulators a tile of `shape` actually occupies.
    pub fn operand_register_demand(&self, shape: &MicroShape) -> usize {
        let (v, h) = self.used(shape);
        (v + h) * shape.k_steps()
    }

    /// Checks the grid against the accumulator and register limits and the
    /// tile against the accumulator shape.
    pub fn check(&self, shape: &MicroShape) -> Result<()> {
        if self.v_accs == 0 || self.h_accs == 0 {
            return Err(Error::InvalidArgument("accumulator grid must be non-empty".into()));
        }
        if (self.acc_rows, self.acc_cols) != shape.etype.acc_shape() {
            return Err(Error::IncompatibleShape(format!(
                "{} accumulators are {:?}, grid uses {}x{}",
                shape.etype,
                shape.etype.acc_shape(),
                self.acc_rows,
                self.acc_cols
            )));
        }
        if self.accumulators() > MAX_ACCUMULATORS {
            return Err(Error::InfeasibleGrid {
                constraint: HwConstraint::AccumulatorCount,
                detail: format!(
                    "{}x{} grid needs {} accumulators, only {MAX_ACCUMULATORS} exist",
                    self.v_accs,
                    self.h_accs,
                    self.accumulators()
                ),
            });
        }
        if !shape.mr.is_multiple_of(self.acc_rows) || !shape.nr.is_multiple_of(self.acc_cols) {
            return Err(Error::IncompatibleShape(format!(
                "{}x{} tile is not a whole number of {}x{} accumulators",
                shape.mr, shape.nr, self.acc_rows, self.acc_cols
            )));
        }
        let demand = self.operand_register_demand(shape);
        if demand > OPERAND_REGISTERS {
            return Err(Error::InfeasibleGrid {
                constraint: HwConstraint::OperandRegisters,
                detail: format!(
                    "kr={} needs {demand} operand registers, only {OPERAND_REGISTERS} are free",
                    shape.kr
                ),
            });
        }
        Ok(())
    }

    /// Feasible grid with the most accumulators for `shape`, preferring the
    /// 2x4 default and then wider grids.
    pub fn fit(shape: &MicroShape) -> Result<Self> {
        let default = Self::default_for(shape.etype);
        if default.check(shape).is_ok() {
            return Ok(default);
        }
        let mut best: Option<(usize, AccumulatorGrid)> = None;
        for v in 1..=MAX_ACCUMULATORS {
            for h in 1..=MAX_ACCUMULATORS / v {
                let g = Self::new(v, h, shape.etype);
                if g.check(shape).is_err() {
                    continue;
                }
                let (uv, uh) = g.used(shape);
                if uv < v || uh < h {
                    continue;
                }
                let score = uv * uh;
                if best.is_none_or(|(s, b)| score > s || (score == s && h > b.h_accs)) {
                    best = Some((score, g));
                }
            }
        }
        match best {
            Some((_, g)) => Ok(g),
            None => default.check(shape).map(|_| default),
        }
    }
}

/// Plain per-element product. `out` is overwritten with `A * B` in
/// `layouts.c`, each element accumulated in increasing `k`.
pub(crate) fn generic_kernel<T: Element>(
    a: &[T],
    b: &[T],
    mr: usize,
    kr: usize,
    nr: usize,
    layouts: &TileLayouts,
    out: &mut [T::Acc],
) {
    out.fill(T::Acc::zero());
    if layouts.a == TileLayout::ColMajor
        && layouts.b == TileLayout::RowMajor
        && layouts.c == TileLayout::RowMajor
    {
        // Same per-element summation order as the dot-product form, but
        // the inner loop runs along contiguous rows of B and C.
        macro_rules! fixed {
            ($(($m:literal, $n:literal)),*) => {
                match (mr, nr) {
                    $(($m, $n) => return fixed_kernel::<T, $m, $n>(a, b, kr, out),)*
                    _ => {}
                }
            };
        }
        fixed!((4, 4), (8, 4), (16, 4), (4, 8), (8, 8), (16, 8), (4, 16), (8, 16), (16, 16));
        for k in 0..kr {
            let a_col = &a[k * mr..(k + 1) * mr];
            let b_row = &b[k * nr..(k + 1) * nr];
            for (i, &av) in a_col.iter().enumerate() {
                let av = av.widen();
                let c_row = &mut out[i * nr..(i + 1) * nr];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = cv.mul_add(av, bv.widen());
                }
            }
        }
        return;
    }
    for i in 0..mr {
        for j in 0..nr {
            let mut sum = T::Acc::zero();
            for k in 0..kr {
                let av = a[layouts.a.index(i, k, mr, kr)].widen();
                let bv = b[layouts.b.index(k, j, kr, nr)].widen();
                sum = sum.mul_add(av, bv);
            }
            out[layouts.c.index(i, j, mr, nr)] = sum;
        }
    }
}

/// Register-resident accumulator block for the common tile shapes.
#[inline(always)]
fn fixed_kernel<T: Element, const MR: usize, const NR: usize>(
    a: &[T],
    b: &[T],
    kr: usize,
    out: &mut [T::Acc],
) {
    let mut acc = [[T::Acc::zero(); NR]; MR];
    for (a_col, b_row) in a.chunks_exact(MR).zip(b.chunks_exact(NR)).take(kr) {
        let a_col: &[T; MR] = a_col.try_into().unwrap();
        let b_row: &[T; NR] = b_row.try_into().unwrap();
        for i in 0..MR {
            let av = a_col[i].widen();
            for j in 0..NR {
                acc[i][j] = acc[i][j].mul_add(av, b_row[j].widen());
            }
        }
    }
    for (row, dst) in acc.iter().zip(out.chunks_exact_mut(NR)) {
        dst.copy_from_slice(row);
    }
}

fn check_tile_lengths<T>(a: &[T], b: &[T], shape: &MicroShape) -> Result<()> {
    if a.len() != shape.mr * shape.kr {
        return Err(Error::LengthMismatch {
            expected: shape.mr * shape.kr,
            actual: a.len(),
        });
    }
    if b.len() != shape.kr * shape.nr {
        return Err(Error::LengthMismatch {
            expected: shape.kr * shape.nr,
            actual: b.len(),
        });
    }
    Ok(())
}

fn check_etype<T: Element>(shape: &MicroShape) -> Result<()> {
    if T::ETYPE != shape.etype {
        return Err(Error::ElementTypeMismatch {
            plan: shape.etype.to_string(),
            operands: T::ETYPE.to_string(),
        });
    }
    Ok(())
}

/// Unrolled tile product; the result is laid out per `layouts.c`.
pub fn micro_multiply_generic<T: Element>(
    a: &[T],
    b: &[T],
    shape: &MicroShape,
    layouts: &TileLayouts,
) -> Result<Vec<T::Acc>> {
    check_etype::<T>(shape)?;
    check_tile_lengths(a, b, shape)?;
    let mut out = vec![T::Acc::zero(); shape.mr * shape.nr];
    generic_kernel(a, b, shape.mr, shape.kr, shape.nr, layouts, &mut out);
    Ok(out)
}

/// Rank-`rank` update of one row-major `acc_rows x acc_cols` accumulator.
///
/// Strips hold `rank` slices back to back: `a_strip[t * acc_rows + i]` is
/// row `i` of the `t`-th column slice, `b_strip[t * acc_cols + j]` column
/// `j` of the `t`-th row slice.
pub fn ger_update<T: Element>(
    acc: &mut [T::Acc],
    a_strip: &[T],
    b_strip: &[T],
    acc_rows: usize,
    acc_cols: usize,
    rank: usize,
) -> Result<()> {
    if acc.len() != acc_rows * acc_cols {
        return Err(Error::LengthMismatch {
            expected: acc_rows * acc_cols,
            actual: acc.len(),
        });
    }
    if a_strip.len() != acc_rows * rank {
        return Err(Error::LengthMismatch {
            expected: acc_rows * rank,
            actual: a_strip.len(),
        });
    }
    if b_strip.len() != acc_cols * rank {
        return Err(Error::LengthMismatch {
            expected: acc_cols * rank,
            actual: b_strip.len(),
        });
    }
    ger(acc, a_strip, b_strip, acc_rows, acc_cols, rank);
    Ok(())
}

#[inline(always)]
fn ger<T: Element>(
    acc: &mut [T::Acc],
    a_strip: &[T],
    b_strip: &[T],
    acc_rows: usize,
    acc_cols: usize,
    rank: usize,
) {
    for i in 0..acc_rows {
        let row = &mut acc[i * acc_cols..(i + 1) * acc_cols];
        for (j, cv) in row.iter_mut().enumerate() {
            let mut v = *cv;
            for t in 0..rank {
                v = v.mul_add(a_strip[t * acc_rows + i].widen(), b_strip[t * acc_cols + j].widen());
            }
            *cv = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

/// Gathers one operand strip.
///
/// For A this is `acc_rows` consecutive rows of column slices
/// `k_step * rank ..`, for B `acc_cols` consecutive columns of the matching
/// row slices; with `rank > 1` the slices are concatenated, giving the
/// strided "four from row k, four from row k+1" gather. `strip` counts
/// accumulator rows (A) or columns (B) from the tile origin.
#[allow(clippy::too_many_arguments)]
pub fn extract_operand<T: Scalar>(
    tile: &[T],
    side: Side,
    shape: &MicroShape,
    layout: TileLayout,
    grid: &AccumulatorGrid,
    k_step: usize,
    strip: usize,
) -> Result<Vec<T>> {
    let rank = shape.etype.rank();
    let (len, extent, tile_len) = match side {
        Side::A => (grid.acc_rows, shape.mr, shape.mr * shape.kr),
        Side::B => (grid.acc_cols, shape.nr, shape.kr * shape.nr),
    };
    if tile.len() != tile_len {
        return Err(Error::LengthMismatch {
            expected: tile_len,
            actual: tile.len(),
        });
    }
    if k_step >= shape.k_steps() || (strip + 1) * len > extent {
        return Err(Error::OutOfBounds(format!(
            "strip {strip} at k-step {k_step} outside a {}x{}x{} tile",
            shape.mr, shape.kr, shape.nr
        )));
    }
    let mut out = vec![T::zero(); len * rank];
    extract_into(tile, side, shape, layout, len, rank, k_step, strip * len, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn extract_into<T: Scalar>(
    tile: &[T],
    side: Side,
    shape: &MicroShape,
    layout: TileLayout,
    len: usize,
    rank: usize,
    k_step: usize,
    origin: usize,
    out: &mut [T],
) {
    let k0 = k_step * rank;
    for t in 0..rank {
        for e in 0..len {
            let idx = match side {
                Side::A => layout.index(origin + e, k0 + t, shape.mr, shape.kr),
                Side::B => layout.index(k0 + t, origin + e, shape.kr, shape.nr),
            };
            out[t * len + e] = tile[idx];
        }
    }
}

/// Reusable scratch for the outer-product kernel.
#[derive(Debug)]
pub(crate) struct OuterWorkspace<T: Element> {
    a_ops: Vec<T>,
    b_ops: Vec<T>,
    accs: Vec<T::Acc>,
}

impl<T: Element> OuterWorkspace<T> {
    pub(crate) fn new() -> Self {
        OuterWorkspace {
            a_ops: Vec::new(),
            b_ops: Vec::new(),
            accs: Vec::new(),
        }
    }

    /// `c += A * B` through the accumulator grid. `c` is in `layouts.c`;
    /// accumulators are assembled from it and disassembled back into it.
    pub(crate) fn run(
        &mut self,
        a: &[T],
        b: &[T],
        shape: &MicroShape,
        grid: &AccumulatorGrid,
        layouts: &TileLayouts,
        c: &mut [T::Acc],
    ) {
        let rank = shape.etype.rank();
        let ks = shape.k_steps();
        let (ar, ac) = (grid.acc_rows, grid.acc_cols);
        let (a_len, b_len, acc_len) = (ar * rank, ac * rank, ar * ac);
        self.a_ops.resize(grid.v_accs * ks * a_len, T::zero());
        self.b_ops.resize(grid.h_accs * ks * b_len, T::zero());
        self.accs.resize(grid.accumulators() * acc_len, T::Acc::zero());

        for sr in (0..shape.mr).step_by(grid.section_rows()) {
            let v_n = (shape.mr - sr).min(grid.section_rows()) / ar;
            for sc in (0..shape.nr).step_by(grid.section_cols()) {
                let h_n = (shape.nr - sc).min(grid.section_cols()) / ac;

                for k in 0..ks {
                    for v in 0..v_n {
                        let dst = &mut self.a_ops[(k * v_n + v) * a_len..][..a_len];
                        extract_into(a, Side::A, shape, layouts.a, ar, rank, k, sr + v * ar, dst);
                    }
                    for h in 0..h_n {
                        let dst = &mut self.b_ops[(k * h_n + h) * b_len..][..b_len];
                        extract_into(b, Side::B, shape, layouts.b, ac, rank, k, sc + h * ac, dst);
                    }
                }

                for v in 0..v_n {
                    for h in 0..h_n {
                        let acc = &mut self.accs[(v * h_n + h) * acc_len..][..acc_len];
                        for i in 0..ar {
                            for j in 0..ac {
                                let ci = layouts.c.index(sr + v * ar + i, sc + h * ac + j, shape.mr, shape.nr);
                                acc[i * ac + j] = c[ci];
                            }
                        }
                    }
                }

                for k in 0..ks {
                    for v in 0..v_n {
                        let a_op = &self.a_ops[(k * v_n + v) * a_len..][..a_len];
                        for h in 0..h_n {
                            let b_op = &self.b_ops[(k * h_n + h) * b_len..][..b_len];
                            let acc = &mut self.accs[(v * h_n + h) * acc_len..][..acc_len];
                            ger(acc, a_op, b_op, ar, ac, rank);
                        }
                    }
                }

                for v in 0..v_n {
                    for h in 0..h_n {
                        let acc = &self.accs[(v * h_n + h) * acc_len..][..acc_len];
                        for i in 0..ar {
                            for j in 0..ac {
                                let ci = layouts.c.index(sr + v * ar + i, sc + h * ac + j, shape.mr, shape.nr);
                                c[ci] = acc[i * ac + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Outer-product tile product plus the issue schedule it corresponds to.
pub fn micro_multiply_outer<T: Element>(
    a: &[T],
    b: &[T],
    shape: &MicroShape,
    grid: &AccumulatorGrid,
    layouts: &TileLayouts,
) -> Result<(Vec<T::Acc>, MicroSchedule)> {
    check_etype::<T>(shape)?;
    check_tile_lengths(a, b, shape)?;
    grid.check(shape)?;
    let mut out = vec![T::Acc::zero(); shape.mr * shape.nr];
    OuterWorkspace::new().run(a, b, shape, grid, layouts, &mut out);
    Ok((out, build_schedule(shape, grid)?))
}

/// An extracted operand strip, identified by where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Operand {
    pub section: usize,
    pub side: Side,
    pub strip: usize,
    pub k_step: usize,
}

/// One outer-product issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Issue {
    pub cycle: usize,
    pub section: usize,
    pub acc_id: usize,
    pub k_step: usize,
    pub a: Operand,
    pub b: Operand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccEventKind {
    Assemble,
    Disassemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccEvent {
    pub kind: AccEventKind,
    pub section: usize,
    pub acc_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MicroSchedule {
    pub issues: Vec<Issue>,
    /// Virtual register per operand, numbered from 0 within each section.
    pub reg_assignment: BTreeMap<Operand, usize>,
    pub acc_events: Vec<AccEvent>,
}

impl MicroSchedule {
    /// Cycles spanned by the issues as scheduled.
    pub fn span(&self) -> usize {
        self.issues.iter().map(|i| i.cycle + 1).max().unwrap_or(0)
    }
}

/// In-order list scheduling: each issue goes to the earliest cycle no
/// earlier than its predecessor that has a free port and respects the
/// accumulator's reuse latency.
fn list_schedule(accs: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut last: HashMap<usize, usize> = HashMap::new();
    let mut per_cycle: HashMap<usize, usize> = HashMap::new();
    let mut cycle = 0usize;
    let mut out = Vec::new();
    for acc in accs {
        if let Some(&l) = last.get(&acc) {
            cycle = cycle.max(l + ISSUE_LATENCY);
        }
        while per_cycle.get(&cycle).copied().unwrap_or(0) >= ISSUE_WIDTH {
            cycle += 1;
        }
        *per_cycle.entry(cycle).or_default() += 1;
        last.insert(acc, cycle);
        out.push(cycle);
    }
    out
}

/// The schedule the outer-product kernel follows for `shape` on `grid`:
/// per section, assemble, extract every operand, issue `k`-major over the
/// grid, disassemble.
pub fn build_schedule(shape: &MicroShape, grid: &AccumulatorGrid) -> Result<MicroSchedule> {
    grid.check(shape)?;
    let ks = shape.k_steps();
    let mut sched = MicroSchedule::default();
    let mut order = Vec::new();
    let mut section = 0;
    for sr in (0..shape.mr).step_by(grid.section_rows()) {
        let v_n = (shape.mr - sr).min(grid.section_rows()) / grid.acc_rows;
        let v_base = sr / grid.acc_rows;
        for sc in (0..shape.nr).step_by(grid.section_cols()) {
            let h_n = (shape.nr - sc).min(grid.section_cols()) / grid.acc_cols;
            let h_base = sc / grid.acc_cols;
            let acc_id = |v: usize, h: usize| v * grid.h_accs + h;
            for v in 0..v_n {
                for h in 0..h_n {
                    sched.acc_events.push(AccEvent {
                        kind: AccEventKind::Assemble,
                        section,
                        acc_id: acc_id(v, h),
                    });
                }
            }
            let mut reg = 0;
            let a_op = |v: usize, k: usize| Operand {
                section,
                side: Side::A,
                strip: v_base + v,
                k_step: k,
            };
            let b_op = |h: usize, k: usize| Operand {
                section,
                side: Side::B,
                strip: h_base + h,
                k_step: k,
            };
            for k in 0..ks {
                for v in 0..v_n {
                    sched.reg_assignment.insert(a_op(v, k), reg);
                    reg += 1;
                }
                for h in 0..h_n {
                    sched.reg_assignment.insert(b_op(h, k), reg);
                    reg += 1;
                }
            }
            for k in 0..ks {
                for v in 0..v_n {
                    for h in 0..h_n {
                        order.push(Issue {
                            cycle: 0,
                            section,
                            acc_id: acc_id(v, h),
                            k_step: k,
                            a: a_op(v, k),
                            b: b_op(h, k),
                        });
                    }
                }
            }
            for v in 0..v_n {
                for h in 0..h_n {
                    sched.acc_events.push(AccEvent {
                        kind: AccEventKind::Disassemble,
                        section,
                        acc_id: acc_id(v, h),
                    });
                }
            }
            section += 1;
        }
    }
    let cycles = list_schedule(order.iter().map(|i| i.acc_id));
    for (issue, cycle) in order.iter_mut().zip(cycles) {
        issue.cycle = cycle;
    }
    sched.issues = order;
    Ok(sched)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleViolation {
    pub constraint: HwConstraint,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleReport {
    pub violations: Vec<ScheduleViolation>,
    /// Length of a greedy in-order schedule of the same issues that
    /// honors both the issue width and the reuse latency.
    pub min_cycles: usize,
}

impl ScheduleReport {
    pub fn count(&self, constraint: HwConstraint) -> usize {
        self.violations.iter().filter(|v| v.constraint == constraint).count()
    }
}

/// Checks a schedule against the hardware limits. Operand extraction is
/// treated as free; only outer-product issues occupy cycles.
pub fn validate_schedule(s: &MicroSchedule, grid: &AccumulatorGrid) -> ScheduleReport {
    let mut violations = Vec::new();
    let mut flag = |constraint, detail: String| violations.push(ScheduleViolation { constraint, detail });

    if grid.accumulators() > MAX_ACCUMULATORS {
        flag(
            HwConstraint::AccumulatorCount,
            format!("grid uses {} accumulators", grid.accumulators()),
        );
    }
    let mut bad_ids: Vec<usize> = s
        .issues
        .iter()
        .map(|i| i.acc_id)
        .chain(s.acc_events.iter().map(|e| e.acc_id))
        .filter(|&id| id >= MAX_ACCUMULATORS)
        .collect();
    bad_ids.sort_unstable();
    bad_ids.dedup();
    for id in bad_ids {
        flag(HwConstraint::AccumulatorCount, format!("accumulator {id} does not exist"));
    }

    let mut regs_per_section: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (op, &reg) in &s.reg_assignment {
        regs_per_section.entry(op.section).or_default().push(reg);
    }
    for (section, mut regs) in regs_per_section {
        regs.sort_unstable();
        regs.dedup();
        if regs.len() > OPERAND_REGISTERS {
            flag(
                HwConstraint::OperandRegisters,
                format!("section {section} keeps {} operand registers live", regs.len()),
            );
        }
    }

    let mut per_cycle: BTreeMap<usize, usize> = BTreeMap::new();
    for i in &s.issues {
        *per_cycle.entry(i.cycle).or_default() += 1;
    }
    for (cycle, n) in per_cycle {
        if n > ISSUE_WIDTH {
            flag(HwConstraint::DualIssue, format!("{n} issues in cycle {cycle}"));
        }
    }

    let mut per_acc: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in &s.issues {
        per_acc.entry(i.acc_id).or_default().push(i.cycle);
    }
    for (acc, mut cycles) in per_acc {
        cycles.sort_unstable();
        for w in cycles.windows(2) {
            if w[1] - w[0] < ISSUE_LATENCY {
                flag(
                    HwConstraint::IssueLatency,
                    format!("accumulator {acc} issued at cycles {} and {}", w[0], w[1]),
                );
            }
        }
    }

    let mut events: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for i in &s.issues {
        events.entry((i.section, i.acc_id)).or_default();
    }
    for e in &s.acc_events {
        let slot = events.entry((e.section, e.acc_id)).or_default();
        match e.kind {
            AccEventKind::Assemble => slot.0 += 1,
            AccEventKind::Disassemble => slot.1 += 1,
        }
    }
    for ((section, acc), (asm, dis)) in events {
        if asm != 1 || dis != 1 {
            flag(
                HwConstraint::AccumulatorSpill,
                format!(
                    "accumulator {acc} in section {section} assembled {asm}x, disassembled {dis}x"
                ),
            );
        }
    }

    let mut ordered: Vec<(usize, usize)> = s.issues.iter().enumerate().map(|(n, i)| (i.cycle, n)).collect();
    ordered.sort_unstable();
    let greedy = list_schedule(ordered.iter().map(|&(_, n)| s.issues[n].acc_id));
    let min_cycles = greedy.iter().map(|c| c + 1).max().unwrap_or(0);

    ScheduleReport {
        violations,
        min_cycles,
    }
}
