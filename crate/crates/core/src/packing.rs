//! Packing cache blocks into contiguous, tile-major buffers.
//!
//! A block of A (`mc x kc`) is cut into `mr x kr` tiles stored a row of
//! tiles at a time; a block of B (`kc x nc`) is cut into `kr x nr` tiles
//! stored a column of tiles at a time. That is the order the macro kernel
//! walks them in, so every tile load is a single contiguous read. Elements
//! past the edge of the source matrix are written as zero.

use crate::element::Scalar;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Element order inside one tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileLayout {
    ColMajor,
    RowMajor,
}

impl TileLayout {
    #[inline(always)]
    pub fn index(self, r: usize, c: usize, rows: usize, cols: usize) -> usize {
        match self {
            TileLayout::ColMajor => c * rows + r,
            TileLayout::RowMajor => r * cols + c,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            TileLayout::ColMajor => TileLayout::RowMajor,
            TileLayout::RowMajor => TileLayout::ColMajor,
        }
    }
}

/// Order of tiles inside a packed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileOrder {
    /// Tiles sharing a tile-row are adjacent (used for A).
    RowOfTiles,
    /// Tiles sharing a tile-column are adjacent (used for B).
    ColOfTiles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedBlock<T> {
    buffer: Vec<T>,
    tile_rows: usize,
    tile_cols: usize,
    tiles_down: usize,
    tiles_across: usize,
    order: TileOrder,
    layout: TileLayout,
    logical_rows: usize,
    logical_cols: usize,
}

impl<T: Scalar> PackedBlock<T> {
    pub fn buffer(&self) -> &[T] {
        &self.buffer
    }

    pub fn tile_rows(&self) -> usize {
        self.tile_rows
    }

    pub fn tile_cols(&self) -> usize {
        self.tile_cols
    }

    pub fn tile_len(&self) -> usize {
        self.tile_rows * self.tile_cols
    }

    /// Number of tiles stacked vertically.
    pub fn tiles_down(&self) -> usize {
        self.tiles_down
    }

    /// Number of tiles side by side.
    pub fn tiles_across(&self) -> usize {
        self.tiles_across
    }

    pub fn order(&self) -> TileOrder {
        self.order
    }

    pub fn layout(&self) -> TileLayout {
        self.layout
    }

    pub fn logical_rows(&self) -> usize {
        self.logical_rows
    }

    pub fn logical_cols(&self) -> usize {
        self.logical_cols
    }

    /// Buffer offset of the first element of tile `(tile_row, tile_col)`.
    #[inline(always)]
    pub fn tile_offset(&self, tile_row: usize, tile_col: usize) -> usize {
        let idx = match self.order {
            TileOrder::RowOfTiles => tile_row * self.tiles_across + tile_col,
            TileOrder::ColOfTiles => tile_col * self.tiles_down + tile_row,
        };
        idx * self.tile_len()
    }

    /// Borrowed view of one tile; panics outside the tile grid.
    #[inline(always)]
    pub fn tile(&self, tile_row: usize, tile_col: usize) -> &[T] {
        let off = self.tile_offset(tile_row, tile_col);
        &self.buffer[off..off + self.tile_len()]
    }

    /// Copy of one tile in the block's intra-tile layout.
    pub fn load_tile(&self, tile_row: usize, tile_col: usize) -> Result<Vec<T>> {
        if tile_row >= self.tiles_down || tile_col >= self.tiles_across {
            return Err(Error::OutOfBounds(format!(
                "tile ({tile_row}, {tile_col}) outside a {}x{} tile grid",
                self.tiles_down, self.tiles_across
            )));
        }
        Ok(self.tile(tile_row, tile_col).to_vec())
    }

    /// Element `(r, c)` of the padded block.
    pub fn get(&self, r: usize, c: usize) -> T {
        let (tr, tc) = (r / self.tile_rows, c / self.tile_cols);
        let within = self
            .layout
            .index(r % self.tile_rows, c % self.tile_cols, self.tile_rows, self.tile_cols);
        self.buffer[self.tile_offset(tr, tc) + within]
    }

    /// Reinterprets the buffer as the packed transpose of this block.
    ///
    /// A row of `p x q` tiles stored column-major is, element for element,
    /// a column of `q x p` tiles stored row-major; no data moves.
    pub fn transposed(self) -> Self {
        PackedBlock {
            buffer: self.buffer,
            tile_rows: self.tile_cols,
            tile_cols: self.tile_rows,
            tiles_down: self.tiles_across,
            tiles_across: self.tiles_down,
            order: match self.order {
                TileOrder::RowOfTiles => TileOrder::ColOfTiles,
                TileOrder::ColOfTiles => TileOrder::RowOfTiles,
            },
            layout: self.layout.flipped(),
            logical_rows: self.logical_cols,
            logical_cols: self.logical_rows,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn pack_block<T: Scalar>(
    src: &Matrix<T>,
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
    tile_rows: usize,
    tile_cols: usize,
    layout: TileLayout,
    order: TileOrder,
) -> Result<PackedBlock<T>> {
    if tile_rows == 0 || tile_cols == 0 {
        return Err(Error::InvalidArgument("tile dimensions must be positive".into()));
    }
    if row0 >= src.rows() || col0 >= src.cols() {
        return Err(Error::OutOfBounds(format!(
            "block offset ({row0}, {col0}) outside a {}x{} matrix",
            src.rows(),
            src.cols()
        )));
    }
    let logical_rows = rows.min(src.rows() - row0);
    let logical_cols = cols.min(src.cols() - col0);
    let tiles_down = logical_rows.div_ceil(tile_rows);
    let tiles_across = logical_cols.div_ceil(tile_cols);
    let tile_len = tile_rows * tile_cols;
    let mut buffer = vec![T::zero(); tiles_down * tiles_across * tile_len];

    let mut block = PackedBlock {
        buffer: Vec::new(),
        tile_rows,
        tile_cols,
        tiles_down,
        tiles_across,
        order,
        layout,
        logical_rows,
        logical_cols,
    };
    for tr in 0..tiles_down {
        let r_lo = tr * tile_rows;
        let r_hi = (r_lo + tile_rows).min(logical_rows);
        for tc in 0..tiles_across {
            let c_lo = tc * tile_cols;
            let c_hi = (c_lo + tile_cols).min(logical_cols);
            let base = block.tile_offset(tr, tc);
            let tile = &mut buffer[base..base + tile_len];
            for c in c_lo..c_hi {
                for r in r_lo..r_hi {
                    let dst = layout.index(r - r_lo, c - c_lo, tile_rows, tile_cols);
                    tile[dst] = src.get(row0 + r, col0 + c);
                }
            }
        }
    }
    block.buffer = buffer;
    Ok(block)
}

/// Packs the `mc x kc` block of `a` at `(i, k)` into `mr x kr` tiles, a row
/// of tiles at a time. Blocks running past the matrix edge are clamped and
/// zero-padded up to whole tiles.
#[allow(clippy::too_many_arguments)]
pub fn pack_a<T: Scalar>(
    a: &Matrix<T>,
    i: usize,
    k: usize,
    mc: usize,
    kc: usize,
    mr: usize,
    kr: usize,
    layout: TileLayout,
) -> Result<PackedBlock<T>> {
    pack_block(a, i, k, mc, kc, mr, kr, layout, TileOrder::RowOfTiles)
}

/// Packs the `kc x nc` block of `b` at `(k, j)` into `kr x nr` tiles, a
/// column of tiles at a time.
#[allow(clippy::too_many_arguments)]
pub fn pack_b<T: Scalar>(
    b: &Matrix<T>,
    k: usize,
    j: usize,
    kc: usize,
    nc: usize,
    kr: usize,
    nr: usize,
    layout: TileLayout,
) -> Result<PackedBlock<T>> {
    pack_block(b, k, j, kc, nc, kr, nr, layout, TileOrder::ColOfTiles)
}

/// Reads the `rows x cols` tile of `c` at `(i, j)` into a flat buffer in
/// `layout`, zero-filling anything past the matrix edge.
#[allow(clippy::too_many_arguments)]
pub fn load_matrix_tile<T: Scalar>(
    c: &Matrix<T>,
    i: usize,
    j: usize,
    rows: usize,
    cols: usize,
    layout: TileLayout,
    out: &mut [T],
) -> Result<()> {
    if i >= c.rows() || j >= c.cols() {
        return Err(Error::OutOfBounds(format!(
            "tile offset ({i}, {j}) outside a {}x{} matrix",
            c.rows(),
            c.cols()
        )));
    }
    if out.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            actual: out.len(),
        });
    }
    out.fill(T::zero());
    let lr = rows.min(c.rows() - i);
    let lc = cols.min(c.cols() - j);
    for cc in 0..lc {
        for r in 0..lr {
            out[layout.index(r, cc, rows, cols)] = c.get(i + r, j + cc);
        }
    }
    Ok(())
}

/// Writes a `rows x cols` tile (in `layout`) into `c` at `(i, j)`.
///
/// Only the `logical_rows x logical_cols` corner is written, so padded
/// lanes never reach `c`. Full tiles take the strided path, partial tiles
/// go element by element.
#[allow(clippy::too_many_arguments)]
pub fn store_tile<T: Scalar>(
    c: &mut Matrix<T>,
    i: usize,
    j: usize,
    tile: &[T],
    rows: usize,
    cols: usize,
    layout: TileLayout,
    logical_rows: usize,
    logical_cols: usize,
) -> Result<()> {
    if tile.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            actual: tile.len(),
        });
    }
    if logical_rows > rows
        || logical_cols > cols
        || i + logical_rows > c.rows()
        || j + logical_cols > c.cols()
        || (logical_rows > 0 && logical_cols > 0 && (i >= c.rows() || j >= c.cols()))
    {
        return Err(Error::OutOfBounds(format!(
            "{logical_rows}x{logical_cols} tile at ({i}, {j}) does not fit a {}x{} matrix",
            c.rows(),
            c.cols()
        )));
    }
    if logical_rows == rows && logical_cols == cols {
        for cc in 0..cols {
            for r in 0..rows {
                c.set(i + r, j + cc, tile[layout.index(r, cc, rows, cols)]);
            }
        }
    } else {
        for r in 0..logical_rows {
            for cc in 0..logical_cols {
                c.set(i + r, j + cc, tile[layout.index(r, cc, rows, cols)]);
            }
        }
    }
    Ok(())
}
