//! Cache-blocked, packed GEMM built from a portable micro kernel and a
//! model of an outer-product accumulator unit.
//!
//! The layers, bottom up:
//!
//! * [`params`] derives cache block sizes from cache capacities.
//! * [`packing`] copies blocks of `A` and `B` into contiguous tile order.
//! * [`micro_kernel`] multiplies register tiles, either with a plain loop nest
//!   or through an accumulator grid whose schedule is checked against the
//!   hardware limits.
//! * [`macro_kernel`] drives the blocked loop nest for GEMM and SYR2K.
//! * [`bench`] measures and cross-checks the variants.

pub mod bench;
pub mod element;
pub mod error;
pub mod macro_kernel;
pub mod matrix;
pub mod micro_kernel;
pub mod packing;
pub mod params;
pub mod reference;

pub use element::{Element, ElementType, Scalar};
pub use error::{Error, HwConstraint, Result};
pub use macro_kernel::{gemm, gemm_tiled, syr2k, GemmPlan, GemmStats, KernelKind};
pub use matrix::{Matrix, StorageOrder, Triangle};
pub use micro_kernel::{
    build_schedule, micro_multiply_generic, micro_multiply_outer, validate_schedule, AccumulatorGrid,
    MicroSchedule, MicroShape, ScheduleReport, TileLayouts,
};
pub use packing::{pack_a, pack_b, PackedBlock, TileLayout, TileOrder};
pub use params::{derive_block_params, validate_params, BlockParams, CacheConfig, DerivedBlocks, TileParams};
pub use reference::{frobenius_rel_error, naive_gemm, naive_syr2k};
