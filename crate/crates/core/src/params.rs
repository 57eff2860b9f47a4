//! Cache-blocking factors derived from effective cache sizes.
//!
//! Half of L1 holds a `kc x VL` sliver of the packed B block; the other half
//! holds a `VL x VL` piece of C plus `VL` elements each of A and B, which
//! fixes the working length `kl`. L2 (minus L1) holds an `mc x kl` piece of
//! A and L3 (minus L2) a `kl x nc` piece of B. Each factor is then rounded
//! down to a multiple of its register tile.

use std::fmt;

use crate::element::ElementType;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheConfig {
    pub l1_bytes: usize,
    pub l2_bytes: usize,
    pub l3_bytes: usize,
    /// Minimum vector length, in elements of the working type.
    pub vl: usize,
}

impl CacheConfig {
    pub fn new(l1_bytes: usize, l2_bytes: usize, l3_bytes: usize, vl: usize) -> Result<Self> {
        let cfg = CacheConfig {
            l1_bytes,
            l2_bytes,
            l3_bytes,
            vl,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l1_bytes == 0 || self.vl == 0 {
            return Err(Error::InfeasibleConfig(
                "L1 size and vector length must be positive".into(),
            ));
        }
        if !(self.l1_bytes < self.l2_bytes && self.l2_bytes < self.l3_bytes) {
            return Err(Error::InfeasibleConfig(format!(
                "cache sizes must strictly increase, got L1={} L2={} L3={}",
                self.l1_bytes, self.l2_bytes, self.l3_bytes
            )));
        }
        Ok(())
    }
}

impl Default for CacheConfig {
    /// 32 KiB / 512 KiB / 10 MiB with 128-bit vectors of `f32`.
    fn default() -> Self {
        CacheConfig {
            l1_bytes: 32 * 1024,
            l2_bytes: 512 * 1024,
            l3_bytes: 10 * 1024 * 1024,
            vl: 4,
        }
    }
}

/// Register-tile dimensions of the micro kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileParams {
    pub mr: usize,
    pub kr: usize,
    pub nr: usize,
}

impl TileParams {
    pub fn new(mr: usize, kr: usize, nr: usize) -> Result<Self> {
        if mr == 0 || kr == 0 || nr == 0 {
            return Err(Error::InvalidArgument(format!(
                "tile dimensions must be positive, got mr={mr} kr={kr} nr={nr}"
            )));
        }
        Ok(TileParams { mr, kr, nr })
    }
}

/// Cache-block dimensions plus the intermediate L1 working length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockParams {
    pub mc: usize,
    pub kc: usize,
    pub nc: usize,
    pub kl: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockDim {
    Mc,
    Kc,
    Nc,
}

impl fmt::Display for BlockDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockDim::Mc => "mc",
            BlockDim::Kc => "kc",
            BlockDim::Nc => "nc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NotMultiple,
    BelowTile,
    ZeroTile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamViolation {
    pub dim: BlockDim,
    pub kind: ViolationKind,
    pub value: usize,
    pub tile: usize,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::NotMultiple => {
                write!(f, "{}={} is not a multiple of {}", self.dim, self.value, self.tile)
            }
            ViolationKind::BelowTile => {
                write!(f, "{}={} is smaller than its tile {}", self.dim, self.value, self.tile)
            }
            ViolationKind::ZeroTile => write!(f, "tile factor for {} is zero", self.dim),
        }
    }
}

/// Result of [`derive_block_params`]; `clamped` lists the factors whose
/// cache bound fell below one tile and were raised to exactly one tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedBlocks {
    pub block: BlockParams,
    pub clamped: Vec<BlockDim>,
}

fn floor_to_multiple(bound: usize, step: usize) -> (usize, bool) {
    let v = bound / step * step;
    if v == 0 {
        (step, true)
    } else {
        (v, false)
    }
}

pub fn derive_block_params(
    cache: &CacheConfig,
    etype: ElementType,
    tile: &TileParams,
) -> Result<DerivedBlocks> {
    cache.validate()?;
    let tile = TileParams::new(tile.mr, tile.kr, tile.nr)?;
    let bytes = etype.element_bytes();
    let vl = cache.vl;
    let half_l1 = cache.l1_bytes / 2 / bytes;

    let kl = half_l1
        .checked_sub(vl * vl)
        .map(|free| free / (2 * vl))
        .unwrap_or(0);
    if kl == 0 {
        return Err(Error::InfeasibleConfig(format!(
            "half of L1 ({half_l1} elements) leaves no room beyond the {vl}x{vl} C piece"
        )));
    }

    let mut clamped = Vec::new();
    let (kc, ck) = floor_to_multiple(half_l1 / vl, tile.kr);
    let (mc, cm) = floor_to_multiple((cache.l2_bytes - cache.l1_bytes) / bytes / kl, tile.mr);
    let (nc, cn) = floor_to_multiple((cache.l3_bytes - cache.l2_bytes) / bytes / kl, tile.nr);
    for (hit, dim) in [(cm, BlockDim::Mc), (ck, BlockDim::Kc), (cn, BlockDim::Nc)] {
        if hit {
            clamped.push(dim);
        }
    }
    Ok(DerivedBlocks {
        block: BlockParams { mc, kc, nc, kl },
        clamped,
    })
}

/// Every divisibility or ordering violation; empty means valid.
pub fn validate_params(block: &BlockParams, tile: &TileParams) -> Vec<ParamViolation> {
    let mut out = Vec::new();
    for (dim, value, t) in [
        (BlockDim::Mc, block.mc, tile.mr),
        (BlockDim::Kc, block.kc, tile.kr),
        (BlockDim::Nc, block.nc, tile.nr),
    ] {
        if t == 0 {
            out.push(ParamViolation {
                dim,
                kind: ViolationKind::ZeroTile,
                value,
                tile: t,
            });
            continue;
        }
        if value < t {
            out.push(ParamViolation {
                dim,
                kind: ViolationKind::BelowTile,
                value,
                tile: t,
            });
        }
        if value % t != 0 {
            out.push(ParamViolation {
                dim,
                kind: ViolationKind::NotMultiple,
                value,
                tile: t,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KIB: usize = 1024;
    const MIB: usize = 1024 * 1024;

    #[test]
    fn desktop_goldens() {
        let cache = CacheConfig::new(32 * KIB, 512 * KIB, 10 * MIB, 4).unwrap();
        let tile = TileParams::new(16, 64, 4).unwrap();
        let d = derive_block_params(&cache, ElementType::F32, &tile).unwrap();
        assert_eq!(
            d.block,
            BlockParams {
                mc: 240,
                kc: 1024,
                nc: 4880,
                kl: 510
            }
        );
        assert!(d.clamped.is_empty());
    }

    #[test]
    fn single_kr_strip_fills_half_of_l1() {
        let kr = 8;
        let bytes = ElementType::F32.element_bytes();
        let cache = CacheConfig::new(2 * bytes * kr, 4096, 65536, 1).unwrap();
        let d = derive_block_params(&cache, ElementType::F32, &TileParams::new(4, kr, 4).unwrap())
            .unwrap();
        assert_eq!(d.block.kc, kr);
    }

    #[test]
    fn tiny_l1_is_infeasible() {
        let cache = CacheConfig::new(64, 4096, 65536, 4).unwrap();
        let err = derive_block_params(&cache, ElementType::F32, &TileParams::new(4, 4, 4).unwrap());
        assert!(matches!(err, Err(Error::InfeasibleConfig(_))));
    }

    #[test]
    fn clamping_is_reported() {
        // kc bound is 32 / 4 = 8 elements, below kr = 64.
        let cache = CacheConfig::new(256, 4096, 65536, 1).unwrap();
        let d = derive_block_params(&cache, ElementType::F32, &TileParams::new(4, 64, 4).unwrap())
            .unwrap();
        assert_eq!(d.block.kc, 64);
        assert!(d.clamped.contains(&BlockDim::Kc));
    }

    #[test]
    fn cache_sizes_must_increase() {
        assert!(CacheConfig::new(32 * KIB, 16 * KIB, MIB, 4).is_err());
        assert!(CacheConfig::new(32 * KIB, 64 * KIB, MIB, 0).is_err());
    }

    #[test]
    fn validation_examples() {
        let tile = TileParams::new(16, 64, 4).unwrap();
        let ok = BlockParams {
            mc: 240,
            kc: 1024,
            nc: 4880,
            kl: 510,
        };
        assert!(validate_params(&ok, &tile).is_empty());

        let bad = BlockParams { mc: 241, ..ok };
        let v = validate_params(&bad, &tile);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].dim, BlockDim::Mc);
        assert_eq!(v[0].kind, ViolationKind::NotMultiple);

        let one_tile = BlockParams {
            mc: 16,
            kc: 64,
            nc: 4,
            kl: 1,
        };
        assert!(validate_params(&one_tile, &tile).is_empty());

        let small = BlockParams { nc: 2, ..one_tile };
        let v = validate_params(&small, &tile);
        assert!(v.iter().any(|x| x.kind == ViolationKind::BelowTile && x.dim == BlockDim::Nc));
    }

    fn cache_strategy() -> impl Strategy<Value = (CacheConfig, ElementType, TileParams)> {
        (
            10usize..17,
            1usize..6,
            1usize..6,
            prop_oneof![Just(1usize), Just(2), Just(4), Just(8)],
            prop::sample::select(ElementType::ALL.to_vec()),
            1usize..33,
            1usize..129,
            1usize..33,
        )
            .prop_map(|(l1_log, l2_mul, l3_mul, vl, et, mr, kr, nr)| {
                let l1 = 1usize << l1_log;
                let l2 = l1 * (1 + l2_mul * 4);
                let l3 = l2 * (1 + l3_mul * 4);
                (
                    CacheConfig {
                        l1_bytes: l1,
                        l2_bytes: l2,
                        l3_bytes: l3,
                        vl,
                    },
                    et,
                    TileParams { mr, kr, nr },
                )
            })
    }

    proptest! {
        #[test]
        fn derived_params_always_validate((cache, et, tile) in cache_strategy()) {
            if let Ok(d) = derive_block_params(&cache, et, &tile) {
                prop_assert!(validate_params(&d.block, &tile).is_empty());
                if !d.clamped.contains(&BlockDim::Kc) {
                    prop_assert!(d.block.kc * cache.vl * et.element_bytes() <= cache.l1_bytes / 2);
                }
            }
        }

        #[test]
        fn larger_caches_never_shrink_blocks((cache, et, tile) in cache_strategy(), extra in 1usize..1_000_000) {
            let Ok(base) = derive_block_params(&cache, et, &tile) else { return Ok(()); };

            let bigger_l2 = CacheConfig { l2_bytes: cache.l2_bytes + extra, l3_bytes: cache.l3_bytes + extra, ..cache };
            let d2 = derive_block_params(&bigger_l2, et, &tile).unwrap();
            prop_assert!(d2.block.mc >= base.block.mc);

            let bigger_l3 = CacheConfig { l3_bytes: cache.l3_bytes + extra, ..cache };
            let d3 = derive_block_params(&bigger_l3, et, &tile).unwrap();
            prop_assert!(d3.block.nc >= base.block.nc);

            let grow = extra.min(cache.l2_bytes - cache.l1_bytes - 1);
            let bigger_l1 = CacheConfig { l1_bytes: cache.l1_bytes + grow, ..cache };
            let d1 = derive_block_params(&bigger_l1, et, &tile).unwrap();
            prop_assert!(d1.block.kc >= base.block.kc);
        }
    }
}
