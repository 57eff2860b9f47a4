//! Exit criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! `TILEPACK_PERF_ROUNDS` overrides the round count of the timing check.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tilepack::bench::{
    default_outer_tile, default_tile, emit_csv, random_problem, run_bench, BenchCase, BenchConfig, Sample, Variant,
    DEFAULT_REPEATS,
};
use tilepack::micro_kernel::{build_schedule, micro_multiply_generic, micro_multiply_outer, validate_schedule};
use tilepack::reference::max_abs;
use tilepack::{
    derive_block_params, frobenius_rel_error, gemm, naive_gemm, naive_syr2k, pack_a, pack_b, syr2k, AccumulatorGrid,
    BlockParams, CacheConfig, ElementType, GemmPlan, KernelKind, Matrix, MicroShape, Scalar, TileLayout,
    TileLayouts, TileParams, Triangle,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const SCALARS: [f64; 4] = [0.0, 1.0, 2.0, -1.0];

fn plans_for(etype: ElementType) -> Vec<GemmPlan> {
    let cache = CacheConfig::default();
    let mut plans = Vec::new();
    for (kernel, tile) in [
        (KernelKind::Generic, default_tile()),
        (KernelKind::OuterProduct, default_outer_tile(etype)),
    ] {
        let derived = GemmPlan::derive(&cache, etype, tile, kernel).unwrap();
        // Small blocks so that the sweep also crosses block boundaries.
        let small = BlockParams {
            mc: 2 * tile.mr,
            kc: 2 * tile.kr,
            nc: 2 * tile.nr,
            kl: 1,
        };
        let multi = GemmPlan::new(etype, small, tile, kernel, *derived.grid(), TileLayouts::default()).unwrap();
        plans.push(derived);
        plans.push(multi);
    }
    plans
}

fn sweep_typed<T: Sample>(shapes: &[(usize, usize, usize)]) -> Result<usize, String> {
    let plans = plans_for(T::ETYPE);
    let mut checked = 0;
    for (idx, &(m, n, k)) in shapes.iter().enumerate() {
        let (a, b, c0) = random_problem::<T>(m, n, k, 1000 + idx as u64);
        let bound = 4.0 * k as f64 * T::Acc::EPSILON * max_abs(&a) * max_abs(&b);
        for alpha in SCALARS {
            for beta in SCALARS {
                let (al, be) = (T::Acc::from_f64(alpha), T::Acc::from_f64(beta));
                let expected = naive_gemm(al, &a, &b, be, &c0).map_err(|e| e.to_string())?;
                for plan in &plans {
                    let mut c = c0.clone();
                    gemm(al, &a, &b, be, &mut c, plan).map_err(|e| e.to_string())?;
                    for col in 0..n {
                        for row in 0..m {
                            let (x, y) = (c.get(row, col), expected.get(row, col));
                            let ok = if T::ETYPE.is_integer() {
                                x == y
                            } else {
                                (x.to_f64() - y.to_f64()).abs() <= bound
                            };
                            ensure(ok, || {
                                format!(
                                    "{} {m}x{n}x{k} alpha={alpha} beta={beta} {:?} kernel at ({row},{col}): {x:?} vs {y:?}",
                                    T::ETYPE,
                                    plan.kernel()
                                )
                            })?;
                        }
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut shapes = Vec::new();
    for m in 1..=8 {
        for n in 1..=8 {
            for k in 1..=8 {
                shapes.push((m, n, k));
            }
        }
    }
    shapes.extend([16, 31, 64, 100, 128, 257].map(|d| (d, d, d)));
    let mut total = 0;
    total += sweep_typed::<f32>(&shapes)?;
    total += sweep_typed::<f64>(&shapes)?;
    total += sweep_typed::<i16>(&shapes)?;
    total += sweep_typed::<i8>(&shapes)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1}s, limit 120s"))?;
    Ok(format!("{total} products matched in {secs:.1}s"))
}

fn random_tile<T: Sample>(rng: &mut ChaCha8Rng, len: usize) -> Vec<T> {
    (0..len).map(|_| T::sample(rng)).collect()
}

fn micro_pair<T: Sample>(rng: &mut ChaCha8Rng, shape: &MicroShape) -> Result<(), String> {
    let a: Vec<T> = random_tile(rng, shape.mr * shape.kr);
    let b: Vec<T> = random_tile(rng, shape.kr * shape.nr);
    let layouts = TileLayouts::default();
    let grid = AccumulatorGrid::fit(shape).map_err(|e| e.to_string())?;
    let generic = micro_multiply_generic(&a, &b, shape, &layouts).map_err(|e| e.to_string())?;
    let (outer, _) = micro_multiply_outer(&a, &b, shape, &grid, &layouts).map_err(|e| e.to_string())?;
    let amax = a.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
    let bmax = b.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
    let bound = 4.0 * shape.kr as f64 * T::Acc::EPSILON * amax * bmax;
    for (i, (x, y)) in generic.iter().zip(&outer).enumerate() {
        let ok = if T::ETYPE.is_integer() {
            x == y
        } else {
            (x.to_f64() - y.to_f64()).abs() <= bound
        };
        ensure(ok, || format!("{shape:?} grid {grid:?} element {i}: {x:?} vs {y:?}"))?;
    }
    Ok(())
}

fn micro_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let dims = [4, 8, 16, 32];
    for _ in 0..1000 {
        let etype = ElementType::ALL[rng.gen_range(0..4)];
        let mr = dims[rng.gen_range(0..4)];
        let nr = dims[rng.gen_range(0..4)];
        let kr = rng.gen_range(1..=16) * etype.rank();
        let shape = MicroShape::new(mr, kr, nr, etype).map_err(|e| e.to_string())?;
        match etype {
            ElementType::F32 => micro_pair::<f32>(&mut rng, &shape)?,
            ElementType::F64 => micro_pair::<f64>(&mut rng, &shape)?,
            ElementType::I16ToI32 => micro_pair::<i16>(&mut rng, &shape)?,
            ElementType::I8ToI32 => micro_pair::<i8>(&mut rng, &shape)?,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s, limit 30s"))?;
    Ok(format!("1000 shapes in {secs:.2}s"))
}

fn register_budget() -> Outcome {
    let grid = AccumulatorGrid::default_for(ElementType::F32);
    ensure((grid.v_accs, grid.h_accs) == (2, 4), || format!("default grid {grid:?}"))?;
    let ok = MicroShape::new(8, 5, 16, ElementType::F32).unwrap();
    let demand = grid.operand_register_demand(&ok);
    ensure(demand == 30, || format!("kr=5 demand {demand}, expected 30"))?;
    grid.check(&ok).map_err(|e| format!("kr=5 rejected: {e}"))?;
    let too_deep = MicroShape::new(8, 6, 16, ElementType::F32).unwrap();
    ensure(grid.check(&too_deep).is_err(), || "kr=6 accepted".into())?;
    Ok(format!("kr=5 needs {demand} of 32 operand registers, kr=6 rejected"))
}

fn schedule_model() -> Outcome {
    let shape = MicroShape::new(8, 5, 16, ElementType::F32).unwrap();
    let grid = AccumulatorGrid::default_for(ElementType::F32);
    let sched = build_schedule(&shape, &grid).map_err(|e| e.to_string())?;
    let report = validate_schedule(&sched, &grid);
    ensure(sched.issues.len() == 40, || format!("{} issues", sched.issues.len()))?;
    ensure(report.violations.is_empty(), || format!("violations: {:?}", report.violations))?;
    ensure(report.min_cycles == 20, || format!("min_cycles {}", report.min_cycles))?;
    Ok(format!("40 issues, 0 violations, {} cycles", report.min_cycles))
}

/// Largest multiple of `step` (at least zero) whose cost stays in budget,
/// found by counting up.
fn largest_multiple(step: usize, budget: usize, cost: impl Fn(usize) -> usize) -> usize {
    let mut best = 0;
    let mut x = step;
    while cost(x) <= budget {
        best = x;
        x += step;
    }
    best
}

struct Golden {
    cache: CacheConfig,
    tile: TileParams,
    expect: (usize, usize, usize, usize),
}

fn brute_force(cache: &CacheConfig, etype: ElementType, tile: &TileParams) -> (usize, usize, usize, usize) {
    let t = etype.element_bytes();
    let vl = cache.vl;
    let half_l1 = cache.l1_bytes / 2 / t;
    let kc = largest_multiple(tile.kr, cache.l1_bytes, |x| x * vl * t * 2);
    let kl = largest_multiple(1, half_l1.saturating_sub(vl * vl), |x| 2 * vl * x);
    let mc = largest_multiple(tile.mr, (cache.l2_bytes - cache.l1_bytes) / t, |x| x * kl);
    let nc = largest_multiple(tile.nr, (cache.l3_bytes - cache.l2_bytes) / t, |x| x * kl);
    (kc, kl, mc, nc)
}

fn derivation_goldens() -> Outcome {
    let goldens = [
        Golden {
            cache: CacheConfig::new(32 << 10, 512 << 10, 10 << 20, 4).unwrap(),
            tile: TileParams::new(16, 64, 4).unwrap(),
            expect: (1024, 510, 240, 4880),
        },
        Golden {
            cache: CacheConfig::new(48 << 10, 1 << 20, 4 << 20, 4).unwrap(),
            tile: TileParams::new(16, 128, 8).unwrap(),
            expect: (1536, 766, 320, 1016),
        },
    ];
    let mut errors = Vec::new();
    for g in &goldens {
        let d = derive_block_params(&g.cache, ElementType::F32, &g.tile).map_err(|e| e.to_string())?;
        let got = (d.block.kc, d.block.kl, d.block.mc, d.block.nc);
        let oracle = brute_force(&g.cache, ElementType::F32, &g.tile);
        if got != oracle {
            errors.push(format!("derived {got:?} but search found {oracle:?}"));
        }
        if got != g.expect {
            errors.push(format!(
                "L1={} L2={} L3={}: expected (kc,kl,mc,nc)={:?}, derived {got:?}, search {oracle:?}",
                g.cache.l1_bytes, g.cache.l2_bytes, g.cache.l3_bytes, g.expect
            ));
        }
    }
    if errors.is_empty() {
        Ok("both cache configurations match".into())
    } else {
        Err(errors.join("; "))
    }
}

fn check_packed(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    is_a: bool,
) -> Result<(), String> {
    let src = Matrix::from_fn(rows, cols, Default::default(), |r, c| (c * rows + r + 1) as i32);
    let r0 = rng.gen_range(0..rows);
    let c0 = rng.gen_range(0..cols);
    let br = rng.gen_range(1..=rows + 3);
    let bc = rng.gen_range(1..=cols + 3);
    let tr = rng.gen_range(1..=6);
    let tc = rng.gen_range(1..=6);
    let layout = if rng.gen() { TileLayout::ColMajor } else { TileLayout::RowMajor };
    let packed = if is_a {
        pack_a(&src, r0, c0, br, bc, tr, tc, layout)
    } else {
        pack_b(&src, r0, c0, br, bc, tr, tc, layout)
    }
    .map_err(|e| e.to_string())?;
    let lr = br.min(rows - r0);
    let lc = bc.min(cols - c0);
    let buf = packed.buffer();
    let down = lr.div_ceil(tr);
    let across = lc.div_ceil(tc);
    ensure(buf.len() == down * across * tr * tc, || {
        format!("buffer length {} for {down}x{across} tiles of {tr}x{tc}", buf.len())
    })?;

    // Permutation: every source element exactly once, everything else zero.
    let mut seen = vec![0usize; rows * cols + 1];
    for &v in buf {
        seen[v as usize] += 1;
    }
    for c in 0..cols {
        for r in 0..rows {
            let v = src.get(r, c) as usize;
            let inside = (r0..r0 + lr).contains(&r) && (c0..c0 + lc).contains(&c);
            ensure(seen[v] == usize::from(inside), || format!("element ({r},{c}) packed {} times", seen[v]))?;
        }
    }
    let zeros = buf.len() - lr * lc;
    ensure(buf.iter().filter(|&&v| v == 0).count() == zeros, || "padding is not zero".into())?;

    // Inner-loop traversal: consecutive k-tiles sit back to back and each
    // tile holds its source elements in the tile layout.
    for tile_r in 0..down {
        for tile_c in 0..across {
            let (outer, inner) = if is_a { (tile_r, tile_c) } else { (tile_c, tile_r) };
            let base = if is_a {
                packed.tile_offset(outer, 0)
            } else {
                packed.tile_offset(0, outer)
            };
            ensure(packed.tile_offset(tile_r, tile_c) == base + inner * tr * tc, || {
                format!("tile ({tile_r},{tile_c}) not contiguous with its neighbors")
            })?;
            let tile = packed.tile(tile_r, tile_c);
            for c in 0..tc {
                for r in 0..tr {
                    let (gr, gc) = (tile_r * tr + r, tile_c * tc + c);
                    let want = if gr < lr && gc < lc { src.get(r0 + gr, c0 + gc) } else { 0 };
                    let got = tile[layout.index(r, c, tr, tc)];
                    ensure(got == want, || format!("tile ({tile_r},{tile_c}) element ({r},{c}) is {got}, want {want}"))?;
                }
            }
        }
    }
    Ok(())
}

fn packing_permutation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xb10c);
    for i in 0..10_000 {
        let rows = rng.gen_range(1..=40);
        let cols = rng.gen_range(1..=40);
        check_packed(&mut rng, rows, cols, i % 2 == 0)?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s, limit 30s"))?;
    Ok(format!("10000 blocks in {secs:.2}s"))
}

fn perf_ordering() -> Outcome {
    let rounds = std::env::var("TILEPACK_PERF_ROUNDS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_REPEATS);
    let cfg = BenchConfig::default();
    let case = |variant, d| BenchCase {
        variant,
        m: d,
        n: d,
        k: d,
        etype: ElementType::F32,
        repeats: rounds,
        seed: 11,
    };
    let medium = run_bench(&[case(Variant::Naive, 1024), case(Variant::Tiling, 1024)], &cfg, 1)
        .map_err(|e| e.to_string())?;
    let large = run_bench(
        &[case(Variant::Tiling, 2048), case(Variant::TilingPacking, 2048)],
        &cfg,
        2,
    )
    .map_err(|e| e.to_string())?;
    ensure(medium.passed() && large.passed(), || {
        format!("variants disagree: {:?} {:?}", medium.mismatches, large.mismatches)
    })?;
    let speedup = medium.results[0].median_ns / medium.results[1].median_ns;
    let packed_gain = large.results[0].median_ns / large.results[1].median_ns;
    let summary = format!(
        "{rounds} rounds: tiling {speedup:.2}x over naive at 1024, tiling_packing {packed_gain:.2}x over tiling at 2048"
    );
    if speedup < 2.0 || packed_gain < 1.0 {
        let mut results = medium.results.clone();
        results.extend(large.results.iter().cloned());
        println!("WARN performance ordering not met ({summary})\n{}", emit_csv(&results));
    }
    Ok(summary)
}

fn syr2k_typed<T: Sample>(n: usize, plan: &GemmPlan, half: Triangle) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let a = Matrix::from_fn(n, n, Default::default(), |_, _| T::sample(&mut rng));
    let b = Matrix::from_fn(n, n, Default::default(), |_, _| T::sample(&mut rng));
    let c0 = Matrix::from_fn(n, n, Default::default(), |_, _| T::sample(&mut rng).widen());
    let alpha = T::Acc::from_f64(1.5);
    let beta = T::Acc::from_f64(-0.5);
    let expected = naive_syr2k(alpha, &a, &b, beta, &c0, half).map_err(|e| e.to_string())?;
    let mut c = c0.clone();
    syr2k(alpha, &a, &b, beta, &mut c, half, plan).map_err(|e| e.to_string())?;
    for col in 0..n {
        for row in 0..n {
            if !half.contains(row, col) {
                let (x, y) = (c.get(row, col), c0.get(row, col));
                ensure(x.to_bits_u64() == y.to_bits_u64(), || {
                    format!("n={n} {half:?}: untouched ({row},{col}) changed {y:?} -> {x:?}")
                })?;
            }
        }
    }
    let err = frobenius_rel_error(&c, &expected).map_err(|e| e.to_string())?;
    ensure(err <= 1e-5, || format!("n={n} {half:?} {:?}: rel error {err:e}", plan.kernel()))?;
    Ok(err)
}

fn syr2k_triangles() -> Outcome {
    let start = Instant::now();
    let cache = CacheConfig::default();
    let mut worst: f64 = 0.0;
    for n in [32, 100] {
        for half in [Triangle::Lower, Triangle::Upper] {
            for kernel in [KernelKind::Generic, KernelKind::OuterProduct] {
                let tile = |e| match kernel {
                    KernelKind::Generic => default_tile(),
                    KernelKind::OuterProduct => default_outer_tile(e),
                };
                let p32 = GemmPlan::derive(&cache, ElementType::F32, tile(ElementType::F32), kernel).unwrap();
                let p64 = GemmPlan::derive(&cache, ElementType::F64, tile(ElementType::F64), kernel).unwrap();
                worst = worst.max(syr2k_typed::<f32>(n, &p32, half)?);
                worst = worst.max(syr2k_typed::<f64>(n, &p64, half)?);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s, limit 30s"))?;
    Ok(format!("worst rel error {worst:.2e}, other triangle untouched"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence sweep", oracle_equivalence),
        ("micro kernel equivalence", micro_equivalence),
        ("operand register budget", register_budget),
        ("schedule model", schedule_model),
        ("block size derivation goldens", derivation_goldens),
        ("packing permutation", packing_permutation),
        ("performance ordering (advisory)", perf_ordering),
        ("syr2k triangle correctness", syr2k_triangles),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
