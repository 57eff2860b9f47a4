use proptest::prelude::*;

use tilepack::bench::random_problem;
use tilepack::micro_kernel::{build_schedule, validate_schedule};
use tilepack::{
    gemm, gemm_tiled, naive_gemm, naive_syr2k, syr2k, AccumulatorGrid, BlockParams, ElementType, GemmPlan,
    KernelKind, Matrix, MicroShape, StorageOrder, TileLayout, TileLayouts, Triangle,
};

fn layout() -> impl Strategy<Value = TileLayout> {
    prop_oneof![Just(TileLayout::ColMajor), Just(TileLayout::RowMajor)]
}

fn order() -> impl Strategy<Value = StorageOrder> {
    prop_oneof![Just(StorageOrder::ColumnMajor), Just(StorageOrder::RowMajor)]
}

fn reorder<T: tilepack::Scalar>(m: &Matrix<T>, order: StorageOrder) -> Matrix<T> {
    Matrix::from_fn(m.rows(), m.cols(), order, |r, c| m.get(r, c))
}

/// Plan with blocks a few tiles wide, or `None` when infeasible.
fn plan(
    etype: ElementType,
    kernel: KernelKind,
    (mr, kr, nr): (usize, usize, usize),
    (bm, bk, bn): (usize, usize, usize),
    layouts: TileLayouts,
) -> Option<GemmPlan> {
    let tile = tilepack::TileParams::new(mr, kr, nr).ok()?;
    let shape = MicroShape::new(mr, kr, nr, etype).ok()?;
    let grid = match kernel {
        KernelKind::Generic => AccumulatorGrid::default_for(etype),
        KernelKind::OuterProduct => AccumulatorGrid::fit(&shape).ok()?,
    };
    let block = BlockParams {
        mc: bm * mr,
        kc: bk * kr,
        nc: bn * nr,
        kl: 1,
    };
    GemmPlan::new(etype, block, tile, kernel, grid, layouts).ok()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn blocked_gemm_matches_oracle_exactly_for_i8(
        (m, n, k) in (1usize..30, 1usize..30, 1usize..30),
        tile in (1usize..5, 1usize..5, 1usize..5),
        blocks in (1usize..4, 1usize..4, 1usize..4),
        (la, lb, lc) in (layout(), layout(), layout()),
        (oa, ob, oc) in (order(), order(), order()),
        outer in any::<bool>(),
        alpha in -3i32..4,
        beta in -2i32..3,
        seed in any::<u64>(),
    ) {
        let kernel = if outer { KernelKind::OuterProduct } else { KernelKind::Generic };
        // Outer-product tiles hold whole 4x4 accumulators.
        let tile = if outer {
            (4 * tile.0, 4 * tile.1, 4 * tile.2)
        } else {
            (2 * tile.0 - 1, 4 * tile.1, 2 * tile.2 - 1)
        };
        let layouts = TileLayouts { a: la, b: lb, c: lc };
        let plan = plan(ElementType::I8ToI32, kernel, tile, blocks, layouts);
        prop_assume!(plan.is_some());
        let plan = plan.unwrap();
        let (a, b, c0) = random_problem::<i8>(m, n, k, seed);
        let (a, b, c0) = (reorder(&a, oa), reorder(&b, ob), reorder(&c0, oc));
        let expected = naive_gemm(alpha, &a, &b, beta, &c0).unwrap();
        let mut c = c0.clone();
        gemm(alpha, &a, &b, beta, &mut c, &plan).unwrap();
        prop_assert_eq!(c.to_col_major_vec(), expected.to_col_major_vec());
        let mut t = c0.clone();
        gemm_tiled(alpha, &a, &b, beta, &mut t, &plan).unwrap();
        prop_assert_eq!(t.to_col_major_vec(), expected.to_col_major_vec());
    }

    #[test]
    fn i16_products_wrap_like_the_oracle(
        (m, n, k) in (1usize..20, 1usize..20, 1usize..80),
        seed in any::<u64>(),
    ) {
        let plan = plan(ElementType::I16ToI32, KernelKind::OuterProduct, (8, 10, 16), (2, 2, 1), TileLayouts::default())
            .unwrap();
        let (a, b, c0) = random_problem::<i16>(m, n, k, seed);
        let expected = naive_gemm(1, &a, &b, 1, &c0).unwrap();
        let mut c = c0.clone();
        gemm(1, &a, &b, 1, &mut c, &plan).unwrap();
        prop_assert_eq!(c, expected);
    }

    #[test]
    fn feasible_schedules_have_no_violations(
        v in 1usize..9,
        h in 1usize..9,
        steps in 1usize..17,
        etype in prop_oneof![
            Just(ElementType::F32),
            Just(ElementType::F64),
            Just(ElementType::I16ToI32),
            Just(ElementType::I8ToI32),
        ],
    ) {
        let (acc_rows, acc_cols) = etype.acc_shape();
        let shape = MicroShape::new(v * acc_rows, steps * etype.rank(), h * acc_cols, etype).unwrap();
        let grid = AccumulatorGrid::fit(&shape).unwrap();
        let sched = build_schedule(&shape, &grid).unwrap();
        let report = validate_schedule(&sched, &grid);
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
        prop_assert!(report.min_cycles * 2 >= sched.issues.len());
        prop_assert!(grid.accumulators() <= 8);
        prop_assert!(grid.operand_register_demand(&shape) <= 32);
    }

    #[test]
    fn syr2k_touches_one_triangle(
        n in 1usize..24,
        k in 1usize..24,
        lower in any::<bool>(),
        outer in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let half = if lower { Triangle::Lower } else { Triangle::Upper };
        let kernel = if outer { KernelKind::OuterProduct } else { KernelKind::Generic };
        let tile = if outer { (8, 4, 16) } else { (4, 8, 4) };
        let plan = plan(ElementType::I8ToI32, kernel, tile, (2, 2, 2), TileLayouts::default()).unwrap();
        let (a, b, c0) = random_problem::<i8>(n, n, k, seed);
        let b = Matrix::from_fn(n, k, StorageOrder::ColumnMajor, |r, c| b.get(c % b.rows(), r % b.cols()));
        let expected = naive_syr2k(3, &a, &b, -1, &c0, half).unwrap();
        let mut c = c0.clone();
        syr2k(3, &a, &b, -1, &mut c, half, &plan).unwrap();
        prop_assert_eq!(c, expected);
    }
}

#[test]
fn float_gemm_with_row_major_operands() {
    let (a, b, c0) = random_problem::<f64>(45, 38, 70, 5);
    let a = reorder(&a, StorageOrder::RowMajor);
    let plan = plan(ElementType::F64, KernelKind::OuterProduct, (8, 5, 8), (3, 4, 2), TileLayouts::default()).unwrap();
    let expected = naive_gemm(0.5, &a, &b, 2.0, &c0).unwrap();
    let mut c = c0.clone();
    gemm(0.5, &a, &b, 2.0, &mut c, &plan).unwrap();
    assert!(tilepack::frobenius_rel_error(&c, &expected).unwrap() < 1e-13);
}
