use num_complex::Complex;
use proptest::prelude::*;

use super::*;
use crate::bench::relative_error;
use crate::kernels::dft_oracle;
use crate::transport::spawn_world;

fn grid(g: &[usize]) -> ProcessGrid {
    ProcessGrid::new(g.to_vec()).unwrap()
}

fn opts() -> PlanOptions {
    PlanOptions::default()
}

fn forward(
    decomposition: Decomposition,
    dims: &[usize],
    g: &[usize],
    kind: TransformKind,
    options: PlanOptions,
    seed: u64,
) -> (GlobalTensor<f64>, GlobalTensor<f64>) {
    let plan = Plan::<f64>::new(decomposition, dims, &grid(g), kind, Direction::Forward, options).unwrap();
    let x = GlobalTensor::random(dims.to_vec(), plan.input_layout().element(), seed);
    let (y, _) = run_global(&plan, &WorldOptions::default(), &x).unwrap();
    (x, y)
}

/// Oracle spectrum of `x`, truncated to the half spectrum for R2C.
fn oracle(x: &GlobalTensor<f64>, kind: TransformKind) -> Vec<Complex<f64>> {
    let dims = x.dims();
    let full = dft_oracle(&x.data().to_complex_f64(), dims, Direction::Forward).unwrap();
    if kind == TransformKind::C2C {
        return full;
    }
    let n = *dims.last().unwrap();
    full.chunks(n).flat_map(|lane| lane[..n / 2 + 1].to_vec()).collect()
}

fn spectrum(y: &GlobalTensor<f64>) -> Vec<Complex<f64>> {
    y.data().to_complex_f64()
}

#[test]
fn single_rank_slab_matches_oracle() {
    let (x, y) = forward(Decomposition::Slab, &[4, 4, 4], &[1], TransformKind::C2C, opts(), 1);
    assert!(relative_error(&spectrum(&y), &oracle(&x, TransformKind::C2C)) < 1e-10);
}

#[test]
fn slab_round_trip_scales_by_n_without_normalization() {
    let o = PlanOptions {
        normalize: false,
        ..opts()
    };
    let g = grid(&[4]);
    let f = plan_slab::<f64>(&[4, 4, 4], 4, TransformKind::C2C, Direction::Forward, o).unwrap();
    let b = plan_slab::<f64>(&[4, 4, 4], 4, TransformKind::C2C, Direction::Backward, o).unwrap();
    assert!(!b.stages().iter().any(|s| matches!(s, Stage::Normalize { .. })));
    let x = GlobalTensor::random(vec![4, 4, 4], ElementKind::Complex, 2);
    let w = WorldOptions::default();
    let (y, _) = run_global(&f, &w, &x).unwrap();
    let (z, _) = run_global(&b, &w, &y).unwrap();
    let scaled: Vec<_> = x.data().to_complex_f64().iter().map(|v| v * 64.0).collect();
    assert!(relative_error(&z.data().to_complex_f64(), &scaled) < 1e-12);
    assert_eq!(g.size(), 4);
}

#[test]
fn slab_with_too_many_ranks_fails() {
    let err = plan_slab::<f64>(&[4, 6, 8], 5, TransformKind::C2C, Direction::Forward, opts()).err();
    assert_eq!(err, Some(Error::SlabTooManyRanks { ranks: 5, n0: 4 }));
}

#[test]
fn pencil_delta_gives_all_ones() {
    let plan = plan_pencil::<f64>(&[8, 8, 8], &grid(&[2, 2]), TransformKind::C2C, Direction::Forward, opts()).unwrap();
    let out = spawn_world(4, |comm| {
        let comms = GridComms::new(comm, plan.grid())?;
        let mut x = DistTensor::zeros(plan.input_layout().clone(), comms.rank());
        if comms.rank() == 0 {
            if let LocalData::Complex(v) = x.data_mut() {
                v[0] = Complex::new(1.0, 0.0);
            }
        }
        let y = plan.execute(&comms, x, &mut TimingBreakdown::default())?;
        Ok(y.data().as_complex().unwrap().to_vec())
    })
    .unwrap();
    for block in out {
        assert_eq!(block.len(), 128);
        assert!(block.iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-14));
    }
}

#[test]
fn pencil_r2c_matches_truncated_oracle() {
    let (x, y) = forward(Decomposition::Pencil, &[8, 4, 6], &[2, 2], TransformKind::R2C, opts(), 3);
    assert_eq!(y.dims(), &[8, 4, 4]);
    assert!(relative_error(&spectrum(&y), &oracle(&x, TransformKind::R2C)) < 1e-10);
}

#[test]
fn pencil_metadata_for_large_r2c() {
    let plan = plan_pencil::<f64>(&[256, 512, 1024], &grid(&[4, 4]), TransformKind::R2C, Direction::Forward, opts()).unwrap();
    assert_eq!(plan.output_layout().lengths(), &[256, 512, 513]);
}

#[test]
fn pencil_has_three_ffts_and_two_transposes() {
    for direction in [Direction::Forward, Direction::Backward] {
        let plan = plan_pencil::<f64>(&[8, 8, 8], &grid(&[2, 2]), TransformKind::C2C, direction, opts()).unwrap();
        let ffts = plan.stages().iter().filter(|s| s.is_fft()).count();
        let transposes = plan.stages().iter().filter(|s| s.is_transpose()).count();
        assert_eq!((ffts, transposes), (3, 2));
        let axes: Vec<usize> = plan
            .stages()
            .iter()
            .filter_map(|s| match s {
                Stage::LocalFft { axis, .. } => Some(*axis),
                _ => None,
            })
            .collect();
        let expected = if direction == Direction::Forward { vec![2, 1, 0] } else { vec![0, 1, 2] };
        assert_eq!(axes, expected);
    }
}

#[test]
fn slab_stage_structure() {
    let plan = plan_slab::<f64>(&[4, 4, 4], 2, TransformKind::C2C, Direction::Forward, opts()).unwrap();
    let kinds: Vec<&str> = plan
        .stages()
        .iter()
        .map(|s| if s.is_fft() { "fft" } else { "t" })
        .collect();
    assert_eq!(kinds, vec!["fft", "fft", "t", "fft"]);
}

#[test]
fn general_specializes_to_pencil_and_slab() {
    for direction in [Direction::Forward, Direction::Backward] {
        for kind in [TransformKind::C2C, TransformKind::R2C, TransformKind::C2R] {
            if super::check_kind(kind, direction).is_err() {
                continue;
            }
            let g = plan_general::<f64>(&[8, 8, 8], &grid(&[2, 2]), kind, direction, opts()).unwrap();
            let p = plan_pencil::<f64>(&[8, 8, 8], &grid(&[2, 2]), kind, direction, opts()).unwrap();
            assert_eq!(g.stages(), p.stages());
            let g = plan_general::<f64>(&[4, 4], &grid(&[2]), kind, direction, opts()).unwrap();
            let s = plan_slab::<f64>(&[4, 4], 2, kind, direction, opts()).unwrap();
            assert_eq!(g.stages(), s.stages());
        }
    }
}

#[test]
fn general_2d_matches_oracle() {
    let (x, y) = forward(Decomposition::General, &[4, 4], &[2], TransformKind::C2C, opts(), 4);
    assert!(relative_error(&spectrum(&y), &oracle(&x, TransformKind::C2C)) < 1e-10);
}

#[test]
fn general_4d_matches_oracle() {
    let (x, y) = forward(Decomposition::General, &[8, 6, 4, 4], &[2, 2, 2], TransformKind::C2C, opts(), 5);
    assert!(relative_error(&spectrum(&y), &oracle(&x, TransformKind::C2C)) < 1e-10);
    let plan = plan_general::<f64>(&[8, 6, 4, 4], &grid(&[2, 2, 2]), TransformKind::C2C, Direction::Forward, opts()).unwrap();
    assert_eq!(plan.stages().iter().filter(|s| s.is_fft()).count(), 4);
    assert_eq!(plan.stages().iter().filter(|s| s.is_transpose()).count(), 3);
}

#[test]
fn random_complex_on_3x2_grid_matches_oracle() {
    let (x, y) = forward(Decomposition::Pencil, &[6, 6, 6], &[3, 2], TransformKind::C2C, opts(), 6);
    assert!(relative_error(&spectrum(&y), &oracle(&x, TransformKind::C2C)) < 1e-10);
}

#[test]
fn zero_in_zero_out() {
    for kind in [TransformKind::C2C, TransformKind::R2C, TransformKind::C2R] {
        let direction = if kind == TransformKind::C2R { Direction::Backward } else { Direction::Forward };
        let plan = plan_pencil::<f64>(&[4, 4, 4], &grid(&[2, 2]), kind, direction, opts()).unwrap();
        let zeros = GlobalTensor::new(
            plan.input_layout().lengths().to_vec(),
            LocalData::zeros(plan.input_layout().element(), plan.input_layout().total()),
        )
        .unwrap();
        let (y, _) = run_global(&plan, &WorldOptions::default(), &zeros).unwrap();
        assert!(y.data().to_complex_f64().iter().all(|v| *v == Complex::new(0.0, 0.0)));
    }
}

fn round_trip(decomposition: Decomposition, dims: &[usize], g: &[usize], kind: TransformKind, options: PlanOptions) -> f64 {
    let (fk, bk) = match kind {
        TransformKind::C2C => (TransformKind::C2C, TransformKind::C2C),
        _ => (TransformKind::R2C, TransformKind::C2R),
    };
    let f = Plan::<f64>::new(decomposition, dims, &grid(g), fk, Direction::Forward, options).unwrap();
    let b = Plan::<f64>::new(decomposition, dims, &grid(g), bk, Direction::Backward, options).unwrap();
    let x = GlobalTensor::random(dims.to_vec(), f.input_layout().element(), 8);
    let w = WorldOptions::default();
    let (y, _) = run_global(&f, &w, &x).unwrap();
    let (z, _) = run_global(&b, &w, &y).unwrap();
    assert_eq!(z.element(), x.element());
    relative_error(&z.data().to_complex_f64(), &x.data().to_complex_f64())
}

#[test]
fn backward_inverts_forward() {
    assert!(round_trip(Decomposition::Pencil, &[6, 4, 5], &[3, 2], TransformKind::C2C, opts()) < 1e-12);
    assert!(round_trip(Decomposition::Pencil, &[8, 8, 8], &[2, 2], TransformKind::R2C, opts()) < 1e-12);
    assert!(round_trip(Decomposition::Pencil, &[8, 8, 7], &[2, 2], TransformKind::R2C, opts()) < 1e-12);
    assert!(round_trip(Decomposition::Slab, &[5, 3, 7], &[3], TransformKind::R2C, opts()) < 1e-12);
    assert!(round_trip(Decomposition::General, &[3, 4, 2, 5], &[2, 1, 3], TransformKind::R2C, opts()) < 1e-12);
}

#[test]
fn constant_field_has_single_dc_entry() {
    let f = plan_pencil::<f64>(&[4, 4, 6], &grid(&[2, 2]), TransformKind::R2C, Direction::Forward, opts()).unwrap();
    let b = plan_pencil::<f64>(&[4, 4, 6], &grid(&[2, 2]), TransformKind::C2R, Direction::Backward, opts()).unwrap();
    let c = 0.75;
    let out = spawn_world(4, |comm| {
        let comms = GridComms::new(comm, f.grid())?;
        let n = f.input_layout().local_len(comms.rank());
        let x = DistTensor::new(f.input_layout().clone(), comms.rank(), LocalData::Real(vec![c; n]))?;
        let mut timing = TimingBreakdown::default();
        let spec = f.execute(&comms, x.clone(), &mut timing)?;
        let dc = spec.get(&[0, 0, 0]);
        let others = spec
            .data()
            .as_complex()
            .unwrap()
            .iter()
            .filter(|v| v.norm() > 1e-12)
            .count();
        let back = b.execute(&comms, spec, &mut timing)?;
        let err = back
            .data()
            .as_real()
            .unwrap()
            .iter()
            .map(|v| (v - c).abs())
            .fold(0.0, f64::max);
        Ok((dc, others, err))
    })
    .unwrap();
    assert!((out[0].0.unwrap() - Complex::new(96.0 * c, 0.0)).norm() < 1e-12);
    assert_eq!(out[0].1, 1);
    for (r, (dc, others, err)) in out.into_iter().enumerate() {
        if r > 0 {
            assert!(dc.is_none());
            assert_eq!(others, 0);
        }
        assert!(err < 1e-14);
    }
}

#[test]
fn corrupted_spectrum_is_rejected() {
    let b = plan_pencil::<f64>(&[4, 4, 4], &grid(&[2, 2]), TransformKind::C2R, Direction::Backward, opts()).unwrap();
    let mut spectrum = GlobalTensor::new(
        b.input_layout().lengths().to_vec(),
        LocalData::zeros(ElementKind::Complex, b.input_layout().total()),
    )
    .unwrap();
    if let LocalData::Complex(v) = spectrum.data_mut() {
        v[0] = Complex::new(1.0, 1.0);
    }
    let err = run_global(&b, &WorldOptions::default(), &spectrum).unwrap_err();
    assert!(matches!(err, Error::NonHermitian { .. }), "{err:?}");
}

#[test]
fn kind_and_direction_must_agree() {
    let g = grid(&[2, 2]);
    for (kind, direction) in [(TransformKind::R2C, Direction::Backward), (TransformKind::C2R, Direction::Forward)] {
        let err = plan_pencil::<f64>(&[4, 4, 4], &g, kind, direction, opts()).err().unwrap();
        assert!(matches!(err, Error::InvalidKindDirection { .. }));
    }
}

#[test]
fn grid_shape_is_checked() {
    let err = plan_pencil::<f64>(&[4, 4, 4, 4], &grid(&[2, 2]), TransformKind::C2C, Direction::Forward, opts()).err();
    assert!(matches!(err, Some(Error::GridMismatch { .. })));
    let err = plan_general::<f64>(&[4, 4, 4], &grid(&[2]), TransformKind::C2C, Direction::Forward, opts()).err();
    assert!(matches!(err, Some(Error::GridMismatch { .. })));
    let err = plan_general::<f64>(&[4], &grid(&[1]), TransformKind::C2C, Direction::Forward, opts()).err();
    assert_eq!(err, Some(Error::RankTooLow(1)));
}

#[test]
fn wrong_input_layout_is_rejected() {
    let plan = plan_pencil::<f64>(&[4, 4, 4], &grid(&[2, 2]), TransformKind::C2C, Direction::Forward, opts()).unwrap();
    let err = spawn_world(4, |comm| {
        let comms = GridComms::new(comm, plan.grid())?;
        let x = DistTensor::<f64>::zeros(plan.output_layout().clone(), comms.rank());
        plan.execute(&comms, x, &mut TimingBreakdown::default())
    })
    .unwrap_err();
    assert!(matches!(err, Error::LayoutMismatch(_)));
}

#[test]
fn validation_rejects_non_finite_input() {
    let o = PlanOptions {
        validate: true,
        ..opts()
    };
    let plan = plan_slab::<f64>(&[2, 2], 1, TransformKind::C2C, Direction::Forward, o).unwrap();
    let x = GlobalTensor::new(
        vec![2, 2],
        LocalData::Complex(vec![Complex::new(0.0, 0.0), Complex::new(f64::NAN, 0.0), Complex::default(), Complex::default()]),
    )
    .unwrap();
    let err = run_global(&plan, &WorldOptions::default(), &x).unwrap_err();
    assert_eq!(err, Error::NonFinite(1));
}

#[test]
fn loop_variables_follow_the_recurrences() {
    let dims = [8usize, 12, 6, 4];
    let g = [2usize, 3, 2];
    let plan = plan_general::<f64>(&dims, &grid(&g), TransformKind::C2C, Direction::Forward, opts()).unwrap();
    let vars: Vec<LoopVars> = plan.stages().iter().filter_map(|s| s.loop_vars(0)).collect();
    let local = dims.iter().product::<usize>() / 12;
    for v in &vars {
        assert_eq!(v.h * v.n * v.h_prime, local);
    }
    assert_eq!((vars[0].h, vars[0].h_prime), (4 * 4 * 3, 1));
    for i in (1..dims.len()).rev() {
        let (cur, next) = (vars[dims.len() - 1 - i], vars[dims.len() - i]);
        let q = dims[i - 1] / g[i - 1];
        assert_eq!(next.h, cur.h / q);
        assert_eq!(next.h_prime, cur.h_prime * (dims[i] / g[i - 1]));
    }

    let back = plan_general::<f64>(&dims, &grid(&g), TransformKind::C2C, Direction::Backward, opts()).unwrap();
    let vars: Vec<LoopVars> = back.stages().iter().filter_map(|s| s.loop_vars(0)).collect();
    assert_eq!((vars[0].h, vars[0].h_prime), (1, 6 * 2 * 2));
    for i in 0..dims.len() - 1 {
        let (cur, next) = (vars[i], vars[i + 1]);
        assert_eq!(next.h, cur.h * (dims[i] / g[i]));
        assert_eq!(next.h_prime, cur.h_prime / (dims[i + 1] / g[i]));
    }
}

#[test]
fn lane_strategies_agree() {
    let contiguous = PlanOptions {
        lanes: LaneStrategy::Contiguous,
        ..opts()
    };
    let (_, a) = forward(Decomposition::Pencil, &[6, 5, 4], &[2, 3], TransformKind::C2C, opts(), 9);
    let (_, b) = forward(Decomposition::Pencil, &[6, 5, 4], &[2, 3], TransformKind::C2C, contiguous, 9);
    assert!(relative_error(&spectrum(&a), &spectrum(&b)) < 1e-12);
}

#[test]
fn exchange_mode_does_not_change_results() {
    let base = forward(Decomposition::Pencil, &[6, 5, 4], &[2, 3], TransformKind::C2C, opts(), 10).1;
    for mode in [ExchangeMode::Staged, ExchangeMode::Pipelined] {
        let o = PlanOptions {
            exchange: ExchangeOptions {
                mode,
                chunks: 3,
                staging_buffers: 2,
            },
            ..opts()
        };
        assert_eq!(forward(Decomposition::Pencil, &[6, 5, 4], &[2, 3], TransformKind::C2C, o, 10).1, base);
    }
}

#[test]
fn grid_choice_does_not_change_results() {
    let reference = forward(Decomposition::Pencil, &[8, 8, 8], &[1, 1], TransformKind::C2C, opts(), 11).1;
    for g in [[1, 8], [2, 4], [4, 2], [8, 1]] {
        let y = forward(Decomposition::Pencil, &[8, 8, 8], &g, TransformKind::C2C, opts(), 11).1;
        assert!(relative_error(&spectrum(&y), &spectrum(&reference)) < 1e-12);
    }
}

#[test]
fn single_precision_is_within_tolerance() {
    let plan = plan_pencil::<f32>(&[4, 6, 8], &grid(&[2, 2]), TransformKind::C2C, Direction::Forward, opts()).unwrap();
    let x = GlobalTensor::<f32>::random(vec![4, 6, 8], ElementKind::Complex, 12);
    let (y, _) = run_global(&plan, &WorldOptions::default(), &x).unwrap();
    let want = dft_oracle(&x.data().to_complex_f64(), &[4, 6, 8], Direction::Forward).unwrap();
    assert!(relative_error(&y.data().to_complex_f64(), &want) < 1e-4);
}

#[test]
fn output_layout_is_declared_frequency_layout() {
    let plan = plan_pencil::<f64>(&[8, 4, 6], &grid(&[2, 2]), TransformKind::R2C, Direction::Forward, opts()).unwrap();
    let out = plan.output_layout();
    assert_eq!(out.axis_grid(), &[None, Some(0), Some(1)]);
    assert_eq!(out.lengths(), &[8, 4, 4]);
    assert!(out.is_frequency());
    let x = GlobalTensor::random(vec![8, 4, 6], ElementKind::Real, 13);
    let (y, _) = run_global(&plan, &WorldOptions::default(), &x).unwrap();
    let want = oracle(&x, TransformKind::R2C);
    for (coord, flat) in [([0usize, 0, 0], 0usize), ([7, 3, 3], 127), ([5, 2, 1], (5 * 4 + 2) * 4 + 1)] {
        let (r, off) = out.local_index(&coord).unwrap();
        let block = DistTensor::from_global(&y, out.clone(), r).unwrap();
        assert_eq!(block.data().as_complex().unwrap()[off], y.data().as_complex().unwrap()[flat]);
        assert!((want[flat] - y.data().as_complex().unwrap()[flat]).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn parseval_holds(d0 in 1usize..6, d1 in 1usize..6, d2 in 1usize..6, p0 in 1usize..3, p1 in 1usize..3, seed in 0u64..100) {
        let (x, y) = forward(Decomposition::Pencil, &[d0, d1, d2], &[p0, p1], TransformKind::C2C, opts(), seed);
        let n = (d0 * d1 * d2) as f64;
        let ex: f64 = x.data().to_complex_f64().iter().map(|v| v.norm_sqr()).sum();
        let ey: f64 = spectrum(&y).iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((n * ex - ey).abs() <= 1e-10 * ey);
    }

    #[test]
    fn forward_matches_oracle_on_random_shapes(d0 in 1usize..6, d1 in 1usize..6, d2 in 1usize..7, p0 in 1usize..3, p1 in 1usize..4, real in any::<bool>()) {
        let kind = if real { TransformKind::R2C } else { TransformKind::C2C };
        let (x, y) = forward(Decomposition::General, &[d0, d1, d2], &[p0, p1], kind, opts(), 1);
        prop_assert!(relative_error(&spectrum(&y), &oracle(&x, kind)) < 1e-10);
    }

    #[test]
    fn round_trip_is_identity(d0 in 1usize..6, d1 in 1usize..6, d2 in 1usize..7, p in 1usize..4, real in any::<bool>()) {
        prop_assume!(p <= d0);
        let kind = if real { TransformKind::R2C } else { TransformKind::C2C };
        prop_assert!(round_trip(Decomposition::Slab, &[d0, d1, d2], &[p], kind, opts()) < 1e-12);
    }
}
