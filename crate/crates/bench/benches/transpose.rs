use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dfft_bench::{complex_signal, execute_once, forward_plan, global_input};
use dfft_core::exchange::{local_transpose, ExchangeOptions};
use dfft_core::{Decomposition, ExchangeMode, PlanOptions, TransformKind, WorldOptions};

fn local(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_transpose");
    for (rows, cols) in [(64usize, 64usize), (256, 32)] {
        let data = complex_signal(rows * cols, 4);
        group.bench_function(BenchmarkId::from_parameter(format!("{rows}x{cols}")), |b| {
            b.iter(|| local_transpose(&data, rows, cols, 1).unwrap());
        });
    }
    group.finish();
}

fn distributed(c: &mut Criterion) {
    let mut group = c.benchmark_group("pencil_32cubed_2x2");
    group.sample_size(20);
    let dims = [32, 32, 32];
    let input = global_input(&dims, TransformKind::C2C, 5);
    let world = WorldOptions::default();
    for mode in [ExchangeMode::Direct, ExchangeMode::Staged, ExchangeMode::Pipelined] {
        let options = PlanOptions {
            exchange: ExchangeOptions { mode, ..ExchangeOptions::default() },
            ..PlanOptions::default()
        };
        let plan = forward_plan(Decomposition::Pencil, &dims, &[2, 2], TransformKind::C2C, options);
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| execute_once(&plan, &world, &input));
        });
    }
    group.finish();
}

criterion_group!(benches, local, distributed);
criterion_main!(benches);
