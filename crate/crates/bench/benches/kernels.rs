use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use dfft_bench::{complex_signal, real_signal};
use dfft_core::kernels::{fft_batched, rfft_1d, BatchSpec};
use dfft_core::{Direction, FftPlanner};

fn one_dimensional(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_1d");
    // Radix-2, mixed radix and Bluestein paths.
    for n in [256usize, 1024, 4096, 360, 1000, 1009] {
        let planner = FftPlanner::<f64>::new();
        let fft = planner.plan(n, Direction::Forward).unwrap();
        let input = complex_signal(n, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &input, |b, input| {
            let mut buf = input.clone();
            b.iter(|| fft.process(&mut buf));
        });
    }
    group.finish();
}

fn real_input(c: &mut Criterion) {
    let mut group = c.benchmark_group("rfft_1d");
    for n in [256usize, 1024, 1000] {
        let input = real_signal(n, 2);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| rfft_1d(&input).unwrap());
        });
    }
    group.finish();
}

fn batched(c: &mut Criterion) {
    let mut group = c.benchmark_group("batched_64x64");
    let data = complex_signal(64 * 64, 3);
    let specs = [
        ("contiguous", BatchSpec::contiguous(64, 64)),
        ("strided", BatchSpec { length: 64, stride: 64, dist: 1, count: 64 }),
    ];
    for (name, spec) in specs {
        group.bench_function(name, |b| {
            let mut buf = data.clone();
            b.iter(|| fft_batched(&mut buf, spec, Direction::Forward).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, one_dimensional, real_input, batched);
criterion_main!(benches);
