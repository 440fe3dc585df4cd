use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use portmap_bench::two_level_instances;
use portmap_core::{oracle_throughput, simulate_bottleneck};
use std::hint::black_box;

fn bottleneck_vs_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("throughput");
    for ports in [4usize, 8, 10] {
        let instances = two_level_instances(ports, 4, 64, 1);
        group.bench_with_input(
            BenchmarkId::new("bottleneck", ports),
            &instances,
            |b, xs| {
                b.iter(|| {
                    for (m2, e2) in xs {
                        black_box(simulate_bottleneck(m2, e2).unwrap());
                    }
                })
            },
        );
        group.bench_with_input(
            BenchmarkId::new("max_flow_oracle", ports),
            &instances,
            |b, xs| {
                b.iter(|| {
                    for (m2, e2) in xs {
                        black_box(oracle_throughput(m2, e2).unwrap());
                    }
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bottleneck_vs_oracle);
criterion_main!(benches);
