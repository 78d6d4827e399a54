use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use orbatlas::atlas::verify_atlas_with;
use orbatlas::catalog::circle_atlas;
use orbatlas::exec::Execution;
use orbatlas::fractions::{build_groupoid_with, check_ore_with, AtlasCategory};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn verification(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_atlas");
    for arcs in [2, 4, 8] {
        let atlas = circle_atlas(arcs, 3, &[(0, 0)]);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, arcs), &atlas, |b, a| b.iter(|| verify_atlas_with(a, exec)));
        }
    }
    group.finish();
}

fn ore(c: &mut Criterion) {
    let mut group = c.benchmark_group("ore");
    for arcs in [2, 4, 8] {
        let atlas = circle_atlas(arcs, 5, &[]);
        let cat = AtlasCategory::new(&atlas);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, arcs), &cat, |b, cat| b.iter(|| check_ore_with(cat, exec)));
        }
    }
    group.finish();
}

fn groupoid(c: &mut Criterion) {
    let mut group = c.benchmark_group("groupoid_of_fractions");
    group.sample_size(10);
    for arcs in [2, 4] {
        let atlas = circle_atlas(arcs, 3, &[(0, 0)]);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, arcs), &atlas, |b, a| b.iter(|| build_groupoid_with(a, exec)));
        }
    }
    group.finish();
}

criterion_group!(benches, verification, ore, groupoid);
criterion_main!(benches);
