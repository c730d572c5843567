use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gffm::exec::{map_replicates, map_replicates_sequential};
use gffm::fieldsim::{FieldSampler, Subdivision};
use gffm::fps::FpsSampler;
use gffm::lattice::{grid, GridShape};
use gffm::metric::{annotate_local_times, two_set};
use gffm::stats::{Lane, RandomStream};
use gffm::verify::fixtures;

fn two_set_replicates(c: &mut Criterion) {
    let (net, bc) = grid(GridShape { rows: 16, cols: 32, periodic: false }).unwrap();
    let sampler = FieldSampler::new(&net, &bc).unwrap();
    let p = bc.partition().unwrap().clone();
    let one = |r: u64| {
        let mut s = RandomStream::new(7, r, Lane::Field);
        let ann = annotate_local_times(&net, sampler.sample(&mut s), &mut s.lane(Lane::LocalTime)).unwrap();
        two_set(&net, &ann, &p).unwrap()
    };

    let mut group = c.benchmark_group("lattice_two_set");
    for n in [64usize, 256] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| black_box(map_replicates(n, one)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_replicates_sequential(n, one)))
        });
    }
    group.finish();
}

fn fps_replicates(c: &mut Criterion) {
    let (net, bc) = fixtures::bridge5(0.5, 0.0);
    let p = bc.partition().unwrap().clone();
    let sampler = FpsSampler::new(&net, &bc, Subdivision::Uniform(64), p.hat.clone()).unwrap();
    let one = |r: u64| {
        let sample = sampler.sample(7, r).unwrap();
        let set = sampler.explore(&sample, -1.0).unwrap();
        sampler.bracketed_resistance(&set, &p.check).unwrap()
    };

    let mut group = c.benchmark_group("fps_bracket");
    for n in [256usize, 1024] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| black_box(map_replicates(n, one)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(map_replicates_sequential(n, one)))
        });
    }
    group.finish();
}

criterion_group!(benches, two_set_replicates, fps_replicates);
criterion_main!(benches);
