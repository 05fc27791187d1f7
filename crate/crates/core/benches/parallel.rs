//! Parallel vs sequential execution of the three hot paths. Both modes give
//! bit-identical results; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wipcrit::criteria::{gordin_block, MonteCarlo};
use wipcrit::donsker::simulate_paths;
use wipcrit::projector::exact_esn_norms;
use wipcrit::{auto_cycle_length, build_system, make_preset, Execution, Preset, StreamSeed, SystemModel};

const MODES: [Execution; 2] = [Execution::Parallel, Execution::Sequential];

fn model(preset: Preset, k: usize, n_max: u64) -> SystemModel {
    let fam = make_preset(preset, k).unwrap().construction().unwrap();
    build_system(&fam, auto_cycle_length(&fam).unwrap(), n_max).unwrap()
}

fn monte_carlo_block(c: &mut Criterion) {
    let m = model(Preset::Ce2, 4, 1 << 16);
    let mut g = c.benchmark_group("gordin_block_ce2_k4");
    g.sample_size(10);
    for exec in MODES {
        let mc = MonteCarlo::new(StreamSeed::new(1, 1), 20_000, exec).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(exec), &mc, |b, mc| {
            b.iter(|| gordin_block(&m, mc, black_box(0), 1023).unwrap())
        });
    }
    g.finish();
}

fn donsker_paths(c: &mut Criterion) {
    let m = model(Preset::Ce1, 6, 4096);
    let mut g = c.benchmark_group("simulate_paths_ce1_k6");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(exec), &exec, |b, &exec| {
            b.iter(|| simulate_paths(&m, black_box(4096), 8, 2000, StreamSeed::new(1, 2), exec).unwrap())
        });
    }
    g.finish();
}

fn exact_curve(c: &mut Criterion) {
    let m = model(Preset::Ce2, 4, 1 << 16);
    let mut g = c.benchmark_group("exact_esn_norms_ce2_k4");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(exec), &exec, |b, &exec| {
            b.iter(|| exact_esn_norms(&m, black_box(1 << 16), exec))
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo_block, donsker_paths, exact_curve);
criterion_main!(benches);
