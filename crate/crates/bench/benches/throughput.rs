use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use truncdist::distinguish::{mc_advantage, Distinguisher};
use truncdist::exact::{exact_advantage, exact_advantage_f64};
use truncdist::oracle::sample_reply_sequence;
use truncdist::profile::enumerate_profiles;
use truncdist::{Params, World};

fn enumeration(c: &mut Criterion) {
    let mut g = c.benchmark_group("enumerate_profiles");
    for q in [20u64, 30, 40] {
        let params = Params::new(12, 4, q).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(q), &params, |b, p| {
            b.iter(|| enumerate_profiles(p, false).unwrap().count())
        });
    }
    g.finish();
}

fn exact(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_advantage");
    g.sample_size(10);
    for q in [16u64, 24, 32] {
        let params = Params::new(12, 4, q).unwrap();
        g.bench_with_input(BenchmarkId::new("rational", q), &params, |b, p| {
            b.iter(|| exact_advantage(black_box(p)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("float", q), &params, |b, p| {
            b.iter(|| exact_advantage_f64(black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_reply_sequence");
    for (n, q) in [(16u32, 64u64), (32, 256), (48, 1024)] {
        let params = Params::new(n, n / 2, q).unwrap();
        g.throughput(Throughput::Elements(q));
        for world in World::BOTH {
            g.bench_function(BenchmarkId::new(world.to_string(), n), |b| {
                let mut seed = 0u64;
                b.iter(|| {
                    seed += 1;
                    sample_reply_sequence(&params, world, seed)
                })
            });
        }
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("mc_advantage");
    g.sample_size(10);
    let params = Params::new(8, 2, 64).unwrap();
    let trials = 10_000;
    g.throughput(Throughput::Elements(2 * trials));
    for d in [
        Distinguisher::LikelihoodRatio,
        Distinguisher::Col2Threshold { theta: 32.0 },
    ] {
        g.bench_function(d.label(), |b| {
            b.iter(|| mc_advantage(&d, &params, trials, 1).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, enumeration, exact, sampling, monte_carlo);
criterion_main!(benches);
