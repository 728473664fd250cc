use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmesh::experiments::sweep_with_threads;
use qmesh::topology::generate;
use qmesh::{
    analytic_success, exact_chain_success, random_input, run_session, EntanglementDegree, Mode,
    QuantumMode, SimConfig, SweepConfig, Topology, TopologyConfig,
};

fn chain(c: &mut Criterion) {
    let n = EntanglementDegree::new(0.7).unwrap();
    c.bench_function("analytic_success/100_hops", |b| {
        b.iter(|| analytic_success(black_box(100), n).unwrap())
    });
    let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    c.bench_function("oracle/4_hops", |b| {
        b.iter(|| exact_chain_success(black_box(4), n, one, zero).unwrap())
    });
}

fn sessions(c: &mut Criterion) {
    let (topo, src, dst) = Topology::walkthrough();
    let n = EntanglementDegree::new(0.8).unwrap();
    for (name, mode, quantum) in [
        (
            "session/walkthrough_tracked",
            Mode::Piggyback,
            QuantumMode::Tracked,
        ),
        (
            "session/walkthrough_exact",
            Mode::Piggyback,
            QuantumMode::Exact,
        ),
        (
            "session/walkthrough_separate",
            Mode::Separate,
            QuantumMode::Tracked,
        ),
    ] {
        let cfg = SimConfig {
            mode,
            quantum,
            n,
            ..SimConfig::default()
        };
        c.bench_function(name, |b| {
            b.iter_batched(
                || ChaCha8Rng::seed_from_u64(1),
                |mut rng| {
                    let input = random_input(&mut rng);
                    run_session(&topo, src, dst, &input, &cfg, &mut rng).unwrap()
                },
                BatchSize::SmallInput,
            )
        });
    }

    let g = generate(&TopologyConfig::new(200, 200.0, 0.8, 8)).unwrap();
    let cfg = SimConfig {
        n,
        ..SimConfig::default()
    };
    c.bench_function("session/random_200_8_hops", |b| {
        b.iter_batched(
            || ChaCha8Rng::seed_from_u64(2),
            |mut rng| {
                let input = random_input(&mut rng);
                run_session(&g.topology, g.source, g.dest, &input, &cfg, &mut rng).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn topology(c: &mut Criterion) {
    c.bench_function("generate/200_nodes", |b| {
        b.iter(|| generate(&TopologyConfig::new(200, 200.0, 0.8, black_box(9))).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let cfg = SweepConfig {
        node_counts: vec![50, 100],
        p_values: vec![0.8],
        n_values: vec![0.9],
        runs: 10,
        ..SweepConfig::default()
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("small_1_thread", |b| {
        b.iter(|| sweep_with_threads(&cfg, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, chain, sessions, topology, sweeps);
criterion_main!(benches);
