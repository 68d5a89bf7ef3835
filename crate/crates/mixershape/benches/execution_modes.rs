//! Serial versus parallel throughput for the post-processing paths that
//! fan out over independent work items: posterior radius summaries and
//! multi-chain sampling. Run with `cargo bench` (parallel feature on by
//! default) and `cargo bench --no-default-features` for the serial-only
//! build; within one build the `serial` and `parallel` groups compare the
//! two execution modes directly.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mixershape::boundary::{BoundaryParams, ClampParams};
use mixershape::diagnostics::{default_probs, radius_quantiles};
use mixershape::exec::Execution;
use mixershape::inference::{
    ChainInit, ForwardFailure, ForwardModel, PcnOptions, PriorSpec, RunOptions, Sampler,
    TargetDensity,
};

const DIM: usize = 80;
const N_SAMPLES: usize = 500;

fn synthetic_rows(rng: &mut StdRng) -> Vec<Vec<f64>> {
    (0..N_SAMPLES)
        .map(|_| (0..DIM).map(|_| rng.random_range(-0.05..0.05)).collect())
        .collect()
}

fn bench_radius_quantiles(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(7);
    let rows = synthetic_rows(&mut rng);
    let angles: Vec<f64> = (0..360).map(f64::from).collect();
    let probs = default_probs();
    let clamp = ClampParams::new(0.5, 1.5, 0.1).unwrap();

    let mut group = c.benchmark_group("radius_quantiles");
    group.bench_function("serial", |b| {
        b.iter_batched(
            || rows.clone(),
            |rows| {
                let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
                radius_quantiles(&refs, 1.0, &clamp, &angles, &probs, Execution::Serial).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter_batched(
            || rows.clone(),
            |rows| {
                let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
                radius_quantiles(&refs, 1.0, &clamp, &angles, &probs, Execution::Parallel).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

/// Prior-only targets never touch the forward model, so the stub may panic.
struct NeverCalled;

impl ForwardModel for NeverCalled {
    fn evaluate(&self, _params: &BoundaryParams) -> Result<Vec<f64>, ForwardFailure> {
        unreachable!("prior-only sampling must not call the forward model")
    }

    fn output_len(&self) -> usize {
        0
    }
}

fn bench_multi_chain(c: &mut Criterion) {
    let prior = PriorSpec::new(16, 1.0).unwrap();
    let sampler = Sampler::new(
        &NeverCalled,
        prior,
        1.0,
        TargetDensity::PriorOnly,
        PcnOptions::default(),
    )
    .unwrap();
    let runs: Vec<RunOptions> = (0..4)
        .map(|i| RunOptions {
            n_samples: 2000,
            seed: 11,
            stream: i,
            init: ChainInit::Prior,
            ..RunOptions::default()
        })
        .collect();

    let mut group = c.benchmark_group("prior_chains_x4");
    group.bench_function("serial", |b| {
        b.iter(|| sampler.run_many(&runs, Execution::Serial).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| sampler.run_many(&runs, Execution::Parallel).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_radius_quantiles, bench_multi_chain);
criterion_main!(benches);
