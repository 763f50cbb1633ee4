use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use c4bandit::{
    c3_select, greedy_oracle, run_single, EllipsoidState, ExperimentConfig, Observation, PolicyKind, RewardSpec,
    World,
};

fn ellipsoid_update(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let world = World::new(cfg.world_config(0).unwrap()).unwrap();
    let ctx = world.draw_contexts(1).unwrap();
    let obs: Vec<Observation> = (0..4)
        .map(|i| Observation {
            context: ctx.context(i),
            discount: 1.0,
            weight: 0.5,
        })
        .collect();
    c.bench_function("ellipsoid_update_d20_k4", |b| {
        b.iter_batched(
            || EllipsoidState::new(20, 0.1, 0.5, 0.1).unwrap(),
            |mut m| {
                m.update(black_box(&obs)).unwrap();
                m
            },
            BatchSize::SmallInput,
        )
    });
}

fn oracle(c: &mut Criterion) {
    let spec = RewardSpec::disjunctive(c4bandit::DiscountProfile::uniform(4).unwrap());
    let weights: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64 / 200.0).collect();
    c.bench_function("greedy_oracle_l200_k4", |b| {
        b.iter(|| greedy_oracle(&spec, black_box(&weights), 4).unwrap())
    });
}

fn selection(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let world = World::new(cfg.world_config(0).unwrap()).unwrap();
    let ctx = world.draw_contexts(1).unwrap();
    let model = EllipsoidState::new(20, 0.1, 0.5, 0.1).unwrap();
    let spec = RewardSpec::disjunctive(cfg.discount_profile().unwrap());
    c.bench_function("c3_select_l200_d20", |b| {
        b.iter(|| c3_select(&model, black_box(&ctx), &spec).unwrap())
    });
}

fn short_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_t500");
    group.sample_size(10);
    for policy in [PolicyKind::C3, PolicyKind::C4Known] {
        let cfg = ExperimentConfig {
            policy,
            horizon: 500,
            ..ExperimentConfig::default()
        };
        group.bench_function(policy.name(), |b| b.iter(|| run_single(&cfg, 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, ellipsoid_update, oracle, selection, short_run);
criterion_main!(benches);
