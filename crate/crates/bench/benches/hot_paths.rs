use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aoi_marl::env::{EnvConfig, EnvState};
use aoi_marl::marl::{Algorithm, Learner, TrainConfig, Trainer};
use aoi_marl::nn::{DenseNet, OutputActivation};
use aoi_marl::reward::RewardWeights;

fn env_step(c: &mut Criterion) {
    let config = EnvConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fresh = EnvState::init_episode(config.clone(), &mut rng).unwrap();
    let actions: Vec<Vec<f64>> = (0..config.num_platoons)
        .map(|_| (0..config.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    c.bench_function("env_step_p4_k3", |b| {
        b.iter_batched_ref(
            || fresh.clone(),
            |env| black_box(env.step(&actions, &mut rng).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

fn dense(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = DenseNet::new(&[15, 256, 128, 5], OutputActivation::Tanh, &mut rng).unwrap();
    let input = Array2::from_shape_fn((64, 15), |_| rng.random_range(-1.0..1.0));
    let upstream = Array2::from_shape_fn((64, 5), |_| rng.random_range(-1.0..1.0));
    c.bench_function("dense_forward_b64", |b| {
        b.iter(|| black_box(net.forward_batch(input.clone()).unwrap()))
    });
    let trace = net.forward_batch(input.clone()).unwrap();
    c.bench_function("dense_backward_b64", |b| {
        b.iter(|| black_box(net.backward(&trace, &upstream).unwrap()))
    });
}

fn learner_update(c: &mut Criterion) {
    let env = EnvConfig {
        num_platoons: 2,
        followers_per_platoon: 2,
        num_subchannels: 2,
        episode_slots: 50,
        ..EnvConfig::default()
    };
    let train = TrainConfig {
        episodes: 4,
        batch_size: 64,
        actor_hidden: vec![64, 64],
        local_critic_hidden: vec![64, 64],
        global_critic_hidden: vec![64, 64],
        ..TrainConfig::default()
    };
    let mut play = Trainer::new(
        Algorithm::Random,
        env.clone(),
        train.clone(),
        RewardWeights::default(),
        3,
    )
    .unwrap();
    for _ in 0..4 {
        play.run_episode().unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut learner = Learner::new(Algorithm::ModifiedMaddpgTdec, &env, &train, &mut rng).unwrap();
    let mut diagnostics = Default::default();
    c.bench_function("tdec_update_b64", |b| {
        b.iter(|| {
            let batch = play.buffer().sample(64, &mut rng).unwrap();
            black_box(
                learner
                    .update(&batch, true, &train, &mut rng, &mut diagnostics)
                    .unwrap(),
            )
        })
    });
}

criterion_group!(benches, env_step, dense, learner_update);
criterion_main!(benches);
