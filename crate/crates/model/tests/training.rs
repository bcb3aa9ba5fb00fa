use csp_autodiff::{ParamStore, Tape};
use csp_core::{generate_instance, CoverageSpec, CspInstance, SpecGenerator};
use csp_model::trainer::{
    epoch_checkpoint_path, greedy_costs, reinforce_batch_loss, train, validate, validation_set, TrainConfig,
};
use csp_model::{init_params, load_model, rollout, rollout_on_tape, Decode, EncoderConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny() -> EncoderConfig {
    EncoderConfig {
        d_h: 8,
        num_layers: 1,
        num_heads: 2,
        d_ff: 16,
    }
}

fn tiny_train() -> TrainConfig {
    TrainConfig {
        model: tiny(),
        n_cities: 8,
        spec: SpecGenerator::Fixed(CoverageSpec::KNearest { k: 2 }),
        batch_size: 4,
        epochs: 3,
        steps_per_epoch: 3,
        lr: 1e-2,
        validation_size: 10,
        seed: 5,
        record_wall_time: false,
    }
}

fn batch(n: usize, b: usize) -> Vec<CspInstance> {
    (0..b)
        .map(|i| generate_instance(n, &CoverageSpec::KNearest { k: 1 }, 100 + i as u64).unwrap())
        .collect()
}

/// Loss recomputed with the sampled actions replayed.
fn replayed_loss(p: &ParamStore, base_costs: &[f64], insts: &[CspInstance], tours: &[Vec<usize>]) -> f64 {
    let b = insts.len() as f64;
    insts
        .iter()
        .zip(tours)
        .zip(base_costs)
        .map(|((inst, tour), base)| {
            let r = rollout(p, &tiny(), inst, Decode::Forced(tour)).unwrap();
            (r.cost - base) * r.log_prob / b
        })
        .sum()
}

#[test]
fn batch_loss_gradient_matches_finite_differences() {
    let cfg = tiny();
    let p = init_params(&cfg, 1).unwrap();
    let base = init_params(&cfg, 2).unwrap();
    let insts = batch(6, 2);
    let seeds = [7, 8];
    let res = reinforce_batch_loss(&p, &base, &cfg, &insts, &seeds).unwrap();
    let tours: Vec<Vec<usize>> = insts
        .iter()
        .zip(seeds)
        .map(|(inst, s)| rollout(&p, &cfg, inst, Decode::Sample(s)).unwrap().tour.into_order())
        .collect();
    let base_costs = greedy_costs(&base, &cfg, &insts).unwrap();
    assert!((replayed_loss(&p, &base_costs, &insts, &tours) - res.loss).abs() < 1e-12);

    let names: Vec<String> = p.names().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eps = 1e-4;
    for _ in 0..20 {
        let name = &names[rng.gen_range(0..names.len())];
        let c = rng.gen_range(0..p.value(name).unwrap().len());
        let mut plus = p.clone();
        plus.value_mut(name).unwrap().data_mut()[c] += eps;
        let mut minus = p.clone();
        minus.value_mut(name).unwrap().data_mut()[c] -= eps;
        let num = (replayed_loss(&plus, &base_costs, &insts, &tours)
            - replayed_loss(&minus, &base_costs, &insts, &tours))
            / (2.0 * eps);
        let a = res.grads.grad(name).unwrap().data()[c];
        let rel = (a - num).abs() / a.abs().max(num.abs());
        assert!(rel <= 1e-3 || (a - num).abs() < 1e-9, "{name}[{c}]: {a} vs {num}");
    }
}

#[test]
fn zero_advantage_gives_zero_gradient() {
    // three cities that all cover each other: every tour is a single city
    let cfg = tiny();
    let p = init_params(&cfg, 4).unwrap();
    let insts: Vec<CspInstance> = (0..3)
        .map(|i| generate_instance(3, &CoverageSpec::KNearest { k: 2 }, i).unwrap())
        .collect();
    let res = reinforce_batch_loss(&p, &p, &cfg, &insts, &[1, 2, 3]).unwrap();
    assert_eq!(res.loss, 0.0);
    for name in p.names() {
        assert!(res.grads.grad(name).unwrap().data().iter().all(|g| *g == 0.0));
    }
}

#[test]
fn positive_advantage_step_lowers_log_prob() {
    let cfg = tiny();
    let p = init_params(&cfg, 5).unwrap();
    let inst = batch(8, 1).pop().unwrap();
    let tour = rollout(&p, &cfg, &inst, Decode::Sample(11)).unwrap().tour.into_order();
    // baseline cost of zero makes the advantage equal the (positive) tour cost
    let mut t = Tape::new();
    let r = rollout_on_tape(&mut t, &p, &cfg, &inst, Decode::Forced(&tour)).unwrap();
    assert!(r.cost > 0.0);
    let g = t.backward_seeded(r.log_prob, r.cost).unwrap();
    let mut grads = p.snapshot();
    t.accumulate_into(&g, &mut grads, 1.0).unwrap();
    let mut stepped = p.clone();
    for name in p.names() {
        let gv = grads.grad(name).unwrap();
        for (v, g) in stepped.value_mut(name).unwrap().data_mut().iter_mut().zip(gv.data()) {
            *v -= 1e-3 * g;
        }
    }
    let before = t.value(r.log_prob).item();
    let after = rollout(&stepped, &cfg, &inst, Decode::Forced(&tour)).unwrap().log_prob;
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn baseline_parameters_are_untouched() {
    let cfg = tiny();
    let p = init_params(&cfg, 6).unwrap();
    let base = init_params(&cfg, 7).unwrap();
    let before = base.clone();
    let insts = batch(7, 4);
    reinforce_batch_loss(&p, &base, &cfg, &insts, &[1, 2, 3, 4]).unwrap();
    assert_eq!(base, before);
}

#[test]
fn validate_agrees_with_per_instance_sum() {
    let cfg = tiny();
    let p = init_params(&cfg, 8).unwrap();
    let insts = batch(9, 6);
    let single = validate(&p, &cfg, &insts[..1]).unwrap();
    assert_eq!(single, rollout(&p, &cfg, &insts[0], Decode::Greedy).unwrap().cost);
    let mean: f64 = insts
        .iter()
        .map(|i| rollout(&p, &cfg, i, Decode::Greedy).unwrap().cost)
        .sum::<f64>()
        / 6.0;
    let v = validate(&p, &cfg, &insts).unwrap();
    assert!((v - mean).abs() <= 1e-12);
    let mut rev = insts.clone();
    rev.reverse();
    assert!((validate(&p, &cfg, &rev).unwrap() - v).abs() <= 1e-12);
}

#[test]
fn training_runs_are_reproducible_and_resumable() {
    let cfg = tiny_train();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = train(&cfg, a.path()).unwrap();
    let rb = train(&cfg, b.path()).unwrap();
    let read = |d: &std::path::Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "metrics.csv"), read(b.path(), "metrics.csv"));
    assert_eq!(ra.params, rb.params);
    assert_eq!(read(a.path(), "metrics.csv").lines().count(), 1 + 9);

    // epoch 0 checkpoint holds the untrained model, equal to its baseline
    let (_, p0) = load_model(&epoch_checkpoint_path(a.path(), 0)).unwrap();
    assert_eq!(p0, init_params(&cfg.model, csp_model::seeds::derive(cfg.seed, &[csp_model::seeds::INIT])).unwrap());

    // baseline cost never increases
    let costs: Vec<f64> = ra.epochs.iter().map(|e| e.baseline_cost).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    assert!(costs[0] <= ra.initial_validation_cost);

    // crash after epoch 1: drop later checkpoints and leave a partial epoch
    let c = tempfile::tempdir().unwrap();
    let short = TrainConfig { epochs: 1, ..cfg.clone() };
    train(&short, c.path()).unwrap();
    let mut m = read(c.path(), "metrics.csv");
    m.push_str("1,0,9.0,9.0,0.5,0.0,0\n");
    std::fs::write(c.path().join("metrics.csv"), m).unwrap();
    let rc = train(&cfg, c.path()).unwrap();
    assert_eq!(rc.params, ra.params);
    assert_eq!(read(c.path(), "metrics.csv"), read(a.path(), "metrics.csv"));
    assert_eq!(read(c.path(), "epochs.csv"), read(a.path(), "epochs.csv"));
}

#[test]
fn resume_rejects_a_different_config() {
    let cfg = tiny_train();
    let d = tempfile::tempdir().unwrap();
    train(&TrainConfig { epochs: 1, ..cfg.clone() }, d.path()).unwrap();
    assert!(train(&TrainConfig { lr: 0.5, ..cfg }, d.path()).is_err());
}

#[test]
fn validation_set_is_fixed() {
    let cfg = tiny_train();
    assert_eq!(validation_set(&cfg).unwrap(), validation_set(&cfg).unwrap());
}
