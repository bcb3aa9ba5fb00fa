//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The desk-scale training run is cached under the cargo target directory, so
//! only the first run pays for it. `ACCEPTANCE_ONLY=4,5` selects criteria and
//! `ACCEPTANCE_STRICT=1` turns any FAIL into a nonzero exit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use csp_autodiff::layers::{gru_cell, init_gru, init_layer_norm, init_linear, layer_norm, linear};
use csp_autodiff::{Array, ParamStore, Tape, Var};
use csp_bench::records::read_csv;
use csp_bench::solvers::model_greedy_ls;
use csp_bench::stop::stop_table;
use csp_bench::{
    bench_instances, summarize_stops, BenchRecord, Model, NamedInstance, SolveOptions, Solver,
    StopRecord, StopSummary,
};
use csp_core::{
    cycle_length, generate_instance, generate_with, is_feasible, solve_exact, tour_length, CoverageSpec, CspInstance,
    SpecGenerator, Tour,
};
use csp_ls::{initial_solution, ls1_solve, posterior_improve, LsConfig, Variant};
use csp_model::decoder::{build_keys, build_query, init_state, prepare, step_probabilities};
use csp_model::encoder::{encode, encode_values, encoder_layer, mha};
use csp_model::trainer::{best_checkpoint_path, train, TrainConfig};
use csp_model::{init_params, rollout, rollout_on_tape, Decode, EncoderConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn tiny() -> EncoderConfig {
    EncoderConfig {
        d_h: 8,
        num_layers: 2,
        num_heads: 2,
        d_ff: 16,
    }
}

fn mixed_instance(i: u64) -> CspInstance {
    let n = 2 + (i as usize * 7) % 29;
    let gen = match i % 4 {
        0 => SpecGenerator::Fixed(CoverageSpec::KNearest { k: (n - 1).min(7) }),
        1 => SpecGenerator::Fixed(CoverageSpec::FixedRadius { r: 0.2 }),
        2 => SpecGenerator::UniformRadius { max: 0.25 },
        _ => SpecGenerator::VariableNc {
            min: 1,
            max: (n - 1).min(15),
        },
    };
    generate_with(n, &gen, 10_000 + i).expect("valid generator")
}

fn named(instances: Vec<CspInstance>) -> Vec<NamedInstance> {
    instances
        .into_iter()
        .map(|instance| NamedInstance {
            id: format!("s{}", instance.seed()),
            instance,
        })
        .collect()
}

fn untimed() -> SolveOptions {
    SolveOptions {
        timing: false,
        ..SolveOptions::default()
    }
}

fn solver_means(records: &[BenchRecord]) -> impl Fn(&str) -> f64 + '_ {
    move |s| mean(&records.iter().filter(|r| r.solver == s).map(|r| r.cost).collect::<Vec<_>>())
}

// ---------------------------------------------------------------- 1

fn replay_guidance(inst: &CspInstance, prefix: &[usize]) -> Vec<f64> {
    let mut g = vec![1.0; inst.n()];
    for &c in prefix {
        let mut set = inst.cover_set(c).to_vec();
        set.sort_by(|&a, &b| inst.d(c, a).total_cmp(&inst.d(c, b)).then(a.cmp(&b)));
        for (r, &i) in set.iter().enumerate() {
            g[i] *= (r + 1) as f64 / set.len() as f64;
        }
    }
    g
}

fn invariants() -> Check {
    const CASES: u64 = 1000;
    let cfg = tiny();
    let params = init_params(&cfg, 5).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ls_runs = 0;

    for i in 0..CASES {
        let inst = mixed_instance(i);
        let n = inst.n();

        // feasibility of every producer
        let start = initial_solution(&inst, &mut ChaCha8Rng::seed_from_u64(i));
        ensure(is_feasible(&inst, &start).unwrap(), format!("initial solution infeasible on case {i}"))?;
        let cfg_ls = LsConfig {
            max_stall_iters: 15,
            ..LsConfig::with_seed(i)
        };
        for v in [Variant::Ls1, Variant::Ls2] {
            let run = csp_ls::solve(&inst, v, &cfg_ls).map_err(|e| e.to_string())?;
            ensure(is_feasible(&inst, &run.tour).unwrap(), format!("{} infeasible on case {i}", v.name()))?;
            ensure(
                run.trace.windows(2).all(|w| w[1].best_cost < w[0].best_cost),
                format!("{} best-so-far rose on case {i}", v.name()),
            )?;
            ensure(
                run.trace.last().map(|t| t.best_cost) == Some(run.cost),
                format!("{} trace does not end at the result on case {i}", v.name()),
            )?;
            ls_runs += 1;
        }

        // rollouts: feasibility, guidance, probabilities
        let mut tape = Tape::new();
        let r = rollout_on_tape(&mut tape, &params, &cfg, &inst, Decode::Sample(i)).map_err(|e| e.to_string())?;
        ensure(is_feasible(&inst, &r.tour).unwrap(), format!("sampled tour infeasible on case {i}"))?;
        let greedy = rollout(&params, &cfg, &inst, Decode::Greedy).map_err(|e| e.to_string())?;
        ensure(is_feasible(&inst, &greedy.tour).unwrap(), format!("greedy tour infeasible on case {i}"))?;
        let polished = posterior_improve(&inst, &greedy.tour).map_err(|e| e.to_string())?;
        ensure(
            is_feasible(&inst, &polished).unwrap() && cycle_length(&inst, polished.order()) <= greedy.cost + 1e-12,
            format!("posterior improvement broke case {i}"),
        )?;
        let mut prev = vec![1.0; n];
        let mut visited = vec![false; n];
        for (step, (g, probs)) in r.guidance.iter().zip(&r.step_probs).enumerate() {
            ensure(
                g.iter().zip(&prev).all(|(a, b)| *a > 0.0 && *a <= 1.0 && a <= b),
                format!("guidance out of range or rising on case {i}"),
            )?;
            ensure(
                *g == replay_guidance(&inst, &r.tour.order()[..=step]),
                format!("guidance differs from replay on case {i}"),
            )?;
            let s: f64 = probs.iter().sum();
            ensure((s - 1.0).abs() <= 1e-9, format!("probabilities sum to {s} on case {i}"))?;
            ensure(
                visited.iter().zip(probs).all(|(&v, &p)| !v || p == 0.0),
                format!("visited city has nonzero probability on case {i}"),
            )?;
            visited[r.tour.order()[step]] = true;
            prev = g.clone();
        }

        // encoder permutation equivariance
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted = inst.permuted(&perm).map_err(|e| e.to_string())?;
        let (h, hm) = encode_values(&params, &cfg, &inst).map_err(|e| e.to_string())?;
        let (hp, hpm) = encode_values(&params, &cfg, &permuted).map_err(|e| e.to_string())?;
        for (new, &old) in perm.iter().enumerate() {
            let diff = h
                .row(old)
                .iter()
                .zip(hp.row(new))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ensure(diff <= 1e-9, format!("encoder not equivariant on case {i}: {diff:e}"))?;
        }
        ensure(hm.max_abs_diff(&hpm) <= 1e-9, format!("mean embedding moved on case {i}"))?;

        // tour length under rotation and reversal
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order.truncate(rng.gen_range(1..=n));
        let base = tour_length(&inst, &Tour::new(order.clone()).unwrap()).unwrap();
        let k = rng.gen_range(0..order.len());
        let mut rot = order.clone();
        rot.rotate_left(k);
        let mut rev = order.clone();
        rev.reverse();
        for t in [rot, rev] {
            let l = tour_length(&inst, &Tour::new(t).unwrap()).unwrap();
            ensure((l - base).abs() <= 1e-12, format!("tour length not invariant on case {i}"))?;
        }
    }
    Ok(format!(
        "{CASES} cases per property, {ls_runs} local search traces"
    ))
}

// ---------------------------------------------------------------- 2

fn random_array(shape: &[usize], seed: u64) -> Array {
    Array::uniform(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Fixed random projection to a scalar.
fn probe(t: &mut Tape, x: Var) -> Var {
    let shape = t.value(x).shape().to_vec();
    let r = t.constant(random_array(&shape, 77));
    let y = t.mul(x, r).expect("same shape");
    t.sum(y)
}

/// Relative error with the denominator floored at 1e-3: central differences
/// at eps = 1e-6 carry absolute rounding noise of a few 1e-9.
fn rel_error(a: f64, num: f64) -> f64 {
    (a - num).abs() / a.abs().max(num.abs()).max(1e-3)
}

type Objective<'a> = dyn Fn(&ParamStore, &mut Tape) -> Var + 'a;

/// Worst relative error between the tape gradient and central differences
/// over up to `per_param` evenly spread coordinates of every parameter.
fn worst_fd_error(store: &ParamStore, f: &Objective, eps: f64, per_param: usize) -> f64 {
    let mut t = Tape::new();
    let out = f(store, &mut t);
    let g = t.backward(out).expect("scalar");
    let mut grads = store.snapshot();
    t.accumulate_into(&g, &mut grads, 1.0).expect("same params");
    let eval = |p: &ParamStore| {
        let mut t = Tape::new();
        let v = f(p, &mut t);
        t.value(v).item()
    };
    let mut worst = 0.0f64;
    for name in store.names() {
        let analytic = grads.grad(name).expect("grad");
        let len = analytic.len();
        let stride = len.div_ceil(per_param).max(1);
        for c in (0..len).step_by(stride) {
            let mut plus = store.clone();
            plus.value_mut(name).unwrap().data_mut()[c] += eps;
            let mut minus = store.clone();
            minus.value_mut(name).unwrap().data_mut()[c] -= eps;
            let num = (eval(&plus) - eval(&minus)) / (2.0 * eps);
            let a = analytic.data()[c];
            let rel = rel_error(a, num);
            if rel.is_nan() || rel > worst {
                worst = rel;
            }
        }
    }
    worst
}

fn layer_store(seed: u64, build: impl FnOnce(&mut ParamStore, &mut ChaCha8Rng)) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    build(&mut s, &mut rng);
    s
}

fn gradients() -> Check {
    let d = 6;
    let mut report = Vec::new();
    let mut worst_layer = 0.0f64;
    let x = random_array(&[5, d], 3);
    let mut check = |label: &str, store: &ParamStore, f: &Objective| {
        let e = worst_fd_error(store, f, 1e-6, 40);
        worst_layer = worst_layer.max(e);
        report.push(format!("{label} {e:.1e}"));
    };

    let lin = layer_store(1, |s, r| {
        init_linear(s, "lin", d, 4, 0.5, r).unwrap();
        *s.value_mut("lin.bias").unwrap() = random_array(&[4], 9);
    });
    check("linear", &lin, &|p, t| {
        let h = t.constant(x.clone());
        let y = linear(t, p, "lin", h).unwrap();
        probe(t, y)
    });

    let norm = layer_store(2, |s, _| {
        init_layer_norm(s, "ln", d).unwrap();
        *s.value_mut("ln.gain").unwrap() = random_array(&[d], 10);
        *s.value_mut("ln.bias").unwrap() = random_array(&[d], 11);
        s.insert("x", x.clone()).unwrap();
    });
    check("layer_norm", &norm, &|p, t| {
        let h = t.param(p, "x").unwrap();
        let y = layer_norm(t, p, "ln", h).unwrap();
        probe(t, y)
    });

    let gru = layer_store(3, |s, r| {
        init_gru(s, "gru", d, 0.5, r).unwrap();
        for g in ["z", "r", "n"] {
            *s.value_mut(&format!("gru.b_{g}")).unwrap() = random_array(&[d], 20);
        }
        s.insert("x", random_array(&[1, d], 12)).unwrap();
        s.insert("h", random_array(&[1, d], 13)).unwrap();
    });
    check("gru", &gru, &|p, t| {
        let xi = t.param(p, "x").unwrap();
        let h = t.param(p, "h").unwrap();
        let step = gru_cell(t, p, "gru", xi, h).unwrap();
        let again = gru_cell(t, p, "gru", xi, step.hidden).unwrap();
        probe(t, again.hidden)
    });

    let soft = layer_store(4, |s, _| {
        s.insert("q", random_array(&[1, 4], 14)).unwrap();
        s.insert("k", random_array(&[7, 4], 15)).unwrap();
    });
    check("masked_softmax", &soft, &|p, t| {
        let q = t.param(p, "q").unwrap();
        let k = t.param(p, "k").unwrap();
        let probs = step_probabilities(t, q, k, &[false, true, false, false, true, false, false], 2).unwrap();
        let picked = t.pick(probs, 3).unwrap();
        let l = t.ln(picked);
        let s = probe(t, probs);
        t.add(l, s).unwrap()
    });

    let cfg = tiny();
    let model = init_params(&cfg, 6).map_err(|e| e.to_string())?;
    let hx = random_array(&[5, cfg.d_h], 16);
    check("mha", &model, &|p, t| {
        let h = t.constant(hx.clone());
        let y = mha(t, p, &cfg, "encoder.layer0", h).unwrap();
        probe(t, y)
    });
    check("encoder_layer", &model, &|p, t| {
        let h = t.constant(hx.clone());
        let y = encoder_layer(t, p, &cfg, 1, h).unwrap();
        probe(t, y)
    });
    let inst = generate_instance(6, &CoverageSpec::KNearest { k: 2 }, 8).unwrap();
    check("encoder", &model, &|p, t| {
        let e = encode(t, p, &cfg, &inst).unwrap();
        let a = probe(t, e.h_final);
        let b = probe(t, e.h_mean);
        t.add(a, b).unwrap()
    });
    let g: Vec<f64> = (0..6).map(|i| 0.2 + 0.13 * i as f64).collect();
    check("keys", &model, &|p, t| {
        let e = encode(t, p, &cfg, &inst).unwrap();
        let ctx = prepare(t, p, &cfg, e).unwrap();
        let k = build_keys(t, p, &ctx, &g).unwrap();
        probe(t, k)
    });
    check("query", &model, &|p, t| {
        let e = encode(t, p, &cfg, &inst).unwrap();
        let ctx = prepare(t, p, &cfg, e).unwrap();
        let mut state = init_state(&inst, &ctx);
        let q0 = build_query(t, p, &ctx, &mut state, None).unwrap();
        let q1 = build_query(t, p, &ctx, &mut state, Some(2)).unwrap();
        let a = probe(t, q0);
        let b = probe(t, q1);
        t.add(a, b).unwrap()
    });

    // end to end: log-probability of a fixed tour, 20 random coordinates
    let actions = rollout(&model, &cfg, &inst, Decode::Greedy).map_err(|e| e.to_string())?.tour;
    let actions = actions.order().to_vec();
    let logp = |p: &ParamStore| rollout(p, &cfg, &inst, Decode::Forced(&actions)).unwrap().log_prob;
    let mut t = Tape::new();
    let r = rollout_on_tape(&mut t, &model, &cfg, &inst, Decode::Forced(&actions)).map_err(|e| e.to_string())?;
    let gr = t.backward(r.log_prob).map_err(|e| e.to_string())?;
    let mut grads = model.snapshot();
    t.accumulate_into(&gr, &mut grads, 1.0).map_err(|e| e.to_string())?;
    let names: Vec<String> = model.names().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_e2e = 0.0f64;
    let eps = 1e-4;
    for _ in 0..20 {
        let name = &names[rng.gen_range(0..names.len())];
        let c = rng.gen_range(0..model.value(name).unwrap().len());
        let mut plus = model.clone();
        plus.value_mut(name).unwrap().data_mut()[c] += eps;
        let mut minus = model.clone();
        minus.value_mut(name).unwrap().data_mut()[c] -= eps;
        let num = (logp(&plus) - logp(&minus)) / (2.0 * eps);
        let a = grads.grad(name).unwrap().data()[c];
        let rel = rel_error(a, num);
        if rel.is_nan() || rel > worst_e2e {
            worst_e2e = rel;
        }
    }
    ensure(
        worst_layer <= 1e-5,
        format!("layer relative error {worst_layer:.2e} > 1e-5 ({})", report.join(", ")),
    )?;
    ensure(worst_e2e <= 1e-3, format!("end-to-end relative error {worst_e2e:.2e} > 1e-3"))?;
    Ok(format!(
        "worst layer error {worst_layer:.1e}, end-to-end {worst_e2e:.1e} on a {}-city tour",
        actions.len()
    ))
}

// ---------------------------------------------------------------- 3

/// Minimum over every city subset and every cyclic order of it.
fn brute_force(inst: &CspInstance) -> f64 {
    let n = inst.n();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let cities: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        if !is_feasible(inst, &Tour::new(cities.clone()).unwrap()).unwrap() {
            continue;
        }
        let (first, rest) = cities.split_first().unwrap();
        let mut rest = rest.to_vec();
        permute(&mut rest, 0, &mut |p| {
            let mut order = vec![*first];
            order.extend_from_slice(p);
            best = best.min(cycle_length(inst, &order));
        });
    }
    best
}

fn permute(xs: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}

fn exact_oracle() -> Check {
    let mut matched = 0;
    let mut gaps = Vec::new();
    for i in 0..50u64 {
        let n = 5 + (i as usize % 4);
        let inst = generate_instance(n, &CoverageSpec::KNearest { k: 2 }, 3_000_000 + i).unwrap();
        let exact = solve_exact(&inst, 10).map_err(|e| e.to_string())?;
        let t = ls1_solve(&inst, &LsConfig::with_seed(i)).map_err(|e| e.to_string())?;
        let c = cycle_length(&inst, posterior_improve(&inst, &t).map_err(|e| e.to_string())?.order());
        ensure(c >= exact.cost - 1e-9, format!("ls1 beat the exact optimum on instance {i}"))?;
        if c <= exact.cost + 1e-9 {
            matched += 1;
        }
        gaps.push((c - exact.cost) / exact.cost.max(1e-12) * 100.0);
    }
    let gap = mean(&gaps);
    let mut enumerated = 0;
    for i in 0..10u64 {
        let n = 4 + (i as usize % 4);
        let inst = generate_instance(n, &CoverageSpec::KNearest { k: 2 }, 3_100_000 + i).unwrap();
        let exact = solve_exact(&inst, 10).map_err(|e| e.to_string())?;
        let bf = brute_force(&inst);
        ensure(
            (exact.cost - bf).abs() <= 1e-12,
            format!("exact {} vs enumeration {bf} on instance {i}", exact.cost),
        )?;
        enumerated += 1;
    }
    ensure(matched >= 45, format!("ls1 matched the optimum on {matched}/50 < 90%"))?;
    ensure(gap <= 5.0, format!("mean gap {gap:.2}% > 5%"))?;
    Ok(format!(
        "ls1 optimal on {matched}/50, mean gap {gap:.2}%, exact = enumeration on {enumerated}/10"
    ))
}

// ---------------------------------------------------------------- 4

fn heuristics_vs_reference() -> Check {
    let insts = named(
        (0..100)
            .map(|i| generate_instance(50, &CoverageSpec::KNearest { k: 7 }, 4_000_000 + i).unwrap())
            .collect(),
    );
    let records =
        bench_instances(&insts, &[Solver::Ls1, Solver::Ls2], None, &untimed()).map_err(|e| e.to_string())?;
    let m = solver_means(&records);
    let (l1, l2) = (m("ls1"), m("ls2"));
    let detail = format!("ls1 {l1:.4} (2.57 +-5%), ls2 {l2:.4} (2.67 +-5%)");
    ensure((l1 / 2.57 - 1.0).abs() <= 0.05, format!("ls1 outside window: {detail}"))?;
    ensure((l2 / 2.67 - 1.0).abs() <= 0.05, format!("ls2 outside window: {detail}"))?;
    ensure(l1 <= l2, format!("ls1 above ls2: {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 5

fn acceptance_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn desk_checkpoint() -> Result<PathBuf, String> {
    let dir = acceptance_dir().join("desk-csp20");
    let outcome = train(&TrainConfig::desk(20), &dir).map_err(|e| e.to_string())?;
    ensure(outcome.epochs.len() == 10, "desk training did not complete")?;
    Ok(best_checkpoint_path(&dir))
}

fn greedy_mean(params: &ParamStore, cfg: &EncoderConfig, insts: &[CspInstance]) -> f64 {
    mean(
        &insts
            .iter()
            .map(|i| rollout(params, cfg, i, Decode::Greedy).expect("rollout").cost)
            .collect::<Vec<_>>(),
    )
}

fn desk_learning() -> Check {
    let started = Instant::now();
    let ckpt = desk_checkpoint()?;
    let train_s = started.elapsed().as_secs_f64();
    let model = Model::load(&ckpt).map_err(|e| e.to_string())?;
    let desk = TrainConfig::desk(20);
    let untrained =
        init_params(&desk.model, csp_model::seeds::derive(desk.seed, &[csp_model::seeds::INIT])).unwrap();
    let held_out: Vec<CspInstance> = (0..1000)
        .map(|i| generate_instance(20, &CoverageSpec::KNearest { k: 7 }, 5_100_000 + i).unwrap())
        .collect();
    let before = greedy_mean(&untrained, &desk.model, &held_out);
    let after = greedy_mean(&model.params, &model.cfg, &held_out);
    let reduction = (before - after) / before * 100.0;

    let insts = named(
        (0..100)
            .map(|i| generate_instance(20, &CoverageSpec::KNearest { k: 7 }, 5_000_000 + i).unwrap())
            .collect(),
    );
    let records = bench_instances(&insts, &[Solver::Ls1, Solver::ModelGreedyLs], Some(&model), &untimed())
        .map_err(|e| e.to_string())?;
    let m = solver_means(&records);
    let (ls1, mls) = (m("ls1"), m("model-greedy-ls"));
    let ratio = mls / ls1;
    let detail = format!(
        "greedy {before:.4} -> {after:.4} (-{reduction:.1}%), model-greedy-ls {mls:.4} = {ratio:.3} x ls1 {ls1:.4}, training {train_s:.0} s"
    );
    ensure(reduction >= 20.0, format!("reduction below 20%: {detail}"))?;
    ensure(ratio <= 1.20, format!("ratio above 1.20: {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------- 6

fn generalization() -> Check {
    let model = Model::load(&desk_checkpoint()?).map_err(|e| e.to_string())?;
    let gens = [
        ("fixed radius 0.2", SpecGenerator::Fixed(CoverageSpec::FixedRadius { r: 0.2 })),
        ("radius U[0,0.25]", SpecGenerator::UniformRadius { max: 0.25 }),
    ];
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (k, (label, gen)) in gens.iter().enumerate() {
        let insts: Vec<CspInstance> = (0..100)
            .map(|i| generate_with(50, gen, 6_000_000 + 1000 * k as u64 + i).unwrap())
            .collect();
        let mut feasible = 0;
        let mut model_costs = Vec::new();
        for inst in &insts {
            let t = model_greedy_ls(inst, &model).map_err(|e| e.to_string())?;
            if is_feasible(inst, &t).unwrap() {
                feasible += 1;
            }
            model_costs.push(cycle_length(inst, t.order()));
        }
        let ls = bench_instances(&named(insts), &[Solver::Ls1], None, &untimed()).map_err(|e| e.to_string())?;
        let ls1 = mean(&ls.iter().map(|r| r.cost).collect::<Vec<_>>());
        let ratio = mean(&model_costs) / ls1;
        parts.push(format!("{label}: feasible {feasible}/100, {ratio:.3} x ls1"));
        if feasible < 100 || ratio > 1.3 {
            failures.push(label.to_string());
        }
    }
    let detail = parts.join("; ");
    ensure(failures.is_empty(), detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 7 and 8

fn csp(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_csp"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("csp {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn fresh_dir(name: &str) -> PathBuf {
    let d = acceptance_dir().join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).expect("scratch dir");
    d
}

fn stop_harness() -> Check {
    let ckpt = desk_checkpoint()?;
    let dir = fresh_dir("stop");
    let inst_dir = dir.join("instances");
    csp(&["generate", "--n", "50", "--count", "20", "--seed", "7000000", "--out", p(&inst_dir)])?;
    let csv = dir.join("stop.csv");
    let printed = csp(&[
        "stop-at-cost",
        p(&inst_dir),
        "--checkpoint",
        p(&ckpt),
        "--heuristics",
        "ls1,ls2",
        "--out",
        p(&csv),
    ])?;
    let rows: Vec<StopRecord> = read_csv(&csv).map_err(|e| e.to_string())?;
    let summary: Vec<StopSummary> = read_csv(&dir.join("stop_summary.csv")).map_err(|e| e.to_string())?;
    ensure(rows.len() == 40, format!("{} stop records, expected 40", rows.len()))?;
    let ls1: Vec<&StopRecord> = rows.iter().filter(|r| r.heuristic == "ls1").collect();
    let reached = ls1.iter().filter(|r| r.reached).count();
    for r in &rows {
        ensure(
            !r.reached || r.stop_cost <= r.target_cost,
            format!("{} stopped at {} above target {} on {}", r.heuristic, r.stop_cost, r.target_cost, r.instance_id),
        )?;
    }
    // independent recomputation of the summary
    let mut recomputed = Vec::new();
    for h in ["ls1", "ls2"] {
        let mine: Vec<&StopRecord> = rows.iter().filter(|r| r.heuristic == h).collect();
        let mut hit = 0;
        let mut total = 0.0;
        let mut model_total = 0.0;
        for r in &mine {
            if r.reached {
                hit += 1;
                total += r.stop_time_s;
            }
            model_total += r.model_time_s;
        }
        recomputed.push(StopSummary {
            heuristic: h.to_string(),
            instances: mine.len(),
            reached: hit,
            reach_rate: hit as f64 / mine.len() as f64,
            mean_stop_time_s: (hit > 0).then(|| total / hit as f64),
            mean_model_time_s: model_total / mine.len() as f64,
        });
    }
    ensure(recomputed == summary, "summary CSV differs from recomputation")?;
    ensure(summarize_stops(&rows) == summary, "library summary differs from the CSV")?;
    ensure(printed == stop_table(&recomputed), "printed table differs from the recomputed summary")?;
    Ok(format!(
        "ls1 reached {reached}/20 targets, all at or below target; summary recomputed exactly"
    ))
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for n in &names {
        let (x, y) = (fs::read(a.join(n)), fs::read(b.join(n)));
        ensure(
            matches!((&x, &y), (Ok(x), Ok(y)) if x == y),
            format!("{} differs between reruns", n.to_string_lossy()),
        )?;
    }
    Ok(names.len())
}

fn determinism() -> Check {
    let dir = fresh_dir("determinism");
    let ckpt = desk_checkpoint()?;
    let mut compared = 0;
    for run in ["a", "b"] {
        let d = dir.join(run);
        csp(&["generate", "--n", "30", "--count", "10", "--seed", "8000000", "--out", p(&d.join("inst"))])?;
        csp(&[
            "train", "--n", "8", "--k", "3", "--hidden-dim", "16", "--layers", "2", "--heads", "4", "--ff-dim", "32",
            "--batch-size", "8", "--epochs", "2", "--instances-per-epoch", "32", "--validation-size", "16",
            "--no-timing", "--out", p(&d.join("train")),
        ])?;
        fs::create_dir_all(d.join("solve")).map_err(|e| e.to_string())?;
        csp(&[
            "solve",
            p(&d.join("inst")),
            "--solver",
            "ls1,ls2,model-greedy,model-greedy-ls",
            "--checkpoint",
            p(&ckpt),
            "--no-timing",
            "--out",
            p(&d.join("solve").join("records.csv")),
        ])?;
    }
    for sub in ["inst", "train", "solve"] {
        compared += same_files(&dir.join("a").join(sub), &dir.join("b").join(sub))?;
    }
    Ok(format!("{compared} files byte-identical across reruns"))
}

// ----------------------------------------------------------------

fn main() {
    // `cargo test` passes harness flags; none apply here
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, fn() -> Check); 8] = [
        (1, "invariant suite", invariants),
        (2, "autodiff vs finite differences", gradients),
        (3, "exact oracle", exact_oracle),
        (4, "heuristics vs reference costs", heuristics_vs_reference),
        (5, "desk-scale learning", desk_learning),
        (6, "generalization", generalization),
        (7, "stop-at-cost harness", stop_harness),
        (8, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let result = run();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{id}] {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{id}] {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
