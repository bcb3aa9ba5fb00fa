//! Guidance-driven decoder. Each step feeds the previous city's embedding
//! through a GRU, attends over the static embeddings to form a query, and
//! scores every unvisited city against keys that are modulated by how
//! strongly that city has been covered so far.

use csp_autodiff::layers::{gru_cell, project};
use csp_autodiff::{AdError, Array, ParamStore, Tape, Var};
use csp_core::{CspInstance, Tour};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::{encode, EncoderOutput};
use crate::{EncoderConfig, ModelError, Result};

/// How each step's city is chosen.
#[derive(Clone, Copy, Debug)]
pub enum Decode<'a> {
    /// Highest probability, lower index on ties.
    Greedy,
    /// Categorical draw from a ChaCha8 stream seeded with the given value.
    Sample(u64),
    /// Replays a given action sequence, which must be a valid rollout.
    Forced(&'a [usize]),
}

#[derive(Clone, Debug)]
pub struct DecoderState {
    pub visited: Vec<bool>,
    pub g: Vec<f64>,
    pub hidden: Var,
    pub step: usize,
    pub chosen: Vec<usize>,
    covered: Vec<bool>,
    pub covered_count: usize,
}

impl DecoderState {
    pub fn done(&self) -> bool {
        self.covered_count == self.visited.len()
    }
}

/// Per-instance projections that stay fixed for the whole rollout.
#[derive(Clone, Copy, Debug)]
pub struct DecoderContext {
    pub h: Var,
    pub h_mean: Var,
    /// `h W^K`, the static half of every key.
    pub hk: Var,
    pub k1: Var,
    pub v1: Var,
    pub d_k: usize,
}

pub fn prepare(tape: &mut Tape, store: &ParamStore, cfg: &EncoderConfig, enc: EncoderOutput) -> Result<DecoderContext> {
    let hk = project(tape, store, "decoder.wk", enc.h_final)?;
    let k1 = project(tape, store, "decoder.wk1", enc.h_final)?;
    let v1 = project(tape, store, "decoder.wv1", enc.h_final)?;
    Ok(DecoderContext {
        h: enc.h_final,
        h_mean: enc.h_mean,
        hk,
        k1,
        v1,
        d_k: cfg.d_k(),
    })
}

pub fn init_state(inst: &CspInstance, ctx: &DecoderContext) -> DecoderState {
    let n = inst.n();
    DecoderState {
        visited: vec![false; n],
        g: vec![1.0; n],
        hidden: ctx.h_mean,
        step: 0,
        chosen: Vec::new(),
        covered: vec![false; n],
        covered_count: 0,
    }
}

/// Shrinks the guidance of every city covered by `city`: the `r`-th nearest
/// of `c` covered cities is scaled by `r / c`.
pub fn update_guidance(g: &mut [f64], inst: &CspInstance, city: usize) -> Result<()> {
    if city >= inst.n() || g.len() != inst.n() {
        return Err(ModelError::Decode(format!(
            "city {city} out of range for {} cities",
            inst.n()
        )));
    }
    // cover sets are already ordered nearest first, ties by index
    let set = inst.cover_set(city);
    let c = set.len() as f64;
    for (rank, &i) in set.iter().enumerate() {
        g[i] *= (rank + 1) as f64 / c;
    }
    Ok(())
}

/// `k_i = (h_i W^K) * (g_i W_G)`.
pub fn build_keys(tape: &mut Tape, store: &ParamStore, ctx: &DecoderContext, g: &[f64]) -> Result<Var> {
    let gcol = tape.constant(Array::new(vec![g.len(), 1], g.to_vec()).map_err(ModelError::from)?);
    let wg = tape.param(store, "decoder.wg")?;
    let dynamic = tape.matmul(gcol, wg)?;
    Ok(tape.mul(ctx.hk, dynamic)?)
}

/// Advances the GRU and returns the query for this step.
pub fn build_query(
    tape: &mut Tape,
    store: &ParamStore,
    ctx: &DecoderContext,
    state: &mut DecoderState,
    prev: Option<usize>,
) -> Result<Var> {
    let input = match (state.step, prev) {
        (0, _) => tape.param(store, "decoder.v1")?,
        (_, Some(p)) => tape.row(ctx.h, p)?,
        (_, None) => {
            return Err(ModelError::Decode("previous city required after the first step".into()))
        }
    };
    let step = gru_cell(tape, store, "decoder.gru", input, state.hidden)?;
    state.hidden = step.hidden;
    let s = tape.matmul_nt(step.hidden, ctx.k1)?;
    let s = tape.scale(s, 1.0 / (ctx.d_k as f64).sqrt());
    let w = tape.softmax_rows(s)?;
    Ok(tape.matmul(w, ctx.v1)?)
}

/// `[1 x n]` selection probabilities, exactly zero on visited cities.
pub fn step_probabilities(tape: &mut Tape, q: Var, keys: Var, visited: &[bool], d_k: usize) -> Result<Var> {
    let u = tape.matmul_nt(q, keys)?;
    let u = tape.scale(u, 1.0 / (d_k as f64).sqrt());
    tape.masked_softmax_rows(u, visited).map_err(|e| match e {
        AdError::NoSelectable { .. } => ModelError::Decode("every city is already visited".into()),
        other => other.into(),
    })
}

fn select(probs: &[f64], decode: &Decode, rng: &mut Option<ChaCha8Rng>, step: usize) -> Result<usize> {
    match decode {
        Decode::Greedy => {
            let mut best = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            Ok(best)
        }
        Decode::Sample(_) => {
            let u: f64 = rng.as_mut().expect("sampler seeded").gen();
            let mut acc = 0.0;
            let mut last = None;
            for (i, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    last = Some(i);
                    if u < acc {
                        return Ok(i);
                    }
                }
            }
            last.ok_or_else(|| ModelError::Decode("no city has positive probability".into()))
        }
        Decode::Forced(seq) => {
            let &c = seq
                .get(step)
                .ok_or_else(|| ModelError::Decode(format!("forced sequence ended at step {step}")))?;
            if c >= probs.len() || probs[c] == 0.0 {
                return Err(ModelError::Decode(format!("forced city {c} is not selectable")));
            }
            Ok(c)
        }
    }
}

/// Rollout recorded on a tape, so `log_prob` can be differentiated.
pub struct TapeRollout {
    pub tour: Tour,
    pub log_prob: Var,
    pub cost: f64,
    /// Full probability vector of every step.
    pub step_probs: Vec<Vec<f64>>,
    /// Guidance vector after every step.
    pub guidance: Vec<Vec<f64>>,
}

pub fn rollout_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &EncoderConfig,
    inst: &CspInstance,
    decode: Decode,
) -> Result<TapeRollout> {
    let enc = encode(tape, store, cfg, inst)?;
    let ctx = prepare(tape, store, cfg, enc)?;
    let mut state = init_state(inst, &ctx);
    let mut rng = match decode {
        Decode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut logs = Vec::new();
    let mut step_probs = Vec::new();
    let mut guidance = Vec::new();
    while !state.done() {
        let prev = state.chosen.last().copied();
        let q = build_query(tape, store, &ctx, &mut state, prev)?;
        let keys = build_keys(tape, store, &ctx, &state.g)?;
        let p = step_probabilities(tape, q, keys, &state.visited, ctx.d_k)?;
        let probs = tape.value(p).data().to_vec();
        let c = select(&probs, &decode, &mut rng, state.step)?;
        let pc = tape.pick(p, c)?;
        logs.push(tape.ln(pc));
        step_probs.push(probs);

        state.visited[c] = true;
        state.chosen.push(c);
        state.step += 1;
        for &j in std::iter::once(&c).chain(inst.cover_set(c)) {
            if !state.covered[j] {
                state.covered[j] = true;
                state.covered_count += 1;
            }
        }
        update_guidance(&mut state.g, inst, c)?;
        guidance.push(state.g.clone());
    }
    if let Decode::Forced(seq) = decode {
        if seq.len() != state.chosen.len() {
            return Err(ModelError::Decode(format!(
                "forced sequence has {} cities but the rollout ended after {}",
                seq.len(),
                state.chosen.len()
            )));
        }
    }
    let log_prob = tape.add_n(&logs)?;
    let tour = Tour::from_unique(state.chosen);
    let cost = csp_core::cycle_length(inst, tour.order());
    Ok(TapeRollout {
        tour,
        log_prob,
        cost,
        step_probs,
        guidance,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub tour: Tour,
    pub log_prob: f64,
    pub cost: f64,
    pub steps: usize,
}

pub fn rollout(store: &ParamStore, cfg: &EncoderConfig, inst: &CspInstance, decode: Decode) -> Result<Rollout> {
    let mut tape = Tape::new();
    let r = rollout_on_tape(&mut tape, store, cfg, inst, decode)?;
    Ok(Rollout {
        steps: r.tour.len(),
        log_prob: tape.value(r.log_prob).item(),
        cost: r.cost,
        tour: r.tour,
    })
}
