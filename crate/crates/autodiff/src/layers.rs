//! Parameterized layers built from tape operations. Each layer reads its
//! weights from a [`ParamStore`] under a dot-separated prefix.

use rand::Rng;

use crate::{Array, ParamStore, Result, Tape, Var};

/// `x [n x d_in] * weight [d_in x d_out] + bias [d_out]`.
pub fn linear(tape: &mut Tape, store: &ParamStore, prefix: &str, x: Var) -> Result<Var> {
    let w = tape.param(store, &format!("{prefix}.weight"))?;
    let b = tape.param(store, &format!("{prefix}.bias"))?;
    let y = tape.matmul(x, w)?;
    tape.add(y, b)
}

/// Like [`linear`] without a bias.
pub fn project(tape: &mut Tape, store: &ParamStore, name: &str, x: Var) -> Result<Var> {
    let w = tape.param(store, name)?;
    tape.matmul(x, w)
}

pub fn layer_norm(tape: &mut Tape, store: &ParamStore, prefix: &str, x: Var) -> Result<Var> {
    let g = tape.param(store, &format!("{prefix}.gain"))?;
    let b = tape.param(store, &format!("{prefix}.bias"))?;
    tape.layer_norm(x, g, b)
}

pub struct GruStep {
    /// Per-step output; identical to `hidden` for a single-layer GRU.
    pub output: Var,
    pub hidden: Var,
}

/// Gated recurrent unit with the reset gate applied to the hidden state
/// before its projection:
///
/// ```text
/// z  = sigmoid(x W_iz + h W_hz + b_z)
/// r  = sigmoid(x W_ir + h W_hr + b_r)
/// n  = tanh(x W_in + (r * h) W_hn + b_n)
/// h' = (1 - z) * n + z * h
/// ```
pub fn gru_cell(tape: &mut Tape, store: &ParamStore, prefix: &str, x: Var, h: Var) -> Result<GruStep> {
    let gate = |tape: &mut Tape, g: &str, hin: Var| -> Result<Var> {
        let xi = project(tape, store, &format!("{prefix}.w_i{g}"), x)?;
        let hh = project(tape, store, &format!("{prefix}.w_h{g}"), hin)?;
        let b = tape.param(store, &format!("{prefix}.b_{g}"))?;
        let s = tape.add(xi, hh)?;
        tape.add(s, b)
    };
    let z_pre = gate(tape, "z", h)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, "r", h)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h)?;
    let n_pre = gate(tape, "n", rh)?;
    let n = tape.tanh(n_pre);
    let neg_n = tape.scale(n, -1.0);
    let h_minus_n = tape.add(h, neg_n)?;
    let gated = tape.mul(z, h_minus_n)?;
    let hidden = tape.add(n, gated)?;
    Ok(GruStep {
        output: hidden,
        hidden,
    })
}

pub fn init_linear<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    d_in: usize,
    d_out: usize,
    bound: f64,
    rng: &mut R,
) -> Result<()> {
    store.insert_uniform(&format!("{prefix}.weight"), &[d_in, d_out], bound, rng)?;
    store.insert(&format!("{prefix}.bias"), Array::zeros(&[d_out]))
}

pub fn init_layer_norm(store: &mut ParamStore, prefix: &str, d: usize) -> Result<()> {
    store.insert(&format!("{prefix}.gain"), Array::full(&[d], 1.0))?;
    store.insert(&format!("{prefix}.bias"), Array::zeros(&[d]))
}

pub fn init_gru<R: Rng>(store: &mut ParamStore, prefix: &str, d: usize, bound: f64, rng: &mut R) -> Result<()> {
    for g in ["z", "r", "n"] {
        store.insert_uniform(&format!("{prefix}.w_i{g}"), &[d, d], bound, rng)?;
        store.insert_uniform(&format!("{prefix}.w_h{g}"), &[d, d], bound, rng)?;
        store.insert(&format!("{prefix}.b_{g}"), Array::zeros(&[d]))?;
    }
    Ok(())
}
