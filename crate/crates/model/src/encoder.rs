//! Static city embeddings: an affine embedding of the coordinates followed by
//! `num_layers` transformer layers (multi-head attention and feed-forward
//! sublayers, each with a residual connection and layer norm).

use csp_autodiff::layers::{layer_norm, linear, project};
use csp_autodiff::{Array, ParamStore, Tape, Var};
use csp_core::CspInstance;

use crate::{EncoderConfig, Result};

/// Handles to the encoder output on a tape.
#[derive(Clone, Copy, Debug)]
pub struct EncoderOutput {
    /// `[n x d_h]` final embeddings.
    pub h_final: Var,
    /// `[1 x d_h]` row mean of `h_final`.
    pub h_mean: Var,
}

pub fn coords_array(inst: &CspInstance) -> Array {
    let data = inst.coords().iter().flat_map(|p| [p.x, p.y]).collect();
    Array::new(vec![inst.n(), 2], data).expect("two columns per city")
}

pub fn embed_cities(tape: &mut Tape, store: &ParamStore, coords: Var) -> Result<Var> {
    Ok(linear(tape, store, "encoder.embed", coords)?)
}

pub fn mha(tape: &mut Tape, store: &ParamStore, cfg: &EncoderConfig, prefix: &str, h: Var) -> Result<Var> {
    let q = project(tape, store, &format!("{prefix}.wq"), h)?;
    let k = project(tape, store, &format!("{prefix}.wk"), h)?;
    let v = project(tape, store, &format!("{prefix}.wv"), h)?;
    let dk = cfg.d_k();
    let scale = 1.0 / (dk as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.num_heads);
    for m in 0..cfg.num_heads {
        let (a, b) = (m * dk, (m + 1) * dk);
        let qm = tape.slice_cols(q, a, b)?;
        let km = tape.slice_cols(k, a, b)?;
        let vm = tape.slice_cols(v, a, b)?;
        let s = tape.matmul_nt(qm, km)?;
        let s = tape.scale(s, scale);
        let w = tape.softmax_rows(s)?;
        heads.push(tape.matmul(w, vm)?);
    }
    let cat = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    Ok(project(tape, store, &format!("{prefix}.wo"), cat)?)
}

pub fn encoder_layer(tape: &mut Tape, store: &ParamStore, cfg: &EncoderConfig, layer: usize, h: Var) -> Result<Var> {
    let p = format!("encoder.layer{layer}");
    let att = mha(tape, store, cfg, &p, h)?;
    let res = tape.add(h, att)?;
    let h1 = layer_norm(tape, store, &format!("{p}.norm1"), res)?;
    let f = linear(tape, store, &format!("{p}.ff1"), h1)?;
    let f = tape.relu(f);
    let f = linear(tape, store, &format!("{p}.ff2"), f)?;
    let res = tape.add(h1, f)?;
    Ok(layer_norm(tape, store, &format!("{p}.norm2"), res)?)
}

pub fn encode(tape: &mut Tape, store: &ParamStore, cfg: &EncoderConfig, inst: &CspInstance) -> Result<EncoderOutput> {
    let x = tape.constant(coords_array(inst));
    let mut h = embed_cities(tape, store, x)?;
    for l in 0..cfg.num_layers {
        h = encoder_layer(tape, store, cfg, l, h)?;
    }
    let h_mean = tape.mean_rows(h)?;
    Ok(EncoderOutput { h_final: h, h_mean })
}

/// Encodes on a throwaway tape and returns `(h_final, h_mean)` values.
pub fn encode_values(store: &ParamStore, cfg: &EncoderConfig, inst: &CspInstance) -> Result<(Array, Array)> {
    let mut tape = Tape::new();
    let out = encode(&mut tape, store, cfg, inst)?;
    Ok((tape.value(out.h_final).clone(), tape.value(out.h_mean).clone()))
}
