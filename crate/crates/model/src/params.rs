use std::path::Path;

use csp_autodiff::checkpoint::Checkpoint;
use csp_autodiff::layers::{init_gru, init_layer_norm, init_linear};
use csp_autodiff::{Array, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// Model widths. The decoder has no hyperparameters of its own: it shares
/// `d_h` and uses `d_h / num_heads` as its scaling width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_h: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub d_ff: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_h: 128,
            num_layers: 3,
            num_heads: 8,
            d_ff: 512,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_h == 0 || self.num_heads == 0 || self.d_ff == 0 {
            return Err(ModelError::Config("widths and head count must be positive".into()));
        }
        if !self.d_h.is_multiple_of(self.num_heads) {
            return Err(ModelError::Config(format!(
                "d_h = {} is not divisible by num_heads = {}",
                self.d_h, self.num_heads
            )));
        }
        if self.d_h < 2 {
            return Err(ModelError::Config("d_h must be at least 2 for layer norm".into()));
        }
        Ok(())
    }

    /// Per-head key width `d_h / M`.
    pub fn d_k(&self) -> usize {
        self.d_h / self.num_heads
    }
}

/// Fresh parameters: every weight matrix (and the start token) drawn from
/// `uniform(-1/sqrt(d_h), 1/sqrt(d_h))`, biases zero, norm gains one.
pub fn init_params(cfg: &EncoderConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let d = cfg.d_h;
    let bound = 1.0 / (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    init_linear(&mut s, "encoder.embed", 2, d, bound, &mut rng)?;
    for l in 0..cfg.num_layers {
        let p = format!("encoder.layer{l}");
        for w in ["wq", "wk", "wv", "wo"] {
            s.insert_uniform(&format!("{p}.{w}"), &[d, d], bound, &mut rng)?;
        }
        init_layer_norm(&mut s, &format!("{p}.norm1"), d)?;
        init_linear(&mut s, &format!("{p}.ff1"), d, cfg.d_ff, bound, &mut rng)?;
        init_linear(&mut s, &format!("{p}.ff2"), cfg.d_ff, d, bound, &mut rng)?;
        init_layer_norm(&mut s, &format!("{p}.norm2"), d)?;
    }
    s.insert_uniform("decoder.v1", &[1, d], bound, &mut rng)?;
    init_gru(&mut s, "decoder.gru", d, bound, &mut rng)?;
    for w in ["wk1", "wv1", "wk"] {
        s.insert_uniform(&format!("decoder.{w}"), &[d, d], bound, &mut rng)?;
    }
    s.insert_uniform("decoder.wg", &[1, d], bound, &mut rng)?;
    Ok(s)
}

/// Writes `params` (with Adam state) and the config as a checkpoint.
pub fn save_model(path: &Path, cfg: &EncoderConfig, params: &ParamStore) -> Result<()> {
    let mut ck = Checkpoint::new(serde_json::json!({ "model": cfg }));
    ck.arrays = params.to_named_arrays("");
    ck.write(path)?;
    Ok(())
}

/// Reads the model config and current parameters from any checkpoint
/// written by this crate (plain model files and trainer checkpoints alike).
pub fn load_model(path: &Path) -> Result<(EncoderConfig, ParamStore)> {
    let ck = Checkpoint::read(path)?;
    model_from_checkpoint(&ck)
}

pub(crate) fn model_from_checkpoint(ck: &Checkpoint) -> Result<(EncoderConfig, ParamStore)> {
    let cfg: EncoderConfig = serde_json::from_value(ck.meta["model"].clone())
        .map_err(|e| ModelError::Config(format!("checkpoint lacks a model config: {e}")))?;
    cfg.validate()?;
    let own = ck.without_prefixes(&[crate::trainer::BASELINE_PREFIX]);
    let params = ParamStore::from_named_arrays(&own, "")?;
    let expected = init_params(&cfg, 0)?;
    for name in expected.names() {
        let want = expected.value(name).map(Array::shape);
        if params.value(name).map(Array::shape) != want {
            return Err(ModelError::Config(format!(
                "checkpoint parameter `{name}` missing or misshapen"
            )));
        }
    }
    Ok((cfg, params))
}
