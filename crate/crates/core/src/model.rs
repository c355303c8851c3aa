//! The residual-MLP forecaster with timestamp and channel embeddings.
//!
//! Each channel of a window is forecast independently with shared weights:
//!
//! ```text
//! x̂   = (x − μ) / σ                        per-window, per-channel z-score
//! z   = input_proj(x̂)                      L → d_model
//! zᵗ  = [z, e_w + e_m]                      if timestamp embedding on
//! zᵗᶜ = [zᵗ, e_identity]                    if channel embedding on
//! H   ← H + down(ReLU(up(H)))               m times, width D
//! ŷ   = head(H)·σ + μ                       D → T
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CalendarFields, Freq, Window};
use crate::embedding::{ActiveGroups, EmbeddingSpec, IndexEmbedding, IndexVectors};
use crate::error::{Error, Result};
use crate::numeric::{relu_backward, relu_forward, AffineLayer, ParamSet, ReluMask};

pub const SIGMA_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Embedding tables start at exactly zero.
    #[default]
    Zeros,
    /// Timestamp tables start standard-normal (ablation only).
    Random,
}

impl std::str::FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeros" => Ok(InitMode::Zeros),
            "random" => Ok(InitMode::Random),
            other => Err(Error::Config(format!("init_mode must be zeros or random, got {other:?}"))),
        }
    }
}

/// Everything needed to allocate a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub t_dim: usize,
    pub c_dim: usize,
    pub te_enabled: bool,
    pub ce_enabled: bool,
    pub groups: ActiveGroups,
    pub freq: Freq,
    pub n_channels: usize,
    pub init_mode: InitMode,
}

impl ModelConfig {
    /// Width of the residual stream, `d_model + T_dim·[TE] + C_dim·[CE]`.
    pub fn hidden_dim(&self) -> usize {
        self.d_model
            + if self.te_enabled { self.t_dim } else { 0 }
            + if self.ce_enabled { self.c_dim } else { 0 }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("lookback", self.lookback),
            ("horizon", self.horizon),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("n_channels", self.n_channels),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be ≥ 1")));
        }
        if self.lookback < 2 {
            return Err(Error::Config("lookback must be ≥ 2 for instance normalization".into()));
        }
        if self.te_enabled && self.t_dim == 0 {
            return Err(Error::Config("t_dim must be ≥ 1 when the timestamp embedding is on".into()));
        }
        if self.ce_enabled && self.c_dim == 0 {
            return Err(Error::Config("c_dim must be ≥ 1 when the channel embedding is on".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlock {
    /// `D → d_ff`
    pub up: AffineLayer,
    /// `d_ff → D`
    pub down: AffineLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub input_proj: AffineLayer,
    pub blocks: Vec<ResidualBlock>,
    pub head: AffineLayer,
}

impl ModelParams {
    fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.hidden_dim();
        Self {
            input_proj: AffineLayer::zeros(cfg.lookback, cfg.d_model),
            blocks: (0..cfg.layers)
                .map(|_| ResidualBlock {
                    up: AffineLayer::zeros(d, cfg.d_ff),
                    down: AffineLayer::zeros(cfg.d_ff, d),
                })
                .collect(),
            head: AffineLayer::zeros(d, cfg.horizon),
        }
    }

    fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let d = cfg.hidden_dim();
        let input_proj = AffineLayer::init_uniform(cfg.lookback, cfg.d_model, rng);
        let blocks = (0..cfg.layers)
            .map(|_| {
                let up = AffineLayer::init_uniform(d, cfg.d_ff, rng);
                let down = AffineLayer::init_uniform(cfg.d_ff, d, rng);
                ResidualBlock { up, down }
            })
            .collect();
        let head = AffineLayer::init_uniform(d, cfg.horizon, rng);
        Self {
            input_proj,
            blocks,
            head,
        }
    }
}

/// Window statistics used to normalize one channel's input and restore its output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceNormState {
    pub mu: f64,
    pub sigma: f64,
}

pub fn instance_normalize(x: &[f64]) -> (Vec<f64>, InstanceNormState) {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    let sigma = var.sqrt().max(SIGMA_FLOOR);
    let x_hat = x.iter().map(|v| (v - mu) / sigma).collect();
    (x_hat, InstanceNormState { mu, sigma })
}

pub fn instance_denormalize(y_norm: &[f64], state: &InstanceNormState) -> Vec<f64> {
    y_norm.iter().map(|v| v * state.sigma + state.mu).collect()
}

/// Activations cached by [`IndexNet::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub norm: InstanceNormState,
    pub x_hat: Vec<f64>,
    pub index: IndexVectors,
    /// `states[0]` is `zᵗᶜ`, `states[l]` is `H⁽ˡ⁾`; `m + 1` entries.
    pub states: Vec<Vec<f64>>,
    /// ReLU outputs of each block.
    pub hidden: Vec<Vec<f64>>,
    pub masks: Vec<ReluMask>,
    pub y_norm: Vec<f64>,
}

impl ForwardTrace {
    pub fn z_tc(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn h_final(&self) -> &[f64] {
        self.states.last().expect("at least one state")
    }

    pub fn prediction(&self) -> Vec<f64> {
        instance_denormalize(&self.y_norm, &self.norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexNet {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub embedding: IndexEmbedding,
}

impl IndexNet {
    /// Backbone weights drawn uniform fan-in; embeddings zero (or random for
    /// the timestamp tables under [`InitMode::Random`]).
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        model.params = ModelParams::init(&config, rng);
        if config.init_mode == InitMode::Random {
            if let Some(t) = model.embedding.timestamp.as_mut() {
                t.randomize(rng);
            }
        }
        Ok(model)
    }

    /// Every parameter exactly zero. Also serves as a gradient buffer.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let embedding = IndexEmbedding::build(&EmbeddingSpec {
            freq: config.freq,
            n_channels: config.n_channels,
            t_dim: config.te_enabled.then_some(config.t_dim),
            c_dim: config.ce_enabled.then_some(config.c_dim),
            groups: config.groups,
        })?;
        let model = Self {
            config,
            params: ModelParams::zeros(&config),
            embedding,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            params: ModelParams::zeros(&self.config),
            embedding: self.embedding.zeros_like(),
        }
    }

    /// Verifies that every tensor agrees with `config`.
    pub fn check_shapes(&self) -> Result<()> {
        let cfg = &self.config;
        let d = cfg.hidden_dim();
        let expect = |ctx: &'static str, layer: &AffineLayer, i: usize, o: usize| -> Result<()> {
            if layer.input_dim() != i {
                return Err(Error::shape(ctx, i, layer.input_dim()));
            }
            if layer.output_dim() != o {
                return Err(Error::shape(ctx, o, layer.output_dim()));
            }
            Ok(())
        };
        expect("input_proj", &self.params.input_proj, cfg.lookback, cfg.d_model)?;
        if self.params.blocks.len() != cfg.layers {
            return Err(Error::shape("residual block count", cfg.layers, self.params.blocks.len()));
        }
        for b in &self.params.blocks {
            expect("block up", &b.up, d, cfg.d_ff)?;
            expect("block down", &b.down, cfg.d_ff, d)?;
        }
        expect("head", &self.params.head, d, cfg.horizon)?;
        if cfg.d_model + self.embedding.output_dim() != d {
            return Err(Error::shape(
                "embedding width",
                d - cfg.d_model,
                self.embedding.output_dim(),
            ));
        }
        if let Some(c) = &self.embedding.channel {
            if c.n_channels() != cfg.n_channels {
                return Err(Error::shape("channel table rows", cfg.n_channels, c.n_channels()));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.num_params()
    }

    /// Forecast of 1-based channel `n` for a window.
    pub fn forward_window(&self, w: &Window<'_>, n: usize) -> Result<(Vec<f64>, ForwardTrace)> {
        self.forward(w.input(n - 1), &w.start_calendar, n)
    }

    /// Forecast for raw input `x` (length L) starting at `cal`, for 1-based channel `n`.
    pub fn forward(&self, x: &[f64], cal: &CalendarFields, n: usize) -> Result<(Vec<f64>, ForwardTrace)> {
        let cfg = &self.config;
        if x.len() != cfg.lookback {
            return Err(Error::shape("forward input", cfg.lookback, x.len()));
        }
        let (x_hat, norm) = instance_normalize(x);
        let index = self.embedding.retrieve(cal, n)?;

        let d = cfg.hidden_dim();
        let mut h0 = vec![0.0; d];
        self.params.input_proj.forward_into(&x_hat, &mut h0[..cfg.d_model])?;
        self.embedding.write_concat(&index, &mut h0[cfg.d_model..]);

        let mut states = Vec::with_capacity(cfg.layers + 1);
        let mut hidden = Vec::with_capacity(cfg.layers);
        let mut masks = Vec::with_capacity(cfg.layers);
        states.push(h0);
        let mut pre = vec![0.0; cfg.d_ff];
        for block in &self.params.blocks {
            let h = states.last().expect("non-empty");
            block.up.forward_into(h, &mut pre)?;
            let (r, mask) = relu_forward(&pre);
            let mut next = block.down.forward(&r)?;
            for (o, prev) in next.iter_mut().zip(h) {
                *o += prev;
            }
            hidden.push(r);
            masks.push(mask);
            states.push(next);
        }
        let y_norm = self.params.head.forward(states.last().expect("non-empty"))?;
        let y = instance_denormalize(&y_norm, &norm);
        Ok((
            y,
            ForwardTrace {
                norm,
                x_hat,
                index,
                states,
                hidden,
                masks,
                y_norm,
            },
        ))
    }

    /// Accumulates parameter gradients for `∂L/∂ŷ_norm = grad_y_norm` into `grads`.
    pub fn backward(&self, trace: &ForwardTrace, grad_y_norm: &[f64], grads: &mut IndexNet) -> Result<()> {
        let cfg = &self.config;
        if grad_y_norm.len() != cfg.horizon {
            return Err(Error::shape("backward grad", cfg.horizon, grad_y_norm.len()));
        }
        let d = cfg.hidden_dim();
        let mut grad_h = vec![0.0; d];
        self.params
            .head
            .backward_acc(trace.h_final(), grad_y_norm, &mut grads.params.head, &mut grad_h)?;

        for (l, block) in self.params.blocks.iter().enumerate().rev() {
            let gblock = &mut grads.params.blocks[l];
            // H⁽ˡ⁾ = H⁽ˡ⁻¹⁾ + down(r): the skip path keeps grad_h as is.
            let grad_r = block.down.backward(&trace.hidden[l], &grad_h, &mut gblock.down)?;
            let grad_pre = relu_backward(&trace.masks[l], &grad_r);
            block
                .up
                .backward_acc(&trace.states[l], &grad_pre, &mut gblock.up, &mut grad_h)?;
        }

        let (grad_z, grad_emb) = grad_h.split_at(cfg.d_model);
        // the input gradient is not needed; x̂ is data
        let mut sink = vec![0.0; cfg.lookback];
        self.params
            .input_proj
            .backward_acc(&trace.x_hat, grad_z, &mut grads.params.input_proj, &mut sink)?;
        if !grad_emb.is_empty() {
            self.embedding
                .backward_concat(&trace.index.source, grad_emb, &mut grads.embedding);
        }
        Ok(())
    }
}

impl ParamSet for IndexNet {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        fn push<'a>(out: &mut Vec<(String, &'a [f64])>, prefix: String, layer: &'a AffineLayer) {
            out.push((format!("{prefix}.weight"), layer.weight.as_slice()));
            out.push((format!("{prefix}.bias"), layer.bias.as_slice()));
        }
        let p = &self.params;
        let mut out = Vec::new();
        push(&mut out, "input_proj".into(), &p.input_proj);
        for (i, b) in p.blocks.iter().enumerate() {
            push(&mut out, format!("blocks.{i}.up"), &b.up);
            push(&mut out, format!("blocks.{i}.down"), &b.down);
        }
        push(&mut out, "head".into(), &p.head);
        out.extend(self.embedding.blocks());
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        fn push<'a>(out: &mut Vec<(String, &'a mut [f64])>, prefix: String, layer: &'a mut AffineLayer) {
            out.push((format!("{prefix}.weight"), layer.weight.as_mut_slice()));
            out.push((format!("{prefix}.bias"), layer.bias.as_mut_slice()));
        }
        let p = &mut self.params;
        let mut out = Vec::new();
        push(&mut out, "input_proj".into(), &mut p.input_proj);
        for (i, b) in p.blocks.iter_mut().enumerate() {
            push(&mut out, format!("blocks.{i}.up"), &mut b.up);
            push(&mut out, format!("blocks.{i}.down"), &mut b.down);
        }
        push(&mut out, "head".into(), &mut p.head);
        out.extend(self.embedding.blocks_mut());
        out
    }
}
