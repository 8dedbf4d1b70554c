//! Temporal convolutional network with a fully connected read-out.
//!
//! Each residual block applies two weight-normalized dilated causal
//! convolutions, each followed by ReLU and dropout, adds the (projected)
//! block input and applies a final ReLU. The head reads the last time step.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conv::{self, dot, ConvDims};
use super::weight_norm;
use crate::error::{Error, Result};
use crate::features::WindowFeature;
use crate::geometry::Vec2;
use crate::rng;
use crate::trajectory::Sample;

/// Smoothing inside the per-sample Euclidean loss.
pub const LOSS_EPS: f64 = 1e-8;

/// Samples per gradient chunk. Chunk sums are reduced in order, so results
/// do not depend on the thread count.
const GRAD_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub window: usize,
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub dilations: Vec<usize>,
    pub dropout: f64,
    pub output_dim: usize,
}

impl NetworkConfig {
    /// Three blocks of 32, 64 and 96 channels, kernel 8, dilations 1, 2, 4.
    pub fn standard(input_dim: usize) -> Self {
        NetworkConfig {
            input_dim,
            window: 8,
            channels: vec![32, 64, 96],
            kernel_size: 8,
            dilations: vec![1, 2, 4],
            dropout: 0.2,
            output_dim: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.input_dim == 0 || self.window == 0 || self.output_dim == 0 {
            return bad("input_dim, window and output_dim must be positive");
        }
        if self.channels.is_empty() || self.channels.len() != self.dilations.len() {
            return bad("channels and dilations must be non-empty and of equal length");
        }
        if self.channels.contains(&0) || self.dilations.contains(&0) || self.kernel_size == 0 {
            return bad("channels, dilations and kernel size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvSlot {
    pub dims: ConvDims,
    pub v: usize,
    pub g: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ProjSlot {
    pub cin: usize,
    pub cout: usize,
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockSlot {
    pub conv1: ConvSlot,
    pub conv2: ConvSlot,
    pub proj: Option<ProjSlot>,
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub blocks: Vec<BlockSlot>,
    pub fc_w: usize,
    pub fc_b: usize,
    pub fc_in: usize,
    pub len: usize,
    pub tensors: Vec<TensorInfo>,
}

impl Layout {
    fn new(cfg: &NetworkConfig) -> Layout {
        let mut tensors = Vec::new();
        let mut off = 0;
        let mut take = |name: String, shape: Vec<usize>| {
            let start = off;
            off += shape.iter().product::<usize>();
            tensors.push(TensorInfo {
                name,
                offset: start,
                shape,
            });
            start
        };
        let mut blocks = Vec::new();
        let mut cin = cfg.input_dim;
        for (k, (&c, &h)) in cfg.channels.iter().zip(&cfg.dilations).enumerate() {
            let mut conv = |name: &str, cin: usize| {
                let dims = ConvDims {
                    cin,
                    cout: c,
                    kernel: cfg.kernel_size,
                    dilation: h,
                };
                ConvSlot {
                    dims,
                    v: take(format!("block{k}.{name}.v"), vec![c, cfg.kernel_size, cin]),
                    g: take(format!("block{k}.{name}.g"), vec![c]),
                    b: take(format!("block{k}.{name}.b"), vec![c]),
                }
            };
            let conv1 = conv("conv1", cin);
            let conv2 = conv("conv2", c);
            let proj = (cin != c).then(|| ProjSlot {
                cin,
                cout: c,
                w: take(format!("block{k}.proj.w"), vec![c, cin]),
                b: take(format!("block{k}.proj.b"), vec![c]),
            });
            blocks.push(BlockSlot { conv1, conv2, proj });
            cin = c;
        }
        let fc_w = take("fc.w".into(), vec![cfg.output_dim, cin]);
        let fc_b = take("fc.b".into(), vec![cfg.output_dim]);
        Layout {
            blocks,
            fc_w,
            fc_b,
            fc_in: cin,
            len: off,
            tensors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dropout source for one training pass: masks depend only on the seed, the
/// iteration and the sample's position in the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutKey {
    pub seed: u64,
    pub iteration: u64,
}

/// Network configuration plus a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    layout: Layout,
    params: Vec<f64>,
}

/// Per-layer outputs of the residual blocks, each `window × channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub len: usize,
    /// Outputs of every convolution sub-layer and every block, in order.
    pub layers: Vec<(String, usize, Vec<f64>)>,
}

struct BlockCache {
    a1: Vec<f64>,
    h1: Vec<f64>,
    a2: Vec<f64>,
    m1: Option<Vec<f64>>,
    m2: Option<Vec<f64>>,
    y: Vec<f64>,
}

struct Cache {
    input: Vec<f64>,
    blocks: Vec<BlockCache>,
    out: Vec<f64>,
}

/// Effective convolution weights for one parameter state.
pub(crate) struct Prepared<'a> {
    net: &'a Network,
    /// Per block: (conv1 weight, conv1 norms, conv2 weight, conv2 norms).
    weights: Vec<[(Vec<f64>, Vec<f64>); 2]>,
}

impl Network {
    /// Fresh network: directions uniform in ±1/√fan_in, gains equal to the
    /// direction norms, biases zero.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.len];
        let mut r = rng::stream(seed, "init");
        let fill = |slice: &mut [f64], fan_in: usize, r: &mut rng::Rng| {
            let a = 1.0 / (fan_in as f64).sqrt();
            for p in slice {
                *p = r.random_range(-a..a);
            }
        };
        for b in &layout.blocks {
            for c in [b.conv1, b.conv2] {
                let per = c.dims.fan_in();
                fill(&mut params[c.v..c.v + c.dims.weight_len()], per, &mut r);
                for o in 0..c.dims.cout {
                    let row = &params[c.v + o * per..c.v + (o + 1) * per];
                    params[c.g + o] = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                }
            }
            if let Some(p) = b.proj {
                fill(&mut params[p.w..p.w + p.cin * p.cout], p.cin, &mut r);
            }
        }
        let fc_len = config.output_dim * layout.fc_in;
        fill(&mut params[layout.fc_w..layout.fc_w + fc_len], layout.fc_in, &mut r);
        Ok(Network {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.len {
            return Err(Error::Shape {
                expected: format!("{} parameters", layout.len),
                actual: format!("{}", params.len()),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParams("non-finite network parameter".into()));
        }
        Ok(Network {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.layout.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let t = self.layout.tensors.iter().find(|t| t.name == name)?;
        Some(&self.params[t.offset..t.offset + t.len()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let t = self.layout.tensors.iter().find(|t| t.name == name)?;
        Some(&mut self.params[t.offset..t.offset + t.len()])
    }

    fn check_input(&self, x: &WindowFeature) -> Result<()> {
        let want = (self.config.window, self.config.input_dim);
        if x.shape() != want {
            return Err(Error::Shape {
                expected: format!("{}×{}", want.0, want.1),
                actual: format!("{}×{}", x.rows(), x.dim()),
            });
        }
        Ok(())
    }

    pub(crate) fn prepare(&self) -> Result<Prepared<'_>> {
        let mut weights = Vec::with_capacity(self.layout.blocks.len());
        for b in &self.layout.blocks {
            let eff = |c: ConvSlot| -> Result<(Vec<f64>, Vec<f64>)> {
                let n = c.dims.weight_len();
                let mut w = vec![0.0; n];
                let norms = weight_norm::effective_into(
                    &self.params[c.v..c.v + n],
                    &self.params[c.g..c.g + c.dims.cout],
                    c.dims.fan_in(),
                    &mut w,
                )?;
                Ok((w, norms))
            };
            weights.push([eff(b.conv1)?, eff(b.conv2)?]);
        }
        Ok(Prepared { net: self, weights })
    }

    /// Deterministic prediction of the next velocity.
    pub fn forward(&self, x: &WindowFeature) -> Result<Vec2> {
        self.check_input(x)?;
        let out = self.prepare()?.forward(x.as_slice(), None).out;
        Ok(Vec2::new(out[0], out.get(1).copied().unwrap_or(0.0)))
    }

    /// Raw output vector for `x` in the given mode. Train mode draws dropout
    /// masks from `key` and the sample index `k`.
    pub fn forward_mode(&self, x: &WindowFeature, mode: Mode, key: DropoutKey, k: u64) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let p = self.prepare()?;
        let mut r = (mode == Mode::Train).then(|| dropout_rng(key, k));
        Ok(p.forward(x.as_slice(), r.as_mut()).out)
    }

    pub fn predict_batch(&self, xs: &[&WindowFeature]) -> Result<Vec<Vec2>> {
        for x in xs {
            self.check_input(x)?;
        }
        let p = self.prepare()?;
        Ok(xs
            .par_iter()
            .map(|x| {
                let o = p.forward(x.as_slice(), None).out;
                Vec2::new(o[0], o.get(1).copied().unwrap_or(0.0))
            })
            .collect())
    }

    /// Eval-mode activations of every residual sub-layer.
    pub fn activations(&self, x: &WindowFeature) -> Result<Activations> {
        self.check_input(x)?;
        let cache = self.prepare()?.forward(x.as_slice(), None);
        let mut layers = Vec::new();
        for (k, (b, c)) in self.layout.blocks.iter().zip(&cache.blocks).enumerate() {
            let ch = b.conv1.dims.cout;
            layers.push((format!("block{k}.conv1"), ch, c.h1.clone()));
            let h2: Vec<f64> = c.a2.iter().map(|a| a.max(0.0)).collect();
            layers.push((format!("block{k}.conv2"), ch, h2));
            layers.push((format!("block{k}.out"), ch, c.y.clone()));
        }
        Ok(Activations {
            len: x.rows(),
            layers,
        })
    }

    /// Sum over `batch` of `sqrt(‖v̂ − v‖² + ε)`, eval mode.
    pub fn loss(&self, batch: &[&Sample]) -> Result<f64> {
        for s in batch {
            self.check_input(&s.x)?;
        }
        let p = self.prepare()?;
        let parts: Vec<f64> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|s| sample_loss(&p.forward(s.x.as_slice(), None).out, s.target).0)
                    .sum()
            })
            .collect();
        Ok(parts.into_iter().sum())
    }

    /// Loss and its exact gradient with respect to every parameter. Dropout
    /// is applied when `dropout` is given and the configured rate is
    /// positive.
    pub fn loss_and_gradient(&self, batch: &[&Sample], dropout: Option<DropoutKey>) -> Result<(f64, Vec<f64>)> {
        for s in batch {
            self.check_input(&s.x)?;
        }
        let p = self.prepare()?;
        let n = self.layout.len;
        let parts: Vec<(f64, Vec<f64>)> = batch
            .par_chunks(GRAD_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut grad = vec![0.0; n];
                let mut loss = 0.0;
                for (j, s) in chunk.iter().enumerate() {
                    let k = (ci * GRAD_CHUNK + j) as u64;
                    let mut r = dropout.map(|key| dropout_rng(key, k));
                    let cache = p.forward(s.x.as_slice(), r.as_mut());
                    let (l, dout) = sample_loss(&cache.out, s.target);
                    loss += l;
                    p.backward(&cache, &dout, &mut grad);
                }
                (loss, grad)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; n];
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        p.finish_gradient(&mut grad);
        Ok((loss, grad))
    }
}

fn dropout_rng(key: DropoutKey, k: u64) -> rng::Rng {
    rng::indexed_stream(key.seed, "dropout", &[key.iteration, k])
}

/// Per-sample loss and its gradient with respect to the output.
fn sample_loss(out: &[f64], target: Vec2) -> (f64, Vec<f64>) {
    let t = [target.x, target.y];
    let e: Vec<f64> = out.iter().zip(t.iter().chain(std::iter::repeat(&0.0))).map(|(o, t)| o - t).collect();
    let l = (e.iter().map(|x| x * x).sum::<f64>() + LOSS_EPS).sqrt();
    (l, e.iter().map(|x| x / l).collect())
}

fn relu_dropout(a: &[f64], rate: f64, r: Option<&mut rng::Rng>) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut h: Vec<f64> = a.iter().map(|x| x.max(0.0)).collect();
    match r {
        Some(r) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..a.len())
                .map(|_| if r.random::<f64>() < rate { 0.0 } else { keep })
                .collect();
            for (hi, m) in h.iter_mut().zip(&mask) {
                *hi *= m;
            }
            (h, Some(mask))
        }
        _ => (h, None),
    }
}

impl Prepared<'_> {
    fn forward(&self, x: &[f64], mut r: Option<&mut rng::Rng>) -> Cache {
        let net = self.net;
        let len = net.config.window;
        let rate = net.config.dropout;
        let params = &net.params;
        let mut blocks = Vec::with_capacity(net.layout.blocks.len());
        let mut input: &[f64] = x;
        for (b, w) in net.layout.blocks.iter().zip(&self.weights) {
            let c = b.conv1.dims.cout;
            let mut a1 = vec![0.0; len * c];
            conv::forward(input, len, &b.conv1.dims, &w[0].0, &params[b.conv1.b..b.conv1.b + c], &mut a1);
            let (h1, m1) = relu_dropout(&a1, rate, r.as_deref_mut());
            let mut a2 = vec![0.0; len * c];
            conv::forward(&h1, len, &b.conv2.dims, &w[1].0, &params[b.conv2.b..b.conv2.b + c], &mut a2);
            let (h2, m2) = relu_dropout(&a2, rate, r.as_deref_mut());
            let mut y = h2;
            match b.proj {
                Some(p) => {
                    let pw = &params[p.w..p.w + p.cin * p.cout];
                    let pb = &params[p.b..p.b + p.cout];
                    for e in 0..len {
                        let xr = &input[e * p.cin..(e + 1) * p.cin];
                        for o in 0..p.cout {
                            y[e * c + o] += pb[o] + dot(&pw[o * p.cin..(o + 1) * p.cin], xr);
                        }
                    }
                }
                None => {
                    for (yi, xi) in y.iter_mut().zip(input) {
                        *yi += xi;
                    }
                }
            }
            for yi in &mut y {
                *yi = yi.max(0.0);
            }
            blocks.push(BlockCache { a1, h1, a2, m1, m2, y });
            input = &blocks.last().expect("just pushed").y;
        }
        let fin = net.layout.fc_in;
        let last = &input[(len - 1) * fin..len * fin];
        let out: Vec<f64> = (0..net.config.output_dim)
            .map(|o| params[net.layout.fc_b + o] + dot(&params[net.layout.fc_w + o * fin..][..fin], last))
            .collect();
        Cache {
            input: x.to_vec(),
            blocks,
            out,
        }
    }

    /// Accumulates gradients into `grad`. Convolution direction slots receive
    /// gradients with respect to the effective weights; [`Self::finish_gradient`]
    /// converts them.
    fn backward(&self, cache: &Cache, dout: &[f64], grad: &mut [f64]) {
        let net = self.net;
        let len = net.config.window;
        let params = &net.params;
        let fin = net.layout.fc_in;
        let nb = net.layout.blocks.len();
        let last = &cache.blocks[nb - 1].y[(len - 1) * fin..len * fin];
        let mut dy = vec![0.0; len * fin];
        for (o, &d) in dout.iter().enumerate() {
            grad[net.layout.fc_b + o] += d;
            let wrow = &params[net.layout.fc_w + o * fin..][..fin];
            let grow = &mut grad[net.layout.fc_w + o * fin..][..fin];
            for i in 0..fin {
                grow[i] += d * last[i];
                dy[(len - 1) * fin + i] += d * wrow[i];
            }
        }
        for k in (0..nb).rev() {
            let b = &net.layout.blocks[k];
            let c = &cache.blocks[k];
            let w = &self.weights[k];
            let input: &[f64] = if k == 0 { &cache.input } else { &cache.blocks[k - 1].y };
            let ch = b.conv1.dims.cout;
            let cin = b.conv1.dims.cin;
            // final ReLU
            let dz: Vec<f64> = dy.iter().zip(&c.y).map(|(d, y)| if *y > 0.0 { *d } else { 0.0 }).collect();
            let mut dx = vec![0.0; len * cin];
            match b.proj {
                Some(p) => {
                    let pw = &params[p.w..p.w + p.cin * p.cout];
                    for e in 0..len {
                        let xr = &input[e * cin..(e + 1) * cin];
                        for o in 0..ch {
                            let d = dz[e * ch + o];
                            if d == 0.0 {
                                continue;
                            }
                            grad[p.b + o] += d;
                            let gw = &mut grad[p.w + o * cin..p.w + (o + 1) * cin];
                            let wr = &pw[o * cin..(o + 1) * cin];
                            let dxr = &mut dx[e * cin..(e + 1) * cin];
                            for i in 0..cin {
                                gw[i] += d * xr[i];
                                dxr[i] += d * wr[i];
                            }
                        }
                    }
                }
                None => {
                    for (a, d) in dx.iter_mut().zip(&dz) {
                        *a += d;
                    }
                }
            }
            let da2 = relu_dropout_back(&dz, &c.a2, c.m2.as_deref());
            let mut dh1 = vec![0.0; len * ch];
            {
                let (gv, rest) = grad.split_at_mut(b.conv2.g);
                let dw = &mut gv[b.conv2.v..b.conv2.v + b.conv2.dims.weight_len()];
                let db = &mut rest[b.conv2.b - b.conv2.g..][..ch];
                conv::backward(&c.h1, len, &b.conv2.dims, &w[1].0, &da2, &mut dh1, dw, db);
            }
            let da1 = relu_dropout_back(&dh1, &c.a1, c.m1.as_deref());
            {
                let (gv, rest) = grad.split_at_mut(b.conv1.g);
                let dw = &mut gv[b.conv1.v..b.conv1.v + b.conv1.dims.weight_len()];
                let db = &mut rest[b.conv1.b - b.conv1.g..][..ch];
                conv::backward(input, len, &b.conv1.dims, &w[0].0, &da1, &mut dx, dw, db);
            }
            dy = dx;
        }
    }

    /// Turns effective-weight gradients into direction and gain gradients.
    fn finish_gradient(&self, grad: &mut [f64]) {
        let params = &self.net.params;
        for (b, w) in self.net.layout.blocks.iter().zip(&self.weights) {
            for (c, (_, norms)) in [b.conv1, b.conv2].into_iter().zip(w.iter()) {
                let n = c.dims.weight_len();
                let cout = c.dims.cout;
                let (gv, rest) = grad.split_at_mut(c.g);
                weight_norm::backprop(
                    &params[c.v..c.v + n],
                    &params[c.g..c.g + cout],
                    norms,
                    c.dims.fan_in(),
                    &mut gv[c.v..c.v + n],
                    &mut rest[..cout],
                );
            }
        }
    }
}

fn relu_dropout_back(dh: &[f64], a: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    dh.iter()
        .zip(a)
        .enumerate()
        .map(|(i, (d, a))| {
            if *a > 0.0 {
                d * mask.map_or(1.0, |m| m[i])
            } else {
                0.0
            }
        })
        .collect()
}
