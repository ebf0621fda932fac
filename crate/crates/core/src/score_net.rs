//! Conditioned MLP score model with hand-written backpropagation.
//!
//! Pipeline for a batch of poses:
//!
//! 1. pose features (rotation-matrix entries, scaled translation) are
//!    positionally encoded;
//! 2. a linear layer lifts them to the hidden width;
//! 3. each block modulates the hidden state with `A(c)`, `B(c)` (affine
//!    maps of the condition vector `c`), applies a linear layer, SiLU and a
//!    second linear layer, and adds the result back residually;
//! 4. a linear head produces one tangent vector, divided by `σ_i^q`.
//!
//! The condition vector concatenates a positional encoding of the noise
//! index with a learned embedding of the condition id.
//!
//! All parameters live in one flat `Vec<f64>`; [`ParamLayout`] names the
//! slices. Gradients share the layout, which keeps the optimizer and the
//! checkpoint format oblivious to the architecture.

use std::f64::consts::PI;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lie::{group_exp, ParamMode, RigidTransform, Tangent};
use crate::scores::ScoreVector;

/// `sin(2^k π v_j)` and `cos(2^k π v_j)` for `k < n_freq`, grouped per component.
pub fn positional_encode(v: &[f64], n_freq: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n_freq * v.len());
    for &x in v {
        push_encoding(&mut out, x, n_freq);
    }
    out
}

fn push_encoding(out: &mut Vec<f64>, x: f64, n_freq: usize) {
    let mut f = PI;
    for _ in 0..n_freq {
        let (s, c) = (f * x).sin_cos();
        out.push(s);
        out.push(c);
        f *= 2.0;
    }
}

/// `f_i = Σ_j W_ij (A_j cos(π x_j) + B_j sin(π x_j))`; `w` is `out × in`.
pub fn fourier_layer(x: &[f64], a: &[f64], b: &[f64], w: &ArrayView2<f64>) -> Vec<f64> {
    let u: Vec<f64> = x
        .iter()
        .zip(a.iter().zip(b))
        .map(|(&xj, (&aj, &bj))| aj * (PI * xj).cos() + bj * (PI * xj).sin())
        .collect();
    w.dot(&Array1::from(u)).to_vec()
}

/// `f = A ∘ x + B`.
pub fn scale_bias_layer(x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    x.iter().zip(a.iter().zip(b)).map(|(&xj, (&aj, &bj))| aj * xj + bj).collect()
}

fn silu(g: f64) -> f64 {
    g / (1.0 + (-g).exp())
}

fn silu_grad(g: f64) -> f64 {
    let s = 1.0 / (1.0 + (-g).exp());
    s * (1.0 + g * (1.0 - s))
}

/// How blocks inject the condition vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    /// `A(c) cos(πh) + B(c) sin(πh)`
    Fourier,
    /// `A(c) h + B(c)`
    ScaleBias,
}

impl std::str::FromStr for Conditioning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(Conditioning::Fourier),
            "scale_bias" | "scale-bias" => Ok(Conditioning::ScaleBias),
            other => Err(invalid(format!("unknown conditioning '{other}'"))),
        }
    }
}

/// Architecture hyperparameters, persisted with every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub mode: ParamMode,
    pub width: usize,
    pub blocks: usize,
    pub pose_freqs: usize,
    /// Encoding frequencies for translation coordinates.
    pub trans_freqs: usize,
    pub noise_freqs: usize,
    pub embed_dim: usize,
    pub num_conditions: usize,
    pub num_levels: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub conditioning: Conditioning,
    /// Multiplier applied to translations before encoding.
    pub trans_scale: f64,
    /// Exponent `q` of the output scaling `1/σ_i^q`.
    pub output_power: f64,
}

impl NetConfig {
    pub fn new(mode: ParamMode, num_conditions: usize, num_levels: usize) -> Self {
        Self {
            mode,
            width: 256,
            blocks: 1,
            pose_freqs: 4,
            trans_freqs: 6,
            noise_freqs: 6,
            embed_dim: 64,
            num_conditions,
            num_levels,
            sigma_min: 1e-4,
            sigma_max: 1.0,
            conditioning: Conditioning::Fourier,
            trans_scale: 0.2,
            output_power: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.pose_freqs == 0 || self.trans_freqs == 0 || self.noise_freqs == 0 {
            return Err(invalid("width and frequency counts must be positive"));
        }
        if self.num_conditions == 0 || self.embed_dim == 0 {
            return Err(invalid("need at least one condition and a positive embedding size"));
        }
        if self.num_levels < 2 {
            return Err(invalid("need at least two noise levels"));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return Err(invalid("noise bounds must satisfy 0 < sigma_min < sigma_max"));
        }
        if !self.trans_scale.is_finite() || !self.output_power.is_finite() {
            return Err(invalid("non-finite scaling"));
        }
        Ok(())
    }

    pub fn out_dim(&self) -> usize {
        self.mode.tangent_dim()
    }

    pub fn input_dim(&self) -> usize {
        let trans = match self.mode {
            ParamMode::So3 => 0,
            _ => 3 * (2 * self.trans_freqs + 1),
        };
        18 * self.pose_freqs + trans
    }

    pub fn cond_dim(&self) -> usize {
        2 * self.noise_freqs + self.embed_dim
    }

    /// Noise scale of level `i` on the linear schedule.
    pub fn sigma(&self, i: usize) -> f64 {
        let t = i as f64 / (self.num_levels - 1) as f64;
        self.sigma_min + t * (self.sigma_max - self.sigma_min)
    }
}

/// One named slice of the flat parameter vector, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Tensor index shortcuts for one block.
#[derive(Debug, Clone, Copy)]
struct BlockIds {
    wa: usize,
    ba: usize,
    wb: usize,
    bb: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

/// Named layout of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

const EMBED: usize = 0;
const W_IN: usize = 1;
const B_IN: usize = 2;
const W_OUT: usize = 3;
const B_OUT: usize = 4;
const BLOCK_BASE: usize = 5;

impl ParamLayout {
    pub fn for_config(cfg: &NetConfig) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize| {
            tensors.push(TensorSpec {
                name,
                rows,
                cols,
                offset,
            });
            offset += rows * cols;
        };
        let (w, cd) = (cfg.width, cfg.cond_dim());
        push("embed".into(), cfg.num_conditions, cfg.embed_dim);
        push("w_in".into(), cfg.input_dim(), w);
        push("b_in".into(), 1, w);
        push("w_out".into(), w, cfg.out_dim());
        push("b_out".into(), 1, cfg.out_dim());
        for k in 0..cfg.blocks {
            push(format!("block{k}.wa"), cd, w);
            push(format!("block{k}.ba"), 1, w);
            push(format!("block{k}.wb"), cd, w);
            push(format!("block{k}.bb"), 1, w);
            push(format!("block{k}.w1"), w, w);
            push(format!("block{k}.b1"), 1, w);
            push(format!("block{k}.w2"), w, w);
            push(format!("block{k}.b2"), 1, w);
        }
        Self {
            tensors,
            total: offset,
        }
    }

    fn block(&self, k: usize) -> BlockIds {
        let b = BLOCK_BASE + 8 * k;
        BlockIds {
            wa: b,
            ba: b + 1,
            wb: b + 2,
            bb: b + 3,
            w1: b + 4,
            b1: b + 5,
            w2: b + 6,
            b2: b + 7,
        }
    }

    pub fn find(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

/// Learnable weights of the score model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNetParams {
    pub config: NetConfig,
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

/// A batch of network inputs.
#[derive(Debug, Clone, Copy)]
pub struct NetInput<'a> {
    pub poses: &'a [RigidTransform],
    pub levels: &'a [usize],
    pub conds: &'a [usize],
}

/// Intermediates kept by [`ScoreNetParams::forward_cached`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pe: Array2<f64>,
    c: Array2<f64>,
    conds: Vec<usize>,
    hs: Vec<Array2<f64>>,
    blocks: Vec<BlockCache>,
    out_scale: Vec<f64>,
    /// Scaled network output, one row per sample.
    pub output: Array2<f64>,
}

#[derive(Debug, Clone)]
struct BlockCache {
    a: Array2<f64>,
    b: Array2<f64>,
    u: Array2<f64>,
    g: Array2<f64>,
    act: Array2<f64>,
}

/// One training example for [`ScoreNetParams::loss_and_grad`].
#[derive(Debug, Clone, Copy)]
pub struct TrainSample {
    pub pose: RigidTransform,
    pub level: usize,
    pub cond: usize,
    pub target: ScoreVector,
    pub weight: f64,
}

impl ScoreNetParams {
    /// Xavier-uniform weights, zero biases, embeddings uniform in `[-1, 1]`.
    pub fn init<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::for_config(&config);
        let mut values = vec![0.0; layout.total];
        for t in &layout.tensors {
            if t.rows == 1 {
                continue;
            }
            let bound = if t.name == "embed" {
                1.0
            } else {
                (6.0 / (t.rows + t.cols) as f64).sqrt()
            };
            for v in &mut values[t.range()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            config,
            layout,
            values,
        })
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    fn view(&self, id: usize) -> ArrayView2<'_, f64> {
        let t = &self.layout.tensors[id];
        ArrayView2::from_shape((t.rows, t.cols), &self.values[t.range()]).expect("layout shape")
    }

    fn row(&self, id: usize) -> ndarray::ArrayView1<'_, f64> {
        ndarray::ArrayView1::from(&self.values[self.layout.tensors[id].range()])
    }

    fn features(&self, x: &RigidTransform, out: &mut Vec<f64>) {
        let m = x.rot.matrix();
        let n = self.config.pose_freqs;
        for r in 0..3 {
            for c in 0..3 {
                push_encoding(out, m[(r, c)], n);
            }
        }
        if self.config.mode != ParamMode::So3 {
            for k in 0..3 {
                push_encoding(out, x.trans[k] * self.config.trans_scale, self.config.trans_freqs);
            }
            // raw coordinates keep far-away translations distinguishable
            out.extend(x.trans.iter().map(|t| t * self.config.trans_scale));
        }
    }

    fn check_input(&self, input: &NetInput<'_>) -> Result<()> {
        let n = input.poses.len();
        if n == 0 || input.levels.len() != n || input.conds.len() != n {
            return Err(invalid("batch arrays must be non-empty and of equal length"));
        }
        if let Some(&l) = input.levels.iter().find(|&&l| l >= self.config.num_levels) {
            return Err(invalid(format!(
                "noise index {l} out of range [0, {})",
                self.config.num_levels
            )));
        }
        if let Some(&c) = input.conds.iter().find(|&&c| c >= self.config.num_conditions) {
            return Err(invalid(format!(
                "condition id {c} out of range [0, {})",
                self.config.num_conditions
            )));
        }
        Ok(())
    }

    /// Batched forward pass returning the cache needed by [`Self::backward`].
    pub fn forward_cached(&self, input: &NetInput<'_>) -> Result<ForwardCache> {
        self.check_input(input)?;
        let cfg = &self.config;
        let n = input.poses.len();

        let mut pe_buf = Vec::with_capacity(n * cfg.input_dim());
        for x in input.poses {
            self.features(x, &mut pe_buf);
        }
        let pe = Array2::from_shape_vec((n, cfg.input_dim()), pe_buf).expect("feature shape");

        let embed = self.view(EMBED);
        let mut c = Array2::zeros((n, cfg.cond_dim()));
        let mut buf = Vec::with_capacity(2 * cfg.noise_freqs);
        for (r, (&lvl, &cond)) in input.levels.iter().zip(input.conds).enumerate() {
            buf.clear();
            push_encoding(&mut buf, lvl as f64 / (cfg.num_levels - 1) as f64, cfg.noise_freqs);
            let mut row = c.row_mut(r);
            for (j, v) in buf.iter().enumerate() {
                row[j] = *v;
            }
            for j in 0..cfg.embed_dim {
                row[buf.len() + j] = embed[(cond, j)];
            }
        }

        let mut h = pe.dot(&self.view(W_IN)) + &self.row(B_IN);
        let mut hs = Vec::with_capacity(cfg.blocks + 1);
        let mut blocks = Vec::with_capacity(cfg.blocks);
        for k in 0..cfg.blocks {
            let ids = self.layout.block(k);
            let a = c.dot(&self.view(ids.wa)) + &self.row(ids.ba);
            let b = c.dot(&self.view(ids.wb)) + &self.row(ids.bb);
            let u = match cfg.conditioning {
                Conditioning::Fourier => {
                    let mut u = Array2::zeros(h.raw_dim());
                    ndarray::Zip::from(&mut u)
                        .and(&h)
                        .and(&a)
                        .and(&b)
                        .for_each(|u, &h, &a, &b| {
                            let (s, co) = (PI * h).sin_cos();
                            *u = a * co + b * s;
                        });
                    u
                }
                Conditioning::ScaleBias => &a * &h + &b,
            };
            let g = u.dot(&self.view(ids.w1)) + &self.row(ids.b1);
            let act = g.mapv(silu);
            let next = &h + &(act.dot(&self.view(ids.w2)) + &self.row(ids.b2));
            hs.push(h);
            h = next;
            blocks.push(BlockCache { a, b, u, g, act });
        }
        let raw = h.dot(&self.view(W_OUT)) + &self.row(B_OUT);
        hs.push(h);

        let out_scale: Vec<f64> = input
            .levels
            .iter()
            .map(|&l| cfg.sigma(l).powf(-cfg.output_power))
            .collect();
        let mut output = raw;
        for (mut row, s) in output.axis_iter_mut(Axis(0)).zip(&out_scale) {
            row *= *s;
        }
        Ok(ForwardCache {
            pe,
            c,
            conds: input.conds.to_vec(),
            hs,
            blocks,
            out_scale,
            output,
        })
    }

    /// Scores for a batch of poses.
    pub fn forward(&self, input: &NetInput<'_>) -> Result<Vec<ScoreVector>> {
        let cache = self.forward_cached(input)?;
        let mode = self.config.mode;
        cache
            .output
            .axis_iter(Axis(0))
            .map(|row| Tangent::from_slice(mode, row.as_slice().expect("contiguous row")))
            .collect()
    }

    /// Gradient of `Σ_b ⟨d_out_b, s_b⟩` with respect to every parameter,
    /// where `d_out` has one row per sample of the cached batch.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> Vec<f64> {
        let cfg = &self.config;
        let mut grad = vec![0.0; self.values.len()];
        let layout = &self.layout;

        let mut d_raw = d_out.clone();
        for (mut row, s) in d_raw.axis_iter_mut(Axis(0)).zip(&cache.out_scale) {
            row *= *s;
        }
        let h_last = &cache.hs[cfg.blocks];
        add_matmul_tn(&mut grad_view(&mut grad, layout, W_OUT), h_last, &d_raw);
        add_col_sum(&mut grad, layout, B_OUT, &d_raw);
        let mut dh = d_raw.dot(&self.view(W_OUT).t());

        let mut dc = Array2::<f64>::zeros(cache.c.raw_dim());
        for k in (0..cfg.blocks).rev() {
            let ids = layout.block(k);
            let bc = &cache.blocks[k];
            let h = &cache.hs[k];

            add_matmul_tn(&mut grad_view(&mut grad, layout, ids.w2), &bc.act, &dh);
            add_col_sum(&mut grad, layout, ids.b2, &dh);
            let mut dg = dh.dot(&self.view(ids.w2).t());
            ndarray::Zip::from(&mut dg).and(&bc.g).for_each(|d, &g| *d *= silu_grad(g));
            add_matmul_tn(&mut grad_view(&mut grad, layout, ids.w1), &bc.u, &dg);
            add_col_sum(&mut grad, layout, ids.b1, &dg);
            let du = dg.dot(&self.view(ids.w1).t());

            let mut da = Array2::zeros(du.raw_dim());
            let mut db = Array2::zeros(du.raw_dim());
            match cfg.conditioning {
                Conditioning::Fourier => {
                    ndarray::Zip::from(&mut da)
                        .and(&mut db)
                        .and(&du)
                        .and(h)
                        .for_each(|da, db, &du, &h| {
                            let (s, co) = (PI * h).sin_cos();
                            *da = du * co;
                            *db = du * s;
                        });
                    ndarray::Zip::from(&mut dh)
                        .and(&du)
                        .and(h)
                        .and(&bc.a)
                        .and(&bc.b)
                        .for_each(|dh, &du, &h, &a, &b| {
                            let (s, co) = (PI * h).sin_cos();
                            *dh += du * PI * (b * co - a * s);
                        });
                }
                Conditioning::ScaleBias => {
                    ndarray::Zip::from(&mut da)
                        .and(&mut dh)
                        .and(&du)
                        .and(h)
                        .and(&bc.a)
                        .for_each(|da, dh, &du, &h, &a| {
                            *da = du * h;
                            *dh += du * a;
                        });
                    db.assign(&du);
                }
            }
            add_matmul_tn(&mut grad_view(&mut grad, layout, ids.wa), &cache.c, &da);
            add_col_sum(&mut grad, layout, ids.ba, &da);
            add_matmul_tn(&mut grad_view(&mut grad, layout, ids.wb), &cache.c, &db);
            add_col_sum(&mut grad, layout, ids.bb, &db);
            dc = dc + da.dot(&self.view(ids.wa).t()) + db.dot(&self.view(ids.wb).t());
        }

        add_matmul_tn(&mut grad_view(&mut grad, layout, W_IN), &cache.pe, &dh);
        add_col_sum(&mut grad, layout, B_IN, &dh);

        let off = 2 * cfg.noise_freqs;
        let emb = &layout.tensors[EMBED];
        for (r, &cond) in cache.conds.iter().enumerate() {
            let base = emb.offset + cond * emb.cols;
            for j in 0..cfg.embed_dim {
                grad[base + j] += dc[(r, off + j)];
            }
        }
        grad
    }

    /// Weighted DSM loss `mean_b w_b ½‖s_b − t_b‖²` and its gradient.
    pub fn loss_and_grad(&self, batch: &[TrainSample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(invalid("empty minibatch"));
        }
        let poses: Vec<_> = batch.iter().map(|s| s.pose).collect();
        let levels: Vec<_> = batch.iter().map(|s| s.level).collect();
        let conds: Vec<_> = batch.iter().map(|s| s.cond).collect();
        let cache = self.forward_cached(&NetInput {
            poses: &poses,
            levels: &levels,
            conds: &conds,
        })?;
        let dim = self.config.out_dim();
        let n = batch.len() as f64;
        let mut d_out = Array2::zeros((batch.len(), dim));
        let mut loss = 0.0;
        for (r, s) in batch.iter().enumerate() {
            if s.target.dim() != dim {
                return Err(invalid("target dimension does not match the network output"));
            }
            let mut sq = 0.0;
            for (j, t) in s.target.as_slice().iter().enumerate() {
                let res = cache.output[(r, j)] - t;
                sq += res * res;
                d_out[(r, j)] = s.weight * res / n;
            }
            loss += 0.5 * s.weight * sq;
        }
        Ok((loss / n, self.backward(&cache, &d_out)))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Single-sample forward pass with the pose given in tangent coordinates.
pub fn net_forward(
    params: &ScoreNetParams,
    x: &Tangent,
    noise_index: usize,
    cond: usize,
) -> Result<ScoreVector> {
    let pose = group_exp(x, params.config.mode)?;
    let mut out = params.forward(&NetInput {
        poses: &[pose],
        levels: &[noise_index],
        conds: &[cond],
    })?;
    Ok(out.remove(0))
}

fn grad_view<'a>(grad: &'a mut [f64], layout: &ParamLayout, id: usize) -> ArrayViewMut2<'a, f64> {
    let t = &layout.tensors[id];
    ArrayViewMut2::from_shape((t.rows, t.cols), &mut grad[t.range()]).expect("layout shape")
}

/// `dst += aᵀ b`
fn add_matmul_tn(dst: &mut ArrayViewMut2<'_, f64>, a: &Array2<f64>, b: &Array2<f64>) {
    ndarray::linalg::general_mat_mul(1.0, &a.t(), b, 1.0, dst);
}

fn add_col_sum(grad: &mut [f64], layout: &ParamLayout, id: usize, d: &Array2<f64>) {
    let t = &layout.tensors[id];
    let s = d.sum_axis(Axis(0));
    for (g, v) in grad[t.range()].iter_mut().zip(s.iter()) {
        *g += v;
    }
}

// ---------------------------------------------------------------------------
// Checkpoint container
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 8] = b"POSEDIFF";
const FORMAT_VERSION: u32 = 1;

/// Optimizer moments stored alongside the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    layout: ParamLayout,
    has_optimizer: bool,
    #[serde(default)]
    meta: serde_json::Value,
}

/// Parameters plus optional optimizer state and free-form metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ScoreNetParams,
    pub optimizer: Option<OptimizerState>,
    pub meta: serde_json::Value,
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    w.write_all(&(xs.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_f64s<R: Read>(r: &mut R, expected: usize) -> Result<Vec<f64>> {
    let n = u64::from_le_bytes(read_exact::<_, 8>(r)?) as usize;
    if n != expected {
        return Err(Error::Format {
            what: "checkpoint",
            detail: format!("array holds {n} values, layout expects {expected}"),
        });
    }
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

impl Checkpoint {
    /// Layout: 8-byte magic, `u32` version, `u32` header length, JSON
    /// header, then `u64` count + little-endian `f64` values for the
    /// parameters and, when present, `u64` step followed by the first and
    /// second optimizer moments in the same count-prefixed form.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let header = Header {
            config: self.params.config.clone(),
            layout: self.params.layout.clone(),
            has_optimizer: self.optimizer.is_some(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format {
            what: "checkpoint header",
            detail: e.to_string(),
        })?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        write_f64s(w, &self.params.values)?;
        if let Some(opt) = &self.optimizer {
            w.write_all(&opt.step.to_le_bytes())?;
            write_f64s(w, &opt.m)?;
            write_f64s(w, &opt.v)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "checkpoint",
            detail,
        };
        if &read_exact::<_, 8>(r)? != MAGIC {
            return Err(bad("missing magic bytes".into()));
        }
        let version = u32::from_le_bytes(read_exact::<_, 4>(r)?);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = u32::from_le_bytes(read_exact::<_, 4>(r)?) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
        header.config.validate()?;
        if header.layout != ParamLayout::for_config(&header.config) {
            return Err(bad("layout does not match architecture".into()));
        }
        let total = header.layout.total;
        let values = read_f64s(r, total)?;
        let optimizer = if header.has_optimizer {
            let step = u64::from_le_bytes(read_exact::<_, 8>(r)?);
            let m = read_f64s(r, total)?;
            let v = read_f64s(r, total)?;
            Some(OptimizerState { step, m, v })
        } else {
            None
        };
        Ok(Self {
            params: ScoreNetParams {
                config: header.config,
                layout: header.layout,
                values,
            },
            optimizer,
            meta: header.meta,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(&mut f)
    }
}
