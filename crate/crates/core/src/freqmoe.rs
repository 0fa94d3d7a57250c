//! Band-split routing over token sequences: a depthwise Gaussian FIR low-pass
//! along the token axis, an energy gate and a text gate over experts, fused
//! top-1 routing, and low-rank adapter merging.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape, usage, Result};
use crate::imgstats::sigmoid;

/// Added to the token energy total before dividing.
pub const ENERGY_EPS: f64 = 1e-12;

/// Real tensor of shape `batch x length x dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    batch: usize,
    length: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TokenSequence {
    pub fn new(batch: usize, length: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if length == 0 || dim == 0 {
            return Err(usage(format!(
                "token sequence needs length >= 1 and dim >= 1, got {length} and {dim}"
            )));
        }
        if values.len() != batch * length * dim {
            return Err(shape(format!(
                "{} values for a {batch}x{length}x{dim} sequence",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(usage("token values must be finite"));
        }
        Ok(Self {
            batch,
            length,
            dim,
            values,
        })
    }

    pub fn zeros(batch: usize, length: usize, dim: usize) -> Result<Self> {
        Self::new(batch, length, dim, vec![0.0; batch * length * dim])
    }

    pub fn from_fn(
        batch: usize,
        length: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(batch * length * dim);
        for b in 0..batch {
            for t in 0..length {
                for d in 0..dim {
                    values.push(f(b, t, d));
                }
            }
        }
        Self::new(batch, length, dim, values)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.batch, self.length, self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    fn idx(&self, b: usize, t: usize, d: usize) -> usize {
        (b * self.length + t) * self.dim + d
    }

    pub fn get(&self, b: usize, t: usize, d: usize) -> f64 {
        self.values[self.idx(b, t, d)]
    }

    /// The `dim` channel values of one token.
    pub fn token(&self, b: usize, t: usize) -> &[f64] {
        let i = self.idx(b, t, 0);
        &self.values[i..i + self.dim]
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape(format!(
                "sequences of shape {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { values, ..*self })
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { values, ..*self }
    }
}

/// Symmetric, normalized, strictly positive FIR taps of odd length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirKernel {
    taps: Vec<f64>,
}

impl FirKernel {
    pub const DEFAULT_SIZE: usize = 9;
    pub const DEFAULT_SIGMA: f64 = 2.0;

    /// Sampled Gaussian truncated to `size` taps and renormalized.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(usage(format!("kernel size must be odd, got {size}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(usage(format!("kernel sigma must be positive, got {sigma}")));
        }
        let r = (size / 2) as f64;
        let raw: Vec<f64> = (0..size)
            .map(|k| {
                let o = k as f64 - r;
                (-o * o / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let s: f64 = raw.iter().sum();
        let taps: Vec<f64> = raw.iter().map(|v| v / s).collect();
        if taps.iter().any(|t| *t <= 0.0) {
            return Err(usage(format!(
                "sigma {sigma} underflows the outer taps of a size-{size} kernel"
            )));
        }
        Ok(Self { taps })
    }

    /// The single-tap identity kernel.
    pub fn delta() -> Self {
        Self { taps: vec![1.0] }
    }

    pub fn size(&self) -> usize {
        self.taps.len()
    }

    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

impl Default for FirKernel {
    fn default() -> Self {
        Self::gaussian(Self::DEFAULT_SIZE, Self::DEFAULT_SIGMA).expect("default kernel is valid")
    }
}

fn check_kernel_fits(x: &TokenSequence, g: &FirKernel) -> Result<()> {
    if g.size() > 2 * x.length + 1 {
        return Err(usage(format!(
            "kernel of size {} is longer than 2L+1 = {} for L = {}",
            g.size(),
            2 * x.length + 1,
            x.length
        )));
    }
    Ok(())
}

/// Depthwise convolution along the token axis with edge-replicate padding.
/// Evaluated as `x_t + sum_k g_k (x_s - x_t)`, so constant runs pass through
/// bit-exactly even though the taps only sum to one up to rounding.
pub fn fir_lowpass(x: &TokenSequence, g: &FirKernel) -> Result<TokenSequence> {
    check_kernel_fits(x, g)?;
    let (l, d) = (x.length, x.dim);
    let r = g.radius() as isize;
    let mut out = vec![0.0; x.values.len()];
    for b in 0..x.batch {
        for t in 0..l {
            let dst = x.idx(b, t, 0);
            for (k, &tap) in g.taps.iter().enumerate() {
                let s = (t as isize + k as isize - r).clamp(0, l as isize - 1) as usize;
                let src = x.idx(b, s, 0);
                for c in 0..d {
                    out[dst + c] += tap * (x.values[src + c] - x.values[dst + c]);
                }
            }
            for c in 0..d {
                out[dst + c] += x.values[dst + c];
            }
        }
    }
    Ok(x.with_values(out))
}

/// `x - fir_lowpass(x)`.
pub fn fir_highpass(x: &TokenSequence, g: &FirKernel) -> Result<TokenSequence> {
    x.sub(&fir_lowpass(x, g)?)
}

/// Transpose of [`fir_lowpass`] as a linear map.
fn fir_lowpass_adjoint(y: &TokenSequence, g: &FirKernel) -> TokenSequence {
    let (l, d) = (y.length, y.dim);
    let r = g.radius() as isize;
    let rest = 1.0 - g.taps.iter().sum::<f64>();
    let mut out = vec![0.0; y.values.len()];
    for b in 0..y.batch {
        for t in 0..l {
            let src = y.idx(b, t, 0);
            for (k, &tap) in g.taps.iter().enumerate() {
                let s = (t as isize + k as isize - r).clamp(0, l as isize - 1) as usize;
                let dst = y.idx(b, s, 0);
                for c in 0..d {
                    out[dst + c] += tap * y.values[src + c];
                }
            }
            for c in 0..d {
                out[src + c] += rest * y.values[src + c];
            }
        }
    }
    y.with_values(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One gate row per token.
    Token,
    /// One gate row per sequence (token mean).
    Sequence,
}

/// Expert weights, `batch x tokens x experts`. Sequence-level weights have
/// `tokens == 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateWeights {
    batch: usize,
    tokens: usize,
    experts: usize,
    granularity: Granularity,
    values: Vec<f64>,
}

impl GateWeights {
    pub fn new(
        batch: usize,
        tokens: usize,
        experts: usize,
        granularity: Granularity,
        values: Vec<f64>,
    ) -> Result<Self> {
        if experts == 0 || tokens == 0 {
            return Err(usage("gate weights need at least one token and one expert"));
        }
        if values.len() != batch * tokens * experts {
            return Err(shape(format!(
                "{} values for {batch}x{tokens}x{experts} gate weights",
                values.len()
            )));
        }
        let g = Self {
            batch,
            tokens,
            experts,
            granularity,
            values,
        };
        if g.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || g.max_simplex_error() > 1e-6 {
            return Err(usage("gate rows must be non-negative and sum to 1"));
        }
        Ok(g)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, b: usize, t: usize) -> &[f64] {
        let i = (b * self.tokens + t) * self.experts;
        &self.values[i..i + self.experts]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.experts)
    }

    /// Largest `|sum(row) - 1|` over all rows.
    pub fn max_simplex_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.batch, self.tokens, self.experts) != (other.batch, other.tokens, other.experts) {
            return Err(shape(format!(
                "gate weights {}x{}x{} and {}x{}x{}",
                self.batch, self.tokens, self.experts, other.batch, other.tokens, other.experts
            )));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouterConfig {
    /// Unconstrained; the fusion weight is `logistic(lambda_s_raw)`.
    pub lambda_s_raw: f64,
    pub temperature: f64,
    pub kernel: FirKernel,
    pub num_experts: usize,
    pub granularity: Granularity,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            lambda_s_raw: 0.0,
            temperature: 1.0,
            kernel: FirKernel::default(),
            num_experts: 2,
            granularity: Granularity::Sequence,
        }
    }
}

impl RouterConfig {
    pub fn lambda_s(&self) -> f64 {
        sigmoid(self.lambda_s_raw)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(usage(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !self.lambda_s_raw.is_finite() {
            return Err(usage("lambda_s_raw must be finite"));
        }
        let l = self.lambda_s();
        if !(l > 0.0 && l < 1.0) {
            return Err(usage(format!(
                "lambda_s_raw {} saturates the logistic",
                self.lambda_s_raw
            )));
        }
        if self.num_experts == 0 {
            return Err(usage("at least one expert is required"));
        }
        Ok(())
    }
}

fn token_energies(x: &TokenSequence, low: &TokenSequence) -> Vec<(f64, f64)> {
    x.values
        .chunks(x.dim)
        .zip(low.values.chunks(x.dim))
        .map(|(xs, ls)| {
            xs.iter().zip(ls).fold((0.0, 0.0), |(el, eh), (xv, lv)| {
                let h = xv - lv;
                (el + lv * lv, eh + h * h)
            })
        })
        .collect()
}

/// Per-token share of energy in the low band, `batch * length` values.
/// All-zero tokens get 0.5.
pub fn low_band_fraction(x: &TokenSequence, g: &FirKernel) -> Result<Vec<f64>> {
    let low = fir_lowpass(x, g)?;
    Ok(token_energies(x, &low)
        .into_iter()
        .map(|(el, eh)| low_fraction(el, eh))
        .collect())
}

fn low_fraction(e_low: f64, e_high: f64) -> f64 {
    if e_low + e_high == 0.0 {
        0.5
    } else {
        e_low / (e_low + e_high + ENERGY_EPS)
    }
}

/// Two-expert gate from band energies: `softmax([p_low, p_high] / temperature)`.
pub fn energy_gate(e_low: f64, e_high: f64, temperature: f64) -> [f64; 2] {
    let p = low_fraction(e_low, e_high);
    let w = softmax(&[p / temperature, (1.0 - p) / temperature]);
    [w[0], w[1]]
}

/// Gradient of `sum_i upstream[i] * low_band_fraction(x)[i]` with respect to `x`.
pub fn low_band_fraction_vjp(x: &TokenSequence, g: &FirKernel, upstream: &[f64]) -> Result<TokenSequence> {
    if upstream.len() != x.batch * x.length {
        return Err(shape(format!(
            "{} upstream values for {} tokens",
            upstream.len(),
            x.batch * x.length
        )));
    }
    let low = fir_lowpass(x, g)?;
    let energies = token_energies(x, &low);
    let d = x.dim;
    let mut g_low = vec![0.0; x.values.len()];
    let mut g_x = vec![0.0; x.values.len()];
    for (i, ((el, eh), c)) in energies.iter().zip(upstream).enumerate() {
        if el + eh == 0.0 {
            continue;
        }
        let s = el + eh + ENERGY_EPS;
        let a = (eh + ENERGY_EPS) / (s * s);
        let bcoef = -el / (s * s);
        for k in i * d..(i + 1) * d {
            let lv = low.values[k];
            let hv = x.values[k] - lv;
            g_low[k] = c * (2.0 * a * lv - 2.0 * bcoef * hv);
            g_x[k] = c * 2.0 * bcoef * hv;
        }
    }
    let back = fir_lowpass_adjoint(&x.with_values(g_low), g);
    Ok(x.with_values(g_x.iter().zip(&back.values).map(|(a, b)| a + b).collect()))
}

/// Token-wise visual gate over two experts (low band first):
/// `softmax([p_low, p_high] / temperature)`.
pub fn spectral_gate(x: &TokenSequence, cfg: &RouterConfig) -> Result<GateWeights> {
    cfg.validate()?;
    if cfg.num_experts != 2 {
        return Err(usage(format!(
            "the spectral gate has two experts, config asks for {}",
            cfg.num_experts
        )));
    }
    let low = fir_lowpass(x, &cfg.kernel)?;
    let values = token_energies(x, &low)
        .into_iter()
        .flat_map(|(el, eh)| energy_gate(el, eh, cfg.temperature))
        .collect();
    GateWeights::new(x.batch, x.length, 2, Granularity::Token, values)
}

/// Token-wise text gate: right-pad `h_text` with zero tokens to `target_len`,
/// map each token through the `dim x experts` matrix, softmax over experts.
pub fn text_gate(h_text: &TokenSequence, target_len: usize, weight: &DMatrix<f64>) -> Result<GateWeights> {
    if h_text.length > target_len {
        return Err(usage(format!(
            "text length {} exceeds target length {target_len}",
            h_text.length
        )));
    }
    if weight.nrows() != h_text.dim || weight.ncols() == 0 {
        return Err(shape(format!(
            "gate matrix is {}x{}, expected {}xN with N >= 1",
            weight.nrows(),
            weight.ncols(),
            h_text.dim
        )));
    }
    let n = weight.ncols();
    let mut values = Vec::with_capacity(h_text.batch * target_len * n);
    for b in 0..h_text.batch {
        for t in 0..target_len {
            let logits: Vec<f64> = if t < h_text.length {
                let tok = h_text.token(b, t);
                (0..n)
                    .map(|e| tok.iter().enumerate().map(|(d, v)| v * weight[(d, e)]).sum())
                    .collect()
            } else {
                vec![0.0; n]
            };
            values.extend(softmax(&logits));
        }
    }
    GateWeights::new(h_text.batch, target_len, n, Granularity::Token, values)
}

/// Convex combination `lambda_s * w_text + (1 - lambda_s) * w_visual`.
pub fn fuse(w_text: &GateWeights, w_visual: &GateWeights, lambda_s: f64) -> Result<GateWeights> {
    w_text.check_same_shape(w_visual)?;
    if !(0.0..=1.0).contains(&lambda_s) {
        return Err(usage(format!("lambda_s must lie in [0, 1], got {lambda_s}")));
    }
    let values = w_text
        .values
        .iter()
        .zip(&w_visual.values)
        .map(|(t, v)| lambda_s * t + (1.0 - lambda_s) * v)
        .collect();
    GateWeights::new(w_text.batch, w_text.tokens, w_text.experts, w_text.granularity, values)
}

/// Fused gates, their reduction to the routing granularity, and the chosen
/// expert per reduced row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Routing {
    pub fused: GateWeights,
    pub reduced: GateWeights,
    pub selection: Vec<usize>,
}

impl Routing {
    /// The selection as one-hot rows shaped like `reduced`.
    pub fn one_hot(&self) -> GateWeights {
        let n = self.reduced.experts;
        let values = self
            .selection
            .iter()
            .flat_map(|&s| (0..n).map(move |e| if e == s { 1.0 } else { 0.0 }))
            .collect();
        GateWeights {
            values,
            ..self.reduced.clone()
        }
    }
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Reduces token-wise gates to `granularity` and picks the top expert.
pub fn route(fused: &GateWeights, granularity: Granularity) -> Result<Routing> {
    let reduced = match granularity {
        Granularity::Token => fused.clone(),
        Granularity::Sequence => {
            let n = fused.experts;
            let mut values = vec![0.0; fused.batch * n];
            for b in 0..fused.batch {
                for t in 0..fused.tokens {
                    for (e, v) in fused.row(b, t).iter().enumerate() {
                        values[b * n + e] += v;
                    }
                }
                for v in &mut values[b * n..(b + 1) * n] {
                    *v /= fused.tokens as f64;
                }
            }
            GateWeights::new(fused.batch, 1, n, Granularity::Sequence, values)?
        }
    };
    let selection = reduced.rows().map(argmax).collect();
    Ok(Routing {
        fused: fused.clone(),
        reduced,
        selection,
    })
}

pub fn fuse_and_route(w_text: &GateWeights, w_visual: &GateWeights, cfg: &RouterConfig) -> Result<Routing> {
    cfg.validate()?;
    route(&fuse(w_text, w_visual, cfg.lambda_s())?, cfg.granularity)
}

/// Low-rank adapter `a * b` with `a: d_out x r` and `b: r x d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraExpert {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LoraExpert {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.ncols() != b.nrows() {
            return Err(shape(format!(
                "adapter factors {}x{} and {}x{} do not chain",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// `base + sum_i alpha_i * A_i * B_i`; `base` is left untouched.
pub fn lora_merge(base: &DMatrix<f64>, experts: &[LoraExpert], alpha: &[f64]) -> Result<DMatrix<f64>> {
    if alpha.len() != experts.len() {
        return Err(shape(format!(
            "{} coefficients for {} experts",
            alpha.len(),
            experts.len()
        )));
    }
    let mut merged = base.clone();
    for (i, (e, &a)) in experts.iter().zip(alpha).enumerate() {
        if e.a.nrows() != base.nrows() || e.b.ncols() != base.ncols() {
            return Err(shape(format!(
                "expert {i} produces {}x{}, base is {}x{}",
                e.a.nrows(),
                e.b.ncols(),
                base.nrows(),
                base.ncols()
            )));
        }
        merged.gemm(a, &e.a, &e.b, 1.0);
    }
    Ok(merged)
}

/// Out-of-band penalty and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqRegularizer {
    pub loss: f64,
    pub grad_low: TokenSequence,
    pub grad_high: TokenSequence,
}

/// `mean(|highpass(y_low)|^2 + |lowpass(y_high)|^2)` over all elements.
pub fn freq_regularizer(y_low: &TokenSequence, y_high: &TokenSequence, g: &FirKernel) -> Result<f64> {
    Ok(freq_regularizer_grad(y_low, y_high, g)?.loss)
}

pub fn freq_regularizer_grad(
    y_low: &TokenSequence,
    y_high: &TokenSequence,
    g: &FirKernel,
) -> Result<FreqRegularizer> {
    y_low.check_same_shape(y_high)?;
    let leak_high = fir_highpass(y_low, g)?;
    let leak_low = fir_lowpass(y_high, g)?;
    let n = y_low.values.len();
    if n == 0 {
        return Ok(FreqRegularizer {
            loss: 0.0,
            grad_low: y_low.clone(),
            grad_high: y_high.clone(),
        });
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let loss = (sq(&leak_high.values) + sq(&leak_low.values)) / n as f64;
    let scale = 2.0 / n as f64;
    // The high-pass adjoint is identity minus the low-pass adjoint.
    let back = fir_lowpass_adjoint(&leak_high, g);
    let grad_low = y_low.with_values(
        leak_high
            .values
            .iter()
            .zip(&back.values)
            .map(|(h, b)| scale * (h - b))
            .collect(),
    );
    let grad_high = y_high.with_values(
        fir_lowpass_adjoint(&leak_low, g)
            .values
            .iter()
            .map(|v| scale * v)
            .collect(),
    );
    Ok(FreqRegularizer {
        loss,
        grad_low,
        grad_high,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Low,
    High,
    Mixed,
}

/// Seeded synthetic token sequence for routing demos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenDemoSpec {
    pub batch: usize,
    pub length: usize,
    pub dim: usize,
    pub text_length: usize,
    pub band: Band,
    pub seed: u64,
}

impl Default for TokenDemoSpec {
    fn default() -> Self {
        Self {
            batch: 2,
            length: 64,
            dim: 8,
            text_length: 16,
            band: Band::Low,
            seed: 0,
        }
    }
}

/// Per-channel sinusoids: slow ones (under 0.02 cycles per token) for the low
/// band, near-Nyquist ones (above 0.45) for the high band.
pub fn band_tokens(batch: usize, length: usize, dim: usize, band: Band, rng: &mut ChaCha8Rng) -> Result<TokenSequence> {
    let mut comps: Vec<(f64, f64, f64)> = Vec::new();
    let draw = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
        (
            rng.random_range(0.5..1.5),
            rng.random_range(lo..hi),
            rng.random_range(0.0..std::f64::consts::TAU),
        )
    };
    let per_channel = batch * dim;
    for _ in 0..per_channel {
        let slow = draw(0.002, 0.02, rng);
        let fast = draw(0.45, 0.5, rng);
        match band {
            Band::Low => comps.push(slow),
            Band::High => comps.push(fast),
            Band::Mixed => {
                comps.push(slow);
                comps.push(fast);
            }
        }
    }
    let k = comps.len() / per_channel.max(1);
    TokenSequence::from_fn(batch, length, dim, |b, t, d| {
        comps[(b * dim + d) * k..(b * dim + d + 1) * k]
            .iter()
            .map(|(a, f, ph)| a * (std::f64::consts::TAU * f * t as f64 + ph).cos())
            .sum()
    })
}

/// Everything the routing demo reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteDemo {
    pub lambda_s: f64,
    pub temperature: f64,
    pub granularity: Granularity,
    pub p_low: Vec<f64>,
    pub w_visual: GateWeights,
    pub w_text: GateWeights,
    pub routing: Routing,
}

/// Builds band tokens and a random text prompt from `spec`, then gates and
/// routes them.
pub fn route_demo(spec: &TokenDemoSpec, cfg: &RouterConfig) -> Result<RouteDemo> {
    route_tokens(&demo_tokens(spec)?, spec.text_length, spec.seed, cfg)
}

/// The band tokens [`route_demo`] routes for `spec`.
pub fn demo_tokens(spec: &TokenDemoSpec) -> Result<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    band_tokens(spec.batch, spec.length, spec.dim, spec.band, &mut rng)
}

/// Gates and routes `x` against a random text prompt of `text_length`
/// tokens. The prompt and text map come from a second stream of `seed`;
/// the map is scaled down so the visual gate leads.
pub fn route_tokens(x: &TokenSequence, text_length: usize, seed: u64, cfg: &RouterConfig) -> Result<RouteDemo> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let rng = &mut rng;
    let [batch, length, dim] = x.shape();
    if text_length > length {
        return Err(usage(format!("text length {text_length} exceeds token length {length}")));
    }
    let text = TokenSequence::from_fn(batch, text_length.max(1), dim, |_, _, _| StandardNormal.sample(rng))?;
    let scale = 0.1 / (dim as f64).sqrt();
    let weight = DMatrix::from_fn(dim, cfg.num_experts, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    });
    let w_visual = spectral_gate(x, cfg)?;
    let w_text = text_gate(&text, length, &weight)?;
    let routing = fuse_and_route(&w_text, &w_visual, cfg)?;
    Ok(RouteDemo {
        lambda_s: cfg.lambda_s(),
        temperature: cfg.temperature,
        granularity: cfg.granularity,
        p_low: low_band_fraction(x, &cfg.kernel)?,
        w_visual,
        w_text,
        routing,
    })
}
