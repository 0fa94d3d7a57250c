//! Adversarial objective math: a multi-level critic head with spectrally
//! normalized channel mixing and blur-before-stride downsampling, the
//! discriminator and generator losses, and the total objective.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape, usage, Result};
use crate::imgstats::{sigmoid, ImageBuffer};

/// Lower clamp applied to probabilities inside logarithms.
pub const LOG_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 50.0,
            beta: 5.0,
            lambda: 0.5,
            gamma: 1e-3,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(usage(format!("loss.{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Result of one normalization call.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub matrix: DMatrix<f64>,
    pub sigma: f64,
    /// Set when the input was the zero matrix and came back unchanged.
    pub zero: bool,
}

/// Power-iteration spectral normalizer. The singular-vector estimates persist
/// between calls so repeated normalization of a slowly changing matrix
/// starts warm. Not meant to be shared across threads without a lock.
#[derive(Debug, Clone, Default)]
pub struct SpectralNorm {
    v: Option<DVector<f64>>,
    u: Option<DVector<f64>>,
}

fn start_vector(n: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.norm();
    v / norm
}

impl SpectralNorm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current left singular-vector estimate, if any.
    pub fn left(&self) -> Option<&DVector<f64>> {
        self.u.as_ref()
    }

    pub fn normalize(&mut self, w: &DMatrix<f64>, iterations: usize) -> Result<Normalized> {
        if iterations == 0 {
            return Err(usage("spectral normalization needs at least one iteration"));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(usage("matrix entries must be finite"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Ok(Normalized {
                matrix: w.clone(),
                sigma: 0.0,
                zero: true,
            });
        }
        let mut v = match self.v.take() {
            Some(v) if v.len() == w.ncols() => v,
            _ => start_vector(w.ncols()),
        };
        let mut u = DVector::zeros(w.nrows());
        for _ in 0..iterations {
            u = w * &v;
            let nu = u.norm();
            if nu == 0.0 {
                // v fell into the null space; restart from the heaviest column.
                let j = (0..w.ncols())
                    .max_by(|a, b| w.column(*a).norm().total_cmp(&w.column(*b).norm()))
                    .expect("non-empty matrix");
                v = DVector::from_fn(w.ncols(), |i, _| if i == j { 1.0 } else { 0.0 });
                continue;
            }
            u /= nu;
            v = w.transpose() * &u;
            let nv = v.norm();
            v /= nv;
        }
        let sigma = (w * &v).norm();
        self.v = Some(v);
        self.u = Some(u);
        Ok(Normalized {
            matrix: w / sigma,
            sigma,
            zero: false,
        })
    }
}

/// Dense `channels x height x width` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(usage("feature maps need non-zero extents"));
        }
        if data.len() != channels * height * width {
            return Err(shape(format!(
                "{} values for a {channels}x{height}x{width} map",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(usage("feature values must be finite"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Applies `m` (`c_out x channels`) to every pixel's channel vector.
    pub fn mix_channels(&self, m: &DMatrix<f64>, bias: f64) -> Result<FeatureMap> {
        if m.ncols() != self.channels || m.nrows() == 0 {
            return Err(shape(format!(
                "mixing matrix {}x{} for {} channels",
                m.nrows(),
                m.ncols(),
                self.channels
            )));
        }
        let n = self.height * self.width;
        let mut data = vec![bias; m.nrows() * n];
        for o in 0..m.nrows() {
            let dst = &mut data[o * n..(o + 1) * n];
            for c in 0..self.channels {
                let w = m[(o, c)];
                for (d, s) in dst.iter_mut().zip(self.plane(c)) {
                    *d += w * s;
                }
            }
        }
        FeatureMap::new(m.nrows(), self.height, self.width, data)
    }
}

const BINOMIAL: [f64; 3] = [0.25, 0.5, 0.25];

/// Separable 1-2-1 blur with replicate padding, same size.
pub fn binomial_blur(map: &FeatureMap) -> FeatureMap {
    let (h, w) = (map.height, map.width);
    let mut out = Vec::with_capacity(map.data.len());
    let mut tmp = vec![0.0; h * w];
    for c in 0..map.channels {
        let p = map.plane(c);
        for y in 0..h {
            for x in 0..w {
                let at = |dx: isize| p[y * w + (x as isize + dx).clamp(0, w as isize - 1) as usize];
                tmp[y * w + x] = BINOMIAL[0] * at(-1) + BINOMIAL[1] * at(0) + BINOMIAL[2] * at(1);
            }
        }
        for y in 0..h {
            for x in 0..w {
                let at = |dy: isize| tmp[(y as isize + dy).clamp(0, h as isize - 1) as usize * w + x];
                out.push(BINOMIAL[0] * at(-1) + BINOMIAL[1] * at(0) + BINOMIAL[2] * at(1));
            }
        }
    }
    FeatureMap { data: out, ..*map }
}

/// Every other row and column starting at the origin.
pub fn subsample2(map: &FeatureMap) -> FeatureMap {
    let (h2, w2) = (map.height.div_ceil(2), map.width.div_ceil(2));
    let mut data = Vec::with_capacity(map.channels * h2 * w2);
    for c in 0..map.channels {
        for y in 0..h2 {
            for x in 0..w2 {
                data.push(map.get(c, 2 * y, 2 * x));
            }
        }
    }
    FeatureMap {
        channels: map.channels,
        height: h2,
        width: w2,
        data,
    }
}

/// Anti-aliased stride-2 downsampling: binomial blur, then subsample.
pub fn blurpool_downsample(map: &FeatureMap) -> Result<FeatureMap> {
    if map.height < 2 || map.width < 2 {
        return Err(usage(format!(
            "blurpool needs H, W >= 2, got {}x{}",
            map.height, map.width
        )));
    }
    Ok(subsample2(&binomial_blur(map)))
}

/// Multi-scale feature maps plus a pooled vector, from an abstract provider.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticFeatures {
    pub levels: Vec<FeatureMap>,
    pub pooled: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticScore {
    pub level_means: Vec<f64>,
    pub pooled_score: f64,
    pub aggregate: f64,
}

/// Uniform-weight aggregate `(sum(level_means) + pooled) / (L + 1)`.
pub fn aggregate(level_means: Vec<f64>, pooled_score: f64) -> CriticScore {
    let aggregate = (level_means.iter().sum::<f64>() + pooled_score) / (level_means.len() + 1) as f64;
    CriticScore {
        level_means,
        pooled_score,
        aggregate,
    }
}

#[derive(Debug, Clone)]
pub struct LevelHead {
    pub mix: DMatrix<f64>,
    pub bias: f64,
    norm: SpectralNorm,
}

impl LevelHead {
    pub fn new(mix: DMatrix<f64>, bias: f64) -> Self {
        Self {
            mix,
            bias,
            norm: SpectralNorm::new(),
        }
    }
}

/// Shallow critic head: per level one normalized 1x1 mix and one blurpool,
/// plus a normalized linear map on the pooled vector.
#[derive(Debug, Clone)]
pub struct CriticHead {
    pub levels: Vec<LevelHead>,
    pub pooled: DMatrix<f64>,
    pub pooled_bias: f64,
    pub iterations: usize,
    pooled_norm: SpectralNorm,
}

impl CriticHead {
    pub const DEFAULT_ITERATIONS: usize = 50;

    /// `pooled` must be `1 x D`.
    pub fn new(levels: Vec<LevelHead>, pooled: DMatrix<f64>, pooled_bias: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(usage("critic head needs at least one level"));
        }
        if pooled.nrows() != 1 {
            return Err(shape(format!("pooled map must have one row, has {}", pooled.nrows())));
        }
        Ok(Self {
            levels,
            pooled,
            pooled_bias,
            iterations: Self::DEFAULT_ITERATIONS,
            pooled_norm: SpectralNorm::new(),
        })
    }

    /// Seeded Gaussian head with zero biases and one output channel per level.
    pub fn random(seed: u64, level_channels: &[usize], pooled_dim: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let levels = level_channels.iter().map(|c| LevelHead::new(gauss(1, *c), 0.0)).collect();
        let pooled = gauss(1, pooled_dim);
        Self::new(levels, pooled, 0.0)
    }

    pub fn score(&mut self, f: &CriticFeatures) -> Result<CriticScore> {
        if f.levels.len() != self.levels.len() {
            return Err(shape(format!(
                "{} feature levels for a {}-level head",
                f.levels.len(),
                self.levels.len()
            )));
        }
        if f.pooled.len() != self.pooled.ncols() {
            return Err(shape(format!(
                "pooled vector of length {} for a map expecting {}",
                f.pooled.len(),
                self.pooled.ncols()
            )));
        }
        let iterations = self.iterations;
        let mut means = Vec::with_capacity(self.levels.len());
        for (head, map) in self.levels.iter_mut().zip(&f.levels) {
            let w = head.norm.normalize(&head.mix, iterations)?.matrix;
            let mixed = map.mix_channels(&w, head.bias)?;
            means.push(blurpool_downsample(&mixed)?.mean());
        }
        let w = self.pooled_norm.normalize(&self.pooled, iterations)?.matrix;
        let pooled: f64 = w.iter().zip(&f.pooled).map(|(a, b)| a * b).sum::<f64>() + self.pooled_bias;
        Ok(aggregate(means, pooled))
    }
}

pub fn critic_score(f: &CriticFeatures, head: &mut CriticHead) -> Result<CriticScore> {
    head.score(f)
}

/// `-log(sigma(d_real)) - log(1 - sigma(d_fake))` with both probabilities
/// clamped below by [`LOG_CLAMP`].
pub fn discriminator_loss(d_real: f64, d_fake: f64) -> f64 {
    discriminator_loss_grad(d_real, d_fake).0
}

/// Loss and its partial derivatives with respect to the two raw scores.
pub fn discriminator_loss_grad(d_real: f64, d_fake: f64) -> (f64, f64, f64) {
    let p_real = sigmoid(d_real);
    let p_not_fake = sigmoid(-d_fake);
    let (l1, g1) = if p_real > LOG_CLAMP {
        (-p_real.ln(), -sigmoid(-d_real))
    } else {
        (-LOG_CLAMP.ln(), 0.0)
    };
    let (l2, g2) = if p_not_fake > LOG_CLAMP {
        (-p_not_fake.ln(), sigmoid(d_fake))
    } else {
        (-LOG_CLAMP.ln(), 0.0)
    };
    (l1 + l2, g1, g2)
}

/// Weighted generator terms; `total = mse_term + perceptual_term + adv_term`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorTerms {
    pub total: f64,
    pub mse_term: f64,
    pub perceptual_term: f64,
    pub adv_term: f64,
    pub pixel_mse: f64,
    pub feature_mse: f64,
    pub d_fake: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGrad {
    pub x_hat: Vec<f64>,
    pub features_hat: Vec<f64>,
    pub d_fake: f64,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / a.len() as f64
}

fn check_generator_inputs(x_hat: &[f64], x: &[f64], f_hat: &[f64], f_x: &[f64], cfg: &LossConfig) -> Result<()> {
    cfg.validate()?;
    if x_hat.len() != x.len() || x.is_empty() {
        return Err(shape(format!("pixel buffers of length {} and {}", x_hat.len(), x.len())));
    }
    if f_hat.len() != f_x.len() {
        return Err(shape(format!("feature vectors of length {} and {}", f_hat.len(), f_x.len())));
    }
    Ok(())
}

/// `alpha * mse(x_hat, x) + beta * mse(f_hat, f_x) - lambda * d_fake` over
/// flat pixel and feature buffers.
pub fn generator_terms(
    x_hat: &[f64],
    x: &[f64],
    f_hat: &[f64],
    f_x: &[f64],
    d_fake: f64,
    cfg: &LossConfig,
) -> Result<GeneratorTerms> {
    check_generator_inputs(x_hat, x, f_hat, f_x, cfg)?;
    let pixel_mse = mse(x_hat, x);
    let feature_mse = mse(f_hat, f_x);
    let mse_term = cfg.alpha * pixel_mse;
    let perceptual_term = cfg.beta * feature_mse;
    let adv_term = -cfg.lambda * d_fake;
    Ok(GeneratorTerms {
        total: mse_term + perceptual_term + adv_term,
        mse_term,
        perceptual_term,
        adv_term,
        pixel_mse,
        feature_mse,
        d_fake,
    })
}

pub fn generator_terms_grad(
    x_hat: &[f64],
    x: &[f64],
    f_hat: &[f64],
    f_x: &[f64],
    cfg: &LossConfig,
) -> Result<GeneratorGrad> {
    check_generator_inputs(x_hat, x, f_hat, f_x, cfg)?;
    let scaled_diff = |a: &[f64], b: &[f64], w: f64| -> Vec<f64> {
        let k = 2.0 * w / a.len().max(1) as f64;
        a.iter().zip(b).map(|(p, q)| k * (p - q)).collect()
    };
    Ok(GeneratorGrad {
        x_hat: scaled_diff(x_hat, x, cfg.alpha),
        features_hat: scaled_diff(f_hat, f_x, cfg.beta),
        d_fake: -cfg.lambda,
    })
}

pub fn generator_loss(
    x_hat: &ImageBuffer,
    x: &ImageBuffer,
    features_hat: &[f64],
    features_x: &[f64],
    d_fake: f64,
    cfg: &LossConfig,
) -> Result<GeneratorTerms> {
    if (x_hat.height(), x_hat.width(), x_hat.channels()) != (x.height(), x.width(), x.channels()) {
        return Err(shape(format!(
            "images {}x{}x{} and {}x{}x{}",
            x_hat.height(),
            x_hat.width(),
            x_hat.channels(),
            x.height(),
            x.width(),
            x.channels()
        )));
    }
    generator_terms(x_hat.data(), x.data(), features_hat, features_x, d_fake, cfg)
}

/// Generator total plus `gamma * freq_term`.
pub fn total_objective(gen: &GeneratorTerms, freq_term: f64, cfg: &LossConfig) -> f64 {
    gen.total + cfg.gamma * freq_term
}

/// Fixed random convolutional stack standing in for a frozen feature
/// extractor: per level a 3x3 convolution, ReLU and blurpool.
#[derive(Debug, Clone)]
pub struct RandomFeatures {
    /// Per level, `out x in x 3 x 3` weights.
    weights: Vec<(usize, usize, Vec<f64>)>,
}

impl RandomFeatures {
    pub fn new(seed: u64, levels: usize, channels: usize) -> Result<Self> {
        if levels == 0 || channels == 0 {
            return Err(usage("feature stack needs at least one level and one channel"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(levels);
        let mut cin = 3;
        for _ in 0..levels {
            let scale = (2.0 / (9 * cin) as f64).sqrt();
            let w = (0..channels * cin * 9)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect();
            weights.push((channels, cin, w));
            cin = channels;
        }
        Ok(Self { weights })
    }

    pub fn levels(&self) -> usize {
        self.weights.len()
    }

    pub fn channels(&self) -> usize {
        self.weights[0].0
    }

    fn conv3x3_relu(map: &FeatureMap, cout: usize, w: &[f64]) -> FeatureMap {
        let (h, wd, cin) = (map.height, map.width, map.channels);
        let mut data = vec![0.0; cout * h * wd];
        for o in 0..cout {
            let dst = &mut data[o * h * wd..(o + 1) * h * wd];
            for c in 0..cin {
                let src = map.plane(c);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let k = w[((o * cin + c) * 3 + ky) * 3 + kx];
                        for y in 0..h {
                            let sy = (y as isize + ky as isize - 1).clamp(0, h as isize - 1) as usize;
                            for x in 0..wd {
                                let sx = (x as isize + kx as isize - 1).clamp(0, wd as isize - 1) as usize;
                                dst[y * wd + x] += k * src[sy * wd + sx];
                            }
                        }
                    }
                }
            }
            dst.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        FeatureMap {
            channels: cout,
            height: h,
            width: wd,
            data,
        }
    }

    /// Per-level maps; `pooled` is the channel mean of the deepest level.
    pub fn extract(&self, img: &ImageBuffer) -> Result<CriticFeatures> {
        let rgb = img.to_rgb();
        let (h, w) = (rgb.height(), rgb.width());
        let mut cur = FeatureMap::from_fn(3, h, w, |c, y, x| rgb.pixel(y, x)[c])?;
        let mut levels = Vec::with_capacity(self.weights.len());
        for (cout, _, wts) in &self.weights {
            let act = Self::conv3x3_relu(&cur, *cout, wts);
            cur = if act.height >= 2 && act.width >= 2 {
                blurpool_downsample(&act)?
            } else {
                act
            };
            levels.push(cur.clone());
        }
        let last = levels.last().expect("at least one level");
        let n = (last.height * last.width) as f64;
        let pooled = (0..last.channels).map(|c| last.plane(c).iter().sum::<f64>() / n).collect();
        Ok(CriticFeatures { levels, pooled })
    }

    /// Perceptual embedding: channel means of every level, concatenated.
    pub fn perceptual(&self, f: &CriticFeatures) -> Vec<f64> {
        f.levels
            .iter()
            .flat_map(|m| {
                let n = (m.height * m.width) as f64;
                (0..m.channels).map(move |c| m.plane(c).iter().sum::<f64>() / n)
            })
            .collect()
    }
}
