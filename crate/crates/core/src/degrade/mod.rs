//! Synthetic degradations over procedural scenes, used to build labeled
//! corpora for planner evaluation and cue calibration.

mod bases;

pub use bases::{procedural_base, procedural_bases};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::hints::{extract_hints, HintThresholds};
use crate::imgstats::{clamp01, separable, gaussian_taps, GrayImage, ImageBuffer, MIN_SIDE};
use crate::planner::{severity_scores, TaskToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthRamp {
    /// Far scene at the top row, near at the bottom.
    TopFar,
    BottomFar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegradeParams {
    Rain {
        /// Streak direction in degrees from the +x axis.
        angle_deg: f64,
        jitter_deg: f64,
        count: usize,
        length: f64,
        intensity: f64,
    },
    Snow {
        count: usize,
        radius_min: f64,
        radius_max: f64,
        intensity: f64,
    },
    Noise {
        sigma: f64,
    },
    GaussianBlur {
        sigma: f64,
    },
    MotionBlur {
        length: usize,
        angle_deg: f64,
    },
    Haze {
        airlight: f64,
        beta: f64,
        ramp: DepthRamp,
    },
    LowLight {
        gain: f64,
        gamma: f64,
    },
    Downscale {
        factor: usize,
    },
}

impl DegradeParams {
    /// The task that undoes this degradation.
    pub fn task(&self) -> TaskToken {
        match self {
            DegradeParams::Rain { .. } => TaskToken::Deraining,
            DegradeParams::Snow { .. } => TaskToken::Desnowing,
            DegradeParams::Noise { .. } => TaskToken::Denoise,
            DegradeParams::GaussianBlur { .. } | DegradeParams::MotionBlur { .. } => TaskToken::Deblur,
            DegradeParams::Haze { .. } => TaskToken::Dehazing,
            DegradeParams::LowLight { .. } => TaskToken::LightEnhancement,
            DegradeParams::Downscale { .. } => TaskToken::SuperResolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(usage(format!("{what} out of range"))) };
        let finite = |v: f64| v.is_finite();
        match *self {
            DegradeParams::Rain { angle_deg, jitter_deg, length, intensity, .. } => {
                check(finite(angle_deg), "rain angle")?;
                check((0.0..=5.0).contains(&jitter_deg), "rain jitter (0..=5 degrees)")?;
                check(length > 0.0 && finite(length), "rain length")?;
                check((0.0..=1.0).contains(&intensity), "rain intensity")
            }
            DegradeParams::Snow { radius_min, radius_max, intensity, .. } => {
                check(radius_min > 0.0 && radius_min <= radius_max && finite(radius_max), "snow radius")?;
                check((0.0..=1.0).contains(&intensity), "snow intensity")
            }
            DegradeParams::Noise { sigma } => check(sigma >= 0.0 && finite(sigma), "noise sigma"),
            DegradeParams::GaussianBlur { sigma } => check(sigma >= 0.0 && finite(sigma), "blur sigma"),
            DegradeParams::MotionBlur { length, angle_deg } => {
                check(length >= 1, "motion length")?;
                check(finite(angle_deg), "motion angle")
            }
            DegradeParams::Haze { airlight, beta, .. } => {
                check((0.0..=1.0).contains(&airlight), "haze airlight")?;
                check(beta >= 0.0 && finite(beta), "haze extinction")
            }
            DegradeParams::LowLight { gain, gamma } => {
                check(gain > 0.0 && gain <= 1.0, "low-light gain")?;
                check(gamma >= 1.0 && finite(gamma), "low-light gamma")
            }
            DegradeParams::Downscale { factor } => check(factor >= 1, "downscale factor"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationSpec {
    pub kind: TaskToken,
    pub params: DegradeParams,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(params: DegradeParams, seed: u64) -> Self {
        Self { kind: params.task(), params, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != self.params.task() {
            return Err(usage(format!(
                "degradation kind {} does not match its parameters",
                self.kind
            )));
        }
        self.params.validate()
    }
}

/// Sampling ranges for corpus generation. Counts are densities per thousand
/// pixels so the same ranges serve any image size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeRanges {
    pub rain_angle_deg: (f64, f64),
    pub rain_jitter_deg: f64,
    pub rain_per_kpx: (f64, f64),
    pub rain_length: (f64, f64),
    pub rain_intensity: (f64, f64),
    pub snow_per_kpx: (f64, f64),
    pub snow_radius: (f64, f64),
    pub snow_intensity: (f64, f64),
    pub noise_sigmas: Vec<f64>,
    pub blur_sigma: (f64, f64),
    /// Probability of drawing a motion blur instead of a Gaussian one.
    pub motion_fraction: f64,
    pub motion_length: (usize, usize),
    pub haze_airlight: (f64, f64),
    pub haze_beta: (f64, f64),
    pub low_light_gain: (f64, f64),
    pub low_light_gamma: (f64, f64),
    pub downscale_factor: (usize, usize),
}

impl Default for DegradeRanges {
    fn default() -> Self {
        Self {
            rain_angle_deg: (80.0, 100.0),
            rain_jitter_deg: 1.0,
            rain_per_kpx: (8.5, 10.0),
            rain_length: (22.0, 28.0),
            rain_intensity: (0.11, 0.13),
            snow_per_kpx: (0.5, 0.7),
            snow_radius: (1.5, 3.5),
            snow_intensity: (0.5, 0.6),
            noise_sigmas: vec![15.0 / 255.0, 25.0 / 255.0, 50.0 / 255.0],
            blur_sigma: (2.5, 4.0),
            motion_fraction: 0.0,
            motion_length: (9, 21),
            haze_airlight: (0.6, 0.72),
            haze_beta: (1.0, 2.0),
            low_light_gain: (0.35, 0.6),
            low_light_gamma: (1.6, 2.4),
            downscale_factor: (3, 4),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl DegradeRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        let pairs = [
            ("rain_angle_deg", self.rain_angle_deg),
            ("rain_per_kpx", self.rain_per_kpx),
            ("rain_length", self.rain_length),
            ("rain_intensity", self.rain_intensity),
            ("snow_per_kpx", self.snow_per_kpx),
            ("snow_radius", self.snow_radius),
            ("snow_intensity", self.snow_intensity),
            ("blur_sigma", self.blur_sigma),
            ("haze_airlight", self.haze_airlight),
            ("haze_beta", self.haze_beta),
            ("low_light_gain", self.low_light_gain),
            ("low_light_gamma", self.low_light_gamma),
        ];
        for (name, r) in pairs {
            if !ordered(r) {
                return Err(usage(format!("range {name} must be finite and ordered")));
            }
        }
        if self.noise_sigmas.is_empty() {
            return Err(usage("noise_sigmas must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.motion_fraction) {
            return Err(usage("motion_fraction must lie in [0, 1]"));
        }
        if self.motion_length.0 > self.motion_length.1 || self.downscale_factor.0 > self.downscale_factor.1 {
            return Err(usage("integer ranges must be ordered"));
        }
        Ok(())
    }

    /// Draws parameters for `task` sized for an `height`x`width` image.
    pub fn sample(&self, task: TaskToken, height: usize, width: usize, rng: &mut ChaCha8Rng) -> DegradeParams {
        let kpx = (height * width) as f64 / 1000.0;
        match task {
            TaskToken::Deraining => DegradeParams::Rain {
                angle_deg: uniform(rng, self.rain_angle_deg),
                jitter_deg: self.rain_jitter_deg,
                count: (uniform(rng, self.rain_per_kpx) * kpx).round() as usize,
                length: uniform(rng, self.rain_length),
                intensity: uniform(rng, self.rain_intensity),
            },
            TaskToken::Desnowing => DegradeParams::Snow {
                count: (uniform(rng, self.snow_per_kpx) * kpx).round() as usize,
                radius_min: self.snow_radius.0,
                radius_max: self.snow_radius.1,
                intensity: uniform(rng, self.snow_intensity),
            },
            TaskToken::Denoise => DegradeParams::Noise {
                sigma: self.noise_sigmas[rng.random_range(0..self.noise_sigmas.len())],
            },
            TaskToken::Deblur if rng.random_bool(self.motion_fraction) => DegradeParams::MotionBlur {
                length: rng.random_range(self.motion_length.0..=self.motion_length.1),
                angle_deg: rng.random_range(0.0..180.0),
            },
            TaskToken::Deblur => DegradeParams::GaussianBlur {
                sigma: uniform(rng, self.blur_sigma),
            },
            TaskToken::Dehazing => DegradeParams::Haze {
                airlight: uniform(rng, self.haze_airlight),
                beta: uniform(rng, self.haze_beta),
                ramp: DepthRamp::TopFar,
            },
            TaskToken::LightEnhancement => DegradeParams::LowLight {
                gain: uniform(rng, self.low_light_gain),
                gamma: uniform(rng, self.low_light_gamma),
            },
            TaskToken::SuperResolution => DegradeParams::Downscale {
                factor: rng.random_range(self.downscale_factor.0..=self.downscale_factor.1),
            },
        }
    }
}

/// Adds `value * coverage` to every channel, where coverage is the
/// anti-aliased footprint of a segment of half-width 0.5 px.
fn draw_segment(acc: &mut GrayImage, (y0, x0): (f64, f64), (y1, x1): (f64, f64), value: f64) {
    let (h, w) = (acc.height(), acc.width());
    let (dy, dx) = (y1 - y0, x1 - x0);
    let len2 = dy * dy + dx * dx;
    let ylo = (y0.min(y1) - 2.0).floor().max(0.0) as usize;
    let yhi = ((y0.max(y1) + 2.0).ceil() as usize).min(h - 1);
    let xlo = (x0.min(x1) - 2.0).floor().max(0.0) as usize;
    let xhi = ((x0.max(x1) + 2.0).ceil() as usize).min(w - 1);
    if y0.max(y1) + 2.0 < 0.0 || x0.max(x1) + 2.0 < 0.0 {
        return;
    }
    for y in ylo..=yhi {
        for x in xlo..=xhi {
            let (py, px) = (y as f64 - y0, x as f64 - x0);
            let t = if len2 > 0.0 { ((py * dy + px * dx) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let d = (py - t * dy).hypot(px - t * dx);
            let cover = (1.0 - d).clamp(0.0, 1.0);
            if cover > 0.0 {
                let v = acc.get(y, x) + value * cover;
                acc.set(y, x, v);
            }
        }
    }
}

fn add_layer(base: &ImageBuffer, layer: &GrayImage) -> ImageBuffer {
    let c = base.channels();
    let w = base.width();
    let data = base
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| clamp01(v + layer.data()[(i / c) / w * w + (i / c) % w]))
        .collect();
    ImageBuffer::new(base.height(), w, c, data).expect("same shape as a valid image")
}

fn rain(base: &ImageBuffer, p: &DegradeParams, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let DegradeParams::Rain { angle_deg, jitter_deg, count, length, intensity } = *p else {
        unreachable!()
    };
    let (h, w) = (base.height(), base.width());
    let mut layer = GrayImage::filled(h, w, 0.0);
    for _ in 0..count {
        let a = (angle_deg + uniform(rng, (-jitter_deg, jitter_deg))).to_radians();
        let len = length * rng.random_range(0.7..1.3);
        let cy = rng.random_range(0.0..h as f64);
        let cx = rng.random_range(0.0..w as f64);
        let (hy, hx) = (0.5 * len * a.sin(), 0.5 * len * a.cos());
        let v = intensity * rng.random_range(0.8..1.0);
        draw_segment(&mut layer, (cy - hy, cx - hx), (cy + hy, cx + hx), v);
    }
    add_layer(base, &layer)
}

/// Places disjoint discs by rejection; gives up on a disc after a bounded
/// number of attempts, so very dense requests produce fewer discs.
fn snow(base: &ImageBuffer, p: &DegradeParams, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let DegradeParams::Snow { count, radius_min, radius_max, intensity } = *p else {
        unreachable!()
    };
    let (h, w) = (base.height(), base.width());
    let mut layer = GrayImage::filled(h, w, 0.0);
    let mut placed: Vec<(f64, f64, f64)> = Vec::with_capacity(count);
    for _ in 0..count {
        for _attempt in 0..64 {
            let r = uniform(rng, (radius_min, radius_max));
            let cy = rng.random_range(r + 1.0..(h as f64 - r - 1.0).max(r + 1.5));
            let cx = rng.random_range(r + 1.0..(w as f64 - r - 1.0).max(r + 1.5));
            let clear = placed
                .iter()
                .all(|(py, px, pr)| (py - cy).hypot(px - cx) > pr + r + 3.0);
            if clear {
                placed.push((cy, cx, r));
                break;
            }
        }
    }
    for (cy, cx, r) in placed {
        let lo_y = (cy - r - 2.0).floor().max(0.0) as usize;
        let hi_y = ((cy + r + 2.0).ceil() as usize).min(h - 1);
        let lo_x = (cx - r - 2.0).floor().max(0.0) as usize;
        let hi_x = ((cx + r + 2.0).ceil() as usize).min(w - 1);
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                let d = (y as f64 - cy).hypot(x as f64 - cx);
                let profile = (r + 0.5 - d).clamp(0.0, 1.0);
                if profile > 0.0 {
                    layer.set(y, x, layer.get(y, x) + intensity * profile);
                }
            }
        }
    }
    add_layer(base, &layer)
}

fn noise(base: &ImageBuffer, sigma: f64, rng: &mut ChaCha8Rng) -> ImageBuffer {
    if sigma == 0.0 {
        return base.clone();
    }
    let dist = Normal::new(0.0, sigma).expect("sigma validated");
    base.map(|v| v + dist.sample(rng))
}

fn per_plane(base: &ImageBuffer, f: impl Fn(&GrayImage) -> GrayImage) -> ImageBuffer {
    let planes: Vec<GrayImage> = base.planes().iter().map(f).collect();
    ImageBuffer::from_planes(&planes).expect("planes keep their shape")
}

fn motion_kernel(length: usize, angle_deg: f64) -> Vec<Vec<f64>> {
    let r = length as f64 / 2.0;
    let size = 2 * (r.ceil() as usize) + 1;
    let c = (size / 2) as f64;
    let mut layer = GrayImage::filled(size.max(MIN_SIDE), size.max(MIN_SIDE), 0.0);
    let a = angle_deg.to_radians();
    let (hy, hx) = ((r - 0.5).max(0.0) * a.sin(), (r - 0.5).max(0.0) * a.cos());
    draw_segment(&mut layer, (c - hy, c - hx), (c + hy, c + hx), 1.0);
    let mut k: Vec<Vec<f64>> = (0..size).map(|y| (0..size).map(|x| layer.get(y, x)).collect()).collect();
    let total: f64 = k.iter().flatten().sum();
    k.iter_mut().flatten().for_each(|v| *v /= total);
    k
}

fn haze(base: &ImageBuffer, airlight: f64, beta: f64, ramp: DepthRamp) -> ImageBuffer {
    let h = base.height();
    let c = base.channels();
    let w = base.width();
    let data = base
        .data()
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let y = (i / c) / w;
            let pos = if h > 1 { y as f64 / (h - 1) as f64 } else { 0.0 };
            let depth = match ramp {
                DepthRamp::TopFar => 1.0 - pos,
                DepthRamp::BottomFar => pos,
            };
            let t = (-beta * depth).exp();
            clamp01(j * t + airlight * (1.0 - t))
        })
        .collect();
    ImageBuffer::new(h, w, c, data).expect("same shape as a valid image")
}

fn downscale(base: &ImageBuffer, factor: usize) -> Result<ImageBuffer> {
    let (h, w) = (base.height() / factor, base.width() / factor);
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(usage(format!(
            "downscale by {factor} leaves {h}x{w}, below the {MIN_SIDE}-pixel minimum"
        )));
    }
    let c = base.channels();
    let area = (factor * factor) as f64;
    let mut data = Vec::with_capacity(h * w * c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut s = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        s += base.pixel(y * factor + dy, x * factor + dx)[ch];
                    }
                }
                data.push(clamp01(s / area));
            }
        }
    }
    ImageBuffer::new(h, w, c, data)
}

/// Applies one degradation. Randomness comes only from `spec.seed`.
pub fn apply(base: &ImageBuffer, spec: &DegradationSpec) -> Result<ImageBuffer> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = &spec.params;
    Ok(match *p {
        DegradeParams::Rain { .. } => rain(base, p, &mut rng),
        DegradeParams::Snow { .. } => snow(base, p, &mut rng),
        DegradeParams::Noise { sigma } => noise(base, sigma, &mut rng),
        DegradeParams::GaussianBlur { sigma } => {
            let taps = gaussian_taps(sigma);
            per_plane(base, |g| separable(g, &taps))
        }
        DegradeParams::MotionBlur { length, angle_deg } => {
            let k = motion_kernel(length, angle_deg);
            per_plane(base, |g| crate::imgstats::convolve2d(g, &k))
        }
        DegradeParams::Haze { airlight, beta, ramp } => haze(base, airlight, beta, ramp),
        DegradeParams::LowLight { gain, gamma } => base.map(|v| gain * v.powf(gamma)),
        DegradeParams::Downscale { factor } => downscale(base, factor)?,
    })
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub image: ImageBuffer,
    pub task: TaskToken,
    pub spec: DegradationSpec,
    /// Index into the base list the item was made from.
    pub base_index: usize,
}

/// Independent stream for item `index` of a corpus drawn under `seed`.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Rejects bases on which any planner rule already fires.
pub fn check_bases(bases: &[ImageBuffer], th: &HintThresholds) -> Result<()> {
    let verdicts: Vec<Result<()>> = bases
        .par_iter()
        .enumerate()
        .map(|(index, b)| {
            let margins = severity_scores(&extract_hints(b)?, th);
            match margins.into_iter().find(|(_, m)| *m > 0.0) {
                Some((task, margin)) => Err(Error::RejectedBase { index, task: task.to_string(), margin }),
                None => Ok(()),
            }
        })
        .collect();
    verdicts.into_iter().collect()
}

/// `n_per_class` degraded images per task, in task order. Item `i` uses base
/// `i mod bases.len()` and its own random stream, so the result does not
/// depend on scheduling.
pub fn make_corpus(
    bases: &[ImageBuffer],
    n_per_class: usize,
    seed: u64,
    ranges: &DegradeRanges,
    th: &HintThresholds,
) -> Result<Vec<CorpusItem>> {
    if bases.is_empty() {
        return Err(usage("corpus needs at least one base image"));
    }
    ranges.validate()?;
    check_bases(bases, th)?;
    (0..TaskToken::ALL.len() * n_per_class)
        .into_par_iter()
        .map(|i| corpus_item(bases, n_per_class, seed, ranges, i))
        .collect()
}

/// Item `index` of the corpus [`make_corpus`] would build, without checking
/// the bases. Lets callers stream large corpora item by item.
pub fn corpus_item(
    bases: &[ImageBuffer],
    n_per_class: usize,
    seed: u64,
    ranges: &DegradeRanges,
    index: usize,
) -> Result<CorpusItem> {
    if bases.is_empty() || index >= TaskToken::ALL.len() * n_per_class {
        return Err(usage(format!(
            "item {index} is outside a corpus of {} per class over {} bases",
            n_per_class,
            bases.len()
        )));
    }
    let task = TaskToken::ALL[index / n_per_class];
    let base_index = index % bases.len();
    let base = &bases[base_index];
    let mut rng = item_rng(seed, index);
    let params = ranges.sample(task, base.height(), base.width(), &mut rng);
    let spec = DegradationSpec::new(params, rng.random());
    let image = apply(base, &spec)?;
    Ok(CorpusItem { image, task, spec, base_index })
}
