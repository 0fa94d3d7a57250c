//! Procedural clean scenes: a smooth tinted background carrying a few soft
//! textured patches. Texture and grain are isotropic band-passed noise so the
//! scene has sharp detail without a dominant orientation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;

use crate::error::Result;
use crate::imgstats::{fft2d, signed_frequency, ImageBuffer};

/// Luma-neutral RGB offset for a chroma displacement `(cb, cr)`.
fn chroma_offset(cb: f64, cr: f64) -> [f64; 3] {
    [1.402 * cr, -0.344136 * cb - 0.714136 * cr, 1.772 * cb]
}

/// White noise shaped by a radial frequency response, rescaled to zero mean
/// and unit standard deviation.
fn shaped_noise(
    h: usize,
    w: usize,
    rng: &mut ChaCha8Rng,
    response: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..h * w)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    fft2d(&mut buf, h, w, false);
    for u in 0..h {
        let fu = signed_frequency(u, h);
        for v in 0..w {
            let r = fu.hypot(signed_frequency(v, w));
            buf[u * w + v] *= response(r);
        }
    }
    fft2d(&mut buf, h, w, true);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let n = out.len() as f64;
    let m = out.iter().sum::<f64>() / n;
    let sd = (out.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    out.iter_mut().for_each(|v| *v = (*v - m) / sd);
    out
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

struct Patch {
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    cos: f64,
    sin: f64,
    tint: [f64; 3],
}

impl Patch {
    fn weight(&self, y: f64, x: f64) -> f64 {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let a = (dx * self.cos + dy * self.sin) / self.rx;
        let b = (-dx * self.sin + dy * self.cos) / self.ry;
        1.0 - smoothstep(0.75, 1.0, a.hypot(b))
    }
}

/// Soft bounds on the texture excursion above and below the base level. The
/// bright side stays low so noisy scenes do not form bright particles.
const TEXTURE_CAP_BRIGHT: f64 = 0.18;
const TEXTURE_CAP_DARK: f64 = 0.45;

/// Fraction of the frame covered by textured patches.
const PATCH_COVERAGE: f64 = 0.12;

fn soft_clip(t: f64) -> f64 {
    let cap = if t > 0.0 { TEXTURE_CAP_BRIGHT } else { TEXTURE_CAP_DARK };
    cap * (t / cap).tanh()
}

/// Target depth gradient of the clean scene (top minus bottom luma).
const BASE_DEPTH_GRAD: f64 = 0.0;

/// A clean RGB scene of the given size, bit-exact for a given seed.
pub fn procedural_base(height: usize, width: usize, seed: u64) -> Result<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height, width);
    let side = h.min(w) as f64;

    let level = rng.random_range(0.345..0.375);
    let bg_amp = rng.random_range(0.004..0.008);
    let background = shaped_noise(h, w, &mut rng, |r| (-(r / 0.012).powi(2)).exp());
    let tex_amp = rng.random_range(0.48..0.60);
    // Raised-cosine bump on [0.16, 0.28] cycles/px, clear of the low band.
    let texture = shaped_noise(h, w, &mut rng, |r| {
        if (0.16..=0.28).contains(&r) {
            0.5 - 0.5 * (std::f64::consts::TAU * (r - 0.16) / 0.12).cos()
        } else {
            0.0
        }
    });
    let grain_amp = rng.random_range(0.012..0.018);
    let grain = shaped_noise(h, w, &mut rng, |r| if (0.3..=0.5).contains(&r) { 1.0 } else { 0.0 });

    let bg_tint = {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        chroma_offset(0.03 * a.cos(), 0.03 * a.sin())
    };
    let mut patches = Vec::new();
    let mut coverage = vec![0.0f64; h * w];
    let covered = |c: &[f64]| c.iter().filter(|v| **v > 0.5).count() as f64 / c.len() as f64;
    while patches.len() < 24 && covered(&coverage) < PATCH_COVERAGE {
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let s = rng.random_range(0.02..0.06);
        let p = Patch {
            cy: rng.random_range(0.1..0.9) * h as f64,
            cx: rng.random_range(0.1..0.9) * w as f64,
            ry: rng.random_range(0.07..0.16) * side,
            rx: rng.random_range(0.07..0.16) * side,
            cos: angle.cos(),
            sin: angle.sin(),
            tint: chroma_offset(s * a.cos(), s * a.sin()),
        };
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                coverage[i] = coverage[i].max(p.weight(y as f64, x as f64));
            }
        }
        patches.push(p);
    }

    // The clip is asymmetric, so recentre to keep patch interiors at the base level.
    let mut texture: Vec<f64> = texture.iter().map(|t| soft_clip(tex_amp * t)).collect();
    let shift = texture.iter().sum::<f64>() / texture.len() as f64;
    texture.iter_mut().for_each(|v| *v -= shift);
    let mut luma = vec![0.0; h * w];
    let mut tint = vec![[0.0; 3]; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            // The strongest patch at a pixel owns its tint.
            let (mut wt, mut owner) = (0.0, None);
            for p in &patches {
                let pw = p.weight(y as f64, x as f64);
                if pw > wt {
                    wt = pw;
                    owner = Some(p);
                }
            }
            let detail = texture[i] + grain_amp * grain[i];
            luma[i] = level + bg_amp * background[i] + wt * detail;
            let pt = owner.map_or([0.0; 3], |p| p.tint);
            for c in 0..3 {
                tint[i][c] = (1.0 - wt) * bg_tint[c] + wt * pt[c];
            }
        }
    }

    // Vertical ramp that pins the top-minus-bottom luma difference.
    let half = h / 2;
    let band_mean = |v: &[f64], rows: std::ops::Range<usize>| {
        let n = rows.len() * w;
        rows.flat_map(|y| v[y * w..(y + 1) * w].iter()).sum::<f64>() / n as f64
    };
    let ramp: Vec<f64> = (0..h).map(|y| y as f64 / (h - 1) as f64 - 0.5).collect();
    let ramp_img: Vec<f64> = (0..h * w).map(|i| ramp[i / w]).collect();
    let ramp_diff = band_mean(&ramp_img, 0..half) - band_mean(&ramp_img, h - half..h);
    let diff = band_mean(&luma, 0..half) - band_mean(&luma, h - half..h);
    let slope = (BASE_DEPTH_GRAD - diff) / ramp_diff;

    ImageBuffer::from_fn_rgb(h, w, |y, x| {
        let i = y * w + x;
        let v = luma[i] + slope * ramp[y];
        [v + tint[i][0], v + tint[i][1], v + tint[i][2]]
    })
}

/// `count` clean scenes with seeds derived from `seed`.
pub fn procedural_bases(count: usize, height: usize, width: usize, seed: u64) -> Result<Vec<ImageBuffer>> {
    (0..count)
        .map(|i| procedural_base(height, width, seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64)))
        .collect()
}
