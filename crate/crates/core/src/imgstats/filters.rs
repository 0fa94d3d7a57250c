//! Spatial filters and color transforms. Every filter pads by replicating the
//! nearest edge sample, so constant images map to constant images.

use std::f64::consts::PI;

use super::image::{GrayImage, ImageBuffer};
use crate::error::{usage, Result};

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Neutral pixels return their common value exactly.
#[inline]
pub fn luma(rgb: [f64; 3]) -> f64 {
    if rgb[0] == rgb[1] && rgb[1] == rgb[2] {
        return rgb[0];
    }
    LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2]
}

/// Full-range BT.601 chroma pair `(Cb, Cr) = ((B - Y)/1.772, (R - Y)/1.402)`,
/// without the 0.5 offset.
#[inline]
pub fn chroma(rgb: [f64; 3]) -> (f64, f64) {
    let y = luma(rgb);
    ((rgb[2] - y) / 1.772, (rgb[0] - y) / 1.402)
}

/// Hexcone HSV saturation.
#[inline]
pub fn hsv_saturation(rgb: [f64; 3]) -> f64 {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    let min = rgb[0].min(rgb[1]).min(rgb[2]);
    if max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

pub fn to_gray(img: &ImageBuffer) -> GrayImage {
    let data = if img.channels() == 1 {
        img.data().to_vec()
    } else {
        img.pixels().map(|p| luma([p[0], p[1], p[2]])).collect()
    };
    GrayImage::from_fn(img.height(), img.width(), |y, x| data[y * img.width() + x])
}

/// Sobel responses and their Euclidean magnitude.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub gx: GrayImage,
    pub gy: GrayImage,
    pub magnitude: GrayImage,
}

/// Unnormalized 3x3 Sobel (a unit-slope ramp responds with 8).
pub fn sobel_gradients(g: &GrayImage) -> Gradients {
    let (h, w) = (g.height(), g.width());
    let mut gx = Vec::with_capacity(h * w);
    let mut gy = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dy: isize, dx: isize| g.get_clamped(y + dy, x + dx);
            let sx = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let sy = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gx.push(sx);
            gy.push(sy);
        }
    }
    let magnitude: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let wrap = |d: Vec<f64>| GrayImage::from_fn(h, w, |y, x| d[y * w + x]);
    Gradients {
        gx: wrap(gx),
        gy: wrap(gy),
        magnitude: wrap(magnitude),
    }
}

/// Magnitude-weighted histogram of `mod(atan2(gy, gx), pi)` over `num_bins`
/// uniform bins on `[0, pi)`.
pub fn orientation_histogram(
    gx: &GrayImage,
    gy: &GrayImage,
    magnitude: &GrayImage,
    num_bins: usize,
) -> Result<Vec<f64>> {
    if num_bins < 2 {
        return Err(usage("orientation histogram needs at least 2 bins"));
    }
    if !gx.same_shape(gy) || !gx.same_shape(magnitude) {
        return Err(usage("gradient planes differ in shape"));
    }
    let mut hist = vec![0.0; num_bins];
    for ((sx, sy), m) in gx.data().iter().zip(gy.data()).zip(magnitude.data()) {
        if *m <= 0.0 {
            continue;
        }
        let theta = sy.atan2(*sx).rem_euclid(PI);
        let bin = ((theta / PI * num_bins as f64) as usize).min(num_bins - 1);
        hist[bin] += m;
    }
    Ok(hist)
}

/// Mean over a `k`x`k` window.
pub fn box_mean(g: &GrayImage, k: usize) -> Result<GrayImage> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(usage(format!("box window must be odd, got {k}")));
    }
    let taps = vec![1.0 / k as f64; k];
    Ok(separable(g, &taps))
}

/// 5-point Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]`.
pub fn laplacian(g: &GrayImage) -> GrayImage {
    let (h, w) = (g.height(), g.width());
    GrayImage::from_fn(h, w, |y, x| {
        let (y, x) = (y as isize, x as isize);
        g.get_clamped(y - 1, x) + g.get_clamped(y + 1, x) + g.get_clamped(y, x - 1)
            + g.get_clamped(y, x + 1)
            - 4.0 * g.get_clamped(y, x)
    })
}

/// Sampled Gaussian taps truncated at `ceil(3 sigma)` and renormalized.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

pub fn gaussian_blur(g: &GrayImage, sigma: f64) -> GrayImage {
    separable(g, &gaussian_taps(sigma))
}

/// Separable convolution with a centered odd-length kernel.
pub(crate) fn separable(g: &GrayImage, taps: &[f64]) -> GrayImage {
    let tmp = convolve_rows(g, taps);
    convolve_cols(&tmp, taps)
}

pub(crate) fn convolve_rows(g: &GrayImage, taps: &[f64]) -> GrayImage {
    let r = (taps.len() / 2) as isize;
    GrayImage::from_fn(g.height(), g.width(), |y, x| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * g.get_clamped(y as isize, x as isize + i as isize - r))
            .sum()
    })
}

pub(crate) fn convolve_cols(g: &GrayImage, taps: &[f64]) -> GrayImage {
    let r = (taps.len() / 2) as isize;
    GrayImage::from_fn(g.height(), g.width(), |y, x| {
        taps.iter()
            .enumerate()
            .map(|(i, t)| t * g.get_clamped(y as isize + i as isize - r, x as isize))
            .sum()
    })
}

/// Dense 2-D correlation with an arbitrary kernel (`kernel[ky][kx]`, odd sides).
pub(crate) fn convolve2d(g: &GrayImage, kernel: &[Vec<f64>]) -> GrayImage {
    let ry = (kernel.len() / 2) as isize;
    let rx = (kernel[0].len() / 2) as isize;
    GrayImage::from_fn(g.height(), g.width(), |y, x| {
        let mut acc = 0.0;
        for (ky, row) in kernel.iter().enumerate() {
            for (kx, k) in row.iter().enumerate() {
                if *k != 0.0 {
                    acc += k * g.get_clamped(
                        y as isize + ky as isize - ry,
                        x as isize + kx as isize - rx,
                    );
                }
            }
        }
        acc
    })
}
