//! 2-D DFT power spectra reduced over annuli of normalized radius.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::image::GrayImage;
use crate::error::{usage, Result};

/// In-place 2-D DFT of a row-major `h`x`w` buffer.
pub(crate) fn fft2d(buf: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

/// Signed frequency index of DFT bin `k` of an `n`-point transform, as a
/// fraction of the sampling rate.
#[inline]
pub(crate) fn signed_frequency(k: usize, n: usize) -> f64 {
    let s = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    // The Nyquist bin of an even transform is taken as negative so that the
    // range is [-1/2, 1/2).
    if n.is_multiple_of(2) && k == n / 2 {
        -s / n as f64
    } else {
        s / n as f64
    }
}

/// Periodogram `|F|^2 / (H W)` of the mean-subtracted image.
///
/// With this scaling the sum over all bins equals the sum of squared
/// deviations from the mean (Parseval).
#[derive(Debug, Clone)]
pub struct PowerSpectrum {
    height: usize,
    width: usize,
    power: Vec<f64>,
}

impl PowerSpectrum {
    pub fn compute(g: &GrayImage) -> Self {
        let (h, w) = (g.height(), g.width());
        let mean = g.data().iter().sum::<f64>() / (h * w) as f64;
        let mut buf: Vec<Complex<f64>> = g
            .data()
            .iter()
            .map(|v| Complex::new(v - mean, 0.0))
            .collect();
        fft2d(&mut buf, h, w, false);
        let norm = (h * w) as f64;
        let power = buf.iter().map(|c| c.norm_sqr() / norm).collect();
        Self {
            height: h,
            width: w,
            power,
        }
    }

    /// Normalized radius `sqrt((u/H)^2 + (v/W)^2)` of bin `(u, v)`.
    #[inline]
    pub fn radius(&self, u: usize, v: usize) -> f64 {
        signed_frequency(u, self.height).hypot(signed_frequency(v, self.width))
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// Mean power per annulus `(r_lo, r_hi]`.
    pub fn radial(&self, annuli: &[(f64, f64)]) -> Result<RadialSpectrum> {
        validate_annuli(annuli)?;
        let mut sums = vec![0.0; annuli.len()];
        let mut counts = vec![0usize; annuli.len()];
        let mut beyond = 0.0;
        for u in 0..self.height {
            for v in 0..self.width {
                let r = self.radius(u, v);
                let p = self.power[u * self.width + v];
                if r > 0.5 {
                    beyond += p;
                }
                if let Some(i) = annuli.iter().position(|(lo, hi)| r > *lo && r <= *hi) {
                    sums[i] += p;
                    counts[i] += 1;
                }
            }
        }
        let bins = annuli
            .iter()
            .zip(sums.iter().zip(&counts))
            .map(|((lo, hi), (s, c))| SpectrumBin {
                r_lo: *lo,
                r_hi: *hi,
                mean_power: if *c == 0 { 0.0 } else { s / *c as f64 },
                count: *c,
                empty: *c == 0,
            })
            .collect();
        Ok(RadialSpectrum {
            bins,
            total_power: self.total_power(),
            beyond_nyquist_power: beyond,
        })
    }
}

fn validate_annuli(annuli: &[(f64, f64)]) -> Result<()> {
    let mut prev_hi = f64::NEG_INFINITY;
    for (lo, hi) in annuli {
        if !(0.0..=0.5).contains(lo) || !(0.0..=0.5).contains(hi) || lo >= hi {
            return Err(usage(format!("annulus ({lo}, {hi}] outside [0, 0.5] or empty")));
        }
        if *lo < prev_hi {
            return Err(usage("annuli must be sorted and non-overlapping"));
        }
        prev_hi = *hi;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumBin {
    pub r_lo: f64,
    pub r_hi: f64,
    pub mean_power: f64,
    /// Number of DFT samples whose radius falls in `(r_lo, r_hi]`.
    pub count: usize,
    /// Set when the annulus contains no samples; `mean_power` is then 0.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSpectrum {
    pub bins: Vec<SpectrumBin>,
    /// Total AC power of the transform (equals the sum of squared deviations).
    pub total_power: f64,
    /// Power in the corners of the frequency plane, radius above 1/2.
    pub beyond_nyquist_power: f64,
}

pub fn radial_power_spectrum(g: &GrayImage, annuli: &[(f64, f64)]) -> Result<RadialSpectrum> {
    PowerSpectrum::compute(g).radial(annuli)
}
