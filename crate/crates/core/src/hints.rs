//! Label-free degradation cues computed directly from pixels.
//!
//! Six cue families are extracted in one pass: oriented-streak (rain), small
//! bright blob (snow), flat-region residual (noise), edge and spectrum
//! sharpness (blur), dark-channel and saturation (haze), and luma exposure.
//! Image size is carried along as the super-resolution trigger.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::imgstats::{
    box_mean, chroma, connected_components, gaussian_blur, hsv_saturation, laplacian, luma, mean,
    median, orientation_histogram, quantile, sigmoid, sobel_gradients, std_dev, to_gray,
    variance, Gradients, GrayImage, ImageBuffer, PowerSpectrum,
};

/// Markers for inputs where a cue fell back to a degenerate rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintFlag {
    /// No gradient energy anywhere; orientation cues are zeroed.
    FlatImage,
    /// The low annulus carried no power and `freq_ratio` hit its cap.
    FreqRatioCapped,
    /// The flat-region mask was empty; noise cues used the whole image.
    EmptyFlatMask,
    /// A spectrum annulus contained no frequency samples.
    EmptyAnnulus,
    /// Single-channel input; chroma cues were computed on replicated channels.
    GrayscaleInput,
}

/// Extraction parameters that the cue formulas leave open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CueConfig {
    pub num_bins: usize,
    pub low_band: (f64, f64),
    pub mid_band: (f64, f64),
    pub inner_band: (f64, f64),
    pub outer_band: (f64, f64),
    pub eps: f64,
    pub freq_ratio_cap: f64,
    pub snow_level: f64,
    pub blob_area_min: usize,
    pub blob_area_max: usize,
    pub edge_smoothing_sigma: f64,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            num_bins: 36,
            low_band: (0.0, 0.10),
            mid_band: (0.10, 0.30),
            inner_band: (0.0, 0.10),
            outer_band: (0.30, 0.50),
            eps: 1e-8,
            freq_ratio_cap: 1e4,
            snow_level: 0.78,
            blob_area_min: 3,
            blob_area_max: 200,
            edge_smoothing_sigma: 1.0,
        }
    }
}

/// Per-rule decision thresholds. Defaults are the recommended disambiguation
/// values; `sr_min_side` is the smallest native side that does not call for
/// upscaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HintThresholds {
    pub line_score_min: f64,
    pub anisotropy_min: f64,
    pub freq_ratio_min: f64,
    pub small_blobs_min: f64,
    pub snow_anisotropy_max: f64,
    pub noise_score_min: f64,
    pub grad95_max: f64,
    pub lap_var_max: f64,
    pub hf_energy_max: f64,
    pub haze_score_min: f64,
    pub depth_grad_min: f64,
    pub mean_y_max: f64,
    pub p50_max: f64,
    pub sr_min_side: f64,
}

impl Default for HintThresholds {
    fn default() -> Self {
        Self {
            line_score_min: 0.16,
            anisotropy_min: 0.40,
            freq_ratio_min: 1.05,
            small_blobs_min: 25.0,
            snow_anisotropy_max: 0.42,
            noise_score_min: 0.45,
            grad95_max: 0.17,
            lap_var_max: 0.27,
            hf_energy_max: 0.052,
            haze_score_min: 0.50,
            depth_grad_min: 0.03,
            mean_y_max: 0.32,
            p50_max: 0.26,
            sr_min_side: 256.0,
        }
    }
}

impl HintThresholds {
    pub fn validate(&self) -> Result<()> {
        let values = [
            self.line_score_min,
            self.anisotropy_min,
            self.freq_ratio_min,
            self.small_blobs_min,
            self.snow_anisotropy_max,
            self.noise_score_min,
            self.grad95_max,
            self.lap_var_max,
            self.hf_energy_max,
            self.haze_score_min,
            self.depth_grad_min,
            self.mean_y_max,
            self.p50_max,
            self.sr_min_side,
        ];
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(usage("all thresholds must be positive and finite"));
        }
        if self.sr_min_side < 8.0 {
            return Err(usage("sr_min_side must be at least 8"));
        }
        Ok(())
    }
}

/// The full cue vector. Serializes as one flat object plus a `flags` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationHints {
    pub line_score: f64,
    pub anisotropy: f64,
    pub freq_ratio: f64,
    pub small_blobs: usize,
    pub snow_anisotropy: f64,
    pub noise_mad: f64,
    pub chroma_std: f64,
    pub noise_score: f64,
    pub lap_var: f64,
    pub hf_energy: f64,
    pub grad95: f64,
    pub dark_mean: f64,
    pub sat_mean: f64,
    pub depth_grad: f64,
    pub haze_score: f64,
    pub mean_y: f64,
    pub p50_y: f64,
    pub height: usize,
    pub width: usize,
    pub flags: Vec<HintFlag>,
}

impl DegradationHints {
    pub fn has_flag(&self, flag: HintFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Human-readable cue summary, one family per clause.
    pub fn summary(&self) -> String {
        format!(
            "Rain: line={:.2}, aniso={:.2}, freq={:.2}; Snow: blobs={}, aniso={:.2}; \
             Noise: mad={:.4}, chroma={:.4}, score={:.2}; \
             Blur: lapVar={:.3}, hf={:.3}, grad95={:.3}; \
             Haze: score={:.2}, depth_grad={:.3}, dark_mean={:.2}, sat_mean={:.2}; \
             Exposure: meanY={:.2}, p50={:.2}; Size: H={}, W={}",
            self.line_score,
            self.anisotropy,
            self.freq_ratio,
            self.small_blobs,
            self.snow_anisotropy,
            self.noise_mad,
            self.chroma_std,
            self.noise_score,
            self.lap_var,
            self.hf_energy,
            self.grad95,
            self.haze_score,
            self.depth_grad,
            self.dark_mean,
            self.sat_mean,
            self.mean_y,
            self.p50_y,
            self.height,
            self.width,
        )
    }
}

/// `0.6 s(50(mad - 0.0050)) + 0.4 s(50(chroma - 0.0095))`, `s` the logistic.
pub fn noise_score(noise_mad: f64, chroma_std: f64) -> f64 {
    0.6 * sigmoid(50.0 * (noise_mad - 0.0050)) + 0.4 * sigmoid(50.0 * (chroma_std - 0.0095))
}

/// `0.4 s(7(dark - 0.33)) + 0.3 s(7(0.30 - sat)) + 0.3 s(8(depth - 0.03))`.
pub fn haze_score(dark_mean: f64, sat_mean: f64, depth_grad: f64) -> f64 {
    0.4 * sigmoid(7.0 * (dark_mean - 0.33))
        + 0.3 * sigmoid(7.0 * (0.30 - sat_mean))
        + 0.3 * sigmoid(8.0 * (depth_grad - 0.03))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainCues {
    pub line_score: f64,
    pub anisotropy: f64,
    pub freq_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnowCues {
    pub small_blobs: usize,
    pub snow_anisotropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCues {
    pub noise_mad: f64,
    pub chroma_std: f64,
    pub noise_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurCues {
    pub lap_var: f64,
    pub hf_energy: f64,
    pub grad95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazeCues {
    pub dark_mean: f64,
    pub sat_mean: f64,
    pub depth_grad: f64,
    pub haze_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureCues {
    pub mean_y: f64,
    pub p50_y: f64,
}

/// Quantities shared between cue families, computed once per image.
struct Shared {
    gray: GrayImage,
    grads: Gradients,
    spectrum: PowerSpectrum,
}

impl Shared {
    fn new(gray: GrayImage) -> Self {
        let grads = sobel_gradients(&gray);
        let spectrum = PowerSpectrum::compute(&gray);
        Self {
            gray,
            grads,
            spectrum,
        }
    }
}

fn orientation_scores(grads: &Gradients, cfg: &CueConfig) -> Result<Option<(f64, f64)>> {
    let h = orientation_histogram(&grads.gx, &grads.gy, &grads.magnitude, cfg.num_bins)?;
    let total: f64 = h.iter().sum();
    if total < 1e-12 {
        return Ok(None);
    }
    let max = h.iter().cloned().fold(0.0, f64::max);
    let avg = total / h.len() as f64;
    Ok(Some((max / total, (max - avg) / avg)))
}

/// Mean power of two annuli, flagging empty ones.
fn band_pair(
    spectrum: &PowerSpectrum,
    a: (f64, f64),
    b: (f64, f64),
    flags: &mut Vec<HintFlag>,
) -> Result<(f64, f64)> {
    // Annuli may coincide or overlap across the two queries, so ask separately.
    let ra = spectrum.radial(&[a])?;
    let rb = spectrum.radial(&[b])?;
    if ra.bins[0].empty || rb.bins[0].empty {
        push_flag(flags, HintFlag::EmptyAnnulus);
    }
    Ok((ra.bins[0].mean_power, rb.bins[0].mean_power))
}

fn push_flag(flags: &mut Vec<HintFlag>, flag: HintFlag) {
    if !flags.contains(&flag) {
        flags.push(flag);
    }
}

fn rain_from(shared: &Shared, cfg: &CueConfig, flags: &mut Vec<HintFlag>) -> Result<RainCues> {
    let (line_score, anisotropy) = match orientation_scores(&shared.grads, cfg)? {
        Some(scores) => scores,
        None => {
            push_flag(flags, HintFlag::FlatImage);
            (0.0, 0.0)
        }
    };
    let (mid, low) = band_pair(&shared.spectrum, cfg.mid_band, cfg.low_band, flags)?;
    let mut freq_ratio = mid / (low + cfg.eps);
    if freq_ratio > cfg.freq_ratio_cap {
        freq_ratio = cfg.freq_ratio_cap;
        push_flag(flags, HintFlag::FreqRatioCapped);
    }
    Ok(RainCues {
        line_score,
        anisotropy,
        freq_ratio,
    })
}

fn snow_from(shared: &Shared, rain: &RainCues, cfg: &CueConfig) -> SnowCues {
    let mask = shared
        .gray
        .map(|v| if *v > cfg.snow_level { 1.0 } else { 0.0 });
    let small_blobs = connected_components(&mask)
        .into_iter()
        .filter(|a| (cfg.blob_area_min..=cfg.blob_area_max).contains(a))
        .count();
    SnowCues {
        small_blobs,
        snow_anisotropy: rain.anisotropy,
    }
}

fn noise_from(
    img: &ImageBuffer,
    shared: &Shared,
    flags: &mut Vec<HintFlag>,
) -> Result<NoiseCues> {
    let m = shared.grads.magnitude.data();
    let q25 = quantile(m, 0.25)?;
    let mut flat: Vec<usize> = (0..m.len()).filter(|i| m[*i] < q25).collect();
    if flat.is_empty() {
        push_flag(flags, HintFlag::EmptyFlatMask);
        flat = (0..m.len()).collect();
    }
    let local = box_mean(&shared.gray, 3)?;
    let residual: Vec<f64> = flat
        .iter()
        .map(|i| shared.gray.data()[*i] - local.data()[*i])
        .collect();
    let center = median(&residual)?;
    let deviations: Vec<f64> = residual.iter().map(|r| (r - center).abs()).collect();
    let noise_mad = median(&deviations)?;

    let w = img.width();
    let (cb, cr): (Vec<f64>, Vec<f64>) = flat
        .iter()
        .map(|i| chroma(img.rgb(i / w, i % w)))
        .unzip();
    let chroma_std = 0.5 * (std_dev(&cb) + std_dev(&cr));
    Ok(NoiseCues {
        noise_mad,
        chroma_std,
        noise_score: noise_score(noise_mad, chroma_std),
    })
}

fn blur_from(shared: &Shared, cfg: &CueConfig, flags: &mut Vec<HintFlag>) -> Result<BlurCues> {
    let lap_var = variance(laplacian(&shared.gray).data());
    let (outer, inner) = band_pair(&shared.spectrum, cfg.outer_band, cfg.inner_band, flags)?;
    let hf_energy = outer / (inner + cfg.eps);
    let smooth = gaussian_blur(&shared.gray, cfg.edge_smoothing_sigma);
    let grad95 = quantile(sobel_gradients(&smooth).magnitude.data(), 0.95)?;
    Ok(BlurCues {
        lap_var,
        hf_energy,
        grad95,
    })
}

fn require_rgb(img: &ImageBuffer) -> Result<()> {
    if img.channels() != 3 {
        return Err(usage("haze cues need a three-channel image"));
    }
    Ok(())
}

fn haze_from(img: &ImageBuffer, luma_plane: &GrayImage) -> Result<HazeCues> {
    require_rgb(img)?;
    let n = (img.height() * img.width()) as f64;
    let (mut dark, mut sat) = (0.0, 0.0);
    for p in img.pixels() {
        let rgb = [p[0], p[1], p[2]];
        dark += rgb[0].min(rgb[1]).min(rgb[2]);
        sat += hsv_saturation(rgb);
    }
    let (dark_mean, sat_mean) = (dark / n, sat / n);
    let half = img.height() / 2;
    let w = img.width();
    let data = luma_plane.data();
    let top = mean(&data[..half * w]);
    let bottom = mean(&data[(img.height() - half) * w..]);
    let depth_grad = top - bottom;
    Ok(HazeCues {
        dark_mean,
        sat_mean,
        depth_grad,
        haze_score: haze_score(dark_mean, sat_mean, depth_grad),
    })
}

fn luma_plane(img: &ImageBuffer) -> GrayImage {
    let rgb = img.to_rgb();
    let data: Vec<f64> = rgb.pixels().map(|p| luma([p[0], p[1], p[2]])).collect();
    GrayImage::from_fn(img.height(), img.width(), |y, x| data[y * img.width() + x])
}

fn exposure_from(luma_plane: &GrayImage) -> Result<ExposureCues> {
    Ok(ExposureCues {
        mean_y: mean(luma_plane.data()),
        p50_y: median(luma_plane.data())?,
    })
}

pub fn rain_cues(g: &GrayImage, cfg: &CueConfig) -> Result<RainCues> {
    rain_from(&Shared::new(g.clone()), cfg, &mut Vec::new())
}

pub fn snow_cues(g: &GrayImage, cfg: &CueConfig) -> Result<SnowCues> {
    let shared = Shared::new(g.clone());
    let rain = rain_from(&shared, cfg, &mut Vec::new())?;
    Ok(snow_from(&shared, &rain, cfg))
}

pub fn noise_cues(img: &ImageBuffer) -> Result<NoiseCues> {
    noise_from(img, &Shared::new(to_gray(img)), &mut Vec::new())
}

pub fn blur_cues(g: &GrayImage, cfg: &CueConfig) -> Result<BlurCues> {
    blur_from(&Shared::new(g.clone()), cfg, &mut Vec::new())
}

pub fn haze_cues(img: &ImageBuffer) -> Result<HazeCues> {
    require_rgb(img)?;
    haze_from(img, &luma_plane(img))
}

pub fn exposure_cues(img: &ImageBuffer) -> Result<ExposureCues> {
    exposure_from(&luma_plane(img))
}

/// Computes every cue with the default extraction parameters.
pub fn extract_hints(img: &ImageBuffer) -> Result<DegradationHints> {
    extract_hints_with(img, &CueConfig::default())
}

pub fn extract_hints_with(img: &ImageBuffer, cfg: &CueConfig) -> Result<DegradationHints> {
    if cfg.num_bins < 2 {
        return Err(Error::Usage("num_bins must be at least 2".into()));
    }
    let mut flags = Vec::new();
    let rgb = if img.channels() == 3 {
        img.clone()
    } else {
        push_flag(&mut flags, HintFlag::GrayscaleInput);
        img.to_rgb()
    };
    let shared = Shared::new(to_gray(&rgb));
    let rain = rain_from(&shared, cfg, &mut flags)?;
    let snow = snow_from(&shared, &rain, cfg);
    let noise = noise_from(&rgb, &shared, &mut flags)?;
    let blur = blur_from(&shared, cfg, &mut flags)?;
    let haze = haze_from(&rgb, &shared.gray)?;
    let expo = exposure_from(&shared.gray)?;
    flags.sort();
    Ok(DegradationHints {
        line_score: rain.line_score,
        anisotropy: rain.anisotropy,
        freq_ratio: rain.freq_ratio,
        small_blobs: snow.small_blobs,
        snow_anisotropy: snow.snow_anisotropy,
        noise_mad: noise.noise_mad,
        chroma_std: noise.chroma_std,
        noise_score: noise.noise_score,
        lap_var: blur.lap_var,
        hf_energy: blur.hf_energy,
        grad95: blur.grad95,
        dark_mean: haze.dark_mean,
        sat_mean: haze.sat_mean,
        depth_grad: haze.depth_grad,
        haze_score: haze.haze_score,
        mean_y: expo.mean_y,
        p50_y: expo.p50_y,
        height: img.height(),
        width: img.width(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gray_rgb(h: usize, w: usize, v: f64) -> ImageBuffer {
        ImageBuffer::filled(h, w, 3, v).unwrap()
    }

    #[test]
    fn threshold_defaults_are_the_recommended_table() {
        let t = HintThresholds::default();
        assert_eq!(t.line_score_min, 0.16);
        assert_eq!(t.anisotropy_min, 0.40);
        assert_eq!(t.freq_ratio_min, 1.05);
        assert_eq!(t.small_blobs_min, 25.0);
        assert_eq!(t.snow_anisotropy_max, 0.42);
        assert_eq!(t.noise_score_min, 0.45);
        assert_eq!(t.grad95_max, 0.17);
        assert_eq!(t.lap_var_max, 0.27);
        assert_eq!(t.hf_energy_max, 0.052);
        assert_eq!(t.haze_score_min, 0.50);
        assert_eq!(t.depth_grad_min, 0.03);
        assert_eq!(t.mean_y_max, 0.32);
        assert_eq!(t.p50_max, 0.26);
        assert!(t.validate().is_ok());
        let bad = HintThresholds {
            sr_min_side: 4.0,
            ..HintThresholds::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_image_cues() {
        let img = gray_rgb(64, 64, 0.5);
        let g = to_gray(&img);
        let cfg = CueConfig::default();
        let rain = rain_cues(&g, &cfg).unwrap();
        assert_eq!((rain.line_score, rain.anisotropy, rain.freq_ratio), (0.0, 0.0, 0.0));
        let blur = blur_cues(&g, &cfg).unwrap();
        assert_eq!((blur.lap_var, blur.hf_energy, blur.grad95), (0.0, 0.0, 0.0));
        let noise = noise_cues(&img).unwrap();
        assert_eq!((noise.noise_mad, noise.chroma_std), (0.0, 0.0));
        let direct = 0.6 / (1.0 + 0.25f64.exp()) + 0.4 / (1.0 + 0.475f64.exp());
        assert!((noise.noise_score - direct).abs() < 1e-15);

        let h = extract_hints(&img).unwrap();
        assert_eq!((h.height, h.width), (64, 64));
        assert_eq!(h.mean_y, 0.5);
        assert_eq!(h.p50_y, 0.5);
        assert_eq!(h.small_blobs, 0);
        assert!(h.has_flag(HintFlag::FlatImage));
        assert!(h.has_flag(HintFlag::EmptyFlatMask));
    }

    #[test]
    fn runtime_example_inputs_follow_the_formulas() {
        // Direct evaluation of the printed logistic sums.
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let n = noise_score(0.0061, 0.0083);
        assert!((n - (0.6 * s(0.055) + 0.4 * s(-0.06))).abs() < 1e-15);
        assert!((n - 0.502).abs() < 1e-3);
        let hz = haze_score(0.36, 0.29, 0.028);
        assert!((hz - (0.4 * s(0.21) + 0.3 * s(0.07) + 0.3 * s(-0.016))).abs() < 1e-15);
        assert!((hz - 0.525).abs() < 1e-3);
    }

    #[test]
    fn saturated_dark_bottom_bright_is_not_hazy() {
        // Top half pure dark red, bottom half pure bright green: dark channel 0,
        // saturation 1, luma higher at the bottom.
        let img = ImageBuffer::from_fn_rgb(16, 16, |y, _| {
            if y < 8 {
                [0.3, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            }
        })
        .unwrap();
        let c = haze_cues(&img).unwrap();
        assert_eq!(c.dark_mean, 0.0);
        assert_eq!(c.sat_mean, 1.0);
        let dg = 0.299 * 0.3 - 0.587;
        assert!((c.depth_grad - dg).abs() < 1e-12);
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let expected = 0.4 * s(7.0 * -0.33) + 0.3 * s(7.0 * -0.7) + 0.3 * s(8.0 * (dg - 0.03));
        assert!((c.haze_score - expected).abs() < 1e-12);
        assert!(c.haze_score < 0.5);
        assert!(haze_cues(&ImageBuffer::filled(8, 8, 1, 0.2).unwrap()).is_err());
    }

    #[test]
    fn exposure_basics() {
        let black = gray_rgb(8, 8, 0.0);
        let e = exposure_cues(&black).unwrap();
        assert_eq!((e.mean_y, e.p50_y), (0.0, 0.0));
        let e = exposure_cues(&gray_rgb(8, 8, 0.5)).unwrap();
        assert_eq!((e.mean_y, e.p50_y), (0.5, 0.5));
    }

    #[test]
    fn snow_blob_counting() {
        let dark = GrayImage::filled(64, 64, 0.1);
        assert_eq!(snow_cues(&dark, &CueConfig::default()).unwrap().small_blobs, 0);
        let giant = GrayImage::from_fn(100, 100, |y, x| {
            if y < 50 && x < 100 { 0.95 } else { 0.1 }
        });
        assert_eq!(snow_cues(&giant, &CueConfig::default()).unwrap().small_blobs, 0);
    }

    #[test]
    fn grayscale_input_is_flagged() {
        let img = ImageBuffer::from_fn_rgb(16, 16, |y, x| [((x + y) % 3) as f64 / 3.0; 3]).unwrap();
        let gray = ImageBuffer::new(16, 16, 1, to_gray(&img).into_data()).unwrap();
        let h = extract_hints(&gray).unwrap();
        assert!(h.has_flag(HintFlag::GrayscaleInput));
        assert_eq!(h.chroma_std, 0.0);
        assert_eq!(h.sat_mean, 0.0);
    }

    #[test]
    fn grating_rotation_shifts_dominant_bin() {
        let f = 2.0 * PI / 10.0;
        let vertical = GrayImage::from_fn(40, 40, |_, x| 0.5 + 0.3 * (f * x as f64).sin());
        let horizontal = GrayImage::from_fn(40, 40, |y, _| 0.5 + 0.3 * (f * y as f64).sin());
        let argmax = |g: &GrayImage| {
            let gr = sobel_gradients(g);
            let h = orientation_histogram(&gr.gx, &gr.gy, &gr.magnitude, 36).unwrap();
            (0..36).max_by(|a, b| h[*a].total_cmp(&h[*b])).unwrap()
        };
        let (a, b) = (argmax(&vertical), argmax(&horizontal));
        assert_eq!(a, 0);
        assert_eq!(b, (a + 18) % 36);
    }

    #[test]
    fn hints_serialize_flat() {
        let h = extract_hints(&gray_rgb(16, 16, 0.25)).unwrap();
        let v = serde_json::to_value(&h).unwrap();
        let obj = v.as_object().unwrap();
        for key in [
            "line_score", "anisotropy", "freq_ratio", "small_blobs", "snow_anisotropy",
            "noise_mad", "chroma_std", "noise_score", "lap_var", "hf_energy", "grad95",
            "dark_mean", "sat_mean", "depth_grad", "haze_score", "mean_y", "p50_y",
            "height", "width", "flags",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj.len(), 20);
        assert_eq!(obj["flags"][0], "flat_image");
    }
}
