//! Image numerics shared by the cue extractors.

mod components;
mod filters;
mod image;
mod spectrum;
mod stats;

pub use components::connected_components;
pub use filters::{
    box_mean, chroma, gaussian_blur, gaussian_taps, hsv_saturation, laplacian, luma,
    orientation_histogram, sobel_gradients, to_gray, Gradients, LUMA_WEIGHTS,
};
pub use image::{GrayImage, ImageBuffer, MIN_SIDE};
pub use spectrum::{radial_power_spectrum, PowerSpectrum, RadialSpectrum, SpectrumBin};
pub use stats::{mean, median, quantile, quantile_sorted, sigmoid, std_dev, variance};

pub(crate) use filters::{convolve2d, separable};
pub(crate) use image::clamp01;
pub(crate) use spectrum::{fft2d, signed_frequency};
