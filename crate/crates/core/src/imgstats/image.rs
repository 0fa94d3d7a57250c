use crate::error::{Error, Result};

/// Smallest accepted side length for analysed images.
pub const MIN_SIDE: usize = 8;

/// Row-major, channel-interleaved raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(Error::InvalidImage(format!(
                "image is {height}x{width}; both sides must be at least {MIN_SIDE}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidImage(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an RGB image from a per-pixel closure; values are clamped to `[0, 1]`.
    pub fn from_fn_rgb(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(y, x).iter().map(|v| clamp01(*v)));
            }
        }
        Self::new(height, width, 3, data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// RGB triple for a pixel; grayscale pixels are replicated.
    pub fn rgb(&self, y: usize, x: usize) -> [f64; 3] {
        let p = self.pixel(y, x);
        if self.channels == 1 {
            [p[0]; 3]
        } else {
            [p[0], p[1], p[2]]
        }
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    /// Three-channel copy of a grayscale image (identity for RGB input).
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|v| [*v; 3]).collect();
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }

    /// Applies `f` to every sample and clamps the result into `[0, 1]`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageBuffer {
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| clamp01(f(*v))).collect(),
        }
    }

    /// Splits the image into one plane per channel.
    pub fn planes(&self) -> Vec<GrayImage> {
        (0..self.channels)
            .map(|c| GrayImage {
                height: self.height,
                width: self.width,
                data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
            })
            .collect()
    }

    /// Interleaves equally sized planes back into an image, clamping to `[0, 1]`.
    pub fn from_planes(planes: &[GrayImage]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidImage("no planes".into()))?;
        if planes
            .iter()
            .any(|p| p.height != first.height || p.width != first.width)
        {
            return Err(Error::InvalidImage("planes differ in size".into()));
        }
        let n = first.data.len();
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            data.extend(planes.iter().map(|p| clamp01(p.data[i])));
        }
        Self::new(first.height, first.width, planes.len(), data)
    }
}

/// Single-plane real raster; values are finite but not range-restricted.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage("empty gray image".into()));
        }
        if data.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite gray value".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::from_fn(height, width, |_, _| value)
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Edge-replicate access with signed coordinates.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> f64 {
        let yy = y.clamp(0, self.height as isize - 1) as usize;
        let xx = x.clamp(0, self.width as isize - 1) as usize;
        self.data[yy * self.width + xx]
    }

    pub fn map(&self, f: impl FnMut(&f64) -> f64) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape(&self, other: &GrayImage) -> bool {
        self.height == other.height && self.width == other.width
    }
}

#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_out_of_range() {
        assert!(ImageBuffer::filled(7, 8, 1, 0.5).is_err());
        assert!(ImageBuffer::new(8, 8, 1, vec![1.5; 64]).is_err());
        assert!(ImageBuffer::new(8, 8, 2, vec![0.5; 128]).is_err());
        assert!(ImageBuffer::new(8, 8, 3, vec![0.5; 64]).is_err());
        assert!(ImageBuffer::filled(8, 8, 3, 0.5).is_ok());
    }

    #[test]
    fn planes_round_trip() {
        let img = ImageBuffer::from_fn_rgb(8, 9, |y, x| {
            [y as f64 / 8.0, x as f64 / 9.0, 0.25]
        })
        .unwrap();
        let back = ImageBuffer::from_planes(&img.planes()).unwrap();
        assert_eq!(img, back);
    }
}
