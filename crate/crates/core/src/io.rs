//! PNG decode/encode. 8-bit samples map to `v/255`, 16-bit to `v/65535`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer as RasterBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::imgstats::ImageBuffer;

pub fn read_png(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(decode_err("not a PNG file".into()));
    }
    let decoded = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    from_dynamic(decoded).map_err(|e| match e {
        Error::InvalidImage(m) => Error::InvalidImage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub(crate) fn from_dynamic(img: DynamicImage) -> Result<ImageBuffer> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let is_16 = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let gray = matches!(
        img,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let data: Vec<f64> = match (gray, is_16) {
        (true, true) => img.into_luma16().into_raw().iter().map(|v| *v as f64 / 65535.0).collect(),
        (true, false) => img.into_luma8().into_raw().iter().map(|v| *v as f64 / 255.0).collect(),
        (false, true) => img.into_rgb16().into_raw().iter().map(|v| *v as f64 / 65535.0).collect(),
        (false, false) => img.into_rgb8().into_raw().iter().map(|v| *v as f64 / 255.0).collect(),
    };
    ImageBuffer::new(h, w, if gray { 1 } else { 3 }, data)
}

/// Writes a 16-bit PNG (gray or RGB, following the channel count).
pub fn write_png16(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let quantized: Vec<u16> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 1 {
        RasterBuffer::<Luma<u16>, _>::from_raw(w, h, quantized).map(DynamicImage::ImageLuma16)
    } else {
        RasterBuffer::<Rgb<u16>, _>::from_raw(w, h, quantized).map(DynamicImage::ImageRgb16)
    }
    .ok_or_else(|| Error::Encode {
        path: path.to_path_buf(),
        message: "buffer size mismatch".into(),
    })?;
    dynamic
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Encode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
}

/// Writes an 8-bit PNG.
pub fn write_png8(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let quantized: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(path, &quantized, w, h, color, image::ImageFormat::Png).map_err(
        |e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Encode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        },
    )
}
