use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use image::{ImageFormat, ImageReader};

use crate::{Error, Result};

/// A `C x H x W` image with values in `[0, 1]`, stored row-major per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    /// Builds an image, rejecting anything outside `[0, 1]` or non-finite.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        Self::check_dims(channels, height, width, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { channels, height, width, data })
    }

    /// Builds an image, clamping finite values into `[0, 1]`.
    pub fn from_unclamped(
        channels: usize,
        height: usize,
        width: usize,
        mut data: Vec<f32>,
    ) -> Result<Self> {
        Self::check_dims(channels, height, width, data.len())?;
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidImage("non-finite value".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::from_unclamped(channels, height, width, vec![value; channels * height * width])
    }

    fn check_dims(channels: usize, height: usize, width: usize, len: usize) -> Result<()> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels, expected 1 or 3")));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if len != channels * height * width {
            return Err(Error::InvalidImage(format!(
                "buffer of {len} values does not match {channels}x{height}x{width}"
            )));
        }
        Ok(())
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

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// `1 x C x H x W` tensor.
    pub fn to_tensor(&self, device: &Device, dtype: DType) -> Result<Tensor> {
        let t = Tensor::from_slice(&self.data, (1, self.channels, self.height, self.width), device)?;
        Ok(t.to_dtype(dtype)?)
    }

    /// Stacks same-shaped images into an `N x C x H x W` batch.
    pub fn stack(images: &[&ImageTensor], device: &Device, dtype: DType) -> Result<Tensor> {
        let first = images.first().ok_or(Error::EmptyInput)?;
        let mut buf = Vec::with_capacity(images.len() * first.data.len());
        for img in images {
            if img.dims() != first.dims() {
                return Err(Error::ShapeMismatch(
                    vec![first.channels, first.height, first.width],
                    vec![img.channels, img.height, img.width],
                ));
            }
            buf.extend_from_slice(&img.data);
        }
        let (c, h, w) = first.dims();
        Ok(Tensor::from_vec(buf, (images.len(), c, h, w), device)?.to_dtype(dtype)?)
    }

    /// Splits an `N x C x H x W` batch back into images, clamping into `[0, 1]`.
    pub fn unstack(batch: &Tensor) -> Result<Vec<ImageTensor>> {
        let (n, c, h, w) = batch.dims4()?;
        let flat: Vec<f32> = batch.to_dtype(DType::F32)?.flatten_all()?.to_vec1()?;
        let per = c * h * w;
        (0..n)
            .map(|i| Self::from_unclamped(c, h, w, flat[i * per..(i + 1) * per].to_vec()))
            .collect()
    }

    pub fn max_abs_diff(&self, other: &ImageTensor) -> Result<f32> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch(
                vec![self.channels, self.height, self.width],
                vec![other.channels, other.height, other.width],
            ));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max))
    }
}

/// Decodes an 8-bit PNG; gray stays single-channel, alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let decode_err = |reason: String| Error::DecodeError { path: path.to_path_buf(), reason };
    let reader = ImageReader::with_format(BufReader::new(File::open(path)?), ImageFormat::Png);
    let dynamic = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
    let (channels, interleaved) = if dynamic.color().has_color() {
        (3, dynamic.to_rgb8().into_raw())
    } else {
        (1, dynamic.to_luma8().into_raw())
    };
    let mut data = vec![0f32; channels * height * width];
    for (i, px) in interleaved.chunks_exact(channels).enumerate() {
        for (c, v) in px.iter().enumerate() {
            data[c * height * width + i] = *v as f32 / 255.0;
        }
    }
    ImageTensor::new(channels, height, width, data)
}

/// Quantizes to 8 bits (`round(v * 255)`) and writes a PNG.
pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (channels, height, width) = img.dims();
    let mut interleaved = vec![0u8; channels * height * width];
    for c in 0..channels {
        for (i, v) in img.plane(c).iter().enumerate() {
            interleaved[i * channels + c] = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    let color = if channels == 3 { image::ExtendedColorType::Rgb8 } else { image::ExtendedColorType::L8 };
    image::save_buffer_with_format(
        path,
        &interleaved,
        width as u32,
        height as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| Error::WriteError { path: path.to_path_buf(), reason: e.to_string() })
}
