//! Canonical floating-point image tensor exchanged by every pipeline stage.
//!
//! Pixel values live in `[0, 1]` with three channels, stored planar
//! (channel, row, column). Files on disk are lossless 8-bit RGB; the
//! mapping is `v = byte / 255`, so any image whose values sit on the
//! 1/255 grid round-trips bit-exactly through storage.

use std::path::Path;

use ndarray::Array3;
use thiserror::Error;

/// Minimum edge length below which the network contract is undefined.
pub const MIN_DIM: u32 = 8;

/// Fixed channel count (RGB).
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions {0}x{1} below minimum {MIN_DIM}x{MIN_DIM}")]
    TooSmall(u32, u32),
    #[error("pixel value {value} at (c={c}, x={x}, y={y}) outside [0, 1]")]
    ValueOutOfRange { c: usize, x: u32, y: u32, value: f64 },
    #[error("buffer length {got} does not match {expected} for the given dimensions")]
    BufferMismatch { got: usize, expected: usize },
    #[error("failed to decode {path}: {source}")]
    Decode {
        path: String,
        source: image::ImageError,
    },
    #[error("failed to write {path}: {source}")]
    Encode {
        path: String,
        source: image::ImageError,
    },
}

/// RGB image with real-valued pixels in `[0, 1]`, planar layout `(3, h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Array3<f64>,
}

impl RasterImage {
    /// All-zero (black) image.
    pub fn zeros(width: u32, height: u32) -> Result<Self, RasterError> {
        Self::check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: Array3::zeros((CHANNELS, height as usize, width as usize)),
        })
    }

    /// Constant-valued image; `value` must be in `[0, 1]`.
    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self, RasterError> {
        Self::check_dims(width, height)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(RasterError::ValueOutOfRange {
                c: 0,
                x: 0,
                y: 0,
                value,
            });
        }
        Ok(Self {
            width,
            height,
            data: Array3::from_elem((CHANNELS, height as usize, width as usize), value),
        })
    }

    /// Build from a closure `(c, x, y) -> value`; every value is range-checked.
    pub fn from_fn<F>(width: u32, height: u32, f: F) -> Result<Self, RasterError>
    where
        F: Fn(usize, u32, u32) -> f64,
    {
        Self::check_dims(width, height)?;
        let mut data = Array3::zeros((CHANNELS, height as usize, width as usize));
        for c in 0..CHANNELS {
            for y in 0..height {
                for x in 0..width {
                    let v = f(c, x, y);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(RasterError::ValueOutOfRange { c, x, y, value: v });
                    }
                    data[[c, y as usize, x as usize]] = v;
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Wrap an existing planar `(3, h, w)` array, validating every value.
    pub fn from_planar(data: Array3<f64>) -> Result<Self, RasterError> {
        let (c, h, w) = data.dim();
        if c != CHANNELS {
            return Err(RasterError::BufferMismatch {
                got: c,
                expected: CHANNELS,
            });
        }
        Self::check_dims(w as u32, h as u32)?;
        for ((ci, y, x), &v) in data.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(RasterError::ValueOutOfRange {
                    c: ci,
                    x: x as u32,
                    y: y as u32,
                    value: v,
                });
            }
        }
        Ok(Self {
            width: w as u32,
            height: h as u32,
            data,
        })
    }

    fn check_dims(width: u32, height: u32) -> Result<(), RasterError> {
        if width < MIN_DIM || height < MIN_DIM {
            return Err(RasterError::TooSmall(width, height));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, c: usize, x: u32, y: u32) -> f64 {
        self.data[[c, y as usize, x as usize]]
    }

    /// Set a pixel-channel value; debug-asserts the `[0, 1]` range.
    #[inline]
    pub fn set(&mut self, c: usize, x: u32, y: u32, value: f64) {
        debug_assert!(
            (0.0..=1.0).contains(&value),
            "value {value} outside [0,1] at (c={c}, x={x}, y={y})"
        );
        self.data[[c, y as usize, x as usize]] = value;
    }

    pub fn planes(&self) -> &Array3<f64> {
        &self.data
    }

    /// Contiguous planar view `(3, h, w)` row-major.
    pub fn flat(&self) -> &[f64] {
        self.data.as_slice().expect("owned arrays are standard layout")
    }

    /// Build from a contiguous planar buffer, validating range and length.
    pub fn from_flat(width: u32, height: u32, data: Vec<f64>) -> Result<Self, RasterError> {
        let expected = CHANNELS * (width as usize) * (height as usize);
        if data.len() != expected {
            return Err(RasterError::BufferMismatch {
                got: data.len(),
                expected,
            });
        }
        let arr = Array3::from_shape_vec((CHANNELS, height as usize, width as usize), data)
            .expect("length checked above");
        Self::from_planar(arr)
    }

    /// Rec. 601 luma of a single pixel.
    #[inline]
    pub fn luminance(&self, x: u32, y: u32) -> f64 {
        0.299 * self.get(0, x, y) + 0.587 * self.get(1, x, y) + 0.114 * self.get(2, x, y)
    }

    /// Full luma plane, row-major `(h, w)`.
    pub fn luminance_plane(&self) -> ndarray::Array2<f64> {
        ndarray::Array2::from_shape_fn((self.height as usize, self.width as usize), |(y, x)| {
            self.luminance(x as u32, y as u32)
        })
    }

    /// Snap every value onto the 1/255 storage grid (what a save/load
    /// round trip would produce).
    pub fn quantized(&self) -> Self {
        let data = self.data.mapv(|v| (v * 255.0).round() / 255.0);
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// True when every value is already on the 1/255 grid.
    pub fn is_quantized(&self) -> bool {
        self.data
            .iter()
            .all(|&v| ((v * 255.0).round() / 255.0 - v).abs() == 0.0)
    }

    /// Mean absolute difference over all pixel-channels. Panics on
    /// dimension mismatch; callers validate dims first.
    pub fn mean_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims(), "mean_abs_diff dims mismatch");
        let n = self.data.len() as f64;
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n
    }

    /// Exact pixel equality (bitwise on the f64 values).
    pub fn pixels_equal(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Encode as 8-bit RGB PNG. Values are rounded onto the byte grid.
    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let mut buf = Vec::with_capacity((self.width * self.height) as usize * CHANNELS);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..CHANNELS {
                    buf.push((self.get(c, x, y) * 255.0).round() as u8);
                }
            }
        }
        let img = image::RgbImage::from_raw(self.width, self.height, buf)
            .expect("buffer sized from dimensions");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| RasterError::Encode {
                path: path.display().to_string(),
                source,
            })
    }

    /// Decode an 8-bit RGB image file; bytes map to values via `v / 255`.
    pub fn load(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)
            .map_err(|source| RasterError::Decode {
                path: path.display().to_string(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::check_dims(w, h)?;
        let mut data = Array3::zeros((CHANNELS, h as usize, w as usize));
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..CHANNELS {
                data[[c, y as usize, x as usize]] = px.0[c] as f64 / 255.0;
            }
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }
}
