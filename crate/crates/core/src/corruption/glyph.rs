//! Car glyph shared by the scene renderer and the oracle detector.
//!
//! A car is a fully opaque stack of bands — cabin strip, body, chassis —
//! with two wheel disks, drawn at one of three fixed pixel widths. Body
//! hue varies per car but every hue carries the same Rec. 601 luma, so
//! the luminance pattern of a glyph depends only on its width. That is
//! the signature the oracle detector matches against.

use ndarray::Array2;

use crate::data::BoundingBox;
use crate::raster::RasterImage;

/// The discrete widths cars are rendered at (and searched for).
pub const TEMPLATE_WIDTHS: [u32; 3] = [12, 16, 20];

/// Number of body hues in the palette.
pub const HUE_COUNT: usize = 4;

const CABIN_LUM: f64 = 0.55;
const BODY_LUM: f64 = 0.80;
const CHASSIS_RGB: [f64; 3] = [0.15, 0.15, 0.15];
const WHEEL_RGB: [f64; 3] = [0.05, 0.05, 0.05];

/// Solve the blue channel so (r, g, b) hits `lum` exactly.
fn with_luma(r: f64, g: f64, lum: f64) -> [f64; 3] {
    let b = (lum - 0.299 * r - 0.587 * g) / 0.114;
    debug_assert!((0.0..=1.0).contains(&b), "palette channel out of range");
    [r, g, b]
}

fn cabin_rgb() -> [f64; 3] {
    with_luma(0.50, 0.55, CABIN_LUM)
}

/// Body palette: different hues, identical luminance.
pub fn body_rgb(hue: usize) -> [f64; 3] {
    match hue % HUE_COUNT {
        0 => with_luma(0.85, 0.80, BODY_LUM),
        1 => with_luma(0.70, 0.85, BODY_LUM),
        2 => with_luma(0.95, 0.74, BODY_LUM),
        _ => [0.80, 0.80, 0.80],
    }
}

pub fn glyph_height(width: u32) -> u32 {
    (width * 3) / 4
}

fn band_heights(h: u32) -> (u32, u32, u32) {
    let cabin = ((h as f64) / 3.0).round() as u32;
    let chassis = (((h as f64) / 4.0).round() as u32).max(2);
    let body = h - cabin - chassis;
    (cabin, body, chassis)
}

/// RGB color of glyph pixel (x, y) for the given width and hue.
fn glyph_pixel(width: u32, hue: usize, x: u32, y: u32) -> [f64; 3] {
    let h = glyph_height(width);
    let (cabin_h, body_h, chassis_h) = band_heights(h);
    let w = width as f64;

    // Wheel disks sit inside the chassis band.
    let wheel_r = chassis_h as f64 * 0.55;
    let wheel_cy = h as f64 - 0.5 - chassis_h as f64 * 0.5;
    for wheel_cx in [0.25 * w - 0.5, 0.75 * w - 0.5] {
        let dx = x as f64 - wheel_cx;
        let dy = y as f64 - wheel_cy;
        if dx * dx + dy * dy <= wheel_r * wheel_r {
            return WHEEL_RGB;
        }
    }

    if y < cabin_h {
        let x0 = (0.20 * w).round() as u32;
        let x1 = (0.80 * w).round() as u32;
        if x >= x0 && x < x1 {
            cabin_rgb()
        } else {
            body_rgb(hue)
        }
    } else if y < cabin_h + body_h {
        body_rgb(hue)
    } else {
        CHASSIS_RGB
    }
}

/// Luminance signature of a glyph of the given width, `(h, w)` row-major.
/// Identical for every hue by palette construction.
pub fn luminance_template(width: u32) -> Array2<f64> {
    let h = glyph_height(width);
    Array2::from_shape_fn((h as usize, width as usize), |(y, x)| {
        let [r, g, b] = glyph_pixel(width, 0, x as u32, y as u32);
        0.299 * r + 0.587 * g + 0.114 * b
    })
}

/// Paint a car at (x, y) top-left and return its exact bounding box.
pub fn draw_car(img: &mut RasterImage, x: u32, y: u32, width: u32, hue: usize) -> BoundingBox {
    let h = glyph_height(width);
    for gy in 0..h {
        for gx in 0..width {
            let rgb = glyph_pixel(width, hue, gx, gy);
            for (c, v) in rgb.iter().enumerate() {
                img.set(c, x + gx, y + gy, *v);
            }
        }
    }
    BoundingBox::new(x, y, width, h)
}
