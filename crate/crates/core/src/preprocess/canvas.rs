//! Mapping native slices onto the fixed 256×256 model canvas and back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Box2d, Image};
use crate::scalar::Scalar;

pub const CANVAS_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryMode {
    /// Zero-pad the native slice, centered.
    #[default]
    Padding,
    /// Crop to the brain box and resize bilinearly.
    Crop,
}

impl std::str::FromStr for GeometryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "padding" => Ok(GeometryMode::Padding),
            "crop" => Ok(GeometryMode::Crop),
            other => Err(Error::Config(format!(
                "unknown geometry mode {other:?} (expected padding or crop)"
            ))),
        }
    }
}

impl std::fmt::Display for GeometryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GeometryMode::Padding => "padding",
            GeometryMode::Crop => "crop",
        })
    }
}

/// Everything needed to map a canvas back to its native frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    Padded {
        offset_y: usize,
        offset_x: usize,
        native_h: usize,
        native_w: usize,
    },
    Cropped {
        source: Box2d,
        native_h: usize,
        native_w: usize,
    },
}

impl Geometry {
    pub fn native_shape(&self) -> (usize, usize) {
        match *self {
            Geometry::Padded {
                native_h, native_w, ..
            }
            | Geometry::Cropped {
                native_h, native_w, ..
            } => (native_h, native_w),
        }
    }
}

/// Bilinear resize of one plane with pixel-center sampling (no corner alignment).
pub fn resize_bilinear<F: Scalar>(
    src: &[F],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<F> {
    debug_assert_eq!(src.len(), src_h * src_w);
    let taps = |dst: usize, src_n: usize| -> Vec<(usize, usize, f64)> {
        let scale = src_n as f64 / dst as f64;
        (0..dst)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_n - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src_n - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = taps(dst_h, src_h);
    let xs = taps(dst_w, src_w);
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for &(y0, y1, wy) in &ys {
        for &(x0, x1, wx) in &xs {
            let p = |y: usize, x: usize| src[y * src_w + x].as_f64();
            let top = p(y0, x0) * (1.0 - wx) + p(y0, x1) * wx;
            let bottom = p(y1, x0) * (1.0 - wx) + p(y1, x1) * wx;
            out.push(F::of(top * (1.0 - wy) + bottom * wy));
        }
    }
    out
}

/// Places a native slice on the canvas.
///
/// `box2d` is required for [`GeometryMode::Crop`] and ignored for padding.
pub fn to_canvas<F: Scalar>(
    slice: &Image<F>,
    mode: GeometryMode,
    box2d: Option<Box2d>,
) -> Result<(Image<F>, Geometry)> {
    let (c, h, w) = slice.shape();
    match mode {
        GeometryMode::Padding => {
            if h > CANVAS_SIZE || w > CANVAS_SIZE {
                return Err(Error::Range(format!(
                    "{h}x{w} slice does not fit a {CANVAS_SIZE} canvas"
                )));
            }
            let (oy, ox) = ((CANVAS_SIZE - h) / 2, (CANVAS_SIZE - w) / 2);
            let mut out = Image::zeros(c, CANVAS_SIZE, CANVAS_SIZE);
            for ch in 0..c {
                let src = slice.channel(ch);
                let dst = out.channel_mut(ch);
                for y in 0..h {
                    let d = (y + oy) * CANVAS_SIZE + ox;
                    dst[d..d + w].copy_from_slice(&src[y * w..(y + 1) * w]);
                }
            }
            Ok((
                out,
                Geometry::Padded {
                    offset_y: oy,
                    offset_x: ox,
                    native_h: h,
                    native_w: w,
                },
            ))
        }
        GeometryMode::Crop => {
            let b = box2d.ok_or_else(|| {
                Error::Contract("crop mode requires a 2-D bounding box".into())
            })?;
            if b.y0 > b.y1 || b.x0 > b.x1 || b.y1 >= h || b.x1 >= w {
                return Err(Error::Range(format!("box {b:?} outside {h}x{w} slice")));
            }
            let (bh, bw) = (b.height(), b.width());
            let mut data = Vec::with_capacity(c * CANVAS_SIZE * CANVAS_SIZE);
            let mut patch = Vec::with_capacity(bh * bw);
            for ch in 0..c {
                let src = slice.channel(ch);
                patch.clear();
                for y in b.y0..=b.y1 {
                    patch.extend_from_slice(&src[y * w + b.x0..=y * w + b.x1]);
                }
                data.extend(resize_bilinear(&patch, bh, bw, CANVAS_SIZE, CANVAS_SIZE));
            }
            Ok((
                Image::from_vec(c, CANVAS_SIZE, CANVAS_SIZE, data)?,
                Geometry::Cropped {
                    source: b,
                    native_h: h,
                    native_w: w,
                },
            ))
        }
    }
}

/// Inverts [`to_canvas`]: exact for padding, bilinear resize into a zero frame for crop.
pub fn from_canvas<F: Scalar>(canvas: &Image<F>, geometry: Option<&Geometry>) -> Result<Image<F>> {
    let geometry =
        geometry.ok_or_else(|| Error::Contract("canvas has no geometry metadata".into()))?;
    let (c, ch_h, ch_w) = canvas.shape();
    match *geometry {
        Geometry::Padded {
            offset_y,
            offset_x,
            native_h,
            native_w,
        } => {
            if offset_y + native_h > ch_h || offset_x + native_w > ch_w {
                return Err(Error::Range(format!(
                    "padded region exceeds {ch_h}x{ch_w} canvas"
                )));
            }
            let mut out = Image::zeros(c, native_h, native_w);
            for ch in 0..c {
                let src = canvas.channel(ch);
                let dst = out.channel_mut(ch);
                for y in 0..native_h {
                    let s = (y + offset_y) * ch_w + offset_x;
                    dst[y * native_w..(y + 1) * native_w].copy_from_slice(&src[s..s + native_w]);
                }
            }
            Ok(out)
        }
        Geometry::Cropped {
            source: b,
            native_h,
            native_w,
        } => {
            if b.y1 >= native_h || b.x1 >= native_w {
                return Err(Error::Range(format!(
                    "box {b:?} outside {native_h}x{native_w} frame"
                )));
            }
            let mut out = Image::zeros(c, native_h, native_w);
            for ch in 0..c {
                let patch = resize_bilinear(canvas.channel(ch), ch_h, ch_w, b.height(), b.width());
                let dst = out.channel_mut(ch);
                for (r, y) in (b.y0..=b.y1).enumerate() {
                    dst[y * native_w + b.x0..=y * native_w + b.x1]
                        .copy_from_slice(&patch[r * b.width()..(r + 1) * b.width()]);
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image<f32> {
        Image::from_fn(4, h, w, |c, y, x| (c * 1000 + y * w + x) as f32 * 0.37 + 1.0)
    }

    #[test]
    fn padding_places_content_at_eight() {
        let x = ramp(240, 240);
        let (canvas, g) = to_canvas(&x, GeometryMode::Padding, None).unwrap();
        assert_eq!(canvas.shape(), (4, 256, 256));
        assert!(matches!(g, Geometry::Padded { offset_y: 8, offset_x: 8, .. }));
        for c in 0..4 {
            for i in 0..240 {
                for j in 0..240 {
                    assert_eq!(canvas.get(c, 8 + i, 8 + j), x.get(c, i, j));
                }
            }
            for k in 0..256 {
                for border in [0, 7, 248, 255] {
                    assert_eq!(canvas.get(c, border, k), 0.0);
                    assert_eq!(canvas.get(c, k, border), 0.0);
                }
            }
        }
        assert_eq!(from_canvas(&canvas, Some(&g)).unwrap(), x);
    }

    #[test]
    fn crop_of_canvas_sized_box_is_identity() {
        let x = ramp(300, 300);
        let b = Box2d { y0: 20, y1: 275, x0: 10, x1: 265 };
        let (canvas, g) = to_canvas(&x, GeometryMode::Crop, Some(b)).unwrap();
        for c in 0..4 {
            for i in 0..256 {
                for j in 0..256 {
                    assert_eq!(canvas.get(c, i, j), x.get(c, 20 + i, 10 + j));
                }
            }
        }
        let back = from_canvas(&canvas, Some(&g)).unwrap();
        assert_eq!(back.get(2, 100, 100), x.get(2, 100, 100));
        assert_eq!(back.get(2, 0, 0), 0.0);
    }

    #[test]
    fn crop_errors() {
        let x = ramp(240, 240);
        let b = Box2d { y0: 0, y1: 240, x0: 0, x1: 10 };
        assert!(matches!(to_canvas(&x, GeometryMode::Crop, Some(b)), Err(Error::Range(_))));
        assert!(matches!(to_canvas(&x, GeometryMode::Crop, None), Err(Error::Contract(_))));
        let c = Image::<f32>::zeros(4, 256, 256);
        assert!(matches!(from_canvas(&c, None), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_canvas_maps_to_zero_frame() {
        let c = Image::<f64>::zeros(4, 256, 256);
        for g in [
            Geometry::Padded { offset_y: 8, offset_x: 8, native_h: 240, native_w: 240 },
            Geometry::Cropped {
                source: Box2d { y0: 30, y1: 200, x0: 40, x1: 190 },
                native_h: 240,
                native_w: 240,
            },
        ] {
            let out = from_canvas(&c, Some(&g)).unwrap();
            assert_eq!(out.shape(), (4, 240, 240));
            assert!(out.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bilinear_reproduces_linear_ramps_in_the_interior() {
        let src: Vec<f64> = (0..10).flat_map(|y| (0..10).map(move |x| (2 * x + 3 * y) as f64)).collect();
        let up = resize_bilinear(&src, 10, 10, 40, 40);
        // dst 20 samples src (20.5 / 4 - 0.5) = 4.625
        let expected = 2.0 * 4.625 + 3.0 * 4.625;
        assert!((up[20 * 40 + 20] - expected).abs() < 1e-12);
    }
}
