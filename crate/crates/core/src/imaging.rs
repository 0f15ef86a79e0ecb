//! Tactile image preparation: color difference against a no-contact
//! reference, red-minus-green monochrome, LED-region crop/resize, and
//! scale/shift augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pnm::{Pnm, PnmError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImagingError {
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("region {region:?} outside {width}x{height} image")]
    OutOfBounds { region: Rect, width: usize, height: usize },
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pnm(#[from] PnmError),
}

/// 8-bit RGB camera frame, row-major interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(ImagingError::Invalid(format!(
                "{width}x{height} RGB frame needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data).expect("sized by construction")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn from_pnm(p: &Pnm) -> Result<Self, ImagingError> {
        if p.channels != 3 || p.maxval != 255 {
            return Err(ImagingError::Invalid("frames are 8-bit P6".into()));
        }
        Self::new(p.width, p.height, p.data.iter().map(|&v| v as u8).collect())
    }

    pub fn to_pnm(&self) -> Pnm {
        Pnm::new(self.width, self.height, 3, 255, self.data.iter().map(|&v| v as u16).collect())
            .expect("frame invariants match P6")
    }
}

/// Signed per-channel difference of two frames, each value in [−255, 255].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffImage {
    width: usize,
    height: usize,
    data: Vec<i16>,
}

impl DiffImage {
    pub fn new(width: usize, height: usize, data: Vec<i16>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(ImagingError::Invalid("difference buffer size".into()));
        }
        if data.iter().any(|v| !(-255..=255).contains(v)) {
            return Err(ImagingError::Invalid("difference values must lie in [-255, 255]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [i16; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// One channel (0 red, 1 green, 2 blue) of a rectangle as f64, row-major.
    fn channel_region(&self, channel: usize, r: Rect) -> Vec<f64> {
        let mut out = Vec::with_capacity(r.width * r.height);
        for y in r.y..r.y + r.height {
            for x in r.x..r.x + r.width {
                out.push(self.data[(y * self.width + x) * 3 + channel] as f64);
            }
        }
        out
    }
}

/// Single-channel signed image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<i16>,
}

impl MonoImage {
    /// 8-bit P5 view: value + 128 after clipping to [−127, 127].
    pub fn visualize(&self) -> Pnm {
        let data = self.data.iter().map(|&v| (v.clamp(-127, 127) + 128) as u16).collect();
        Pnm::new(self.width, self.height, 1, 255, data).expect("mono dimensions are valid")
    }
}

/// Planar multi-channel floating-point image: `data[c][y][x]` flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ChannelImage {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn at(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Intensity-weighted (x, y) centroid of one channel; `None` when the
    /// channel sums to zero.
    pub fn centroid(&self, c: usize) -> Option<(f64, f64)> {
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (i, &v) in self.plane(c).iter().enumerate() {
            s += v;
            sx += v * (i % self.width) as f64;
            sy += v * (i / self.width) as f64;
        }
        (s != 0.0).then(|| (sx / s, sy / s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x.checked_add(self.width).is_some_and(|e| e <= width)
            && self.y.checked_add(self.height).is_some_and(|e| e <= height)
    }
}

/// `frame − reference` per channel, unclamped.
pub fn color_difference(frame: &Frame, reference: &Frame) -> Result<DiffImage, ImagingError> {
    if (frame.width, frame.height) != (reference.width, reference.height) {
        return Err(ImagingError::DimensionMismatch {
            a: (frame.width, frame.height),
            b: (reference.width, reference.height),
        });
    }
    let data = frame.data.iter().zip(&reference.data).map(|(&a, &b)| a as i16 - b as i16).collect();
    Ok(DiffImage { width: frame.width, height: frame.height, data })
}

/// Red minus green, per pixel.
pub fn monochrome_difference(diff: &DiffImage) -> MonoImage {
    let data = diff.data.chunks_exact(3).map(|p| p[0] - p[1]).collect();
    MonoImage { width: diff.width, height: diff.height, data }
}

/// Red channel of `regions[0]` and green channel of `regions[1]`, each
/// bilinearly resized to `out_size` (width, height), stacked as channels.
pub fn crop_led_regions(
    diff: &DiffImage,
    regions: [Rect; 2],
    out_size: (usize, usize),
) -> Result<ChannelImage, ImagingError> {
    let (ow, oh) = out_size;
    if ow == 0 || oh == 0 {
        return Err(ImagingError::Invalid("output size must be positive".into()));
    }
    for r in regions {
        if !r.fits(diff.width, diff.height) {
            return Err(ImagingError::OutOfBounds { region: r, width: diff.width, height: diff.height });
        }
    }
    let mut out = ChannelImage::zeros(ow, oh, 2);
    for (c, r) in regions.iter().enumerate() {
        let src = diff.channel_region(c, *r);
        out.plane_mut(c).copy_from_slice(&resize_bilinear(&src, r.width, r.height, ow, oh));
    }
    Ok(out)
}

/// Bilinear resize with half-pixel centers and edge clamping.
pub fn resize_bilinear(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    assert_eq!(src.len(), w * h, "source buffer size");
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let y = (oy as f64 + 0.5) * sy - 0.5;
        for ox in 0..out_w {
            let x = (ox as f64 + 0.5) * sx - 0.5;
            out.push(sample_bilinear(src, w, h, x, y));
        }
    }
    out
}

/// Bilinear sample at continuous pixel coordinates, clamped to the edges.
pub fn sample_bilinear(src: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let at = |xx: usize, yy: usize| src[yy * w + xx];
    let top = if fx == 0.0 { at(x0, y0) } else { at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx };
    let bottom = if fx == 0.0 { at(x0, y1) } else { at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx };
    if fy == 0.0 {
        top
    } else {
        top * (1.0 - fy) + bottom * fy
    }
}

/// Ranges [`augment`] draws from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmentConfig {
    pub scale_min: f64,
    pub scale_max: f64,
    /// Largest shift magnitude per axis, px.
    pub max_shift: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { scale_min: 0.9, scale_max: 1.1, max_shift: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub scale: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams { scale: 1.0, shift_x: 0.0, shift_y: 0.0 };

    pub fn sample<R: Rng>(rng: &mut R, cfg: &AugmentConfig) -> Self {
        Self {
            scale: rng.random_range(cfg.scale_min..=cfg.scale_max),
            shift_x: rng.random_range(-cfg.max_shift..=cfg.max_shift),
            shift_y: rng.random_range(-cfg.max_shift..=cfg.max_shift),
        }
    }
}

/// Random scale about the image center plus shift, drawn from `seed`.
pub fn augment(image: &ChannelImage, seed: u64) -> ChannelImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    augment_with(image, AugmentParams::sample(&mut rng, &AugmentConfig::default()))
}

/// Apply a known scale/shift. Output pixel `p` samples the input at
/// `c + (p − c − shift) / scale` with `c` the image center.
pub fn augment_with(image: &ChannelImage, p: AugmentParams) -> ChannelImage {
    let (w, h) = (image.width, image.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = ChannelImage::zeros(w, h, image.channels);
    for c in 0..image.channels {
        let src = image.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            let sy = cy + (y as f64 - cy - p.shift_y) / p.scale;
            for x in 0..w {
                let sx = cx + (x as f64 - cx - p.shift_x) / p.scale;
                dst[y * w + x] = sample_bilinear(src, w, h, sx, sy);
            }
        }
    }
    out
}

/// A synthetic indentation: reference and pressed frames plus the
/// contact mask. Shading adds the bump's x-slope to red and its y-slope
/// to green, so the red-minus-green image is zero off the contact.
pub fn contact_press_fixture(
    width: usize,
    height: usize,
    center: (f64, f64),
    radius: f64,
) -> (Frame, Frame, Vec<bool>) {
    let mut reference = Frame::filled(width, height, [0, 0, 0]);
    for y in 0..height {
        for x in 0..width {
            let r = (60 + (x * 80) / width.max(1)) as u8;
            let g = (60 + (y * 80) / height.max(1)) as u8;
            reference.set_pixel(x, y, [r, g, 90]);
        }
    }
    let mut pressed = reference.clone();
    let mut mask = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            if dx * dx + dy * dy >= radius * radius {
                continue;
            }
            mask[y * width + x] = true;
            // Slopes of h = 1 − r²/R², scaled to ±40 levels at the rim.
            let sx = (-2.0 * dx / (radius * radius) * 20.0 * radius).round() as i16;
            let sy = (2.0 * dy / (radius * radius) * 45.0 * radius).round() as i16;
            let [r, g, b] = reference.pixel(x, y);
            pressed.set_pixel(x, y, [(r as i16 + sx).clamp(0, 255) as u8, (g as i16 + sy).clamp(0, 255) as u8, b]);
        }
    }
    (pressed, reference, mask)
}
