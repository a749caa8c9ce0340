//! Paint-style trace images and density heatmaps.

use std::path::Path;

use thiserror::Error;

use crate::gesture::segment;
use crate::perf::{LayeredPerformance, TinyPerformance, TouchEvent};
use crate::stats::KdeGrid;

pub const DEFAULT_TRACE_SIZE: u32 = 300;
pub const MIN_TRACE_SIZE: u32 = 16;
/// Alpha of every layer but the newest in a layered trace.
pub const OLDER_LAYER_ALPHA: f64 = 0.6;

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [255, 255, 255];

/// Distinguishable stroke hues, cycled in gesture order.
pub const PALETTE: [Rgb; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [23, 190, 207],
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("image size {0} is below the minimum of {MIN_TRACE_SIZE} pixels")]
    TooSmall(u32),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// Every gesture gets the next palette colour.
    PerSwipe,
    /// Everything in the first palette colour.
    Single,
}

/// RGBA raster, row-major, top row first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl TraceImage {
    pub fn blank(width: u32, height: u32) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 4) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&[BACKGROUND[0], BACKGROUND[1], BACKGROUND[2], 255]);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = ((y * self.width + x) * 4) as usize;
        self.pixels[i..i + 4].try_into().unwrap()
    }

    pub fn rgb(&self, x: u32, y: u32) -> Rgb {
        let p = self.pixel(x, y);
        [p[0], p[1], p[2]]
    }

    fn blend(&mut self, x: u32, y: u32, color: Rgb, alpha: f64) {
        let i = ((y * self.width + x) * 4) as usize;
        for (dst, &src) in self.pixels[i..i + 3].iter_mut().zip(&color) {
            *dst = (src as f64 * alpha + *dst as f64 * (1.0 - alpha)).round() as u8;
        }
        self.pixels[i + 3] = 255;
    }

    /// Pixel bounding box `(x0, y0, x1, y1)` of everything that isn't
    /// background, inclusive.
    pub fn ink_bounds(&self) -> Option<(u32, u32, u32, u32)> {
        let mut b: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.rgb(x, y) != BACKGROUND {
                    b = Some(match b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        b
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, TraceError> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgba);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header()?;
            writer.write_image_data(&self.pixels)?;
        }
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), TraceError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }
}

/// Coverage mask of round-capped strokes on a square canvas.
struct Mask {
    size: u32,
    covered: Vec<Option<Rgb>>,
}

impl Mask {
    fn new(size: u32) -> Self {
        Self {
            size,
            covered: vec![None; (size * size) as usize],
        }
    }

    /// Marks pixels whose centre lies within `radius` of segment `a`–`b`.
    /// A zero-length segment draws a dot.
    fn capsule(&mut self, a: (f64, f64), b: (f64, f64), radius: f64, color: Rgb) {
        let max = self.size as f64 - 1.0;
        let x0 = (a.0.min(b.0) - radius).floor().clamp(0.0, max) as u32;
        let x1 = (a.0.max(b.0) + radius).ceil().clamp(0.0, max) as u32;
        let y0 = (a.1.min(b.1) - radius).floor().clamp(0.0, max) as u32;
        let y1 = (a.1.max(b.1) + radius).ceil().clamp(0.0, max) as u32;
        let (vx, vy) = (b.0 - a.0, b.1 - a.1);
        let len2 = vx * vx + vy * vy;
        let r2 = radius * radius;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
                let t = if len2 > 0.0 {
                    (((cx - a.0) * vx + (cy - a.1) * vy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (dx, dy) = (cx - (a.0 + t * vx), cy - (a.1 + t * vy));
                if dx * dx + dy * dy <= r2 {
                    self.covered[(py * self.size + px) as usize] = Some(color);
                }
            }
        }
    }

    fn polyline(&mut self, events: &[TouchEvent], width: f64, color: Rgb) {
        let s = self.size as f64;
        let pts: Vec<(f64, f64)> = events.iter().map(|e| (e.x * s, e.y * s)).collect();
        let radius = width / 2.0;
        if pts.len() == 1 {
            self.capsule(pts[0], pts[0], radius, color);
        }
        for w in pts.windows(2) {
            self.capsule(w[0], w[1], radius, color);
        }
    }

    fn composite(&self, image: &mut TraceImage, alpha: f64) {
        for (i, c) in self.covered.iter().enumerate() {
            if let Some(color) = c {
                let i = i as u32;
                image.blend(i % self.size, i / self.size, *color, alpha);
            }
        }
    }
}

/// Smallest stroke width in pixels. Its radius exceeds √2/2, so every dot
/// covers at least the pixel centre nearest to it.
pub const MIN_STROKE_WIDTH: f64 = 1.5;

pub fn stroke_width(size: u32) -> f64 {
    (size as f64 / 60.0).max(MIN_STROKE_WIDTH)
}

fn draw_performance(perf: &TinyPerformance, size: u32, mode: ColorMode, base: usize) -> Mask {
    let mut mask = Mask::new(size);
    let width = stroke_width(size);
    // invalid streams still draw; a leading moved event starts its own stroke
    let gestures = segment(&perf.events).unwrap_or_else(|_| {
        vec![crate::gesture::Gesture {
            kind: crate::gesture::GestureKind::Swipe,
            start: 0,
            events: perf.events.clone(),
        }]
    });
    for (n, g) in gestures.iter().enumerate() {
        let color = match mode {
            ColorMode::PerSwipe => PALETTE[(base + n) % PALETTE.len()],
            ColorMode::Single => PALETTE[base % PALETTE.len()],
        };
        mask.polyline(&g.events, width, color);
    }
    mask
}

/// Draws a performance on a white square canvas of `size` pixels.
pub fn render_trace(perf: &TinyPerformance, size: u32, mode: ColorMode) -> Result<TraceImage, TraceError> {
    if size < MIN_TRACE_SIZE {
        return Err(TraceError::TooSmall(size));
    }
    let mut image = TraceImage::blank(size, size);
    draw_performance(perf, size, mode, 0).composite(&mut image, 1.0);
    Ok(image)
}

/// Composites layers oldest first, one hue per layer; only the newest
/// layer is fully opaque.
pub fn render_layered(layers: &LayeredPerformance, size: u32) -> Result<TraceImage, TraceError> {
    if size < MIN_TRACE_SIZE {
        return Err(TraceError::TooSmall(size));
    }
    let mut image = TraceImage::blank(size, size);
    let newest = layers.depth() - 1;
    for (k, layer) in layers.layers().iter().enumerate() {
        let alpha = if k == newest { 1.0 } else { OLDER_LAYER_ALPHA };
        draw_performance(layer, size, ColorMode::Single, k).composite(&mut image, alpha);
    }
    Ok(image)
}

/// Dark-high colour ramp from white to deep navy; luminance falls
/// monotonically with `t ∈ [0, 1]`.
pub fn heat_color(t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    [
        (255.0 - 235.0 * t).round() as u8,
        (255.0 - 215.0 * t).round() as u8,
        (255.0 - 135.0 * t).round() as u8,
    ]
}

pub fn luminance(c: Rgb) -> f64 {
    0.2126 * c[0] as f64 + 0.7152 * c[1] as f64 + 0.0722 * c[2] as f64
}

/// Density heatmap, nearest-cell upsampled; grid row 0 at the top.
pub fn render_heatmap(grid: &KdeGrid, size: u32) -> Result<TraceImage, TraceError> {
    if size < MIN_TRACE_SIZE {
        return Err(TraceError::TooSmall(size));
    }
    let max = grid.max();
    let res = grid.resolution as u64;
    let mut image = TraceImage::blank(size, size);
    for py in 0..size {
        let row = (py as u64 * res / size as u64) as usize;
        for px in 0..size {
            let col = (px as u64 * res / size as u64) as usize;
            let t = if max > 0.0 { grid.at(col, row) / max } else { 0.0 };
            image.blend(px, py, heat_color(t), 1.0);
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::{Instrument, Metadata};

    fn perf(events: Vec<TouchEvent>) -> TinyPerformance {
        TinyPerformance::new(Metadata::anonymous(Instrument::Chirp), events)
    }

    #[test]
    fn empty_is_background() {
        let img = render_trace(&perf(vec![]), 64, ColorMode::PerSwipe).unwrap();
        assert_eq!(img.ink_bounds(), None);
        assert!(matches!(
            render_trace(&perf(vec![]), 15, ColorMode::Single),
            Err(TraceError::TooSmall(15))
        ));
    }

    #[test]
    fn tap_is_a_centred_dot() {
        let img = render_trace(&perf(vec![TouchEvent::down(0.0, 0.5, 0.5)]), 300, ColorMode::Single)
            .unwrap();
        assert_eq!(img.rgb(150, 150), PALETTE[0]);
        assert_eq!(img.rgb(149, 149), PALETTE[0]);
        let (x0, y0, x1, y1) = img.ink_bounds().unwrap();
        // radius 2.5 px around (150, 150)
        assert_eq!((x0, y0, x1, y1), (148, 148, 151, 151));
    }

    #[test]
    fn small_images_still_show_every_tap() {
        for size in [16, 17, 31, 59] {
            for &(x, y) in &[(0.0, 0.0), (0.0345, 0.0345), (1.0, 1.0), (0.51, 0.27)] {
                let img = render_trace(&perf(vec![TouchEvent::down(0.0, x, y)]), size, ColorMode::Single).unwrap();
                assert!(img.ink_bounds().is_some(), "tap at ({x}, {y}) vanished at {size} px");
            }
        }
    }

    #[test]
    fn per_swipe_colours_differ() {
        let p = perf(vec![
            TouchEvent::down(0.0, 0.1, 0.1),
            TouchEvent::moved(0.1, 0.4, 0.1),
            TouchEvent::down(0.2, 0.1, 0.8),
            TouchEvent::moved(0.3, 0.4, 0.8),
        ]);
        let img = render_trace(&p, 300, ColorMode::PerSwipe).unwrap();
        assert_eq!(img.rgb(75, 30), PALETTE[0]);
        assert_eq!(img.rgb(75, 240), PALETTE[1]);
        let single = render_trace(&p, 300, ColorMode::Single).unwrap();
        assert_eq!(single.rgb(75, 240), PALETTE[0]);
    }

    #[test]
    fn png_is_deterministic() {
        let p = perf(vec![TouchEvent::down(0.0, 0.2, 0.3), TouchEvent::moved(0.1, 0.7, 0.9)]);
        let a = render_trace(&p, 100, ColorMode::PerSwipe).unwrap().encode_png().unwrap();
        let b = render_trace(&p, 100, ColorMode::PerSwipe).unwrap().encode_png().unwrap();
        assert_eq!(a, b);
        assert_eq!(&a[1..4], b"PNG");
    }

    #[test]
    fn heat_ramp_is_monotone() {
        let mut last = f64::INFINITY;
        for i in 0..=1000 {
            let l = luminance(heat_color(i as f64 / 1000.0));
            assert!(l <= last);
            last = l;
        }
        assert_eq!(heat_color(0.0), BACKGROUND);
    }
}
