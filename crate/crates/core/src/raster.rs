//! Grayscale rendering of stimulus specs.

use crate::geometry::{Segment, CANVAS_SIZE};
use crate::rng::Rng;
use crate::stimulus::{verify_spec, Polarity, StimulusError, StimulusSpec};

pub const PIXELS: usize = CANVAS_SIZE * CANVAS_SIZE;

pub const DARK_BACKGROUND: (f64, f64) = (0.0, 0.3);
pub const LIGHT_BACKGROUND: (f64, f64) = (0.7, 1.0);
/// Ink level range for white strokes. Black strokes mirror it at `1 - v`.
pub const WHITE_INK: (f64, f64) = (0.85, 1.0);

/// 32x32 row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * CANVAS_SIZE + x]
    }

    /// 8-bit quantization used by the dataset file format.
    pub fn quantize(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_quantized(bytes: &[u8]) -> Image {
        Image {
            pixels: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        }
    }
}

/// Renders a verified spec.
pub fn rasterize(spec: &StimulusSpec, rng: &mut Rng) -> Result<Image, StimulusError> {
    let check = verify_spec(spec);
    if let Some(first) = check.violations.first() {
        return Err(StimulusError::Unverified(first.to_string()));
    }
    Ok(render(&spec.segments, spec.polarity, rng))
}

/// Draws arbitrary segments over a noisy background without checking task rules.
pub fn render(segments: &[Segment], polarity: Polarity, rng: &mut Rng) -> Image {
    let (bg, ink) = match polarity {
        Polarity::WhiteOnDark => (DARK_BACKGROUND, rng.uniform(WHITE_INK.0, WHITE_INK.1)),
        Polarity::BlackOnLight => (LIGHT_BACKGROUND, 1.0 - rng.uniform(WHITE_INK.0, WHITE_INK.1)),
    };
    let background: Vec<f64> = (0..PIXELS).map(|_| rng.uniform(bg.0, bg.1)).collect();

    let mut coverage = vec![0.0f64; PIXELS];
    for s in segments {
        wu_line(s, |x, y, c| {
            if (0..CANVAS_SIZE as isize).contains(&x) && (0..CANVAS_SIZE as isize).contains(&y) {
                let idx = y as usize * CANVAS_SIZE + x as usize;
                coverage[idx] = coverage[idx].max(c.clamp(0.0, 1.0));
            }
        });
    }

    let pixels = background
        .iter()
        .zip(&coverage)
        .map(|(&b, &c)| (b + c * (ink - b)).clamp(0.0, 1.0))
        .collect();
    Image { pixels }
}

fn fpart(v: f64) -> f64 {
    v - v.floor()
}

fn rfpart(v: f64) -> f64 {
    1.0 - fpart(v)
}

/// Xiaolin Wu's line with sub-pixel endpoints. Pixel centres sit on integer
/// coordinates; `plot` receives `(x, y, coverage)`.
pub fn wu_line(s: &Segment, mut plot: impl FnMut(isize, isize, f64)) {
    let (mut x0, mut y0, mut x1, mut y1) = (s.a.x, s.a.y, s.b.x, s.b.y);
    let steep = (y1 - y0).abs() > (x1 - x0).abs();
    if steep {
        std::mem::swap(&mut x0, &mut y0);
        std::mem::swap(&mut x1, &mut y1);
    }
    if x0 > x1 {
        std::mem::swap(&mut x0, &mut x1);
        std::mem::swap(&mut y0, &mut y1);
    }
    let mut put = |major: isize, minor: isize, c: f64| {
        if steep {
            plot(minor, major, c)
        } else {
            plot(major, minor, c)
        }
    };

    let dx = x1 - x0;
    let gradient = if dx == 0.0 { 1.0 } else { (y1 - y0) / dx };

    let xend = x0.round();
    let yend = y0 + gradient * (xend - x0);
    let xgap = rfpart(x0 + 0.5);
    let xpx1 = xend as isize;
    let ypx1 = yend.floor() as isize;
    put(xpx1, ypx1, rfpart(yend) * xgap);
    put(xpx1, ypx1 + 1, fpart(yend) * xgap);
    let mut intery = yend + gradient;

    let xend = x1.round();
    let yend = y1 + gradient * (xend - x1);
    let xgap = fpart(x1 + 0.5);
    let xpx2 = xend as isize;
    let ypx2 = yend.floor() as isize;
    put(xpx2, ypx2, rfpart(yend) * xgap);
    put(xpx2, ypx2 + 1, fpart(yend) * xgap);

    for x in (xpx1 + 1)..xpx2 {
        let y = intery.floor() as isize;
        put(x, y, rfpart(intery));
        put(x, y + 1, fpart(intery));
        intery += gradient;
    }
}
