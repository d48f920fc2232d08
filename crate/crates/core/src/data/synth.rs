//! Deterministic stroke-rendered digits, 28×28, MNIST-like framing: the
//! glyph sits in a 20×20 box around the centre, with random rotation,
//! scale, shear, offset and pen width.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;

type Stroke = Vec<(f64, f64)>;

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64, n: usize) -> Stroke {
    (0..=n)
        .map(|i| {
            let t = from + (to - from) * i as f64 / n as f64;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Glyph strokes in the unit square, `y` pointing down.
fn glyph(digit: u8) -> Vec<Stroke> {
    use std::f64::consts::TAU;
    match digit {
        0 => vec![ellipse(0.5, 0.5, 0.3, 0.42, 0.0, TAU, 24)],
        1 => vec![vec![(0.36, 0.24), (0.56, 0.08), (0.52, 0.92)]],
        2 => vec![vec![
            (0.22, 0.3),
            (0.3, 0.14),
            (0.5, 0.08),
            (0.7, 0.14),
            (0.76, 0.3),
            (0.68, 0.47),
            (0.22, 0.92),
            (0.8, 0.92),
        ]],
        3 => vec![vec![
            (0.22, 0.15),
            (0.5, 0.08),
            (0.74, 0.2),
            (0.7, 0.4),
            (0.45, 0.48),
            (0.72, 0.58),
            (0.78, 0.78),
            (0.5, 0.92),
            (0.2, 0.84),
        ]],
        4 => vec![vec![(0.64, 0.92), (0.64, 0.08), (0.18, 0.64), (0.84, 0.64)]],
        5 => vec![vec![
            (0.76, 0.08),
            (0.32, 0.08),
            (0.27, 0.45),
            (0.55, 0.4),
            (0.75, 0.55),
            (0.76, 0.78),
            (0.5, 0.92),
            (0.22, 0.85),
        ]],
        6 => vec![vec![
            (0.7, 0.1),
            (0.45, 0.2),
            (0.28, 0.5),
            (0.28, 0.75),
            (0.45, 0.92),
            (0.68, 0.85),
            (0.74, 0.65),
            (0.55, 0.52),
            (0.3, 0.6),
        ]],
        7 => vec![vec![(0.2, 0.1), (0.8, 0.1), (0.42, 0.92)]],
        8 => vec![ellipse(0.5, 0.29, 0.2, 0.2, 0.0, TAU, 20), ellipse(0.5, 0.7, 0.25, 0.22, 0.0, TAU, 20)],
        _ => vec![ellipse(0.5, 0.32, 0.22, 0.22, 0.0, TAU, 20), vec![(0.72, 0.32), (0.62, 0.92)]],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (cx * cx + cy * cy).sqrt()
}

/// Renders one digit with a fresh random pose.
pub fn render_digit<R: Rng + ?Sized>(digit: u8, rng: &mut R) -> Image {
    const SIDE: usize = 28;
    let angle = rng.random_range(-0.26..0.26);
    let scale = rng.random_range(0.8..1.1) * 20.0;
    let aspect = rng.random_range(0.85..1.15);
    let shear = rng.random_range(-0.25..0.25);
    let (tx, ty) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
    let pen = rng.random_range(1.0..1.9);
    let (s, c) = f64::sin_cos(angle);
    let place = |(u, v): (f64, f64)| {
        let (x, y) = ((u - 0.5) * scale * aspect, (v - 0.5) * scale);
        let x = x + shear * y;
        (14.0 + tx + c * x - s * y, 14.0 + ty + s * x + c * y)
    };
    let segments: Vec<((f64, f64), (f64, f64))> = glyph(digit)
        .into_iter()
        .flat_map(|stroke| {
            let pts: Vec<_> = stroke.into_iter().map(place).collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();
    let px = Array2::from_shape_fn((SIDE, SIDE), |(r, col)| {
        let p = (col as f64 + 0.5, r as f64 + 0.5);
        let d = segments.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
        (1.0 - (d - pen * 0.5)).clamp(0.0, 1.0)
    });
    Image::new(px).expect("rendered pixels are finite")
}

/// `n` digits cycling through labels, fully determined by `seed`.
pub fn synthetic_digits(n: usize, seed: u64) -> (Vec<Image>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let d = rng.random_range(0..10u8);
        images.push(render_digit(d, &mut rng));
        labels.push(d);
    }
    (images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let (a, la) = synthetic_digits(20, 3);
        let (b, lb) = synthetic_digits(20, 3);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        for img in &a {
            assert_eq!(img.side(), 28);
            assert!(img.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
            let ink: f64 = img.pixels().sum();
            assert!(ink > 20.0 && ink < 400.0, "ink {ink}");
            // the border stays mostly blank, as in MNIST
            let border: f64 = (0..28).map(|i| img.pixels()[[0, i]] + img.pixels()[[27, i]]).sum();
            assert!(border < 1.0);
        }
        assert_ne!(synthetic_digits(5, 4).0, a[..5].to_vec());
    }

    #[test]
    fn all_labels_render() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for d in 0..10 {
            assert!(render_digit(d, &mut rng).pixels().sum() > 20.0);
        }
    }
}
