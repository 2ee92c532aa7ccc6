//! Seeded procedural test images: smooth colour gradients, a few oriented
//! sinusoidal textures and soft-edged discs. Deterministic for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image_io::Image;

struct Wave {
    fx: f32,
    fy: f32,
    phase: f32,
    amp: [f32; 3],
}

struct Disc {
    cx: f32,
    cy: f32,
    r: f32,
    /// Edge softness in pixels.
    soft: f32,
    color: [f32; 3],
}

/// A `width × height` image with values in `[0, 1]`.
///
/// `max_freq` bounds the texture frequency in cycles per pixel; lower values
/// give smoother images.
pub fn test_pattern(width: usize, height: usize, seed: u64, max_freq: f32) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.25..0.75));
    let grad: [[f32; 2]; 3] = std::array::from_fn(|_| [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)]);
    let waves: Vec<Wave> = (0..3)
        .map(|_| {
            let f = rng.random_range(0.2 * max_freq..max_freq);
            let theta: f32 = rng.random_range(0.0..std::f32::consts::PI);
            Wave {
                fx: f * theta.cos(),
                fy: f * theta.sin(),
                phase: rng.random_range(0.0..std::f32::consts::TAU),
                amp: std::array::from_fn(|_| rng.random_range(0.05..0.15)),
            }
        })
        .collect();
    let discs: Vec<Disc> = (0..3)
        .map(|_| Disc {
            cx: rng.random_range(0.0..width as f32),
            cy: rng.random_range(0.0..height as f32),
            r: rng.random_range(0.1..0.3) * width.min(height) as f32,
            soft: rng.random_range(0.3..1.0),
            color: std::array::from_fn(|_| rng.random_range(-0.35..0.35)),
        })
        .collect();

    Image::from_fn(width, height, |x, y| {
        let (u, v) = (x as f32 / width as f32 - 0.5, y as f32 / height as f32 - 0.5);
        let mut px: [f32; 3] = std::array::from_fn(|c| base[c] + grad[c][0] * u + grad[c][1] * v);
        for w in &waves {
            let s = (std::f32::consts::TAU * (w.fx * x as f32 + w.fy * y as f32) + w.phase).sin();
            for c in 0..3 {
                px[c] += w.amp[c] * s;
            }
        }
        for d in &discs {
            let dist = ((x as f32 - d.cx).powi(2) + (y as f32 - d.cy).powi(2)).sqrt();
            let inside = 1.0 / (1.0 + ((dist - d.r) / d.soft).exp());
            for c in 0..3 {
                px[c] += d.color[c] * inside;
            }
        }
        px.map(|v| v.clamp(0.0, 1.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = test_pattern(40, 30, 7, 0.1);
        assert_eq!(a, test_pattern(40, 30, 7, 0.1));
        assert_ne!(a, test_pattern(40, 30, 8, 0.1));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!((a.width(), a.height()), (40, 30));
    }
}
