//! Synthetic periodic textures for desk-scale experiments.
//!
//! Each image is a sum of sinusoids with integer frequencies, so it tiles
//! seamlessly and contains no energy above `max_freq` cycles per side. The
//! default limit of 8 cycles on 32 pixels is the Nyquist rate of the x2
//! downscaled image: everything in the HR texture is representable at LR,
//! but the antialiasing of the downscale attenuates the top octave.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ImageU8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TextureSpec {
    pub size: usize,
    /// Highest frequency in cycles per image side.
    pub max_freq: i32,
    pub components: usize,
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec {
            size: 32,
            max_freq: 8,
            components: 12,
        }
    }
}

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
    /// Per-channel gains, so colours vary with the pattern.
    tint: [f64; 3],
}

/// One random texture.
pub fn texture<R: Rng + ?Sized>(rng: &mut R, spec: &TextureSpec) -> ImageU8 {
    let f = spec.max_freq;
    let waves: Vec<Wave> = (0..spec.components)
        .map(|_| {
            let (fx, fy) = loop {
                let p = (rng.random_range(-f..=f), rng.random_range(0..=f));
                if p != (0, 0) && p.0 * p.0 + p.1 * p.1 <= f * f {
                    break p;
                }
            };
            let radius = ((fx * fx + fy * fy) as f64).sqrt();
            let tint = [0; 3].map(|_| rng.random_range(0.6..1.0));
            Wave {
                fx: fx as f64,
                fy: fy as f64,
                phase: rng.random_range(0.0..TAU),
                amp: rng.random_range(0.5..1.0) / radius.sqrt(),
                tint,
            }
        })
        .collect();
    let base = [0; 3].map(|_| rng.random_range(90.0..165.0));
    let n = spec.size;
    let mut planes = vec![0.0f64; 3 * n * n];
    for y in 0..n {
        for x in 0..n {
            for w in &waves {
                let t = TAU * (w.fx * x as f64 + w.fy * y as f64) / n as f64 + w.phase;
                let v = w.amp * t.cos();
                for c in 0..3 {
                    planes[c * n * n + y * n + x] += v * w.tint[c];
                }
            }
        }
    }
    let peak = planes.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let contrast = rng.random_range(60.0..85.0) / peak;
    ImageU8::from_fn(n, n, |x, y, c| {
        (base[c] + contrast * planes[c * n * n + y * n + x]).round().clamp(0.0, 255.0) as u8
    })
}

/// `count` textures named `tex_0000.png`, ... drawn from a generator seeded with `seed`.
pub fn textures(seed: u64, count: usize, spec: &TextureSpec) -> Vec<(String, ImageU8)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| (format!("tex_{i:04}.png"), texture(&mut rng, spec)))
        .collect()
}
