use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::tensor::{Shape, Tensor};

/// Which random transforms training patches receive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentFlags {
    pub rotate: bool,
    pub flip: bool,
    pub shuffle_channels: bool,
}

impl Default for AugmentFlags {
    fn default() -> Self {
        AugmentFlags {
            rotate: true,
            flip: true,
            shuffle_channels: true,
        }
    }
}

/// One draw of the geometric and colour transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Augment {
    /// Counter-clockwise quarter turns.
    pub quarter_turns: u8,
    pub flip_h: bool,
    pub flip_v: bool,
    /// Source channel of each output channel.
    pub channels: [usize; 3],
}

impl Augment {
    pub const IDENTITY: Augment = Augment {
        quarter_turns: 0,
        flip_h: false,
        flip_v: false,
        channels: [0, 1, 2],
    };

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, flags: AugmentFlags) -> Self {
        let mut a = Augment::IDENTITY;
        if flags.rotate {
            a.quarter_turns = rng.random_range(0..4);
        }
        if flags.flip {
            a.flip_h = rng.random();
            a.flip_v = rng.random();
        }
        if flags.shuffle_channels {
            a.channels.shuffle(rng);
        }
        a
    }

    /// Applies the draw to a batch of square images: flips first, then the
    /// rotation, then the channel permutation.
    pub fn apply(&self, t: &Tensor<f32>) -> Tensor<f32> {
        let [n, c, h, w] = t.shape().0;
        assert_eq!(h, w, "augmentation needs square patches");
        assert_eq!(c, 3, "augmentation needs RGB patches");
        let last = h - 1;
        Tensor::from_fn(Shape::new(n, c, h, w), |b, ch, y, x| {
            // Invert the rotation: output (y, x) reads the pre-rotation grid.
            let (mut sy, mut sx) = (y, x);
            for _ in 0..self.quarter_turns {
                (sy, sx) = (sx, last - sy);
            }
            if self.flip_v {
                sy = last - sy;
            }
            if self.flip_h {
                sx = last - sx;
            }
            t.at(b, self.channels[ch], sy, sx)
        })
    }
}

/// Adds white Gaussian noise with variance `mean(x^2) / 10^(snr/10)` to
/// each batch item. An all-zero item has no signal power and is left as is.
pub fn add_noise_snr<R: Rng + ?Sized>(t: &mut Tensor<f32>, snr_db: f64, rng: &mut R) {
    let per = t.shape().0[1..].iter().product::<usize>();
    for item in t.data_mut().chunks_mut(per) {
        let power = item.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / per as f64;
        if power == 0.0 || snr_db.is_infinite() {
            continue;
        }
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for v in item.iter_mut() {
            *v += normal.sample(rng) as f32;
        }
    }
}
