//! PSNR and SSIM of progressively noisier copies of a texture.
//!
//! cargo run --example metrics

use paon::data::metrics::{psnr_rgb, ssim_y};
use paon::data::synth::{texture, TextureSpec};
use paon::data::ImageU8;
use rand::{Rng, SeedableRng};

fn main() -> paon::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let spec = TextureSpec { size: 64, ..TextureSpec::default() };
    let img = texture(&mut rng, &spec);
    println!("noise  psnr(dB)  ssim");
    for amp in [0, 1, 4, 16, 64] {
        let noisy = ImageU8::from_fn(img.width(), img.height(), |x, y, c| {
            (img.get(x, y, c) as i32 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8
        });
        println!("{amp:>5}  {:>8.3}  {:.4}", psnr_rgb(&img, &noisy)?, ssim_y(&img, &noisy)?);
    }
    Ok(())
}
