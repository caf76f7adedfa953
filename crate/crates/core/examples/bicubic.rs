//! Downscale a texture by 2 and 4 and bring it back with bicubic
//! interpolation; writes the images to a temporary directory.
//!
//! cargo run --example bicubic

use paon::data::metrics::psnr_rgb;
use paon::data::save_png;
use paon::data::synth::{texture, TextureSpec};
use rand::SeedableRng;

fn main() -> paon::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let hr = texture(&mut rng, &TextureSpec { size: 64, ..TextureSpec::default() });
    let dir = std::env::temp_dir().join("paon_bicubic");
    std::fs::create_dir_all(&dir).ok();
    save_png(&hr, &dir.join("hr.png"))?;
    for scale in [2, 4] {
        let lr = hr.downscale(scale)?;
        let up = lr.upscale(scale)?;
        save_png(&lr, &dir.join(format!("lr_x{scale}.png")))?;
        save_png(&up, &dir.join(format!("bicubic_x{scale}.png")))?;
        println!("x{scale}: {}x{} -> {}x{}, PSNR {:.3} dB", lr.width(), lr.height(), up.width(), up.height(), psnr_rgb(&hr, &up)?);
    }
    println!("images in {}", dir.display());
    Ok(())
}
