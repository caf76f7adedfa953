//! Trains a desk-scale network on synthetic textures and compares it with
//! bicubic interpolation on held-out images.
//!
//! cargo run --release --example toy_training -- [model] [seed]

use paon::config::SyntheticData;
use paon::eval::{evaluate, Upscaler};
use paon::network::{Model, Network, NetworkConfig};
use paon::training::{TrainConfig, Trainer};

fn main() -> paon::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next().as_deref() {
        Some("resnet") => Model::Resnet,
        Some("pau_net") => Model::PauNet,
        Some("selfonn") => Model::Selfonn,
        Some("superonn") => Model::Superonn,
        _ => Model::Padenet,
    };
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = SyntheticData::default();
    let (train, val, test) = (data.train_set(), data.val_set(), data.test_set());

    let net = Network::new(NetworkConfig::preset(model).toy())?;
    let cfg = TrainConfig { seed, ..TrainConfig::toy() };
    let mut trainer = Trainer::new(&net, cfg, net.init_params(seed))?;
    let start = std::time::Instant::now();
    trainer.run(&train, &val, |row| {
        if row.iter % 50 == 0 || row.iter == 1 {
            println!("{}", row.csv_line());
        }
        Ok(())
    })?;
    println!("trained in {:.1?}", start.elapsed());

    let best = trainer.best();
    let bicubic = evaluate(&Upscaler::Bicubic { scale: 2 }, &test)?;
    let sr = evaluate(&Upscaler::Model { net: &net, params: &best.params }, &test)?;
    println!("{}: test PSNR {:.3} dB / SSIM {:.4}", model.label(), sr.mean_psnr, sr.mean_ssim);
    println!("bicubic: test PSNR {:.3} dB / SSIM {:.4}", bicubic.mean_psnr, bicubic.mean_ssim);
    println!("gain: {:+.3} dB", sr.mean_psnr - bicubic.mean_psnr);
    Ok(())
}
