//! Train a few iterations, save a checkpoint, reload it bit-exactly, and
//! print what `paon inspect` would show.
//!
//! cargo run --release --example checkpoint

use paon::checkpoint::Checkpoint;
use paon::config::{Experiment, SyntheticData};
use paon::network::{Model, Network};
use paon::training::Trainer;

fn main() -> paon::Result<()> {
    let mut exp = Experiment::preset(Model::Padenet, true);
    exp.train.iterations = 20;
    exp.train.val_interval = 10;
    let data = SyntheticData { train: 8, val: 2, ..SyntheticData::default() };
    let net = Network::new(exp.network.clone())?;
    let mut trainer = Trainer::new(&net, exp.train.clone(), net.init_params(0))?;
    trainer.run(&data.train_set(), &data.val_set(), |_| Ok(()))?;

    let dir = tempfile::tempdir().map_err(|e| paon::Error::Usage(e.to_string()))?;
    let path = dir.path().join("final.ckpt");
    let ckpt = Checkpoint { experiment: exp, snapshot: trainer.last().clone() };
    ckpt.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!("{} bytes, round trip exact: {}", std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0), back == ckpt);
    print!("{}", paon::cli::inspect(&path)?);
    Ok(())
}
