//! Parameter counts of the five architectures at full and toy scale.
//!
//! cargo run --example network_presets

use paon::network::{Model, Network, NetworkConfig};

fn main() -> paon::Result<()> {
    println!("{:<10} {:>10} {:>8}", "model", "3x48", "toy");
    for model in Model::ALL {
        let full = Network::new(NetworkConfig::preset(model))?;
        let toy = Network::new(NetworkConfig::preset(model).toy())?;
        println!("{:<10} {:>10} {:>8}", model.label(), full.param_count(), toy.param_count());
    }
    let net = Network::new(NetworkConfig::preset(Model::Padenet).toy())?;
    for (layer, n) in net.layer_counts() {
        println!("  {layer:<18} {n}");
    }
    Ok(())
}
