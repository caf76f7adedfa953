use super::*;
use crate::tensor::gradcheck::random_tensor;
use crate::testutil::rng;

fn toy(model: Model) -> Network {
    Network::new(NetworkConfig::preset(model).toy()).unwrap()
}

fn run(net: &Network, params: &Params<f32>, x: &Tensor<f32>) -> Tensor<f32> {
    net.infer(params, x).unwrap()
}

#[test]
fn presets_validate_and_invalid_combinations_are_rejected() {
    for m in Model::ALL {
        NetworkConfig::preset(m).validate().unwrap();
        NetworkConfig::preset(m).toy().validate().unwrap();
    }
    let reject = |f: fn(&mut NetworkConfig), m: Model| {
        let mut c = NetworkConfig::preset(m);
        f(&mut c);
        assert!(matches!(Network::new(c), Err(Error::Config(_))));
    };
    reject(|c| c.degrees = [2, 1], Model::Resnet);
    reject(|c| c.degrees = [3, 1], Model::Selfonn);
    reject(|c| c.shift = 0, Model::Selfonn);
    reject(|c| c.shift = -1, Model::Superonn);
    reject(|c| c.degrees = [2, 0], Model::Padenet);
    reject(|c| c.degrees = [3, 1], Model::Padenet);
    reject(|c| c.upscale = 3, Model::Padenet);
    reject(|c| c.width = 4, Model::Padenet);
    reject(|c| c.width = 1, Model::Resnet);
    reject(|c| c.kernel = 4, Model::Resnet);
}

#[test]
fn toy_padenet_parameter_count_matches_closed_form() {
    let net = toy(Model::Padenet);
    let c = 8;
    let conv = |i: usize, o: usize| o * i * 9 + o;
    // [2/1] with a bound-1 shifter: 2 numerator kernels, bias, 1 denominator kernel.
    let paon = 2 * (c * c * 9) + c + c * c * 9 + (2 * c * c + 2 * c);
    let expected = conv(3, c) + 2 * paon + c + conv(c, c) + conv(c, 4 * c) + conv(c, 3);
    assert_eq!(net.param_count(), expected);
    assert_eq!(net.init_params(0).count(), expected);
    let per_layer: usize = net.layer_counts().iter().map(|(_, n)| n).sum();
    assert_eq!(per_layer, expected);
}

#[test]
fn every_preset_count_matches_its_parameters() {
    for m in Model::ALL {
        for scale in [2, 4] {
            let mut cfg = NetworkConfig::preset(m);
            cfg.upscale = scale;
            let net = Network::new(cfg).unwrap();
            assert_eq!(net.param_count(), net.init_params(1).count(), "{m:?} x{scale}");
        }
    }
}

#[test]
fn full_scale_presets_share_an_order_of_magnitude() {
    let counts: Vec<usize> = Model::ALL
        .iter()
        .map(|&m| Network::new(NetworkConfig::preset(m)).unwrap().param_count())
        .collect();
    let lo = *counts.iter().min().unwrap() as f64;
    let hi = *counts.iter().max().unwrap() as f64;
    assert!(hi / lo < 10.0, "{counts:?}");
}

#[test]
fn resnet_has_no_denominators_and_init_is_seeded() {
    let net = toy(Model::Resnet);
    let p = net.init_params(3);
    assert!(p.names().all(|n| !n.contains(".den.")));
    assert_eq!(p, net.init_params(3));
    assert_ne!(p.flatten(), net.init_params(4).flatten());
}

#[test]
fn output_shapes_follow_upscale() {
    for (scale, h, w) in [(2, 16, 16), (4, 16, 16), (2, 7, 5), (4, 3, 9)] {
        let mut cfg = NetworkConfig::preset(Model::Padenet).toy();
        cfg.upscale = scale;
        let net = Network::new(cfg).unwrap();
        let params = net.init_params(0);
        let x = random_tensor(&mut rng(1), Shape::new(2, 3, h, w), -1.0, 1.0);
        let y = run(&net, &params, &x);
        assert_eq!(y.shape(), Shape::new(2, 3, h * scale, w * scale));
    }
    let net = toy(Model::Padenet);
    let params = net.init_params(0);
    let err = net.infer(&params, &Tensor::zeros(Shape::new(1, 4, 8, 8))).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
}

fn zero_block(params: &mut Params<f32>, block: &str) {
    for (name, t) in params.iter_mut() {
        if name.starts_with(block) && !name.ends_with("scaler") && !name.ends_with(".act.num") && !name.ends_with(".act.den") {
            *t = Tensor::zeros(t.shape());
        }
    }
}

#[test]
fn zeroed_or_unscaled_blocks_are_identities() {
    for m in Model::ALL {
        let net = toy(m);
        let mut r = rng(5);
        let mut params = net.init_params(2);
        for (_, t) in params.iter_mut() {
            *t = random_tensor(&mut r, t.shape(), -0.3, 0.3);
        }
        let block = &net.blocks()[0];
        let x = random_tensor(&mut r, Shape::new(1, 8, 6, 6), -1.0, 1.0);
        let eval = |params: &Params<f32>| {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape, false);
            let xv = tape.constant(x.clone());
            let y = block.forward(&mut tape, &vars, xv).unwrap();
            tape.value(y).clone()
        };
        let mut zeroed = params.clone();
        zero_block(&mut zeroed, block.name());
        if m != Model::PauNet {
            assert_eq!(eval(&zeroed), x, "{m:?}");
        } else {
            // A PAU's constant term survives zero convolutions; the output is
            // still independent of the block input.
            let y = eval(&zeroed);
            let other = random_tensor(&mut r, x.shape(), -1.0, 1.0);
            let mut tape = Tape::new();
            let vars = zeroed.bind(&mut tape, false);
            let ov = tape.constant(other.clone());
            let yo = block.forward(&mut tape, &vars, ov).unwrap();
            let dy: Vec<f32> = y.data().iter().zip(x.data()).map(|(a, b)| a - b).collect();
            let dyo: Vec<f32> = tape.value(yo).data().iter().zip(other.data()).map(|(a, b)| a - b).collect();
            assert_eq!(dy, dyo);
        }
        let mut unscaled = params.clone();
        *unscaled.get_mut(&block.scaler_name()).unwrap() = Tensor::zeros(Shape::new(1, 8, 1, 1));
        assert_eq!(eval(&unscaled), x, "{m:?}");
    }
}

#[test]
fn block_adds_scaled_branch() {
    let net = toy(Model::Padenet);
    let mut r = rng(8);
    let mut params = net.init_params(0);
    for (name, t) in params.iter_mut() {
        if !name.ends_with("scaler") {
            *t = random_tensor(&mut r, t.shape(), -0.2, 0.2);
        }
    }
    let block = &net.blocks()[0];
    let x = random_tensor(&mut r, Shape::new(1, 8, 5, 5), -1.0, 1.0);
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let y = block.forward(&mut tape, &vars, xv).unwrap();
    // The branch recomputed from the individual layers.
    let [l1, l2] = block.layers();
    let h = l1.forward(&mut tape, &vars, xv).unwrap();
    let h = tape.gelu(h);
    let branch = l2.forward(&mut tape, &vars, h).unwrap();
    let residual: Vec<f32> = tape.value(y).data().iter().zip(x.data()).map(|(a, b)| a - b).collect();
    let expected: Vec<f32> = tape.value(branch).data().iter().map(|b| 0.1 * b).collect();
    let diff = residual.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
    assert!(diff < 1e-6, "{diff}");
    let norm = |v: &[f32]| v.iter().map(|a| a * a).sum::<f32>().sqrt();
    assert!((norm(&residual) / norm(tape.value(branch).data()) - 0.1).abs() < 1e-4);
}

#[test]
fn degenerate_network_matches_hand_computation() {
    // Every kernel zero; biases fixed; the tail kernel is all ones so the
    // output depends on the upsampler's pixel-shuffled biases.
    let net = toy(Model::Resnet);
    let mut params = net.init_params(0);
    for (name, t) in params.iter_mut() {
        *t = if name.ends_with(".bias") && !name.starts_with("tail") {
            Tensor::from_fn(t.shape(), |_, c, _, _| 0.05 * c as f32 - 0.1)
        } else if name == "tail.num.w1" {
            Tensor::full(t.shape(), 1.0)
        } else if name == "tail.num.bias" {
            Tensor::from_vec(t.shape(), vec![0.5, -0.5, 0.25]).unwrap()
        } else if name.ends_with("scaler") {
            t.clone()
        } else {
            Tensor::zeros(t.shape())
        };
    }
    let x = random_tensor(&mut rng(3), Shape::new(1, 3, 4, 4), -1.0, 1.0);
    let y = run(&net, &params, &x);

    let gelu = |v: f64| 0.5 * v * (1.0 + libm::erf(v / 2f64.sqrt()));
    let up_bias = |c: usize| 0.05 * c as f64 - 0.1;
    // Upsampled map: channel c at (h, w) reads input channel 4c + 2(h%2) + w%2.
    let shuffled = |c: usize, h: usize, w: usize| gelu(up_bias(4 * c + 2 * (h % 2) + w % 2));
    let tail_bias = [0.5, -0.5, 0.25];
    for o in 0..3 {
        for yy in 0..8 {
            for xx in 0..8 {
                let mut acc = tail_bias[o];
                for c in 0..8 {
                    for dy in 0..3 {
                        for dx in 0..3 {
                            acc += shuffled(c, (yy + 8 + dy - 1) % 8, (xx + 8 + dx - 1) % 8);
                        }
                    }
                }
                assert!((y.at(0, o, yy, xx) as f64 - acc).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn global_skip_bypasses_zeroed_blocks() {
    let net = toy(Model::Padenet);
    let mut params = net.init_params(9);
    let x = random_tensor(&mut rng(4), Shape::new(1, 3, 6, 6), -1.0, 1.0);
    zero_block(&mut params, "blocks.0");
    let with_blocks = run(&net, &params, &x);
    // Replace the refinement with nothing: same output as a zero-block net
    // whose scaler is also zero.
    *params.get_mut("blocks.0.scaler").unwrap() = Tensor::zeros(Shape::new(1, 8, 1, 1));
    assert_eq!(run(&net, &params, &x), with_blocks);
}

#[test]
fn forward_is_deterministic() {
    let net = toy(Model::Superonn);
    let params = net.init_params(1);
    let x = random_tensor(&mut rng(2), Shape::new(2, 3, 8, 8), -1.0, 1.0);
    assert_eq!(run(&net, &params, &x), run(&net, &params, &x));
}

#[test]
fn network_config_round_trips_through_toml() {
    for m in Model::ALL {
        let cfg = NetworkConfig::preset(m);
        let text = toml::to_string(&cfg).unwrap();
        let back: NetworkConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
    let text = toml::to_string(&NetworkConfig::preset(Model::Padenet)).unwrap() + "chanels = 3\n";
    assert!(toml::from_str::<NetworkConfig>(&text).is_err());
}
