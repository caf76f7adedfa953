//! Super-resolution networks built from Padé neuron layers.
//!
//! Pipeline: a `[1/0]` feature extractor, `R` residual refinement blocks,
//! a `[1/0]` layer closing the refinement, a global skip back to the
//! extracted features, one `conv -> activation -> pixel shuffle` stage per
//! factor of two, and a final `[1/0]` layer down to RGB.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{fit_gelu, LowerOrder, Paon, PaonSpec, Pau, Shifter, Variant};
use crate::params::{Bindings, Params};
use crate::tensor::{Real, Shape, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Resnet,
    PauNet,
    Selfonn,
    Superonn,
    Padenet,
}

impl Model {
    pub const ALL: [Model; 5] = [
        Model::Resnet,
        Model::PauNet,
        Model::Selfonn,
        Model::Superonn,
        Model::Padenet,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Model::Resnet => "ResNet",
            Model::PauNet => "PAU-Net",
            Model::Selfonn => "SelfONN",
            Model::Superonn => "SuperONN",
            Model::Padenet => "PadéNet",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    /// Residual block, both layers at the trunk width.
    Rb,
    /// Wide residual block: the first layer expands the width by `width`.
    Wrb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Tanh,
    Pau,
}

/// Which layers of each refinement block are Padé neuron layers; the rest
/// are plain `[1/0]` convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    First,
    Last,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub model: Model,
    pub blocks: usize,
    pub channels: usize,
    pub upscale: usize,
    /// `[M, N]` of the block layers chosen by `placement`.
    pub degrees: [usize; 2],
    pub variant: Variant,
    pub lower_order: LowerOrder,
    /// Shifter bound of the block Padé layers; negative disables it.
    pub shift: i32,
    pub placement: Placement,
    pub block: BlockKind,
    /// Width multiplier of a wide block; 1 for plain residual blocks.
    pub width: usize,
    pub activation: Activation,
    /// Degree of the PAU activation when `activation = "pau"`.
    pub pau_degrees: [usize; 2],
    pub scaler_init: f64,
    pub kernel: usize,
    /// Required for `variant = "vanilla"`, whose denominator can reach zero.
    #[serde(default)]
    pub allow_vanilla: bool,
}

impl NetworkConfig {
    /// The full-scale configuration of a model: 3 blocks of 48 channels.
    pub fn preset(model: Model) -> Self {
        let base = NetworkConfig {
            model,
            blocks: 3,
            channels: 48,
            upscale: 2,
            degrees: [1, 0],
            variant: Variant::A,
            lower_order: LowerOrder::Shared,
            shift: -1,
            placement: Placement::All,
            block: BlockKind::Rb,
            width: 1,
            activation: Activation::Gelu,
            pau_degrees: [7, 6],
            scaler_init: 0.1,
            kernel: 3,
            allow_vanilla: false,
        };
        match model {
            Model::Resnet => NetworkConfig {
                block: BlockKind::Wrb,
                width: 4,
                ..base
            },
            Model::PauNet => NetworkConfig {
                block: BlockKind::Wrb,
                width: 4,
                activation: Activation::Pau,
                ..base
            },
            Model::Selfonn => NetworkConfig {
                degrees: [3, 0],
                activation: Activation::Tanh,
                ..base
            },
            Model::Superonn => NetworkConfig {
                degrees: [3, 0],
                activation: Activation::Tanh,
                shift: 0,
                ..base
            },
            Model::Padenet => NetworkConfig {
                degrees: [2, 1],
                variant: Variant::S,
                shift: 1,
                ..base
            },
        }
    }

    /// Shrinks a configuration to desk scale.
    pub fn toy(mut self) -> Self {
        self.blocks = 1;
        self.channels = 8;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.upscale != 2 && self.upscale != 4 {
            return bad(format!("upscale must be 2 or 4, got {}", self.upscale));
        }
        if self.blocks == 0 || self.channels == 0 {
            return bad("blocks and channels must be positive".into());
        }
        match (self.block, self.width) {
            (BlockKind::Rb, 1) => {}
            (BlockKind::Rb, w) => return bad(format!("a plain residual block has width 1, got {w}")),
            (BlockKind::Wrb, w) if w < 2 => {
                return bad(format!("a wide residual block needs width > 1, got {w}"))
            }
            _ => {}
        }
        if self.variant == Variant::Vanilla && !self.allow_vanilla {
            return bad("vanilla Padé neurons can divide by zero; set allow_vanilla = true to use them".into());
        }
        if !self.scaler_init.is_finite() {
            return bad("scaler_init must be finite".into());
        }
        let [m, n] = self.degrees;
        let name = self.model.label();
        match self.model {
            Model::Resnet | Model::PauNet if self.degrees != [1, 0] => {
                return bad(format!("{name} uses [1/0] convolutions, got [{m}/{n}]"));
            }
            Model::Selfonn | Model::Superonn if n != 0 => {
                return bad(format!("{name} is built from generative neurons (N = 0), got [{m}/{n}]"));
            }
            Model::Selfonn if self.shift >= 0 => {
                return bad("SelfONN has no shifter; use superonn for shifted neurons".into());
            }
            Model::Superonn if self.shift < 0 => {
                return bad("SuperONN needs an active shifter (shift >= 0)".into());
            }
            Model::Padenet if n == 0 => {
                return bad(format!("PadéNet needs a denominator (N >= 1), got [{m}/{n}]"));
            }
            _ => {}
        }
        if self.activation == Activation::Pau {
            let [pm, pn] = self.pau_degrees;
            if pm == 0 {
                return bad(format!("PAU numerator degree must be positive, got [{pm}/{pn}]"));
            }
        }
        self.layer_spec(self.channels, self.channels, true).validate()
    }

    fn layer_spec(&self, in_ch: usize, out_ch: usize, paon: bool) -> PaonSpec {
        let k = self.kernel;
        if !paon {
            return PaonSpec::conv(in_ch, out_ch).with_kernel(k, k);
        }
        PaonSpec::new(self.degrees[0], self.degrees[1], in_ch, out_ch)
            .with_variant(self.variant)
            .with_lower_order(self.lower_order)
            .with_shift(self.shift)
            .with_kernel(k, k)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Act {
    Gelu,
    Tanh,
    Pau(Pau),
}

impl Act {
    fn new(kind: Activation, name: String, degrees: [usize; 2]) -> Self {
        match kind {
            Activation::Gelu => Act::Gelu,
            Activation::Tanh => Act::Tanh,
            Activation::Pau => Act::Pau(Pau::new(name, degrees[0], degrees[1])),
        }
    }

    fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        match self {
            Act::Gelu => Ok(tape.gelu(x)),
            Act::Tanh => Ok(tape.tanh(x)),
            Act::Pau(p) => p.forward(tape, vars, x),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Act::Pau(p) => p.param_count(),
            _ => 0,
        }
    }
}

/// A residual refinement block `y = x + s * L2(act(L1(x)))` with a learnable
/// per-channel scaler `s`.
///
/// With tanh activations the branch output is also passed through tanh
/// before scaling, which bounds the generative neurons of the ONN presets.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    name: String,
    l1: Paon,
    l2: Paon,
    act: Act,
    bounded: bool,
}

impl Block {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> [&Paon; 2] {
        [&self.l1, &self.l2]
    }

    pub fn scaler_name(&self) -> String {
        format!("{}.scaler", self.name)
    }

    /// The residual branch before scaling.
    pub fn branch<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        let h = self.l1.forward(tape, vars, x)?;
        let h = self.act.forward(tape, vars, h)?;
        let h = self.l2.forward(tape, vars, h)?;
        Ok(if self.bounded { tape.tanh(h) } else { h })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        let branch = self.branch(tape, vars, x)?;
        let scaler = vars.get(&self.scaler_name())?;
        let scaled = tape.mul(branch, scaler)?;
        tape.add(x, scaled)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct UpStage {
    conv: Paon,
    act: Act,
}

/// An assembled super-resolution network. Parameters live outside in a
/// [`Params`] table keyed by layer name.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    head: Paon,
    blocks: Vec<Block>,
    body_end: Paon,
    up: Vec<UpStage>,
    tail: Paon,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let conv = |name: &str, i, o| Paon::new(name, config.layer_spec(i, o, false));
        let head = conv("head", 3, c)?;
        let mut blocks = Vec::with_capacity(config.blocks);
        for b in 0..config.blocks {
            let name = format!("blocks.{b}");
            let inner = c * config.width;
            let first = matches!(config.placement, Placement::First | Placement::All);
            let last = matches!(config.placement, Placement::Last | Placement::All);
            blocks.push(Block {
                l1: Paon::new(format!("{name}.l1"), config.layer_spec(c, inner, first))?,
                l2: Paon::new(format!("{name}.l2"), config.layer_spec(inner, c, last))?,
                act: Act::new(config.activation, format!("{name}.act"), config.pau_degrees),
                bounded: config.activation == Activation::Tanh,
                name,
            });
        }
        let body_end = conv("body_end", c, c)?;
        let stages = if config.upscale == 4 { 2 } else { 1 };
        let up = (0..stages)
            .map(|s| {
                Ok(UpStage {
                    conv: conv(&format!("up.{s}.conv"), c, 4 * c)?,
                    act: Act::new(config.activation, format!("up.{s}.act"), config.pau_degrees),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = conv("tail", c, 3)?;
        Ok(Network {
            config,
            head,
            blocks,
            body_end,
            up,
            tail,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// All Padé neuron layers in forward order.
    pub fn layers(&self) -> Vec<&Paon> {
        let mut out = vec![&self.head];
        for b in &self.blocks {
            out.extend(b.layers());
        }
        out.push(&self.body_end);
        out.extend(self.up.iter().map(|s| &s.conv));
        out.push(&self.tail);
        out
    }

    pub fn shifters(&self) -> Vec<(&str, &Shifter)> {
        self.layers()
            .into_iter()
            .filter_map(|l| l.shifter().map(|s| (l.name(), s)))
            .collect()
    }

    /// Parameter counts grouped by layer, activation and scaler, in forward order.
    pub fn layer_counts(&self) -> Vec<(String, usize)> {
        let mut out = vec![(self.head.name().to_string(), self.head.param_count())];
        for b in &self.blocks {
            out.push((b.l1.name().to_string(), b.l1.param_count()));
            if let Act::Pau(p) = &b.act {
                out.push((p.name().to_string(), p.param_count()));
            }
            out.push((b.l2.name().to_string(), b.l2.param_count()));
            out.push((b.scaler_name(), self.config.channels));
        }
        out.push((self.body_end.name().to_string(), self.body_end.param_count()));
        for s in &self.up {
            out.push((s.conv.name().to_string(), s.conv.param_count()));
            if let Act::Pau(p) = &s.act {
                out.push((p.name().to_string(), p.param_count()));
            }
        }
        out.push((self.tail.name().to_string(), self.tail.param_count()));
        out
    }

    pub fn param_count(&self) -> usize {
        let acts: usize = self
            .blocks
            .iter()
            .map(|b| &b.act)
            .chain(self.up.iter().map(|s| &s.act))
            .map(Act::param_count)
            .sum();
        let scalers = self.blocks.len() * self.config.channels;
        self.layers().iter().map(|l| l.param_count()).sum::<usize>() + acts + scalers
    }

    /// Deterministic initial parameters for `seed`.
    pub fn init_params(&self, seed: u64) -> Params<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::new();
        let fit = (self.config.activation == Activation::Pau)
            .then(|| fit_gelu(self.config.pau_degrees[0], self.config.pau_degrees[1]));
        let init_act = |params: &mut Params<f32>, act: &Act| {
            if let (Act::Pau(p), Some(fit)) = (act, &fit) {
                p.init(params, fit).expect("fit degree matches the PAU");
            }
        };
        self.head.init(&mut params, &mut rng);
        for b in &self.blocks {
            b.l1.init(&mut params, &mut rng);
            init_act(&mut params, &b.act);
            b.l2.init(&mut params, &mut rng);
            params.insert(
                b.scaler_name(),
                Tensor::full(Shape::new(1, self.config.channels, 1, 1), self.config.scaler_init as f32),
            );
        }
        self.body_end.init(&mut params, &mut rng);
        for s in &self.up {
            s.conv.init(&mut params, &mut rng);
            init_act(&mut params, &s.act);
        }
        self.tail.init(&mut params, &mut rng);
        params
    }

    /// Maps a batch of RGB images in `[-1, 1]` to their upscaled estimates.
    /// The output is not clamped.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &Bindings, x: Var) -> Result<Var> {
        let c = tape.shape(x).c();
        if c != 3 {
            return Err(Error::Usage(format!("network input must have 3 channels, got {c}")));
        }
        let features = self.head.forward(tape, vars, x)?;
        let mut h = features;
        for b in &self.blocks {
            h = b.forward(tape, vars, h)?;
        }
        h = self.body_end.forward(tape, vars, h)?;
        h = tape.add(h, features)?;
        for s in &self.up {
            h = s.conv.forward(tape, vars, h)?;
            h = s.act.forward(tape, vars, h)?;
            h = tape.pixel_shuffle(h, 2)?;
        }
        self.tail.forward(tape, vars, h)
    }

    /// Inference on a batch with frozen parameters.
    pub fn infer(&self, params: &Params<f32>, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        let mut tape = Tape::new();
        tape.set_check_finite(false);
        let vars = params.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let y = self.forward(&mut tape, &vars, xv)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests;
