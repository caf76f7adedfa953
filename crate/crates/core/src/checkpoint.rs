//! Binary checkpoints: little-endian, fixed layout (see `docs/checkpoint-format.md`).
//!
//! ```text
//! magic        5 bytes  "PAON1"
//! version      u32
//! config_len   u32, then config_len bytes of canonical TOML
//! config_hash  32 bytes, SHA-256 of the config text
//! iteration    u64
//! best_psnr    f64
//! parameters   table
//! optim_step   u64
//! optimizer    table
//! ```
//!
//! A table is `count: u32` followed by `count` entries of
//! `name_len: u32, name bytes (UTF-8), shape: 4 x u32, data: f32 x prod(shape)`.

use std::path::Path;

use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::tensor::{Shape, Tensor};
use crate::training::{OptimState, Snapshot};

pub const MAGIC: &[u8; 5] = b"PAON1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub experiment: Experiment,
    pub snapshot: Snapshot,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let config = self.experiment.canonical();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&self.experiment.hash());
        let s = &self.snapshot;
        out.extend_from_slice(&s.iteration.to_le_bytes());
        out.extend_from_slice(&s.best_val_psnr.to_le_bytes());
        write_table(&mut out, &s.params);
        out.extend_from_slice(&s.optim.step.to_le_bytes());
        write_table(&mut out, &s.optim.slots);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        let magic = r.take(5, "magic")?;
        if magic != MAGIC {
            return Err(r.corrupt("magic", format!("expected {MAGIC:?}, found {magic:?}")));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(r.corrupt("version", format!("unsupported format version {version}")));
        }
        let len = r.u32("config")? as usize;
        let text = std::str::from_utf8(r.take(len, "config")?)
            .map_err(|e| r.corrupt("config", e.to_string()))?
            .to_string();
        let experiment = Experiment::parse(&text).map_err(|e| r.corrupt("config", e.to_string()))?;
        let stored: [u8; 32] = r.take(32, "config")?.try_into().expect("32 bytes");
        if stored != experiment.hash() {
            return Err(r.corrupt("config", "config hash does not match the config text".into()));
        }
        let iteration = r.u64("progress")?;
        let best_val_psnr = f64::from_le_bytes(r.take(8, "progress")?.try_into().expect("8 bytes"));
        let params = r.table("parameters")?;
        let step = r.u64("optimizer")?;
        let slots = r.table("optimizer")?;
        if r.pos != bytes.len() {
            return Err(r.corrupt("trailer", format!("{} unexpected bytes after the optimizer table", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            experiment,
            snapshot: Snapshot {
                params,
                optim: OptimState { step, slots },
                iteration,
                best_val_psnr,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Loads a checkpoint meant to continue `expected`; a different config
    /// is an error unless `force` is set.
    pub fn load_matching(path: &Path, expected: &Experiment, force: bool) -> Result<Self> {
        let ckpt = Self::load(path)?;
        if !force && ckpt.experiment.hash() != expected.hash() {
            return Err(Error::Config(format!(
                "{} was written by a different configuration (use --force to load it anyway)",
                path.display()
            )));
        }
        Ok(ckpt)
    }
}

fn write_table(out: &mut Vec<u8>, params: &Params<f32>) {
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for d in t.shape().0 {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn corrupt(&self, section: &'static str, detail: String) -> Error {
        Error::Checkpoint {
            path: self.path.into(),
            section,
            detail,
        }
    }

    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.corrupt(
                section,
                format!("truncated: needed {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()),
            ));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, section: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().expect("8 bytes")))
    }

    fn table(&mut self, section: &'static str) -> Result<Params<f32>> {
        let count = self.u32(section)?;
        let mut params = Params::new();
        for _ in 0..count {
            let len = self.u32(section)? as usize;
            let name = std::str::from_utf8(self.take(len, section)?)
                .map_err(|e| self.corrupt(section, e.to_string()))?
                .to_string();
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = self.u32(section)? as usize;
            }
            let shape = Shape(dims);
            let numel = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let Some(bytes) = numel.and_then(|n| n.checked_mul(4)) else {
                return Err(self.corrupt(section, format!("{name}: shape {shape} overflows")));
            };
            let raw = self.take(bytes, section)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if params.get(&name).is_some() {
                return Err(self.corrupt(section, format!("duplicate entry {name}")));
            }
            params.insert(name, Tensor::from_vec(shape, data)?);
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Model, Network};
    use crate::training::{Optimizer, OptimizerKind};

    fn sample() -> Checkpoint {
        let experiment = Experiment::preset(Model::Padenet, true);
        let net = Network::new(experiment.network.clone()).unwrap();
        let mut params = net.init_params(4);
        let grads = {
            let mut g = params.clone();
            for (_, t) in g.iter_mut() {
                *t = t.map(|v| v * 0.5 + 1e-3);
            }
            g
        };
        let mut optim = OptimState::default();
        Optimizer::new(OptimizerKind::Adan)
            .step(&mut params, &grads, 1e-3, &mut optim)
            .unwrap();
        Checkpoint {
            experiment,
            snapshot: Snapshot {
                params,
                optim,
                iteration: 17,
                best_val_psnr: 31.25,
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());
        let neg = Checkpoint {
            snapshot: Snapshot {
                best_val_psnr: f64::NEG_INFINITY,
                ..ckpt.snapshot.clone()
            },
            ..ckpt
        };
        assert_eq!(Checkpoint::from_bytes(&neg.to_bytes(), &path).unwrap(), neg);
    }

    #[test]
    fn independent_reader_sees_documented_layout() {
        let ckpt = sample();
        let b = ckpt.to_bytes();
        assert_eq!(&b[..5], b"PAON1");
        assert_eq!(u32::from_le_bytes(b[5..9].try_into().unwrap()), 1);
        let len = u32::from_le_bytes(b[9..13].try_into().unwrap()) as usize;
        let text = std::str::from_utf8(&b[13..13 + len]).unwrap();
        assert!(text.contains("model = \"padenet\""));
        let mut p = 13 + len + 32;
        assert_eq!(u64::from_le_bytes(b[p..p + 8].try_into().unwrap()), 17);
        p += 8;
        assert_eq!(f64::from_le_bytes(b[p..p + 8].try_into().unwrap()), 31.25);
        p += 8;
        let count = u32::from_le_bytes(b[p..p + 4].try_into().unwrap()) as usize;
        assert_eq!(count, ckpt.snapshot.params.len());
        p += 4;
        let name_len = u32::from_le_bytes(b[p..p + 4].try_into().unwrap()) as usize;
        let name = std::str::from_utf8(&b[p + 4..p + 4 + name_len]).unwrap();
        let first = ckpt.snapshot.params.iter().next().unwrap();
        assert_eq!(name, first.0);
        p += 4 + name_len;
        let dims: Vec<usize> = (0..4)
            .map(|i| u32::from_le_bytes(b[p + 4 * i..p + 4 * i + 4].try_into().unwrap()) as usize)
            .collect();
        assert_eq!(dims, first.1.shape().0);
        p += 16;
        assert_eq!(f32::from_le_bytes(b[p..p + 4].try_into().unwrap()), first.1.data()[0]);
    }

    #[test]
    fn corruption_names_the_section() {
        let bytes = sample().to_bytes();
        let path = Path::new("x.ckpt");
        let section = |b: &[u8]| match Checkpoint::from_bytes(b, path) {
            Err(Error::Checkpoint { section, .. }) => section,
            other => panic!("{other:?}"),
        };
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(section(&bad), "magic");
        let mut bad = bytes.clone();
        bad[5] = 9;
        assert_eq!(section(&bad), "version");
        let mut bad = bytes.clone();
        bad[20] ^= 0x20;
        assert_eq!(section(&bad), "config");
        assert_eq!(section(&bytes[..bytes.len() - 3]), "optimizer");
        let len = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        assert_eq!(section(&bytes[..13 + len + 32 + 20]), "parameters");
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(section(&long), "trailer");
    }

    #[test]
    fn mismatched_config_needs_force() {
        let ckpt = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        ckpt.save(&path).unwrap();
        let mut other = ckpt.experiment.clone();
        other.train.iterations = 7;
        assert!(matches!(Checkpoint::load_matching(&path, &other, false), Err(Error::Config(_))));
        assert!(Checkpoint::load_matching(&path, &other, true).is_ok());
        assert!(Checkpoint::load_matching(&path, &ckpt.experiment, false).is_ok());
    }
}
