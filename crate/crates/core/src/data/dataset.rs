use std::path::Path;

use super::synth::{textures, TextureSpec};
use super::{load_png, ImageU8};
use crate::error::{Error, Result};

/// One evaluation or training image, with an optional pre-made LR partner.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub name: String,
    pub hr: ImageU8,
    pub lr: Option<ImageU8>,
}

/// Images ordered by file name.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Reads `<root>/HR/*.png`, plus `<root>/LRx{scale}/` partners with the
    /// same file names when that directory exists.
    pub fn load(root: &Path, scale: Option<usize>) -> Result<Self> {
        let hr_dir = root.join("HR");
        if !hr_dir.is_dir() {
            return Err(Error::Usage(format!("dataset {} has no HR directory", root.display())));
        }
        let mut names: Vec<String> = std::fs::read_dir(&hr_dir)
            .map_err(|e| Error::io(&hr_dir, e))?
            .filter_map(|entry| entry.ok())
            .map(|entry| entry.file_name().to_string_lossy().into_owned())
            .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Usage(format!("no PNG images in {}", hr_dir.display())));
        }
        let lr_dir = scale.map(|s| root.join(format!("LRx{s}"))).filter(|d| d.is_dir());
        let samples = names
            .into_iter()
            .map(|name| {
                let hr = load_png(&hr_dir.join(&name))?;
                let lr = match &lr_dir {
                    Some(dir) => Some(load_png(&dir.join(&name))?),
                    None => None,
                };
                Ok(Sample { name, hr, lr })
            })
            .collect::<Result<Vec<_>>>()?;
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| root.display().to_string());
        Ok(Dataset { name, samples })
    }

    pub fn from_images(name: impl Into<String>, images: Vec<(String, ImageU8)>) -> Self {
        Dataset {
            name: name.into(),
            samples: images
                .into_iter()
                .map(|(name, hr)| Sample { name, hr, lr: None })
                .collect(),
        }
    }

    pub fn synthetic(name: impl Into<String>, seed: u64, count: usize, spec: &TextureSpec) -> Self {
        Self::from_images(name, textures(seed, count, spec))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(hr, lr)` for sample `i`: HR cropped to a multiple of `scale`, LR
    /// loaded or produced by bicubic downscaling.
    pub fn pair(&self, i: usize, scale: usize) -> Result<(ImageU8, ImageU8)> {
        let s = &self.samples[i];
        let hr = s.hr.mod_crop(scale)?;
        let lr = match &s.lr {
            Some(lr) => {
                if lr.width() * scale != hr.width() || lr.height() * scale != hr.height() {
                    return Err(Error::Usage(format!(
                        "{}: LR {}x{} does not match HR {}x{} at x{scale}",
                        s.name,
                        lr.width(),
                        lr.height(),
                        hr.width(),
                        hr.height()
                    )));
                }
                lr.clone()
            }
            None => hr.downscale(scale)?,
        };
        Ok((hr, lr))
    }

    /// Writes `<root>/HR/<name>` for every sample.
    pub fn save(&self, root: &Path) -> Result<()> {
        let dir = root.join("HR");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for s in &self.samples {
            super::save_png(&s.hr, &dir.join(&s.name))?;
        }
        Ok(())
    }
}
