use std::path::PathBuf;

use pengauge::error::Result;
use pengauge::fouling::{FrameInfo, FrameMasks};
use pengauge::imaging::{self, BinaryMask, PixelClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    /// 0/255 net masks as written by `segment`
    Binary,
    /// class-index masks of the dataset; only cage counts as net
    Labeled,
}

/// Masks read from `<dir>/<id>.png` on demand.
pub struct DirMasks {
    dir: PathBuf,
    kind: MaskKind,
    frames: Vec<FrameInfo>,
}

impl DirMasks {
    pub fn new(dir: PathBuf, kind: MaskKind, frames: Vec<FrameInfo>) -> Self {
        Self { dir, kind, frames }
    }
}

impl FrameMasks for DirMasks {
    fn frames(&self) -> &[FrameInfo] {
        &self.frames
    }

    fn mask(&mut self, index: usize) -> Result<BinaryMask> {
        let path = self.dir.join(format!("{}.png", self.frames[index].id));
        match self.kind {
            MaskKind::Binary => imaging::read_mask(path),
            MaskKind::Labeled => {
                let m = imaging::read_labeled_mask(path)?;
                let bits = m
                    .classes()
                    .iter()
                    .map(|&c| c == PixelClass::Cage)
                    .collect();
                BinaryMask::new(m.width(), m.height(), bits)
            }
        }
    }
}
