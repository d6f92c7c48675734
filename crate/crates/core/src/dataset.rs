//! On-disk dataset of labeled frames.
//!
//! ```text
//! <root>/frames/<id>.png   RGB frame (the working crop)
//! <root>/masks/<id>.png    LabeledMask
//! <root>/index.tsv         id  year  location  crop  labeled_pixels
//! ```
//!
//! The index is append-only and every append happens under an exclusive
//! file lock. If an id appears more than once the last line wins.

use std::fs::{self, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::imaging::{self, CropRect, Image, LabeledMask};

pub const INDEX_FILE: &str = "index.tsv";
pub const INDEX_HEADER: &str = "id\tyear\tlocation\tcrop\tlabeled_pixels";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub year: String,
    pub location: String,
    pub crop: CropRect,
    pub labeled_pixels: usize,
}

impl DatasetEntry {
    fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.id, self.year, self.location, self.crop, self.labeled_pixels
        )
    }

    fn parse(line: &str, lineno: usize) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::Parse(format!(
                "{INDEX_FILE}:{lineno}: expected 5 fields, got {}",
                f.len()
            )));
        }
        Ok(Self {
            id: f[0].to_string(),
            year: f[1].to_string(),
            location: f[2].to_string(),
            crop: f[3].parse()?,
            labeled_pixels: f[4]
                .parse()
                .map_err(|e| Error::Parse(format!("{INDEX_FILE}:{lineno}: {e}")))?,
        })
    }
}

/// Source tags recorded with an exported example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleMeta {
    pub id: String,
    pub year: String,
    pub location: String,
    pub crop: CropRect,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !ok {
        return Err(invalid(format!(
            "entry id `{id}` must be non-empty [A-Za-z0-9._-] not starting with '.'"
        )));
    }
    Ok(())
}

fn check_tag(name: &str, v: &str) -> Result<()> {
    if v.is_empty() || v.contains(['\t', '\n', '\r']) {
        return Err(invalid(format!("{name} tag `{v}` must be non-empty without tabs or newlines")));
    }
    Ok(())
}

impl Dataset {
    /// Opens `root`, creating the directory layout if it does not exist.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let ds = Self { root: root.into() };
        fs::create_dir_all(ds.root.join("frames"))?;
        fs::create_dir_all(ds.root.join("masks"))?;
        let index = ds.index_path();
        if !index.exists() {
            let mut f = OpenOptions::new().create(true).append(true).open(&index)?;
            f.lock()?;
            if f.metadata()?.len() == 0 {
                writeln!(f, "{INDEX_HEADER}")?;
            }
        }
        Ok(ds)
    }

    /// Opens an existing dataset without touching the file system.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let ds = Self { root: root.into() };
        if !ds.index_path().is_file() {
            return Err(invalid(format!("no {INDEX_FILE} under {}", ds.root.display())));
        }
        Ok(ds)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join(INDEX_FILE)
    }

    pub fn frame_path(&self, id: &str) -> PathBuf {
        self.root.join("frames").join(format!("{id}.png"))
    }

    pub fn mask_path(&self, id: &str) -> PathBuf {
        self.root.join("masks").join(format!("{id}.png"))
    }

    /// Index entries in file order, one per id (last line wins).
    pub fn entries(&self) -> Result<Vec<DatasetEntry>> {
        parse_index(&fs::read_to_string(self.index_path())?)
    }

    pub fn get(&self, id: &str) -> Result<Option<DatasetEntry>> {
        Ok(self.entries()?.into_iter().find(|e| e.id == id))
    }

    pub fn load(&self, id: &str) -> Result<(Image, LabeledMask)> {
        let img = imaging::read_image(self.frame_path(id))?;
        let mask = imaging::read_labeled_mask(self.mask_path(id))?;
        if img.dims() != mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: img.dims(),
                actual: mask.dims(),
            });
        }
        Ok((img, mask))
    }

    /// Adds a new example; an id that is already indexed is an error.
    pub fn export_example(&self, meta: &ExampleMeta, img: &Image, mask: &LabeledMask) -> Result<DatasetEntry> {
        self.write_example(meta, img, mask, false)
    }

    /// Adds or replaces an example. Re-exporting identical data rewrites
    /// byte-identical files and leaves the index unchanged.
    pub fn upsert_example(&self, meta: &ExampleMeta, img: &Image, mask: &LabeledMask) -> Result<DatasetEntry> {
        self.write_example(meta, img, mask, true)
    }

    fn write_example(
        &self,
        meta: &ExampleMeta,
        img: &Image,
        mask: &LabeledMask,
        replace: bool,
    ) -> Result<DatasetEntry> {
        check_id(&meta.id)?;
        check_tag("year", &meta.year)?;
        check_tag("location", &meta.location)?;
        if img.dims() != mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: img.dims(),
                actual: mask.dims(),
            });
        }
        let labeled = mask.labeled_count();
        if labeled == 0 {
            return Err(invalid(format!("example `{}` has no labeled pixels", meta.id)));
        }
        let entry = DatasetEntry {
            id: meta.id.clone(),
            year: meta.year.clone(),
            location: meta.location.clone(),
            crop: meta.crop,
            labeled_pixels: labeled,
        };

        let mut index = OpenOptions::new().read(true).append(true).open(self.index_path())?;
        index.lock()?;
        let mut text = String::new();
        index.seek(SeekFrom::Start(0))?;
        index.read_to_string(&mut text)?;
        let existing = parse_index(&text)?.into_iter().find(|e| e.id == entry.id);
        if existing.is_some() && !replace {
            return Err(Error::DuplicateEntry(entry.id));
        }
        imaging::write_image(self.frame_path(&entry.id), img)?;
        imaging::write_labeled_mask(self.mask_path(&entry.id), mask)?;
        if existing.as_ref() != Some(&entry) {
            if !text.is_empty() && !text.ends_with('\n') {
                writeln!(index)?;
            }
            writeln!(index, "{}", entry.to_line())?;
            index.sync_all()?;
        }
        Ok(entry)
    }
}

fn parse_index(text: &str) -> Result<Vec<DatasetEntry>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == INDEX_HEADER => {}
        Some((_, h)) => return Err(Error::Parse(format!("{INDEX_FILE}: unexpected header `{h}`"))),
        None => return Ok(Vec::new()),
    }
    let mut out: Vec<DatasetEntry> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let e = DatasetEntry::parse(line, i + 1)?;
        match out.iter_mut().find(|o| o.id == e.id) {
            Some(o) => *o = e,
            None => out.push(e),
        }
    }
    Ok(out)
}
