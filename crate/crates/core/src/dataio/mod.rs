//! File formats: tensors, PGM/PPM images, dataset manifests, and the
//! descriptor cache used when loading a dataset.

mod pnm;
mod tensor;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featmap::{warp, Extractor, ExtractorSpec, ScaleSet};
use crate::pipeline::Dataset;
use crate::spp::{descriptor_length, spp_pool, PyramidSpec};

pub use pnm::{decode_pnm, encode_pnm, read_pnm, write_pnm};
pub use tensor::{decode_tensor, encode_tensor, header_len, read_tensor, write_tensor, Tensor, DTYPE_F32, MAGIC};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// 1-based line number in the manifest.
    pub line: usize,
    pub path: PathBuf,
    pub class: String,
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Class names in order of first appearance.
    pub classes: Vec<String>,
}

impl Manifest {
    pub fn class_index(&self, entry: &ManifestEntry) -> usize {
        self.classes
            .iter()
            .position(|c| *c == entry.class)
            .expect("class recorded at parse time")
    }
}

/// Parses `path<TAB>class[<TAB>id]` records. Paths are relative to the
/// manifest's directory and must exist.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let bad = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut entries = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.starts_with('#') || raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(bad(
                line,
                format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let (rel, class) = (fields[0].trim(), fields[1].trim());
        if rel.is_empty() || class.is_empty() {
            return Err(bad(line, "empty path or class name".into()));
        }
        let full = base.join(rel);
        if !full.is_file() {
            return Err(bad(line, format!("image {} does not exist", full.display())));
        }
        if !classes.iter().any(|c| c == class) {
            classes.push(class.to_string());
        }
        entries.push(ManifestEntry {
            line,
            path: full,
            class: class.to_string(),
            id: fields.get(2).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
        });
    }
    if entries.is_empty() {
        return Err(bad(0, "manifest lists no images".into()));
    }
    Ok(Manifest {
        path: path.to_path_buf(),
        entries,
        classes,
    })
}

/// Everything that determines the descriptors of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub scales: ScaleSet,
    pub extractor: ExtractorSpec,
    pub pyramid: PyramidSpec,
    pub cache_dir: Option<PathBuf>,
}

impl LoadSpec {
    /// Every scale must yield a feature map at least as wide as the finest
    /// pyramid level.
    pub fn validate(&self) -> Result<()> {
        self.extractor.validate()?;
        for &side in self.scales.sides() {
            let a = self
                .extractor
                .output_side(side)
                .map_err(|e| Error::config(format!("scale {side}: {e}")))?;
            if a < self.pyramid.max_level() {
                return Err(Error::config(format!(
                    "scale {side}: feature map side {a} is smaller than pyramid level {}",
                    self.pyramid.max_level()
                )));
            }
        }
        Ok(())
    }

    pub fn descriptor_length(&self) -> usize {
        descriptor_length(self.extractor.output_channels(), &self.pyramid)
    }

    fn cache_key(&self, image_bytes: &[u8], scale: usize) -> String {
        let mut h = Sha256::new();
        h.update(b"msmkl-descriptor-v1");
        h.update((image_bytes.len() as u64).to_le_bytes());
        h.update(image_bytes);
        h.update((scale as u64).to_le_bytes());
        h.update(self.extractor.seed.to_le_bytes());
        h.update((self.extractor.input_channels as u64).to_le_bytes());
        for l in &self.extractor.layers {
            for v in [l.filters, l.size, l.stride, l.pool] {
                h.update((v as u64).to_le_bytes());
            }
        }
        for &n in self.pyramid.levels() {
            h.update((n as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// (sample, scale) pairs computed from pixels.
    pub extracted: usize,
    /// (sample, scale) pairs served from the cache.
    pub cache_hits: usize,
}

/// Warps every manifest image to each scale, extracts a feature map and
/// pools it. Descriptors are cached by content hash when a cache directory
/// is configured.
pub fn load_dataset(manifest: &Path, spec: &LoadSpec) -> Result<(Dataset, LoadStats)> {
    spec.validate()?;
    let manifest = read_manifest(manifest)?;
    if let Some(dir) = &spec.cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let extractor = Extractor::new(&spec.extractor)?;
    let length = spec.descriptor_length();
    let extracted = AtomicUsize::new(0);
    let hits = AtomicUsize::new(0);

    let per_sample: Vec<Vec<Vec<f32>>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let at_line = |e: Error| Error::Manifest {
                path: manifest.path.clone(),
                line: entry.line,
                message: e.to_string(),
            };
            let bytes = std::fs::read(&entry.path).map_err(|e| at_line(Error::io(&entry.path, e)))?;
            let mut image = None;
            spec.scales
                .sides()
                .iter()
                .map(|&side| {
                    let cache_path = spec
                        .cache_dir
                        .as_ref()
                        .map(|d| d.join(format!("{}.msft", spec.cache_key(&bytes, side))));
                    if let Some(path) = cache_path.as_ref().filter(|p| p.is_file()) {
                        let cached = read_cached(path, length)?;
                        hits.fetch_add(1, Ordering::Relaxed);
                        return Ok(cached);
                    }
                    if image.is_none() {
                        image = Some(decode_pnm(&bytes).map_err(at_line)?);
                    }
                    let warped = warp(image.as_ref().expect("decoded"), side)?;
                    let map = extractor
                        .extract(&warped)
                        .map_err(|e| e.context(format!("scale {side}")))?;
                    let desc = spp_pool(&map, &spec.pyramid, side)?;
                    extracted.fetch_add(1, Ordering::Relaxed);
                    if let Some(path) = &cache_path {
                        write_tensor(path, &[length as u32], &desc.values)?;
                    }
                    Ok(desc.values)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let labels = manifest.entries.iter().map(|e| manifest.class_index(e)).collect();
    let ids = manifest
        .entries
        .iter()
        .map(|e| e.id.clone().unwrap_or_else(|| e.path.display().to_string()))
        .collect();
    let mut blocks: Vec<Vec<Vec<f32>>> = vec![Vec::with_capacity(per_sample.len()); spec.scales.len()];
    for sample in per_sample {
        for (block, desc) in blocks.iter_mut().zip(sample) {
            block.push(desc);
        }
    }
    let dataset = Dataset::new(manifest.classes.clone(), labels, spec.scales.sides().to_vec(), blocks)?.with_ids(ids);
    let stats = LoadStats {
        extracted: extracted.into_inner(),
        cache_hits: hits.into_inner(),
    };
    Ok((dataset, stats))
}

fn read_cached(path: &Path, length: usize) -> Result<Vec<f32>> {
    let invalid = |message: String| Error::CacheInvalid {
        path: path.to_path_buf(),
        message,
    };
    let t = read_tensor(path).map_err(|e| invalid(e.to_string()))?;
    if t.dims != [length as u32] {
        return Err(invalid(format!("dims {:?}, expected [{length}]", t.dims)));
    }
    Ok(t.values)
}

pub fn write_text_atomic(path: &Path, contents: &str) -> Result<()> {
    tensor::write_atomic(path, contents.as_bytes())
}

/// Writes one rank-2 `N x L` descriptor tensor per scale as
/// `descriptors_<scale>.msft`.
pub fn write_descriptor_blocks(dir: &Path, dataset: &Dataset) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (s, &scale) in dataset.scales().iter().enumerate() {
        let block = dataset.block(s);
        let len = block.first().map_or(0, Vec::len);
        let flat: Vec<f32> = block.iter().flatten().copied().collect();
        let path = dir.join(format!("descriptors_{scale}.msft"));
        write_tensor(&path, &[block.len() as u32, len as u32], &flat)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads rank-2 descriptor tensors, keyed by file stem.
pub fn read_descriptor_blocks(paths: &[PathBuf]) -> Result<Vec<(String, Vec<Vec<f32>>)>> {
    let mut seen = HashMap::new();
    paths
        .iter()
        .map(|p| {
            let rows = read_tensor(p)?.rows()?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if seen.insert(stem.clone(), ()).is_some() {
                return Err(Error::invalid(format!("duplicate descriptor file {stem}")));
            }
            Ok((stem, rows))
        })
        .collect()
}
