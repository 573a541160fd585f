use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::schema::{
    load_json, save_json, CameraFile, CorpusManifest, FrameRecord, SplitFractions, SplitName,
    Strictness, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::evaluation::FrameTruth;
use crate::fisheye::CameraModel;
use crate::representations::{ClassLabel, InstanceMask};

pub const MANIFEST_FILE: &str = "corpus.json";
pub const CAMERA_FILE: &str = "camera.json";

/// Manifest-relative path of a frame file.
pub fn frame_path(frame_id: &str) -> String {
    format!("frames/{frame_id}.json")
}

/// A manifest with its frames loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub frames: Vec<FrameRecord>,
    pub camera: Option<CameraModel>,
}

impl Corpus {
    pub fn new(
        frames: Vec<FrameRecord>,
        camera: Option<CameraModel>,
        generator_seed: Option<u64>,
    ) -> Result<Self> {
        check_unique(&frames)?;
        let manifest = CorpusManifest {
            schema_version: SCHEMA_VERSION,
            split: None,
            split_fractions: SplitFractions::default(),
            labels: ClassLabel::ALL.to_vec(),
            frames: frames.iter().map(|f| frame_path(&f.frame_id)).collect(),
            generator_seed,
            camera: camera.as_ref().map(|_| CAMERA_FILE.to_string()),
        };
        Ok(Self {
            manifest,
            frames,
            camera,
        })
    }

    /// Loads from a corpus directory or a manifest file.
    pub fn load(path: &Path, strictness: Strictness) -> Result<Self> {
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let base: PathBuf = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let manifest: CorpusManifest = load_json(&manifest_path, strictness)?;
        manifest.split_fractions.validate()?;
        let frames = manifest
            .frames
            .iter()
            .map(|f| load_json::<FrameRecord>(&base.join(f), strictness))
            .collect::<Result<Vec<_>>>()?;
        check_unique(&frames)?;
        for f in &frames {
            if let Some(inst) = f
                .instances
                .iter()
                .find(|i| !manifest.labels.contains(&i.class))
            {
                return Err(Error::Schema {
                    path: format!("instances.{}.class", inst.id),
                    message: format!(
                        "label `{}` not listed in the corpus labels (frame {})",
                        inst.class, f.frame_id
                    ),
                });
            }
        }
        let camera = match &manifest.camera {
            Some(c) => Some(load_json::<CameraFile>(&base.join(c), strictness)?.camera),
            None => None,
        };
        Ok(Self {
            manifest,
            frames,
            camera,
        })
    }

    /// Writes the manifest, frame files and camera file under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if self.manifest.frames.len() != self.frames.len() {
            return Err(Error::precondition("manifest and frame list disagree"));
        }
        save_json(&dir.join(MANIFEST_FILE), &self.manifest)?;
        for (rel, f) in self.manifest.frames.iter().zip(&self.frames) {
            save_json(&dir.join(rel), f)?;
        }
        if let (Some(rel), Some(cam)) = (&self.manifest.camera, &self.camera) {
            save_json(
                &dir.join(rel),
                &CameraFile {
                    schema_version: SCHEMA_VERSION,
                    camera: cam.clone(),
                },
            )?;
        }
        Ok(())
    }

    pub fn instance_count(&self) -> usize {
        self.frames.iter().map(|f| f.instances.len()).sum()
    }

    /// Every instance mask, frame by frame.
    pub fn masks(&self) -> Result<Vec<InstanceMask>> {
        let mut out = Vec::with_capacity(self.instance_count());
        for f in &self.frames {
            out.extend(f.instance_masks()?);
        }
        Ok(out)
    }

    pub fn truths(&self) -> Result<Vec<FrameTruth>> {
        self.frames.iter().map(FrameTruth::from_record).collect()
    }
}

fn check_unique(frames: &[FrameRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for f in frames {
        if !seen.insert(f.frame_id.as_str()) {
            return Err(Error::Format(format!(
                "duplicate frame id `{}`",
                f.frame_id
            )));
        }
    }
    Ok(())
}

/// Seeded shuffle, then contiguous train/val/test blocks sized by largest
/// remainder.
pub fn split_frames<T: Clone>(
    items: &[T],
    fractions: &SplitFractions,
    seed: u64,
) -> Result<[Vec<T>; 3]> {
    fractions.validate()?;
    if items.len() < 3 {
        return Err(Error::precondition(format!(
            "cannot split {} frames three ways",
            items.len()
        )));
    }
    let n = items.len();
    let exact: Vec<f64> = fractions.as_array().iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    // largest remainder first, earlier split on ties
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val_start = counts[0];
    let test_start = val_start + counts[1];
    Ok([
        shuffled[..val_start].to_vec(),
        shuffled[val_start..test_start].to_vec(),
        shuffled[test_start..].to_vec(),
    ])
}

/// Splits a manifest's frame list into train, val and test manifests.
pub fn split_corpus(
    manifest: &CorpusManifest,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<[CorpusManifest; 3]> {
    let parts = split_frames(&manifest.frames, fractions, seed)?;
    let names = [SplitName::Train, SplitName::Val, SplitName::Test];
    let make = |i: usize| CorpusManifest {
        split: Some(names[i]),
        split_fractions: *fractions,
        frames: parts[i].clone(),
        ..manifest.clone()
    };
    Ok([make(0), make(1), make(2)])
}
