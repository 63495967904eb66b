//! Object detections, the crop database and the external crop pool.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use image::{Rgb, RgbImage};
use oevla_core::archive::{frame_path, list_episodes, read_json, read_meta, write_json};
use oevla_core::media::{read_png, write_png};
use oevla_core::{ImageId, MediaStore};
use oevla_sim::{derive_seed, BBox, BlockColor, SceneObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

pub const DETECTIONS_FILE: &str = "detections.json";
pub const CROP_INDEX_FILE: &str = "index.json";
pub const CROP_MEDIA_DIR: &str = "media";
/// Context kept around a detection box when cropping.
pub const CROP_PAD: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: usize,
    pub object: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeDetections {
    pub episode_id: String,
    pub resolution: u32,
    pub boxes: Vec<Detection>,
}

/// Where detection boxes come from.
#[derive(Debug, Clone)]
pub enum DetectionSource {
    /// `detections.json` written next to each simulated episode.
    GroundTruth,
    /// One JSON file mapping episode id to its boxes, for data the simulator
    /// did not produce.
    External(HashMap<String, Vec<Detection>>),
}

impl DetectionSource {
    pub fn load_external(path: &Path) -> Result<Self> {
        Ok(DetectionSource::External(read_json(path)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropProvenance {
    InDomain,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropEntry {
    pub image: ImageId,
    pub provenance: CropProvenance,
    /// Episode and frame, or pool file, the crop came from.
    pub source: String,
}

/// Object name to candidate crops. Pixels live in `media`.
#[derive(Debug, Clone, Default)]
pub struct CropDb {
    index: BTreeMap<String, Vec<CropEntry>>,
    media: MediaStore,
}

#[derive(Serialize, Deserialize)]
struct CropIndexFile {
    objects: BTreeMap<String, Vec<CropEntry>>,
}

impl CropDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, object: &str, img: RgbImage, provenance: CropProvenance, source: String) -> Result<()> {
        if img.width() == 0 || img.height() == 0 {
            return Err(ForgeError::Config(format!("empty crop for {object} from {source}")));
        }
        let image = self.media.insert(img);
        self.index.entry(object.to_string()).or_default().push(CropEntry {
            image,
            provenance,
            source,
        });
        Ok(())
    }

    pub fn entries(&self, object: &str) -> &[CropEntry] {
        self.index.get(object).map_or(&[], Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Total number of indexed crops (not distinct images).
    pub fn len(&self) -> usize {
        self.index.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, id: &ImageId) -> Result<&Arc<RgbImage>> {
        Ok(self.media.get(id)?)
    }

    /// Errors listing every name in `names` without a crop.
    pub fn require<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing: BTreeSet<String> = names
            .into_iter()
            .filter(|n| self.entries(n).is_empty())
            .map(str::to_string)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ForgeError::MissingCrops(missing.into_iter().collect()))
        }
    }

    /// Uniform draw among the crops of `object`.
    pub fn draw(&self, object: &str, rng: &mut impl Rng) -> Result<&CropEntry> {
        let entries = self.entries(object);
        if entries.is_empty() {
            return Err(ForgeError::MissingCrops(vec![object.to_string()]));
        }
        Ok(&entries[rng.gen_range(0..entries.len())])
    }

    /// A copy holding only crops of the given provenance.
    pub fn only(&self, provenance: CropProvenance) -> CropDb {
        let mut out = CropDb::new();
        for (name, entries) in &self.index {
            for e in entries.iter().filter(|e| e.provenance == provenance) {
                let img = self.media.get(&e.image).expect("indexed image present").clone();
                out.media.insert_arc(img);
                out.index.entry(name.clone()).or_default().push(e.clone());
            }
        }
        out
    }

    pub fn merge(&mut self, other: &CropDb) {
        self.media.extend_from(&other.media);
        for (name, entries) in &other.index {
            self.index
                .entry(name.clone())
                .or_default()
                .extend(entries.iter().cloned());
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.media.write_dir(&dir.join(CROP_MEDIA_DIR))?;
        write_json(
            &dir.join(CROP_INDEX_FILE),
            &CropIndexFile {
                objects: self.index.clone(),
            },
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<CropDb> {
        let file: CropIndexFile = read_json(&dir.join(CROP_INDEX_FILE))?;
        let mut media = MediaStore::new();
        for entries in file.objects.values() {
            for e in entries {
                if !media.contains(&e.image) {
                    let path = dir.join(CROP_MEDIA_DIR).join(e.image.file_name());
                    let img = read_png(&path)?;
                    let id = media.insert(img);
                    if id != e.image {
                        return Err(ForgeError::Input {
                            path,
                            message: format!("content hash {id} does not match index entry {}", e.image),
                        });
                    }
                }
            }
        }
        Ok(CropDb {
            index: file.objects,
            media,
        })
    }
}

/// Cuts `bbox` grown by `pad` pixels (clamped to the image) out of `img`.
pub fn crop(img: &RgbImage, bbox: BBox, pad: u32) -> RgbImage {
    let x0 = bbox.x0.saturating_sub(pad);
    let y0 = bbox.y0.saturating_sub(pad);
    let x1 = (bbox.x1 + pad).min(img.width());
    let y1 = (bbox.y1 + pad).min(img.height());
    image::imageops::crop_imm(img, x0, y0, x1 - x0, y1 - y0).to_image()
}

/// Crops every detection out of the archive's static frames.
///
/// Fails if any object mentioned in an annotation ends up without crops.
pub fn build_crop_db(archive: &Path, source: &DetectionSource) -> Result<CropDb> {
    let mut db = CropDb::new();
    let mut mentioned = BTreeSet::new();
    for dir in list_episodes(archive)? {
        let meta = read_meta(&dir)?;
        for slot in &meta.annotation.object_slots {
            mentioned.insert(slot.object.clone());
        }
        let boxes = match source {
            DetectionSource::GroundTruth => {
                let path = dir.join(DETECTIONS_FILE);
                if !path.exists() {
                    continue;
                }
                read_json::<EpisodeDetections>(&path)?.boxes
            }
            DetectionSource::External(map) => map.get(&meta.id).cloned().unwrap_or_default(),
        };
        let mut frames: BTreeMap<usize, RgbImage> = BTreeMap::new();
        for det in boxes {
            if det.frame >= meta.frames.len() {
                return Err(ForgeError::Input {
                    path: dir.clone(),
                    message: format!(
                        "detection for frame {} but episode has {}",
                        det.frame,
                        meta.frames.len()
                    ),
                });
            }
            if let std::collections::btree_map::Entry::Vacant(e) = frames.entry(det.frame) {
                e.insert(read_png(&frame_path(&dir, det.frame, "static"))?);
            }
            let img = &frames[&det.frame];
            if det.bbox.x1 > img.width() || det.bbox.y1 > img.height() || det.bbox.area() == 0 {
                return Err(ForgeError::Input {
                    path: dir.clone(),
                    message: format!("box {:?} for {} outside the frame", det.bbox, det.object),
                });
            }
            db.add(
                &det.object,
                crop(img, det.bbox, CROP_PAD),
                CropProvenance::InDomain,
                format!("{}#{}", meta.id, det.frame),
            )?;
        }
    }
    db.require(mentioned.iter().map(String::as_str))?;
    Ok(db)
}

/// Adds every `<object_name>/<file>.png` under `dir` as an external crop.
pub fn ingest_external(db: &mut CropDb, dir: &Path) -> Result<usize> {
    let io_err = |path: &Path, e: std::io::Error| ForgeError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut objects: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    objects.sort();
    let mut added = 0;
    for obj_dir in objects {
        let name = obj_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let mut files: Vec<_> = std::fs::read_dir(&obj_dir)
            .map_err(|e| io_err(&obj_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        files.sort();
        for f in files {
            let rel = format!("{name}/{}", f.file_name().and_then(|n| n.to_str()).unwrap_or_default());
            db.add(&name, read_png(&f)?, CropProvenance::External, rel)?;
            added += 1;
        }
    }
    Ok(added)
}

fn jitter_color(rng: &mut ChaCha8Rng, c: [u8; 3], amount: i32) -> [u8; 3] {
    c.map(|v| (i32::from(v) + rng.gen_range(-amount..=amount)).clamp(0, 255) as u8)
}

fn fill_rect(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, c: [u8; 3]) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.put_pixel(x, y, Rgb(c));
        }
    }
}

fn fill_disc(img: &mut RgbImage, cx: i64, cy: i64, r: i64, c: [u8; 3]) {
    for y in 0..i64::from(img.height()) {
        for x in 0..i64::from(img.width()) {
            if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                img.put_pixel(x as u32, y as u32, Rgb(c));
            }
        }
    }
}

/// A restyled, off-distribution picture of `obj`: noisy backdrop, varied
/// size, hue and placement.
pub fn pool_image(obj: SceneObject, rng: &mut ChaCha8Rng) -> RgbImage {
    let size = rng.gen_range(24..=48u32);
    let base = [
        rng.gen_range(170..=250u8),
        rng.gen_range(170..=250u8),
        rng.gen_range(170..=250u8),
    ];
    let mut img = RgbImage::from_fn(size, size, |_, _| Rgb(base));
    for p in img.pixels_mut() {
        p.0 = jitter_color(rng, p.0, 18);
    }
    let s = i64::from(size);
    let m = rng.gen_range(s / 8..=s / 4);
    let (lo, hi) = (m as u32, (s - m) as u32);
    match obj {
        SceneObject::Block(color) => {
            let c = jitter_color(rng, color.rgb(), 30);
            if rng.gen_bool(0.5) {
                fill_rect(&mut img, lo, lo, hi, hi, c);
            } else {
                // diamond: the block seen at 45 degrees
                let (cx, r) = (s / 2, s / 2 - m);
                for y in 0..s {
                    for x in 0..s {
                        if (x - cx).abs() + (y - cx).abs() <= r {
                            img.put_pixel(x as u32, y as u32, Rgb(c));
                        }
                    }
                }
            }
        }
        SceneObject::Drawer => {
            fill_rect(&mut img, lo, lo, hi, hi, jitter_color(rng, [150, 100, 60], 25));
            let mid = size / 2;
            fill_rect(&mut img, mid - size / 6, mid - 2, mid + size / 6, mid + 2, [60, 40, 20]);
        }
        SceneObject::Slider => {
            let mid = size / 2;
            fill_rect(&mut img, lo, mid - 1, hi, mid + 2, [120, 120, 120]);
            let k = rng.gen_range(lo..hi.saturating_sub(size / 5).max(lo + 1));
            fill_rect(
                &mut img,
                k,
                mid - size / 8,
                k + size / 5,
                mid + size / 8,
                jitter_color(rng, [30, 30, 110], 25),
            );
        }
        SceneObject::Lightbulb => {
            let r = s / 2 - m;
            fill_disc(&mut img, s / 2, s / 2 - 2, r, jitter_color(rng, [255, 220, 0], 25));
            fill_rect(
                &mut img,
                size / 2 - size / 8,
                (s / 2 + r - 2) as u32,
                size / 2 + size / 8,
                hi + 2,
                [90, 90, 90],
            );
        }
        SceneObject::Led => {
            let r = s / 2 - m;
            fill_disc(&mut img, s / 2, s / 2, r + 2, [30, 30, 30]);
            fill_disc(&mut img, s / 2, s / 2, r, jitter_color(rng, [0, 200, 0], 30));
        }
    }
    img
}

/// Writes `per_object` synthesized pool images per registry object as
/// `<dir>/<object>/<nnn>.png`.
pub fn synthesize_pool(dir: &Path, per_object: usize, seed: u64) -> Result<usize> {
    let mut written = 0;
    for obj in SceneObject::ALL {
        let sub = dir.join(obj.name());
        std::fs::create_dir_all(&sub).map_err(|e| ForgeError::Input {
            path: sub.clone(),
            message: e.to_string(),
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, obj.name(), 0));
        for i in 0..per_object {
            write_png(&sub.join(format!("{i:03}.png")), &pool_image(obj, &mut rng))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Same images as [`synthesize_pool`], built in memory.
pub fn synthesized_pool_db(per_object: usize, seed: u64) -> Result<CropDb> {
    let mut db = CropDb::new();
    for obj in SceneObject::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, obj.name(), 0));
        for i in 0..per_object {
            db.add(
                obj.name(),
                pool_image(obj, &mut rng),
                CropProvenance::External,
                format!("{}/{i:03}.png", obj.name()),
            )?;
        }
    }
    Ok(db)
}

/// Registry names of the three blocks, handy for coverage checks.
pub fn block_names() -> [&'static str; 3] {
    BlockColor::ALL.map(BlockColor::object_name)
}
