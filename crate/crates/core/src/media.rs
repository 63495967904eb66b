//! Content-addressed images and PNG I/O.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Cursor;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageEncoder, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};

/// Content hash of an image's pixels: 128 bits of SHA-256 over the
/// dimensions and raw RGB bytes, hex encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImageId(String);

impl ImageId {
    pub fn of(img: &RgbImage) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(img.width().to_le_bytes());
        hasher.update(img.height().to_le_bytes());
        hasher.update(img.as_raw());
        let digest = hasher.finalize();
        ImageId(hex::encode(&digest[..16]))
    }

    pub fn from_hex(s: impl Into<String>) -> Result<Self> {
        let s = s.into();
        if s.len() != 32 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(CoreError::MissingImage(format!("malformed image id `{s}`")));
        }
        Ok(ImageId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn file_name(&self) -> String {
        format!("{}.png", self.0)
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ImageId {
    type Error = String;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        ImageId::from_hex(value).map_err(|e| e.to_string())
    }
}

impl From<ImageId> for String {
    fn from(id: ImageId) -> String {
        id.0
    }
}

/// Encodes to PNG with fixed settings so equal pixels give equal bytes.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Sub)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding cannot fail for a well-formed RGB buffer");
    out
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Png).decode()?;
    Ok(img.to_rgb8())
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    fs::write(path, encode_png(img)).map_err(|e| CoreError::io(path, e))
}

pub fn read_png(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode_png(&bytes)
}

/// Places the static view on the left and the wrist view on the right.
pub fn concat_views(static_view: &RgbImage, wrist_view: &RgbImage) -> Result<RgbImage> {
    if static_view.height() != wrist_view.height() {
        return Err(CoreError::ImageSize(format!(
            "static view is {} px high, wrist view {} px",
            static_view.height(),
            wrist_view.height()
        )));
    }
    let (sw, ww, h) = (static_view.width(), wrist_view.width(), static_view.height());
    let mut out = RgbImage::new(sw + ww, h);
    let row_out = ((sw + ww) * 3) as usize;
    let (rs, rw) = ((sw * 3) as usize, (ww * 3) as usize);
    let (src_s, src_w) = (static_view.as_raw(), wrist_view.as_raw());
    for (y, row) in out.chunks_exact_mut(row_out).enumerate() {
        row[..rs].copy_from_slice(&src_s[y * rs..(y + 1) * rs]);
        row[rs..].copy_from_slice(&src_w[y * rw..(y + 1) * rw]);
    }
    Ok(out)
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Deduplicating in-memory image set keyed by content hash.
#[derive(Debug, Clone, Default)]
pub struct MediaStore {
    images: BTreeMap<ImageId, Arc<RgbImage>>,
}

impl MediaStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, img: RgbImage) -> ImageId {
        let id = ImageId::of(&img);
        self.images.entry(id.clone()).or_insert_with(|| Arc::new(img));
        id
    }

    pub fn insert_arc(&mut self, img: Arc<RgbImage>) -> ImageId {
        let id = ImageId::of(&img);
        self.images.entry(id.clone()).or_insert(img);
        id
    }

    pub fn get(&self, id: &ImageId) -> Result<&Arc<RgbImage>> {
        self.images
            .get(id)
            .ok_or_else(|| CoreError::MissingImage(id.to_string()))
    }

    pub fn contains(&self, id: &ImageId) -> bool {
        self.images.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ImageId, &Arc<RgbImage>)> {
        self.images.iter()
    }

    pub fn extend_from(&mut self, other: &MediaStore) {
        for (id, img) in other.iter() {
            self.images.entry(id.clone()).or_insert_with(|| img.clone());
        }
    }

    /// Writes every image as `<dir>/<id>.png`, skipping files already present.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
        for (id, img) in &self.images {
            let path = dir.join(id.file_name());
            if !path.exists() {
                // Unique temp name, so concurrent writers of the same id never
                // expose a partial file.
                let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
                let tmp = dir.join(format!(".{}.{}.{n}.tmp", id.as_str(), std::process::id()));
                write_png(&tmp, img)?;
                fs::rename(&tmp, &path).map_err(|e| CoreError::io(&path, e))?;
            }
        }
        Ok(())
    }

    /// Loads every `<id>.png` from `dir`, verifying each content hash.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut store = MediaStore::new();
        let entries = fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        paths.sort();
        for path in paths {
            let img = read_png(&path)?;
            let id = store.insert(img);
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if stem != id.as_str() {
                return Err(CoreError::ImageSize(format!(
                    "{} does not match its content hash {id}",
                    path.display()
                )));
            }
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn solid(w: u32, h: u32, c: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb(c))
    }

    fn gradient(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| Rgb([x as u8, y as u8, (x * y) as u8]))
    }

    #[test]
    fn concat_dimensions_and_regions() {
        let s = gradient(128, 128);
        let blank = solid(128, 128, [0, 0, 0]);
        let out = concat_views(&s, &blank).unwrap();
        assert_eq!(out.dimensions(), (256, 128));
        for y in 0..128 {
            for x in 0..128 {
                assert_eq!(out.get_pixel(x, y), s.get_pixel(x, y));
                assert_eq!(out.get_pixel(x + 128, y), blank.get_pixel(x, y));
            }
        }
    }

    #[test]
    fn concat_uneven_widths() {
        let out = concat_views(&solid(10, 4, [1, 2, 3]), &solid(3, 4, [9, 9, 9])).unwrap();
        assert_eq!(out.dimensions(), (13, 4));
        assert_eq!(out.get_pixel(9, 3).0, [1, 2, 3]);
        assert_eq!(out.get_pixel(10, 0).0, [9, 9, 9]);
    }

    #[test]
    fn concat_height_mismatch() {
        assert!(concat_views(&solid(8, 8, [0; 3]), &solid(8, 9, [0; 3])).is_err());
    }

    #[test]
    fn png_round_trip_preserves_hash() {
        let img = gradient(37, 21);
        let bytes = encode_png(&img);
        assert_eq!(bytes, encode_png(&img));
        let back = decode_png(&bytes).unwrap();
        assert_eq!(ImageId::of(&back), ImageId::of(&img));
    }

    #[test]
    fn store_dedups_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = MediaStore::new();
        let a = store.insert(gradient(5, 5));
        let b = store.insert(gradient(5, 5));
        assert_eq!(a, b);
        assert_eq!(store.len(), 1);
        store.insert(solid(2, 2, [7, 7, 7]));
        store.write_dir(dir.path()).unwrap();
        let back = MediaStore::read_dir(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(**back.get(&a).unwrap(), gradient(5, 5));
    }

    #[test]
    fn id_depends_on_shape() {
        assert_ne!(ImageId::of(&solid(4, 2, [0; 3])), ImageId::of(&solid(2, 4, [0; 3])));
        assert!(ImageId::from_hex("xyz").is_err());
    }
}
