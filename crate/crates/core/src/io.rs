//! File formats: float maps, binary graymaps, dataset manifests and reports.
//!
//! Float map layout (little-endian): `b"SMAP"`, `u32` version (1), `u32`
//! width, `u32` height, then `width * height` `f32` values in row-major order
//! with the origin at the top-left.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmDecoder, PnmSubtype, SampleEncoding};
use image::DynamicImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{dataset_sigma, DEFAULT_SIGMA};
use crate::grid::{FixationSet, Frame, GridMap, Point};
use crate::metrics::MetricReport;
use crate::sampling::{DatasetIndex, ImageRecord};

pub const MAP_MAGIC: &[u8; 4] = b"SMAP";
pub const MAP_VERSION: u32 = 1;
pub const MAP_HEADER_LEN: usize = 16;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Serializes a map; values are stored as `f32`.
pub fn encode_map(map: &GridMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAP_HEADER_LEN + 4 * map.len());
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&MAP_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for &v in map.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

/// Parses float-map bytes. `path` is only used in error messages.
pub fn decode_map(bytes: &[u8], path: &Path) -> Result<GridMap> {
    if bytes.len() < 4 || &bytes[..4] != MAP_MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < MAP_HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected: MAP_HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u32_at(bytes, 4);
    if version != MAP_VERSION {
        return Err(Error::SchemaError {
            path: path.to_path_buf(),
            reason: format!("unsupported map version {version}"),
        });
    }
    let (w, h) = (u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize);
    let frame = Frame::new(w, h)?;
    let expected = MAP_HEADER_LEN + 4 * frame.len();
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    let mut values = Vec::with_capacity(frame.len());
    for (index, chunk) in bytes[MAP_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                path: path.to_path_buf(),
                index,
            });
        }
        values.push(f64::from(v));
    }
    GridMap::new(w, h, values)
}

/// Decodes an 8- or 16-bit binary graymap, dividing each code by the
/// header's maximum code value.
pub fn decode_graymap(bytes: &[u8], path: &Path) -> Result<GridMap> {
    let fail = |reason: String| Error::Graymap {
        path: path.to_path_buf(),
        reason,
    };
    let decoder = PnmDecoder::new(Cursor::new(bytes)).map_err(|e| fail(e.to_string()))?;
    let header = decoder.header();
    if header.subtype() != PnmSubtype::Graymap(SampleEncoding::Binary) {
        return Err(fail("only binary graymaps are supported".into()));
    }
    let maxval = header.maximal_sample();
    let img = DynamicImage::from_decoder(decoder).map_err(|e| fail(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    // the decoder stretches codes to the full sample range; undo that exactly
    let (codes, full): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(buf) => (buf.into_raw().into_iter().map(f64::from).collect(), 255.0),
        DynamicImage::ImageLuma16(buf) => (buf.into_raw().into_iter().map(f64::from).collect(), 65535.0),
        _ => return Err(fail("unexpected sample layout".into())),
    };
    let m = f64::from(maxval);
    let values = codes.into_iter().map(|s| (s * m / full).round() / m).collect();
    GridMap::new(w, h, values)
}

/// Reads a float map or a binary graymap, chosen by the leading bytes.
pub fn read_map(path: impl AsRef<Path>) -> Result<GridMap> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.starts_with(b"P5") {
        decode_graymap(&bytes, path)
    } else {
        decode_map(&bytes, path)
    }
}

pub fn write_map(map: &GridMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_map(map))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestImage {
    pub id: String,
    pub fixations: Vec<[i64; 2]>,
}

/// On-disk dataset description. `sigma` falls back to the known-dataset
/// default for `name`, then to the synthetic default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub images: Vec<ManifestImage>,
}

impl DatasetManifest {
    pub fn resolved_sigma(&self) -> f64 {
        self.sigma.or_else(|| dataset_sigma(&self.name)).unwrap_or(DEFAULT_SIGMA)
    }

    pub fn from_dataset(dataset: &DatasetIndex) -> Result<Self> {
        let frame = dataset.frame()?;
        Ok(DatasetManifest {
            name: dataset.name().to_string(),
            width: frame.width,
            height: frame.height,
            sigma: Some(dataset.sigma()),
            images: dataset
                .images()
                .iter()
                .map(|img| ManifestImage {
                    id: img.id.clone(),
                    fixations: img.fixations.iter().map(|p| [p.x as i64, p.y as i64]).collect(),
                })
                .collect(),
        })
    }

    /// Validates the manifest and builds the dataset. `path` is only used in
    /// error messages.
    pub fn into_dataset(self, path: &Path) -> Result<DatasetIndex> {
        let schema = |reason: String| Error::SchemaError {
            path: path.to_path_buf(),
            reason,
        };
        let sigma = self.resolved_sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(schema(format!("sigma must be positive, got {sigma}")));
        }
        let frame = Frame::new(self.width, self.height).map_err(|e| schema(e.to_string()))?;
        if self.images.is_empty() {
            return Err(schema("images list is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut images = Vec::with_capacity(self.images.len());
        for img in self.images {
            if !seen.insert(img.id.clone()) {
                return Err(Error::DuplicateId(img.id));
            }
            if img.fixations.is_empty() {
                return Err(schema(format!("image '{}' has no fixations", img.id)));
            }
            let mut points = Vec::with_capacity(img.fixations.len());
            for [x, y] in img.fixations {
                if x < 0 || y < 0 || x as u64 >= frame.width as u64 || y as u64 >= frame.height as u64 {
                    return Err(Error::OutOfBoundsFixation {
                        id: img.id,
                        x,
                        y,
                        width: frame.width,
                        height: frame.height,
                    });
                }
                points.push(Point::new(x as usize, y as usize));
            }
            images.push(ImageRecord::new(img.id, FixationSet::new(frame, points)?)?);
        }
        DatasetIndex::new(self.name, sigma, images)
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

fn from_json<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::SchemaError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetIndex> {
    from_json::<DatasetManifest>(text.as_bytes(), path)?.into_dataset(path)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetIndex> {
    let path = path.as_ref();
    from_json::<DatasetManifest>(&read_bytes(path)?, path)?.into_dataset(path)
}

pub fn write_manifest(dataset: &DatasetIndex, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &to_json(&DatasetManifest::from_dataset(dataset)?))
}

/// Writes any serializable value as pretty JSON with a trailing newline.
/// Struct fields keep declaration order and maps are sorted, so equal values
/// give identical bytes.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    from_json(&read_bytes(path)?, path)
}

pub fn write_report(report: &MetricReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<MetricReport> {
    read_json(path)
}

/// File name used for an image's map inside a directory.
pub fn map_file_name(id: &str) -> String {
    format!("{id}.smap")
}

/// Locates the prediction for `id` in `dir`: `<id>.smap`, then `<id>.pgm`.
pub fn find_prediction(dir: &Path, id: &str) -> Option<PathBuf> {
    [map_file_name(id), format!("{id}.pgm")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}
