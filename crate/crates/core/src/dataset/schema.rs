//! Versioned JSON documents and their canonical serialization.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rle::decode_rle;
use crate::error::{Error, Result};
use crate::evaluation::Detection;
use crate::fisheye::CameraModel;
use crate::geometry::{Point2, SimplePolygon};
use crate::representations::{ClassLabel, InstanceMask};

pub const SCHEMA_VERSION: u32 = 1;

/// Significant digits kept for floats in written documents.
pub const FLOAT_DIGITS: usize = 9;

/// What to do with fields the schema does not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Reject with the field path.
    Strict,
    /// Log a warning and ignore.
    #[default]
    Lenient,
}

/// Documents carrying a `schemaVersion` field.
pub trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

/// Surround-view camera position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CameraView {
    /// Front view.
    FV,
    /// Rear view.
    RV,
    /// Mirror left view.
    MLV,
    /// Mirror right view.
    MRV,
}

impl CameraView {
    pub const ALL: [CameraView; 4] = [
        CameraView::FV,
        CameraView::RV,
        CameraView::MLV,
        CameraView::MRV,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceRecord {
    pub id: u32,
    pub class: ClassLabel,
    /// Column-major run lengths starting with background.
    pub rle: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FrameRecord {
    pub schema_version: u32,
    pub frame_id: String,
    pub camera: CameraView,
    pub image_size: ImageSize,
    pub instances: Vec<InstanceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<Detection>>,
}

impl FrameRecord {
    /// Decodes every instance mask, in record order.
    pub fn instance_masks(&self) -> Result<Vec<InstanceMask>> {
        self.instances
            .iter()
            .map(|inst| {
                let grid = decode_rle(&inst.rle, self.image_size.width, self.image_size.height)
                    .map_err(|e| {
                        Error::Format(format!("frame {} instance {}: {e}", self.frame_id, inst.id))
                    })?;
                InstanceMask::new(grid, inst.class).map_err(|_| {
                    Error::Format(format!(
                        "frame {} instance {} is empty",
                        self.frame_id, inst.id
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::precondition("split fractions must be positive"));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::precondition(format!(
                "split fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

fn default_labels() -> Vec<ClassLabel> {
    ClassLabel::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusManifest {
    pub schema_version: u32,
    /// Which split this manifest lists; absent for a whole corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
    #[serde(default)]
    pub split_fractions: SplitFractions,
    /// Class labels used by the corpus.
    #[serde(default = "default_labels")]
    pub labels: Vec<ClassLabel>,
    /// Frame files relative to the manifest.
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_seed: Option<u64>,
    /// Camera intrinsics file relative to the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionsFile {
    pub schema_version: u32,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CameraFile {
    pub schema_version: u32,
    pub camera: CameraModel,
}

/// A ground region such as a parking spot, in image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegionFile {
    pub schema_version: u32,
    pub vertices: Vec<Point2>,
}

impl RegionFile {
    pub fn polygon(&self) -> Result<SimplePolygon> {
        SimplePolygon::new(self.vertices.clone())
    }
}

versioned!(
    FrameRecord,
    CorpusManifest,
    PredictionsFile,
    CameraFile,
    RegionFile
);

/// Parses a document, reporting unknown fields per `strictness` and type
/// errors with their field path.
pub fn from_json_str<T: DeserializeOwned + Versioned>(
    text: &str,
    strictness: Strictness,
) -> Result<T> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let mut record = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
    let ignored = serde_ignored::Deserializer::new(&mut de, &mut record);
    let value: T = match serde_path_to_error::deserialize(ignored) {
        Ok(v) => v,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(if inner.is_syntax() || inner.is_eof() || inner.is_io() {
                Error::Format(inner.to_string())
            } else {
                Error::Schema {
                    path,
                    message: inner.to_string(),
                }
            });
        }
    };
    de.end().map_err(|e| Error::Format(e.to_string()))?;
    if let Some(path) = unknown.first() {
        match strictness {
            Strictness::Strict => {
                return Err(Error::Schema {
                    path: path.clone(),
                    message: "unknown field".into(),
                })
            }
            Strictness::Lenient => {
                for p in &unknown {
                    log::warn!("ignoring unknown field `{p}`");
                }
            }
        }
    }
    if value.schema_version() != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "schemaVersion".into(),
            message: format!(
                "unsupported version {}, expected {SCHEMA_VERSION}",
                value.schema_version()
            ),
        });
    }
    Ok(value)
}

pub fn load_json<T: DeserializeOwned + Versioned>(
    path: &Path,
    strictness: Strictness,
) -> Result<T> {
    let text = fs::read_to_string(path)?;
    from_json_str(&text, strictness).map_err(|e| match e {
        Error::Schema { path: p, message } => Error::Schema {
            path: p,
            message: format!("{message} (in {})", path.display()),
        },
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", FLOAT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        // serde_json's default map keeps keys sorted
        Value::Object(m) => {
            Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        other => other,
    }
}

/// Pretty JSON with sorted keys, floats rounded to [`FLOAT_DIGITS`]
/// significant digits and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut s =
        serde_json::to_string_pretty(&canonicalize(v)).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}
