//! File formats, corpus handling and the synthetic scene generator.
//!
//! A corpus directory holds `corpus.json` (the manifest), one
//! `frames/<frameId>.json` per frame and optionally `camera.json`. Every
//! document carries `"schemaVersion": 1`. Masks are stored as column-major
//! run lengths (cell index `x * height + y`) beginning with a background run.

mod corpus;
mod generator;
mod parking;
mod rle;
mod schema;

pub use corpus::{frame_path, split_corpus, split_frames, Corpus, CAMERA_FILE, MANIFEST_FILE};
pub use generator::{
    generate_corpus, generate_scene, GeneratedFrame, GeneratorDiagnostic, Placement, SceneSpec,
};
pub use parking::{parking_scene, ParkingLayout, ParkingScene};
pub use rle::{decode_rle, encode_rle};
pub use schema::{
    from_json_str, load_json, save_json, to_canonical_json, CameraFile, CameraView, CorpusManifest,
    FrameRecord, ImageSize, InstanceRecord, PredictionsFile, RegionFile, SplitFractions, SplitName,
    Strictness, Versioned, FLOAT_DIGITS, SCHEMA_VERSION,
};
