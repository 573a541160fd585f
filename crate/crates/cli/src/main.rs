//! `polyrep` command-line front end.

mod commands;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polyrep::dataset::Placement;
use polyrep::evaluation::EvalMode;
use polyrep::representations::RepresentationSpec;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "polyrep",
    version,
    about = "Detection representations, IoU bounds and evaluation for fisheye cameras"
)]
struct Cli {
    /// Reject unknown fields in input files instead of warning.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic fisheye corpus.
    Generate(GenerateArgs),
    /// Mean IoU of each representation against the masks it was fit to.
    UpperBound(UpperBoundArgs),
    /// NMS, matching and per-class AP of predictions against a corpus.
    Eval(EvalArgs),
    /// Convert every corpus mask into predictions of one representation.
    Convert(ConvertArgs),
    /// Finite-difference audit of the loss gradients for all four heads.
    LossCheck(LossCheckArgs),
    /// Free/occupied verdict for a ground region per representation.
    Occupancy(OccupancyArgs),
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    /// camera.json with fisheye intrinsics; defaults to the built-in camera.
    #[arg(long)]
    pub camera: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PlacementArg::NearField)]
    pub placement: PlacementArg,
    #[arg(long, default_value_t = 0.3)]
    pub l_shape_fraction: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum PlacementArg {
    NearField,
    Central,
    Peripheral,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::NearField => Placement::NearField,
            PlacementArg::Central => Placement::Central,
            PlacementArg::Peripheral => Placement::Peripheral,
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UpperBoundArgs {
    /// Corpus directory or manifest.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "12,24,36,60,120")]
    pub points: Vec<usize>,
    /// Also report the ellipse column.
    #[arg(long)]
    pub ellipse: bool,
    /// Sub-cells per mask pixel in the raster IoU.
    #[arg(long, default_value_t = 4)]
    pub supersample: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ModeArg {
    #[value(name = "repVsRep")]
    RepVsRep,
    #[value(name = "repVsInstance")]
    RepVsInstance,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::RepVsRep => EvalMode::RepVsRep,
            ModeArg::RepVsInstance => EvalMode::RepVsInstance,
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalArgs {
    /// Ground-truth corpus directory or manifest.
    #[arg(long)]
    pub truth: PathBuf,
    /// predictions.json
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::RepVsRep)]
    pub mode: ModeArg,
    /// IoU needed for a true positive.
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// NMS IoU threshold; 0 skips suppression.
    #[arg(long, default_value_t = 0.5)]
    pub nms: f64,
    /// Score polygon predictions by their enclosing boxes (rep-vs-rep only).
    #[arg(long)]
    pub polygon_box_mode: bool,
    #[arg(long, default_value_t = 4)]
    pub supersample: usize,
    /// Row label in report.csv; derived from the predictions when absent.
    #[arg(long)]
    pub experiment: Option<String>,
    /// Write overlays/frame-<id>.svg for every frame.
    #[arg(long)]
    pub overlays: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum TargetArg {
    Box,
    Obox,
    Ellipse,
    Polygon,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvertArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub to: TargetArg,
    /// Rays of the polar polygon.
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LossCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Optional directory for report.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OccupancyArgs {
    /// region.json with the ground region in image pixels.
    #[arg(long, required_unless_present = "demo")]
    pub region: Option<PathBuf>,
    /// predictions.json; detections are grouped by representation type.
    #[arg(long, conflicts_with = "corpus")]
    pub pred: Option<PathBuf>,
    /// Corpus whose masks are converted to each representation.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Representations to test: box, obox, ellipse, polygon or pN.
    #[arg(long, value_delimiter = ',', default_value = "box,obox,ellipse,p24", value_parser = parse_rep)]
    #[serde(serialize_with = "serialize_reps")]
    pub reps: Vec<RepresentationSpec>,
    /// Overlap share of the region above which it counts as occupied.
    #[arg(long, default_value_t = 0.01)]
    pub fraction: f64,
    /// Use the built-in two-car parking scene.
    #[arg(long, conflicts_with_all = ["region", "pred", "corpus"])]
    pub demo: bool,
    /// Optional directory for the report (and the demo scene).
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn serialize_reps<S: serde::Serializer>(
    reps: &[RepresentationSpec],
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(reps.iter().map(|r| r.label()))
}

pub fn parse_rep(s: &str) -> Result<RepresentationSpec, String> {
    let lower = s.trim().to_ascii_lowercase();
    match lower.as_str() {
        "box" | "boundingbox" => Ok(RepresentationSpec::BoundingBox),
        "obox" | "rotatedbox" | "rotated" => Ok(RepresentationSpec::RotatedBox),
        "ellipse" => Ok(RepresentationSpec::Ellipse),
        "polygon" => Ok(RepresentationSpec::Polygon { points: 24 }),
        _ => {
            let n: usize = lower
                .strip_prefix('p')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| format!("unknown representation `{s}`"))?;
            if n < 3 {
                return Err(format!("a polygon needs at least 3 points, got {n}"));
            }
            Ok(RepresentationSpec::Polygon { points: n })
        }
    }
}

/// Failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] polyrep::Error),
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use polyrep::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Csv(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(E::Io(_) | E::Precondition(_) | E::LossOfFov(_)) => 2,
            CliError::Core(E::NumericRange(_) | E::OutOfFov { .. }) => 3,
            CliError::Core(_) => 4,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("POLYREP_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "POLYREP_THREADS must be a non-negative integer, got `{v}`"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let strictness = if cli.strict {
        polyrep::dataset::Strictness::Strict
    } else {
        polyrep::dataset::Strictness::Lenient
    };
    match cli.command {
        Command::Generate(a) => commands::generate(a, strictness),
        Command::UpperBound(a) => commands::upper_bound(a, strictness),
        Command::Eval(a) => commands::eval(a, strictness),
        Command::Convert(a) => commands::convert(a, strictness),
        Command::LossCheck(a) => commands::loss_check(a),
        Command::Occupancy(a) => commands::occupancy(a, strictness),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rep_names() {
        assert_eq!(parse_rep("box"), Ok(RepresentationSpec::BoundingBox));
        assert_eq!(
            parse_rep("P36"),
            Ok(RepresentationSpec::Polygon { points: 36 })
        );
        assert!(parse_rep("p2").is_err());
        assert!(parse_rep("hexagon").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(polyrep::Error::UndefinedMap).exit_code(), 3);
        assert_eq!(
            CliError::Core(polyrep::Error::Schema {
                path: "a".into(),
                message: "b".into()
            })
            .exit_code(),
            3
        );
        assert_eq!(
            CliError::Core(polyrep::Error::Precondition("x".into())).exit_code(),
            2
        );
        assert_eq!(CliError::Internal("x".into()).exit_code(), 4);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
