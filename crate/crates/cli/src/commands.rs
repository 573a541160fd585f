use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use polyrep::dataset::{
    generate_corpus, load_json, parking_scene, save_json, CameraFile, Corpus, ParkingLayout,
    PredictionsFile, RegionFile, SceneSpec, Strictness, SCHEMA_VERSION,
};
use polyrep::evaluation::{
    evaluate, nms, region_overlap_fraction, upper_bound_study, Detection, EvalConfig, EvalMode,
    Occupancy, OccupancyConfig,
};
use polyrep::fisheye::CameraModel;
use polyrep::losses::audit::gradient_audit;
use polyrep::losses::{Head, LossConfig};
use polyrep::representations::{
    convert_mask, ClassLabel, InstanceMask, IouConfig, Representation, RepresentationKind,
    RepresentationSpec,
};
use polyrep::SimplePolygon;
use serde::Serialize;
use serde_json::json;

use crate::overlay::frame_svg;
use crate::{
    CliError, ConvertArgs, EvalArgs, GenerateArgs, LossCheckArgs, OccupancyArgs, TargetArg,
    UpperBoundArgs,
};

pub const ECHO_FILE: &str = "config-echo.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

fn resolve_input(p: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(p).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", p.display())))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

/// Writes the resolved arguments next to the outputs. The output directory
/// itself is left out so that runs into different directories echo alike.
fn write_echo<A: Serialize>(dir: &Path, command: &str, args: &A) -> Result<(), CliError> {
    let echo = json!({
        "schemaVersion": SCHEMA_VERSION,
        "command": command,
        "args": serde_json::to_value(args).map_err(|e| CliError::Internal(e.to_string()))?,
    });
    save_json(&dir.join(ECHO_FILE), &echo)?;
    Ok(())
}

fn load_corpus(path: &Path, strictness: Strictness) -> Result<Corpus, CliError> {
    Ok(Corpus::load(path, strictness)?)
}

pub fn generate(mut a: GenerateArgs, strictness: Strictness) -> Result<(), CliError> {
    if a.frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    if let Some(c) = &a.camera {
        a.camera = Some(resolve_input(c)?);
    }
    let cam = match &a.camera {
        Some(c) => load_json::<CameraFile>(c, strictness)?.camera,
        None => CameraModel::default(),
    };
    let spec = SceneSpec {
        seed: a.seed,
        placement: a.placement.into(),
        l_shape_fraction: a.l_shape_fraction,
        ..SceneSpec::default()
    };
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    prepare_out(&a.out)?;
    let (corpus, diagnostics) = generate_corpus(&spec, &cam, a.frames)?;
    corpus.save(&a.out)?;
    if !diagnostics.is_empty() {
        save_json(&a.out.join("diagnostics.json"), &diagnostics)?;
    }
    write_echo(&a.out, "generate", &a)?;
    println!(
        "generated {} frames with {} instances ({} dropped) in {}",
        corpus.frames.len(),
        corpus.instance_count(),
        diagnostics.len(),
        a.out.display()
    );
    Ok(())
}

pub fn upper_bound(mut a: UpperBoundArgs, strictness: Strictness) -> Result<(), CliError> {
    a.corpus = resolve_input(&a.corpus)?;
    if let Some(p) = a.points.iter().find(|p| **p < 3) {
        return Err(CliError::Usage(format!(
            "a polygon needs at least 3 points, got {p}"
        )));
    }
    if a.supersample == 0 {
        return Err(CliError::Usage("--supersample must be positive".into()));
    }
    let corpus = load_corpus(&a.corpus, strictness)?;
    let masks = corpus.masks()?;
    if masks.is_empty() {
        return Err(CliError::Data(format!(
            "corpus {} holds no instances",
            a.corpus.display()
        )));
    }
    let mut specs = vec![
        RepresentationSpec::BoundingBox,
        RepresentationSpec::RotatedBox,
    ];
    if a.ellipse {
        specs.push(RepresentationSpec::Ellipse);
    }
    specs.extend(
        a.points
            .iter()
            .map(|&p| RepresentationSpec::Polygon { points: p }),
    );
    let cfg = IouConfig {
        supersample: a.supersample,
        ..IouConfig::default()
    };
    let table = upper_bound_study(&masks, &specs, &cfg)?;
    prepare_out(&a.out)?;

    let labels = table.labels();
    let mut w = csv::Writer::from_path(a.out.join(REPORT_CSV))?;
    let mut header = vec!["Representation".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    let mut row = vec!["MeanIoU".to_string()];
    row.extend(table.mean_iou.iter().map(|v| format!("{v:.6}")));
    w.write_record(&row)?;
    w.flush()?;

    let report = json!({
        "schemaVersion": SCHEMA_VERSION,
        "corpus": {
            "frames": corpus.frames.len(),
            "instances": table.instances,
            "generatorSeed": corpus.manifest.generator_seed,
        },
        "columns": labels.iter().zip(&table.mean_iou).map(|(l, v)| json!({"representation": l, "meanIoU": v})).collect::<Vec<_>>(),
    });
    save_json(&a.out.join(REPORT_JSON), &report)?;
    write_echo(&a.out, "upper-bound", &a)?;

    println!("{}", header.join("\t"));
    println!("{}", row.join("\t"));
    Ok(())
}

fn experiment_name(dets: &[Detection], mode: EvalMode) -> String {
    let mut kinds: Vec<RepresentationKind> = dets.iter().map(|d| d.representation.kind()).collect();
    kinds.sort_by_key(|k| k.as_str());
    kinds.dedup();
    let kind = match kinds.as_slice() {
        [] => "none".to_string(),
        [k] => k.as_str().to_string(),
        _ => "mixed".to_string(),
    };
    let mode = match mode {
        EvalMode::RepVsRep => "repVsRep",
        EvalMode::RepVsInstance => "repVsInstance",
    };
    format!("{kind} {mode}")
}

pub fn eval(mut a: EvalArgs, strictness: Strictness) -> Result<(), CliError> {
    a.truth = resolve_input(&a.truth)?;
    a.pred = resolve_input(&a.pred)?;
    if !(a.nms == 0.0 || (a.nms > 0.0 && a.nms < 1.0)) {
        return Err(CliError::Usage(format!(
            "--nms {} outside (0, 1); use 0 to disable",
            a.nms
        )));
    }
    let cfg = EvalConfig {
        iou_threshold: a.iou,
        mode: a.mode.into(),
        supersample: a.supersample,
        polygon_box_mode: a.polygon_box_mode,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = load_corpus(&a.truth, strictness)?;
    let preds: PredictionsFile = load_json(&a.pred, strictness)?;
    let truths = corpus.truths()?;

    let mut by_frame: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for d in &preds.detections {
        by_frame
            .entry(d.frame_id.clone())
            .or_default()
            .push(d.clone());
    }
    let mut kept = Vec::with_capacity(preds.detections.len());
    for dets in by_frame.values() {
        if a.nms > 0.0 {
            kept.extend(nms(dets, a.nms)?);
        } else {
            kept.extend(dets.iter().cloned());
        }
    }
    let report = evaluate(&kept, &truths, &cfg)?;
    prepare_out(&a.out)?;
    let experiment = a
        .experiment
        .clone()
        .unwrap_or_else(|| experiment_name(&preds.detections, cfg.mode));

    let mut w = csv::Writer::from_path(a.out.join(REPORT_CSV))?;
    w.write_record(["Experiment", "Vehicle", "Pedestrian", "mAP"])?;
    let ap = |c: ClassLabel| {
        report
            .per_class_ap
            .get(&c)
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default()
    };
    let row = [
        experiment.clone(),
        ap(ClassLabel::Vehicle),
        ap(ClassLabel::Pedestrian),
        format!("{:.6}", report.map),
    ];
    w.write_record(&row)?;
    w.flush()?;
    save_json(
        &a.out.join(REPORT_JSON),
        &json!({
            "schemaVersion": SCHEMA_VERSION,
            "experiment": experiment,
            "detectionsAfterNms": kept.len(),
            "report": report,
        }),
    )?;

    if a.overlays {
        let dir = a.out.join("overlays");
        prepare_out(&dir)?;
        for (frame, truth) in corpus.frames.iter().zip(&truths) {
            let masks: Vec<&InstanceMask> = truth.objects.iter().map(|g| &g.mask).collect();
            let dets: Vec<&Detection> = kept
                .iter()
                .filter(|d| d.frame_id == frame.frame_id)
                .collect();
            let svg = frame_svg(frame, &masks, &dets, &report.matches);
            fs::write(dir.join(format!("frame-{}.svg", frame.frame_id)), svg)?;
        }
    }
    write_echo(&a.out, "eval", &a)?;
    println!("Experiment\tVehicle\tPedestrian\tmAP");
    println!("{}", row.join("\t"));
    Ok(())
}

pub fn convert(mut a: ConvertArgs, strictness: Strictness) -> Result<(), CliError> {
    a.corpus = resolve_input(&a.corpus)?;
    let spec = match a.to {
        TargetArg::Box => RepresentationSpec::BoundingBox,
        TargetArg::Obox => RepresentationSpec::RotatedBox,
        TargetArg::Ellipse => RepresentationSpec::Ellipse,
        TargetArg::Polygon => {
            if a.points < 3 {
                return Err(CliError::Usage(format!(
                    "--points must be at least 3, got {}",
                    a.points
                )));
            }
            RepresentationSpec::Polygon { points: a.points }
        }
    };
    let corpus = load_corpus(&a.corpus, strictness)?;
    let mut detections = Vec::with_capacity(corpus.instance_count());
    for frame in &corpus.frames {
        for (inst, mask) in frame.instances.iter().zip(frame.instance_masks()?) {
            let rep = convert_mask(&mask, spec)?;
            detections.push(Detection::new(
                inst.id as u64,
                frame.frame_id.clone(),
                inst.class,
                1.0,
                rep,
            )?);
        }
    }
    prepare_out(&a.out)?;
    let n = detections.len();
    save_json(
        &a.out.join("predictions.json"),
        &PredictionsFile {
            schema_version: SCHEMA_VERSION,
            detections,
        },
    )?;
    write_echo(&a.out, "convert", &a)?;
    println!(
        "wrote {n} {} predictions to {}",
        spec.label(),
        a.out.join("predictions.json").display()
    );
    Ok(())
}

pub fn loss_check(a: LossCheckArgs) -> Result<(), CliError> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let cfg = LossConfig::default();
    let mut reports = Vec::new();
    for head in Head::ALL {
        let r = gradient_audit(a.seed, a.trials, head, &cfg)?;
        println!(
            "{:<8} {:>4} trials {:>6} partials  max rel err {:.3e}  {}  worst: {}",
            head.as_str(),
            r.trials,
            r.partials_checked,
            r.max_relative_error,
            if r.passed() { "PASS" } else { "FAIL" },
            r.worst
        );
        reports.push(r);
    }
    if let Some(out) = &a.out {
        prepare_out(out)?;
        save_json(
            &out.join(REPORT_JSON),
            &json!({"schemaVersion": SCHEMA_VERSION, "heads": reports}),
        )?;
        write_echo(out, "loss-check", &a)?;
    }
    let worst = reports
        .iter()
        .map(|r| r.max_relative_error)
        .fold(0.0f64, f64::max);
    if reports.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(CliError::Internal(format!(
            "gradient audit failed: max relative error {worst:.3e}"
        )))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OccupancyRow {
    representation: String,
    occupancy: Occupancy,
    max_overlap: f64,
    detections: usize,
}

fn kind_matches(spec: RepresentationSpec, rep: &Representation) -> bool {
    spec.kind() == rep.kind()
}

pub fn occupancy(mut a: OccupancyArgs, strictness: Strictness) -> Result<(), CliError> {
    if !(a.fraction >= 0.0 && a.fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "--fraction {} outside [0, 1)",
            a.fraction
        )));
    }
    let cfg = OccupancyConfig {
        fraction: a.fraction,
        ..OccupancyConfig::default()
    };
    enum Source {
        Masks(Vec<InstanceMask>),
        Detections(Vec<Detection>),
    }
    let (region, source): (SimplePolygon, Source) = if a.demo {
        let cam = CameraModel::default();
        let scene = parking_scene(&ParkingLayout::default(), &cam)?;
        if let Some(out) = &a.out {
            prepare_out(out)?;
            Corpus::new(vec![scene.record.clone()], Some(cam), None)?.save(&out.join("scene"))?;
            save_json(
                &out.join("scene").join("region.json"),
                &RegionFile {
                    schema_version: SCHEMA_VERSION,
                    vertices: scene.gap.vertices().to_vec(),
                },
            )?;
        }
        (scene.gap, Source::Masks(scene.cars))
    } else {
        let region_path = resolve_input(a.region.as_ref().expect("clap requires --region"))?;
        a.region = Some(region_path.clone());
        let region = load_json::<RegionFile>(&region_path, strictness)?.polygon()?;
        let source = match (&a.pred, &a.corpus) {
            (Some(p), None) => {
                let p = resolve_input(p)?;
                a.pred = Some(p.clone());
                Source::Detections(load_json::<PredictionsFile>(&p, strictness)?.detections)
            }
            (None, Some(c)) => {
                let c = resolve_input(c)?;
                a.corpus = Some(c.clone());
                Source::Masks(load_corpus(&c, strictness)?.masks()?)
            }
            _ => {
                return Err(CliError::Usage(
                    "give exactly one of --pred or --corpus".into(),
                ))
            }
        };
        (region, source)
    };

    let mut rows = Vec::new();
    for &spec in &a.reps {
        let reps: Vec<Representation> = match &source {
            Source::Masks(masks) => masks
                .iter()
                .map(|m| convert_mask(m, spec))
                .collect::<polyrep::Result<_>>()?,
            Source::Detections(dets) => dets
                .iter()
                .filter(|d| kind_matches(spec, &d.representation))
                .map(|d| d.representation.clone())
                .collect(),
        };
        let mut max_overlap = 0.0f64;
        for r in &reps {
            max_overlap = max_overlap.max(region_overlap_fraction(&region, r, &cfg)?);
        }
        rows.push(OccupancyRow {
            representation: spec.label(),
            occupancy: if max_overlap > cfg.fraction {
                Occupancy::Occupied
            } else {
                Occupancy::Free
            },
            max_overlap,
            detections: reps.len(),
        });
    }

    println!(
        "{:<14} {:<10} {:>11}",
        "Representation", "Occupancy", "MaxOverlap"
    );
    for r in &rows {
        let verdict = match r.occupancy {
            Occupancy::Free => "free",
            Occupancy::Occupied => "occupied",
        };
        println!(
            "{:<14} {:<10} {:>11.6}",
            r.representation, verdict, r.max_overlap
        );
    }
    if let Some(out) = &a.out {
        prepare_out(out)?;
        let mut w = csv::Writer::from_path(out.join(REPORT_CSV))?;
        w.write_record(["Representation", "Occupancy", "MaxOverlap"])?;
        for r in &rows {
            let verdict = match r.occupancy {
                Occupancy::Free => "free",
                Occupancy::Occupied => "occupied",
            };
            w.write_record([
                r.representation.clone(),
                verdict.to_string(),
                format!("{:.6}", r.max_overlap),
            ])?;
        }
        w.flush()?;
        save_json(
            &out.join(REPORT_JSON),
            &json!({"schemaVersion": SCHEMA_VERSION, "fraction": cfg.fraction, "rows": rows}),
        )?;
        write_echo(out, "occupancy", &a)?;
    }
    Ok(())
}
