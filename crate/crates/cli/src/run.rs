use std::path::{Path as FsPath, PathBuf};

use isofol::detector::{kernel_at, rank_scan_with_reports, KernelMode, RankMap};
use isofol::family::{Eq11Family, ParameterFamily};
use isofol::fuchsian::{FuchsianSystem, SystemJson};
use isofol::linalg::{c, det, max_principal_angle, trace};
use isofol::monodromy::{monodromy_tuple, product_defect, trace_invariants, TupleJson};
use isofol::paths::{canonical_generators, Path};
use isofol::sampling::{seeded_samples, Domain};
use isofol::schlesinger::{isomonodromy_drift_report, PolePath};
use isofol::torus::{
    analytic_kernel, first_integrals, translation_monodromy, TorusFamily, TorusFoliation,
};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{load, DetectConfig, FamilyName, MonodromyConfig, Motion, SchlesingerConfig, TorusCheckConfig};
use crate::{Mode, RunArgs};

/// Principal-angle bound for agreement between detector and closed form.
const AGREEMENT_ANGLE: f64 = 1e-6;

#[derive(Debug, Serialize)]
pub struct Settings {
    input: String,
    rel_tol: f64,
    fd_step: f64,
    rank_eps: f64,
    samples: usize,
    seed: u64,
    mode: KernelMode,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub status: &'static str,
    pub error: Option<String>,
    pub settings: Settings,
    pub result: Value,
}

pub struct Outcome {
    pub report: Report,
    pub csv: Option<Vec<Vec<String>>>,
}

fn kernel_mode(m: Mode) -> KernelMode {
    match m {
        Mode::Framed => KernelMode::Framed,
        Mode::Class => KernelMode::Class,
    }
}

/// Runs one command. `Err` is a configuration error; numerical failures come
/// back as an outcome whose report carries the error.
pub fn execute(command: &str, args: &RunArgs) -> Result<Outcome, String> {
    let (result, error, csv) = match command {
        "monodromy" => monodromy(args)?,
        "schlesinger" => schlesinger(args)?,
        "detect" => detect(args)?,
        "torus-check" => torus_check(args)?,
        other => return Err(format!("unknown command {other}")),
    };
    Ok(Outcome {
        report: Report {
            command: command.to_string(),
            status: if error.is_none() { "ok" } else { "failed" },
            error,
            settings: Settings {
                input: args.input.display().to_string(),
                rel_tol: args.rel_tol,
                fd_step: args.fd_step,
                rank_eps: args.rank_eps,
                samples: args.samples,
                seed: args.seed,
                mode: kernel_mode(args.mode),
            },
            result,
        },
        csv,
    })
}

type Computed = (Value, Option<String>, Option<Vec<Vec<String>>>);

fn config_err(e: isofol::Error) -> String {
    e.to_string()
}

fn monodromy(args: &RunArgs) -> Result<Computed, String> {
    let cfg: MonodromyConfig = load(&args.input)?;
    let system = FuchsianSystem::try_from(cfg.system).map_err(config_err)?;
    let b = c(cfg.basepoint[0], cfg.basepoint[1]);
    let loops = canonical_generators(b, system.poles(), cfg.radius_factor).map_err(config_err)?;
    let mut result = json!({
        "basepoint": cfg.basepoint,
        "order": loops.order,
        "inside_hull": loops.inside_hull,
    });
    let tuple = match monodromy_tuple(&system, &loops, args.rel_tol) {
        Ok(t) => t,
        Err(e) => return Ok((result, Some(e.to_string()), None)),
    };
    result["tuple"] = json!(TupleJson::from(&tuple));
    result["trace_invariants"] = json!(trace_invariants(&tuple).map_err(config_err)?);
    match product_defect(&tuple, &system, &loops, args.rel_tol) {
        Ok(d) => result["product_defect"] = json!(d),
        Err(e) => return Ok((result, Some(e.to_string()), None)),
    }
    Ok((result, None, None))
}

fn schlesinger(args: &RunArgs) -> Result<Computed, String> {
    let cfg: SchlesingerConfig = load(&args.input)?;
    let system = FuchsianSystem::try_from(cfg.system).map_err(config_err)?;
    let motion = match cfg.motion {
        Motion::Segment { pole, displacement } => {
            if pole >= system.len() {
                return Err(format!("pole index {pole} out of range"));
            }
            let mut paths: Vec<Path> = system.poles().iter().map(|&u| Path::point(u)).collect();
            let u = system.poles()[pole];
            paths[pole] = Path::segment(u, u + c(displacement[0], displacement[1]));
            PolePath::new(paths, cfg.collision_margin)
        }
        Motion::Paths { paths } => PolePath::new(paths, cfg.collision_margin),
    }
    .map_err(config_err)?;
    if motion.len() != system.len() {
        return Err(format!("{} pole paths for {} poles", motion.len(), system.len()));
    }
    for (k, (p, u)) in motion.positions(0.0).iter().zip(system.poles()).enumerate() {
        if (p - u).norm() > 1e-12 {
            return Err(format!("path {k} does not start at pole {k}"));
        }
    }
    let result = match isomonodromy_drift_report(&system, &motion, args.rel_tol) {
        Ok(r) => json!({
            "flowed_system": SystemJson::from(&r.system),
            "drift": r.drift,
            "class_distance_converged": r.converged,
            "basepoint": [r.basepoint.re, r.basepoint.im],
            "initial_tuple": TupleJson::from(&r.initial),
            "flowed_tuple": TupleJson::from(&r.flowed),
            "flow_stats": r.flow_stats,
            "residue_invariants": residue_invariants(&system, &r.system),
        }),
        Err(e) => return Ok((json!({"initial_system": SystemJson::from(&system)}), Some(e.to_string()), None)),
    };
    Ok((result, None, None))
}

/// Trace and determinant of every residue before and after.
fn residue_invariants(before: &FuchsianSystem, after: &FuchsianSystem) -> Value {
    let pairs = |s: &FuchsianSystem| -> Vec<[[f64; 2]; 2]> {
        s.residues()
            .iter()
            .map(|m| {
                let (t, d) = (trace(m), det(m));
                [[t.re, t.im], [d.re, d.im]]
            })
            .collect()
    };
    json!({ "initial": pairs(before), "flowed": pairs(after) })
}

fn sample_domain(
    boxes: Option<&Vec<[f64; 2]>>,
    dimension: usize,
    admissible: impl Fn(&[f64]) -> bool,
    args: &RunArgs,
) -> Result<Result<Vec<Vec<f64>>, isofol::Error>, String> {
    if args.samples == 0 {
        return Ok(Ok(Vec::new()));
    }
    let boxes = boxes.ok_or("--samples needs a \"domain\" in the configuration")?;
    if boxes.len() != dimension {
        return Err(format!("domain has {} boxes, family has {dimension} coordinates", boxes.len()));
    }
    let domain = Domain::new(boxes.clone()).map_err(config_err)?;
    Ok(seeded_samples(&domain, admissible, args.samples, args.seed))
}

fn scan_result(
    family: &dyn ParameterFamily,
    points: &[Vec<f64>],
    args: &RunArgs,
    mode: KernelMode,
) -> (Value, Option<String>, Option<Vec<Vec<String>>>) {
    match rank_scan_with_reports(family, points, mode, args.fd_step, args.rank_eps) {
        Ok((map, reports)) => {
            let summary = scan_summary(&map, family.dimension(), &reports);
            let csv = map.csv_rows();
            (json!({ "summary": summary, "reports": reports, "scan": map }), None, Some(csv))
        }
        Err(e) => (json!({ "points": points }), Some(e.to_string()), None),
    }
}

fn scan_summary(map: &RankMap, q: usize, reports: &[Option<isofol::detector::KernelReport>]) -> Value {
    json!({
        "generic_rank": map.generic_rank,
        "generic_kernel_dimension": q - map.generic_rank,
        "drops": map.drops,
        "failures": map.failures,
        "complex_structure": reports.iter().flatten().all(|r| r.complex_structure),
        "min_gap_ratio": reports.iter().flatten().map(|r| r.gap_ratio).filter(|g| g.is_finite()).reduce(f64::min),
    })
}

fn detect(args: &RunArgs) -> Result<Computed, String> {
    let cfg: DetectConfig = load(&args.input)?;
    let mode = kernel_mode(args.mode);
    let eq11;
    let family: &dyn ParameterFamily = match cfg.family {
        FamilyName::Eq11 => {
            eq11 = Eq11Family::new(c(cfg.basepoint[0], cfg.basepoint[1]), args.rel_tol);
            &eq11
        }
        FamilyName::Torus => &TorusFamily,
    };
    let q = family.dimension();
    for (k, p) in cfg.points.iter().enumerate() {
        if p.len() != q {
            return Err(format!("point {k} has {} coordinates, family has {q}", p.len()));
        }
    }
    let sep = cfg.min_separation;
    let b = c(cfg.basepoint[0], cfg.basepoint[1]);
    let admissible = |t: &[f64]| {
        family.admissible(t)
            && match cfg.family {
                FamilyName::Eq11 => {
                    let (_, u) = Eq11Family::split(t);
                    (0..3).all(|i| (u[i] - b).norm() >= sep && (i + 1..3).all(|j| (u[i] - u[j]).norm() >= sep))
                }
                FamilyName::Torus => TorusFamily::foliation(t).and_then(|f| first_integrals(&f)).is_ok(),
            }
    };
    let mut points = cfg.points.clone();
    match sample_domain(cfg.domain.as_ref(), q, admissible, args)? {
        Ok(s) => points.extend(s),
        Err(e) => return Ok((json!({ "points": points }), Some(e.to_string()), None)),
    }
    if points.is_empty() {
        return Err("no points: give \"points\" or --samples with a \"domain\"".into());
    }
    let (mut result, error, csv) = scan_result(family, &points, args, mode);
    result["family"] = json!(cfg.family_label());
    result["coordinate_names"] = json!(family.coordinate_names());
    Ok((result, error, csv))
}

impl DetectConfig {
    fn family_label(&self) -> &'static str {
        match self.family {
            FamilyName::Eq11 => "eq11",
            FamilyName::Torus => "torus",
        }
    }
}

fn torus_check(args: &RunArgs) -> Result<Computed, String> {
    let cfg: TorusCheckConfig = load(&args.input)?;
    let torus = TorusFoliation::try_from(cfg.torus).map_err(config_err)?;
    let m = translation_monodromy(&torus);
    let pair = |z: &Complex64| [z.re, z.im];
    let mut result = json!({
        "translations": m.tuple.translations().unwrap_or_default().iter().map(pair).collect::<Vec<_>>(),
        "at_infinity": m.at_infinity,
    });
    match first_integrals(&torus) {
        Ok(f) => result["first_integrals"] = json!(f.iter().map(pair).collect::<Vec<_>>()),
        Err(e) => return Ok((result, Some(e.to_string()), None)),
    }
    if m.at_infinity {
        result["note"] = json!("slope at infinity: detector comparison needs the finite chart");
        return Ok((result, None, None));
    }
    let tau = TorusFamily::point(&torus).map_err(config_err)?;
    let comparison = (|| -> isofol::Result<Value> {
        let analytic = analytic_kernel(&torus)?;
        let class = kernel_at(&TorusFamily, &tau, KernelMode::Class, args.fd_step, args.rank_eps)?;
        let framed = kernel_at(&TorusFamily, &tau, KernelMode::Framed, args.fd_step, args.rank_eps)?;
        let angle = max_principal_angle(&class.basis_matrix(), &analytic);
        Ok(json!({
            "analytic_kernel_dimension": analytic.ncols(),
            "class_kernel_dimension": class.kernel_dimension(),
            "framed_kernel_dimension": framed.kernel_dimension(),
            "max_principal_angle": angle,
            "agrees": angle < AGREEMENT_ANGLE,
            "class_kernel": class,
        }))
    })();
    match comparison {
        Ok(v) => result["comparison"] = v,
        Err(e) => return Ok((result, Some(e.to_string()), None)),
    }
    let admissible =
        |t: &[f64]| TorusFamily.admissible(t) && TorusFamily::foliation(t).and_then(|f| first_integrals(&f)).is_ok();
    let default_box = vec![[-1.0, 1.0]; TorusFamily::DIMENSION];
    let boxes = cfg.domain.unwrap_or(default_box);
    let samples = match sample_domain(Some(&boxes), TorusFamily::DIMENSION, admissible, args)? {
        Ok(s) => s,
        Err(e) => return Ok((result, Some(e.to_string()), None)),
    };
    if samples.is_empty() {
        return Ok((result, None, None));
    }
    let (scan, error, csv) = scan_result(&TorusFamily, &samples, args, KernelMode::Class);
    result["scan"] = scan;
    Ok((result, error, csv))
}

fn paths(prefix: &FsPath) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".report.json"), with(".scan.csv"))
}

pub fn write_outputs(prefix: &FsPath, outcome: &Outcome) -> Result<(), String> {
    let (report_path, csv_path) = paths(prefix);
    if let Some(dir) = report_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(&outcome.report).map_err(|e| e.to_string())?;
    text.push('\n');
    std::fs::write(&report_path, text).map_err(|e| format!("cannot write {}: {e}", report_path.display()))?;
    if let Some(rows) = &outcome.csv {
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;
        for row in rows {
            w.write_record(row).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())?;
    }
    Ok(())
}
