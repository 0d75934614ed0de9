//! End-to-end geodesic computation: load, normalize, resample, align,
//! initialize, optimize, write artifacts.

use std::path::{Path, PathBuf};

use crate::config::{InitKind, RunConfig};
use crate::curve::{align_start, normalize_to_unit_square, PolyCurve};
use crate::error::{Error, Result};
use crate::io::{self, CurveFormat, SvgStyle};
use crate::matching::make_matcher;
use crate::optimizer::{self, OptimReport};

/// Source and target ready for optimization: jointly normalized if
/// requested, both resampled at constant speed to `n` nodes, and the target's
/// start node rotated to best match the source.
pub fn prepare_endpoints(source: &PolyCurve, target: &PolyCurve, n: usize, normalize: bool) -> Result<(PolyCurve, PolyCurve)> {
    let (source, target) = if normalize {
        let both = normalize_to_unit_square(&[source.clone(), target.clone()]);
        (both[0].clone(), both[1].clone())
    } else {
        (source.clone(), target.clone())
    };
    let source = source.constant_speed_resample(n)?;
    let target = align_start(&source, &target.constant_speed_resample(n)?)?;
    Ok((source, target))
}

/// Non-fatal observations about the inputs.
pub fn input_warnings(source: &PolyCurve, target: &PolyCurve) -> Vec<String> {
    let mut out = Vec::new();
    if source.signed_area() * target.signed_area() < 0.0 {
        out.push("source and target have opposite orientations; normals disagree and inflate the matching term".into());
    }
    out
}

/// Runs the optimization on already prepared endpoints.
pub fn solve(source: &PolyCurve, target: &PolyCurve, cfg: &RunConfig) -> Result<OptimReport> {
    cfg.validate()?;
    let h0 = match cfg.init {
        InitKind::Constant => optimizer::init_constant(source, cfg.slices)?,
        InitKind::Linear => optimizer::init_linear(source, target, cfg.slices)?,
    };
    let matcher = make_matcher(cfg.matching, target, cfg.kernel)?;
    optimizer::continuation(&h0, &cfg.metric, matcher.as_ref(), &cfg.optimizer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub homotopy: PathBuf,
    pub trace: PathBuf,
    pub svg: PathBuf,
}

impl Artifacts {
    pub fn with_prefix(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self { homotopy: with(".homotopy.json"), trace: with(".trace.csv"), svg: with(".svg") }
    }
}

pub struct GeodesicOutcome {
    pub report: OptimReport,
    pub source: PolyCurve,
    pub target: PolyCurve,
    pub warnings: Vec<String>,
    pub artifacts: Artifacts,
}

/// Requires `source`, `target` and `out` to be set in `cfg`.
pub fn run_geodesic(cfg: &RunConfig) -> Result<GeodesicOutcome> {
    let missing = |what: &str| Error::InvalidConfig(format!("no {what} given"));
    let source_path = cfg.source.as_deref().ok_or_else(|| missing("source curve"))?;
    let target_path = cfg.target.as_deref().ok_or_else(|| missing("target curve"))?;
    let out = cfg.out.as_deref().ok_or_else(|| missing("output prefix"))?;
    cfg.validate()?;

    let source = io::load_curve(source_path, CurveFormat::Auto)?;
    let target = io::load_curve(target_path, CurveFormat::Auto)?;
    let warnings = input_warnings(&source, &target);
    let (source, target) = prepare_endpoints(&source, &target, cfg.nodes, cfg.normalize_to_unit_square)?;
    let report = solve(&source, &target, cfg)?;

    let artifacts = Artifacts::with_prefix(out);
    io::save_homotopy(&report.homotopy, &artifacts.homotopy)?;
    io::save_trace(&report.trace, &artifacts.trace)?;
    std::fs::write(&artifacts.svg, io::render_svg(&report.homotopy, Some(&target), &SvgStyle::default()))?;
    Ok(GeodesicOutcome { report, source, target, warnings, artifacts })
}
