use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use spinradar::eval::{kitti_drift, DriftReport, Trajectory};
use spinradar::plot::{line_chart, Series};

use crate::common::{load_config, read_trajectory, require_file, require_path, OutDir};
use crate::error::{config_err, CliResult};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Estimated trajectories, each compared against `truth`.
    pub estimates: Vec<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// KITTI-style drift of estimated trajectories against ground truth.
#[derive(Debug, Args)]
pub struct EvalArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimated trajectory CSV; repeat to compare several.
    #[arg(long = "estimate")]
    estimates: Vec<PathBuf>,
    /// Ground-truth trajectory CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl EvalArgs {
    pub fn resolve(&self) -> CliResult<EvalConfig> {
        let mut cfg: EvalConfig = load_config(self.config.as_deref())?;
        if !self.estimates.is_empty() {
            cfg.estimates = self.estimates.clone();
        }
        if let Some(t) = &self.truth {
            cfg.truth = Some(t.clone());
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        if cfg.estimates.is_empty() {
            return Err(config_err("no estimate given: pass --estimate"));
        }
        require_path(&cfg.truth, "ground truth", "--truth")?;
        require_path(&cfg.output, "output directory", "--out")?;
        Ok(cfg)
    }
}

/// Row of `drift.csv`. `scope` is `all`, `length` or `speed`; `key` is the
/// subsequence length (m) or the lower edge of the speed bucket (m/s).
#[derive(Serialize)]
struct DriftRow<'a> {
    estimate: &'a str,
    scope: &'static str,
    key: f64,
    translational_error_pct: f64,
    rotational_error_deg_per_m: f64,
    segments: usize,
}

fn drift_rows<'a>(label: &'a str, r: &DriftReport) -> Vec<DriftRow<'a>> {
    let row = |scope, key, t, rot, segments| DriftRow {
        estimate: label,
        scope,
        key,
        translational_error_pct: t,
        rotational_error_deg_per_m: rot,
        segments,
    };
    let mut rows = vec![row("all", 0.0, r.translational_error_pct, r.rotational_error_deg_per_m, r.segments)];
    rows.extend(
        r.per_length
            .iter()
            .map(|l| row("length", l.length, l.translational_error_pct, l.rotational_error_deg_per_m, l.segments)),
    );
    rows.extend(
        r.per_speed
            .iter()
            .map(|s| row("speed", s.speed, s.translational_error_pct, s.rotational_error_deg_per_m, s.segments)),
    );
    rows
}

fn label_of(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) if stem == "trajectory" => dir.to_string_lossy().into_owned(),
        _ => stem,
    }
}

fn path_xy(t: &Trajectory) -> Vec<(f64, f64)> {
    t.poses().iter().map(|p| (p.translation().x, p.translation().y)).collect()
}

#[derive(Serialize)]
struct Reports<'a> {
    reports: Vec<Labelled<'a>>,
}

#[derive(Serialize)]
struct Labelled<'a> {
    estimate: &'a str,
    #[serde(flatten)]
    report: &'a DriftReport,
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let truth_path = require_path(&cfg.truth, "ground truth", "--truth")?;
    require_file(&truth_path)?;
    for p in &cfg.estimates {
        require_file(p)?;
    }
    let out = OutDir::create(&require_path(&cfg.output, "output directory", "--out")?)?;

    let truth = read_trajectory(&truth_path)?;
    let labels: Vec<String> = cfg.estimates.iter().map(|p| label_of(p)).collect();
    let estimates: Vec<Trajectory> = cfg.estimates.iter().map(|p| read_trajectory(p)).collect::<CliResult<_>>()?;
    let reports: Vec<DriftReport> =
        estimates.iter().map(|e| kitti_drift(e, &truth)).collect::<spinradar::Result<_>>()?;
    for (label, r) in labels.iter().zip(&reports) {
        match &r.notice {
            Some(n) => log::warn!("{label}: {n}"),
            None => log::info!(
                "{label}: {:.3} % and {:.5} deg/m over {} segments",
                r.translational_error_pct,
                r.rotational_error_deg_per_m,
                r.segments
            ),
        }
    }

    out.write_rows("drift.csv", labels.iter().zip(&reports).flat_map(|(l, r)| drift_rows(l, r)))?;
    let doc = Reports {
        reports: labels.iter().zip(&reports).map(|(l, r)| Labelled { estimate: l, report: r }).collect(),
    };
    out.write("drift.toml", toml::to_string(&doc).map_err(config_err)?)?;

    let mut paths = vec![Series { label: "truth", points: path_xy(&truth) }];
    paths.extend(labels.iter().zip(&estimates).map(|(l, e)| Series { label: l, points: path_xy(e) }));
    out.write("trajectory.svg", line_chart("Trajectory", "x (m)", "y (m)", &paths))?;
    let per_length: Vec<Series> = labels
        .iter()
        .zip(&reports)
        .map(|(l, r)| Series {
            label: l,
            points: r.per_length.iter().map(|d| (d.length, d.translational_error_pct)).collect(),
        })
        .collect();
    out.write(
        "drift_length.svg",
        line_chart("Translational drift", "path length (m)", "error (%)", &per_length),
    )?;
    let per_speed: Vec<Series> = labels
        .iter()
        .zip(&reports)
        .map(|(l, r)| Series {
            label: l,
            points: r.per_speed.iter().map(|d| (d.speed, d.translational_error_pct)).collect(),
        })
        .collect();
    out.write("drift_speed.svg", line_chart("Translational drift", "speed (m/s)", "error (%)", &per_speed))?;
    out.write_manifest("eval", &cfg)
}
