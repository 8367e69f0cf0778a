use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use spinradar::estimation::{MeasurementNoise, RansacConfig};
use spinradar::eval::{evaluate_localization, LocalizationReport};
use spinradar::features::{DescribedKeypoints, DescriptorKind};
use spinradar::pipeline::{extract_features, localize_pair, match_scans, scan_velocity, Estimator, FrontEndConfig};
use spinradar::plot::histogram_chart;
use spinradar::scan::{PolarScan, ScanFormat};
use spinradar::sim::derive_seed;
use spinradar::{par, BodyVelocity, Pose};

use crate::common::{
    default_format, list_scans, load_config, load_scans, read_trajectory, read_velocities, require_path,
    require_seed, OutDir, Timer,
};
use crate::error::{config_err, CliError, CliResult};

/// Where the per-scan velocities used for compensation come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VelocitySource {
    /// Doppler-aware motion-compensated RANSAC against the next scan of the
    /// same directory.
    #[default]
    Estimate,
    /// `velocities.csv` next to the scans.
    Truth,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub seed: Option<u64>,
    /// Map scans; the k-th is paired with the k-th query scan.
    pub map: Option<PathBuf>,
    pub query: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: ScanFormat,
    pub output: Option<PathBuf>,
    pub estimators: Vec<Estimator>,
    pub velocity: VelocitySource,
    /// Front end for velocity estimation; localization matching uses the
    /// same settings with radial statistics descriptors.
    pub front_end: FrontEndConfig,
    pub ransac: RansacConfig,
    pub noise: MeasurementNoise,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            seed: None,
            map: None,
            query: None,
            format: default_format(),
            output: None,
            estimators: vec![Estimator::McDoppler],
            velocity: VelocitySource::default(),
            front_end: FrontEndConfig::default(),
            ransac: RansacConfig::default(),
            noise: MeasurementNoise::default(),
        }
    }
}

/// Localize query scans against map scans taken on another pass.
#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of map scans.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Directory of query scans, paired with the map scans in name order.
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long)]
    format: Option<ScanFormat>,
    /// Estimator to run; repeat to compare several.
    #[arg(long = "estimator")]
    estimators: Vec<Estimator>,
    #[arg(long, value_enum)]
    velocity: Option<VelocitySource>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl LocalizeArgs {
    pub fn resolve(&self) -> CliResult<LocalizeConfig> {
        let mut cfg: LocalizeConfig = load_config(self.config.as_deref())?;
        cfg.seed = self.seed.or(cfg.seed);
        if let Some(p) = &self.map {
            cfg.map = Some(p.clone());
        }
        if let Some(p) = &self.query {
            cfg.query = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if !self.estimators.is_empty() {
            cfg.estimators = self.estimators.clone();
        }
        if let Some(v) = self.velocity {
            cfg.velocity = v;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        require_seed(cfg.seed)?;
        require_path(&cfg.map, "map directory", "--map")?;
        require_path(&cfg.query, "query directory", "--query")?;
        require_path(&cfg.output, "output directory", "--out")?;
        if cfg.estimators.is_empty() {
            return Err(config_err("no estimators selected"));
        }
        cfg.ransac.validate().map_err(config_err)?;
        cfg.noise.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

/// One pass: its scans and, when needed, their velocities.
struct Pass {
    scans: Vec<PolarScan>,
    velocities: Vec<Option<BodyVelocity>>,
    truth: Option<Vec<Pose>>,
}

/// A file written by `simulate` beside the scan directory, or inside it.
fn side_file(dir: &Path, name: &str) -> Option<PathBuf> {
    [Some(dir), dir.parent()].into_iter().flatten().map(|d| d.join(name)).find(|p| p.is_file())
}

fn truth_velocities(dir: &Path, n: usize) -> CliResult<Vec<Option<BodyVelocity>>> {
    let path = side_file(dir, "velocities.csv")
        .ok_or_else(|| CliError::Data(format!("no velocities.csv in or beside {}", dir.display())))?;
    let rows = read_velocities(&path)?;
    if rows.len() != n {
        return Err(CliError::Data(format!(
            "{} has {} velocities for {n} scans",
            dir.display(),
            rows.len()
        )));
    }
    Ok(rows.iter().map(|r| Some(r.velocity())).collect())
}

/// Velocity of each scan from its matches with the next one (the last scan
/// reuses the pair before it).
fn estimated_velocities(scans: &[PolarScan], cfg: &LocalizeConfig, stream: u64) -> CliResult<Vec<Option<BodyVelocity>>> {
    if scans.len() < 2 {
        return Err(CliError::Data("estimating velocities needs at least two scans per directory".into()));
    }
    let fe = FrontEndConfig { descriptor: DescriptorKind::Binary, ..cfg.front_end.clone() };
    let features: Vec<DescribedKeypoints> =
        par::map(scans, |s| extract_features(s, &fe)).into_iter().collect::<Result<_, _>>()?;
    let seed = derive_seed(require_seed(cfg.seed)?, stream);
    let pairs = par::map_range(scans.len() - 1, |k| {
        let times = (scans[k].reference_time(), scans[k + 1].reference_time());
        let ransac = RansacConfig { seed: derive_seed(seed, k as u64), ..cfg.ransac.clone() };
        let beta = scans[k].config().beta;
        match_scans(&features[k], &features[k + 1], times, &fe)
            .and_then(|m| scan_velocity(&m, true, &ransac, &cfg.noise, beta))
            .map_err(|e| log::warn!("velocity of scan {k}: {e}"))
            .ok()
    });
    let mut v = pairs.clone();
    v.push(*pairs.last().expect("at least one pair"));
    Ok(v)
}

fn load_pass(dir: &Path, cfg: &LocalizeConfig, stream: u64) -> CliResult<Pass> {
    let scans = load_scans(&list_scans(dir, cfg.format)?, cfg.format)?;
    let needs_velocity = cfg.estimators.iter().any(|e| *e != Estimator::Rigid);
    let velocities = match (needs_velocity, cfg.velocity) {
        (false, _) => vec![None; scans.len()],
        (true, VelocitySource::Truth) => truth_velocities(dir, scans.len())?,
        (true, VelocitySource::Estimate) => estimated_velocities(&scans, cfg, stream)?,
    };
    let truth = if let Some(truth_file) = side_file(dir, "truth.csv") {
        let t = read_trajectory(&truth_file)?;
        if t.len() != scans.len() {
            return Err(CliError::Data(format!("{} does not have one pose per scan", truth_file.display())));
        }
        Some(t.poses().to_vec())
    } else {
        None
    };
    Ok(Pass { scans, velocities, truth })
}

#[derive(Serialize)]
struct PoseRow<'a> {
    pair: usize,
    map_time: f64,
    query_time: f64,
    matches: usize,
    inliers: usize,
    failure: &'a str,
    r00: f64,
    r01: f64,
    r02: f64,
    tx: f64,
    r10: f64,
    r11: f64,
    r12: f64,
    ty: f64,
    r20: f64,
    r21: f64,
    r22: f64,
    tz: f64,
}

struct Outcome {
    matches: usize,
    result: Result<(Pose, usize), String>,
}

impl Outcome {
    fn row(&self, pair: usize, map_time: f64, query_time: f64) -> PoseRow<'_> {
        let (pose, inliers, failure) = match &self.result {
            Ok((p, n)) => (*p, *n, ""),
            Err(e) => (Pose::identity(), 0, e.as_str()),
        };
        let m = pose.to_row_major_3x4();
        PoseRow {
            pair,
            map_time,
            query_time,
            matches: self.matches,
            inliers,
            failure,
            r00: m[0],
            r01: m[1],
            r02: m[2],
            tx: m[3],
            r10: m[4],
            r11: m[5],
            r12: m[6],
            ty: m[7],
            r20: m[8],
            r21: m[9],
            r22: m[10],
            tz: m[11],
        }
    }
}

#[derive(Serialize)]
struct ErrorRow {
    pair: usize,
    translation: f64,
    rotation_deg: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    estimator: String,
    pairs: usize,
    failures: usize,
    median_translation: Option<f64>,
    median_rotation_deg: Option<f64>,
}

pub fn run(args: &LocalizeArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let seed = require_seed(cfg.seed)?;
    let map_dir = require_path(&cfg.map, "map directory", "--map")?;
    let query_dir = require_path(&cfg.query, "query directory", "--query")?;
    let out = OutDir::create(&require_path(&cfg.output, "output directory", "--out")?)?;
    let mut timer = Timer::default();

    let map = timer.time("map pass", || load_pass(&map_dir, &cfg, 1))?;
    let query = timer.time("query pass", || load_pass(&query_dir, &cfg, 2))?;
    if map.scans.len() != query.scans.len() {
        return Err(CliError::Data(format!(
            "unpaired inputs: {} map scans but {} query scans",
            map.scans.len(),
            query.scans.len()
        )));
    }
    let n = map.scans.len();

    let fe = FrontEndConfig { descriptor: DescriptorKind::Rsd, ..cfg.front_end.clone() };
    let (map_f, query_f) = timer.time("features", || -> CliResult<_> {
        let describe = |s: &PolarScan| extract_features(s, &fe);
        let m: Vec<DescribedKeypoints> = par::map(&map.scans, describe).into_iter().collect::<Result<_, _>>()?;
        let q: Vec<DescribedKeypoints> = par::map(&query.scans, describe).into_iter().collect::<Result<_, _>>()?;
        Ok((m, q))
    })?;
    let times: Vec<(f64, f64)> =
        (0..n).map(|k| (map.scans[k].reference_time(), query.scans[k].reference_time())).collect();
    let matches = timer.time("matching", || {
        par::map_range(n, |k| match_scans(&map_f[k], &query_f[k], times[k], &fe).map_err(|e| e.to_string()))
    });
    let truth: Option<Vec<Pose>> = match (&map.truth, &query.truth) {
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(m, q)| m.inverse() * *q).collect()),
        _ => None,
    };

    let mut summary = Vec::new();
    let mut any_success = false;
    for &estimator in &cfg.estimators {
        let name = estimator.name();
        let outcomes: Vec<Outcome> = timer.time(&format!("localize {name}"), || {
            par::map_range(n, |k| {
                let m = match &matches[k] {
                    Ok(m) => m,
                    Err(e) => return Outcome { matches: 0, result: Err(e.clone()) },
                };
                let ransac = RansacConfig { seed: derive_seed(derive_seed(seed, 3), k as u64), ..cfg.ransac.clone() };
                let beta = map.scans[k].config().beta;
                let velocities = match (estimator, map.velocities[k], query.velocities[k]) {
                    (Estimator::Rigid, _, _) => Ok((BodyVelocity::zero(), BodyVelocity::zero())),
                    (_, Some(a), Some(b)) => Ok((a, b)),
                    _ => Err("no velocity for this pair".to_string()),
                };
                let result = velocities.and_then(|(v1, v2)| {
                    localize_pair(m, &v1, &v2, estimator, &ransac, beta)
                        .map(|est| (est.transform, est.inlier_count()))
                        .map_err(|e| e.to_string())
                });
                Outcome { matches: m.len(), result }
            })
        });
        let failures = outcomes.iter().filter(|o| o.result.is_err()).count();
        any_success |= failures < n;
        out.write_rows(
            &format!("localization_{name}.csv"),
            outcomes.iter().enumerate().map(|(k, o)| o.row(k, times[k].0, times[k].1)),
        )?;

        let mut report: Option<LocalizationReport> = None;
        if let Some(truth) = &truth {
            let ok: Vec<usize> = (0..n).filter(|&k| outcomes[k].result.is_ok()).collect();
            let pairs: Vec<(Pose, Pose)> = ok
                .iter()
                .map(|&k| (outcomes[k].result.as_ref().expect("ok pair").0, truth[k]))
                .collect();
            if !pairs.is_empty() {
                let r = evaluate_localization(&pairs)?;
                out.write_rows(
                    &format!("errors_{name}.csv"),
                    ok.iter().enumerate().map(|(i, &k)| ErrorRow {
                        pair: k,
                        translation: r.translation_errors[i],
                        rotation_deg: r.rotation_errors_deg[i],
                    }),
                )?;
                out.write(
                    &format!("histogram_{name}.svg"),
                    histogram_chart(
                        &format!("Translation error, {name}"),
                        "error (m)",
                        r.translation_histogram.bin_width,
                        &r.translation_histogram.counts,
                    ),
                )?;
                log::info!("{name}: median translation error {:.4} m", r.median_translation);
                report = Some(r);
            }
        }
        summary.push(SummaryRow {
            estimator: name.to_string(),
            pairs: n,
            failures,
            median_translation: report.as_ref().map(|r| r.median_translation),
            median_rotation_deg: report.as_ref().map(|r| r.median_rotation_deg),
        });
    }

    out.write_rows("summary.csv", summary)?;
    out.write_manifest("localize", &cfg)?;
    timer.write(&out)?;
    if !any_success {
        return Err(CliError::Estimation("no scan pair could be localized".into()));
    }
    Ok(())
}
