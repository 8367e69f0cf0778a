use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use spinradar::estimation::{MeasurementNoise, RansacConfig};
use spinradar::eval::write_trajectory_csv;
use spinradar::pipeline::{run_odometry, Estimator, FrontEndConfig, OdometryConfig, PairRecord};
use spinradar::scan::ScanFormat;

use crate::common::{default_format, list_scans, load_config, load_scans, require_path, require_seed, OutDir, Timer};
use crate::error::{config_err, CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryCommandConfig {
    pub seed: Option<u64>,
    /// Directory of scans, processed in file-name order.
    pub scans: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: ScanFormat,
    pub output: Option<PathBuf>,
    pub estimator: Estimator,
    pub front_end: FrontEndConfig,
    pub ransac: RansacConfig,
    pub noise: MeasurementNoise,
}

impl Default for OdometryCommandConfig {
    fn default() -> Self {
        Self {
            seed: None,
            scans: None,
            format: default_format(),
            output: None,
            estimator: Estimator::default(),
            front_end: FrontEndConfig::default(),
            ransac: RansacConfig::default(),
            noise: MeasurementNoise::default(),
        }
    }
}

/// Frame-to-frame odometry over a directory of scans.
#[derive(Debug, Args)]
pub struct OdometryArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of scans.
    #[arg(long)]
    scans: Option<PathBuf>,
    /// Scan file format: native or oxford.
    #[arg(long)]
    format: Option<ScanFormat>,
    /// rigid, mc or mc+doppler.
    #[arg(long)]
    estimator: Option<Estimator>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl OdometryArgs {
    pub fn resolve(&self) -> CliResult<OdometryCommandConfig> {
        let mut cfg: OdometryCommandConfig = load_config(self.config.as_deref())?;
        cfg.seed = self.seed.or(cfg.seed);
        if let Some(s) = &self.scans {
            cfg.scans = Some(s.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(e) = self.estimator {
            cfg.estimator = e;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        require_seed(cfg.seed)?;
        require_path(&cfg.scans, "scan directory", "--scans")?;
        require_path(&cfg.output, "output directory", "--out")?;
        cfg.ransac.validate().map_err(config_err)?;
        cfg.noise.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct PairRow<'a> {
    index: usize,
    t1: f64,
    t2: f64,
    matches: usize,
    inliers: usize,
    converged: bool,
    vx: Option<f64>,
    vy: Option<f64>,
    wz: Option<f64>,
    failure: &'a str,
}

impl<'a> From<&'a PairRecord> for PairRow<'a> {
    fn from(p: &'a PairRecord) -> Self {
        Self {
            index: p.index,
            t1: p.t1,
            t2: p.t2,
            matches: p.matches,
            inliers: p.inliers,
            converged: p.converged,
            vx: p.velocity.map(|v| v.nu.x),
            vy: p.velocity.map(|v| v.nu.y),
            wz: p.velocity.map(|v| v.omega.z),
            failure: p.failure.as_deref().unwrap_or(""),
        }
    }
}

pub fn run(args: &OdometryArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let dir = require_path(&cfg.scans, "scan directory", "--scans")?;
    let files = list_scans(&dir, cfg.format)?;
    let out = OutDir::create(&require_path(&cfg.output, "output directory", "--out")?)?;
    let mut timer = Timer::default();

    let scans = timer.time("load", || load_scans(&files, cfg.format))?;
    let odo = OdometryConfig {
        front_end: cfg.front_end.clone(),
        estimator: cfg.estimator,
        ransac: cfg.ransac.clone(),
        noise: cfg.noise,
        seed: require_seed(cfg.seed)?,
    };
    let result = timer.time("odometry", || run_odometry(&scans, &odo)).map_err(|e| match e {
        spinradar::Error::InvalidInput(m) => CliError::Data(m),
        other => other.into(),
    })?;
    for p in &result.pairs {
        timer.record(format!("pair {}", p.index), p.elapsed);
    }

    out.write_with("trajectory.csv", |buf| write_trajectory_csv(&result.trajectory, buf))?;
    out.write_rows("pairs.csv", result.pairs.iter().map(PairRow::from))?;
    out.write_manifest("odometry", &cfg)?;
    timer.write(&out)?;

    log::info!(
        "{} scans, {} pairs, {} failed ({})",
        scans.len(),
        result.pairs.len(),
        result.failures,
        cfg.estimator
    );
    if result.failures > 0 {
        eprintln!("{} of {} pairs failed and were replaced by the identity", result.failures, result.pairs.len());
    }
    if result.failures == result.pairs.len() {
        return Err(CliError::Estimation("every scan pair failed".into()));
    }
    Ok(())
}
