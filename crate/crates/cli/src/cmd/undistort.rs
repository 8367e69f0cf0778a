use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use spinradar::estimation::{MeasurementNoise, RansacConfig};
use spinradar::features::{detect_cen2018, write_keypoints_csv, DescriptorKind, Keypoint};
use spinradar::pipeline::{extract_features, match_scans, scan_velocity, FrontEndConfig};
use spinradar::plot::scatter_panels;
use spinradar::scan::{load_scan, write_scan, PolarScan, ScanFormat};
use spinradar::sim::{undistort_keypoints, undistort_scan};
use spinradar::BodyVelocity;

use crate::common::{
    default_format, load_config, parse_triple, read_velocities, require_file, require_path, require_seed, OutDir,
    Timer, VelocityRow,
};
use crate::error::{config_err, CliError, CliResult, DataContext};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UndistortConfig {
    /// Needed only when the velocity is estimated.
    pub seed: Option<u64>,
    pub scan: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: ScanFormat,
    pub output: Option<PathBuf>,
    /// Planar body velocity `[vx, vy, wz]`.
    pub velocity: Option<[f64; 3]>,
    /// `velocities.csv`; the row nearest the scan reference time is used.
    pub velocity_file: Option<PathBuf>,
    /// The following scan, to estimate the velocity from.
    pub next_scan: Option<PathBuf>,
    pub doppler: bool,
    /// Also write the resampled scan.
    pub write_scan: bool,
    pub front_end: FrontEndConfig,
    pub ransac: RansacConfig,
    pub noise: MeasurementNoise,
}

impl Default for UndistortConfig {
    fn default() -> Self {
        Self {
            seed: None,
            scan: None,
            format: default_format(),
            output: None,
            velocity: None,
            velocity_file: None,
            next_scan: None,
            doppler: true,
            write_scan: true,
            front_end: FrontEndConfig::default(),
            ransac: RansacConfig::default(),
            noise: MeasurementNoise::default(),
        }
    }
}

/// Remove motion distortion (and Doppler shift) from one scan.
#[derive(Debug, Args)]
pub struct UndistortArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scan to correct.
    #[arg(long)]
    scan: Option<PathBuf>,
    #[arg(long)]
    format: Option<ScanFormat>,
    /// Planar body velocity `vx,vy,wz`.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    velocity: Option<[f64; 3]>,
    /// Velocity table written by `simulate`.
    #[arg(long)]
    velocity_file: Option<PathBuf>,
    /// Following scan; the velocity is estimated against it.
    #[arg(long)]
    next_scan: Option<PathBuf>,
    #[arg(long)]
    doppler: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl UndistortArgs {
    pub fn resolve(&self) -> CliResult<UndistortConfig> {
        let mut cfg: UndistortConfig = load_config(self.config.as_deref())?;
        cfg.seed = self.seed.or(cfg.seed);
        if let Some(p) = &self.scan {
            cfg.scan = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        // A velocity flag replaces every configured source.
        if self.velocity.is_some() || self.velocity_file.is_some() || self.next_scan.is_some() {
            cfg.velocity = self.velocity;
            cfg.velocity_file = self.velocity_file.clone();
            cfg.next_scan = self.next_scan.clone();
        }
        if let Some(d) = self.doppler {
            cfg.doppler = d;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        require_path(&cfg.scan, "scan", "--scan")?;
        require_path(&cfg.output, "output directory", "--out")?;
        let sources =
            usize::from(cfg.velocity.is_some()) + usize::from(cfg.velocity_file.is_some()) + usize::from(cfg.next_scan.is_some());
        match sources {
            0 => return Err(config_err("missing velocity: give --velocity, --velocity-file or --next-scan")),
            1 => {}
            _ => return Err(config_err("give only one of velocity, velocity_file and next_scan")),
        }
        if cfg.next_scan.is_some() {
            require_seed(cfg.seed)?;
        }
        cfg.ransac.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

fn velocity_of(cfg: &UndistortConfig, scan: &PolarScan) -> CliResult<BodyVelocity> {
    if let Some([vx, vy, wz]) = cfg.velocity {
        return Ok(BodyVelocity::planar(vx, vy, wz));
    }
    let t = scan.reference_time();
    if let Some(path) = &cfg.velocity_file {
        let rows = read_velocities(path)?;
        let half_period = 0.5 / scan.config().rotation_rate;
        return rows
            .iter()
            .min_by(|a, b| (a.timestamp - t).abs().total_cmp(&(b.timestamp - t).abs()))
            .filter(|r| (r.timestamp - t).abs() < half_period)
            .map(VelocityRow::velocity)
            .ok_or_else(|| CliError::Data(format!("{} has no velocity near t = {t}", path.display())));
    }
    let next_path = cfg.next_scan.as_ref().expect("validated velocity source");
    let next = load_scan(next_path, cfg.format).data(|| format!("loading {}", next_path.display()))?;
    let fe = FrontEndConfig { descriptor: DescriptorKind::Binary, ..cfg.front_end.clone() };
    let m = match_scans(
        &extract_features(scan, &fe)?,
        &extract_features(&next, &fe)?,
        (t, next.reference_time()),
        &fe,
    )?;
    let ransac = RansacConfig { seed: require_seed(cfg.seed)?, ..cfg.ransac.clone() };
    Ok(scan_velocity(&m, true, &ransac, &cfg.noise, scan.config().beta)?)
}

pub fn run(args: &UndistortArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let scan_path = require_path(&cfg.scan, "scan", "--scan")?;
    require_file(&scan_path)?;
    for p in cfg.velocity_file.iter().chain(&cfg.next_scan) {
        require_file(p)?;
    }
    let out = OutDir::create(&require_path(&cfg.output, "output directory", "--out")?)?;
    let mut timer = Timer::default();

    let scan = load_scan(&scan_path, cfg.format).data(|| format!("loading {}", scan_path.display()))?;
    let v = timer.time("velocity", || velocity_of(&cfg, &scan))?;
    let t = scan.reference_time();
    let beta = cfg.doppler.then_some(scan.config().beta);

    let raw: Vec<Keypoint> = timer.time("detect", || detect_cen2018(&scan, &cfg.front_end.detector))?;
    let corrected = undistort_keypoints(&raw, &v, t, beta);
    log::info!("corrected {} keypoints at vx {:.3}, vy {:.3}, wz {:.4}", raw.len(), v.nu.x, v.nu.y, v.omega.z);

    out.write_with("keypoints.csv", |buf| write_keypoints_csv([(0, &raw[..]), (1, &corrected[..])], buf))?;
    out.write_rows("velocity.csv", [VelocityRow::new(0, t, &v)])?;
    out.write(
        "undistort.svg",
        scatter_panels(
            "Keypoints",
            &[
                ("raw", raw.iter().map(|k| k.cartesian).collect()),
                ("corrected", corrected.iter().map(|k| k.cartesian).collect()),
            ],
        ),
    )?;
    if cfg.write_scan {
        let resampled = timer.time("resample", || undistort_scan(&scan, &v, t, cfg.doppler))?;
        out.write_with("undistorted.prs", |buf| write_scan(&resampled, buf))?;
    }
    out.write_manifest("undistort", &cfg)?;
    timer.write(&out)
}
