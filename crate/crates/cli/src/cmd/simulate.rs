use std::fs;
use std::path::PathBuf;

use clap::Args;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use spinradar::eval::{write_trajectory_csv, Trajectory};
use spinradar::plot::scatter_panels;
use spinradar::scan::{write_scan, RadarConfig};
use spinradar::sim::{return_keypoint, simulate_sequence, ReturnPositions, SceneFile, SimOptions, SimScan, SimScene};

use crate::common::{load_config, parse_triple, require_file, require_path, require_seed, OutDir, Timer, VelocityRow};
use crate::error::{config_err, CliError, CliResult};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: Option<u64>,
    pub frames: usize,
    pub output: Option<PathBuf>,
    /// Scene description file; replaces any inline `[scene]`.
    pub scene_file: Option<PathBuf>,
    pub scene: Option<SceneFile>,
    pub radar: RadarConfig,
    pub options: SimOptions,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: None,
            frames: 10,
            output: None,
            scene_file: None,
            scene: None,
            radar: RadarConfig::default(),
            options: SimOptions::default(),
        }
    }
}

/// Simulate a constant-velocity drive past a landmark scene.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene description file (TOML).
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive rotations.
    #[arg(long)]
    frames: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Planar body velocity `vx,vy,wz` overriding the scene's.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    velocity: Option<[f64; 3]>,
    #[arg(long)]
    doppler: Option<bool>,
    #[arg(long)]
    distortion: Option<bool>,
}

impl SimulateArgs {
    pub fn resolve(&self) -> CliResult<SimulateConfig> {
        let mut cfg: SimulateConfig = load_config(self.config.as_deref())?;
        if let Some(p) = &self.scene {
            cfg.scene_file = Some(p.clone());
        }
        if let Some(p) = &cfg.scene_file {
            require_file(p)?;
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let scene: SceneFile =
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            cfg.scene = Some(scene);
        }
        let scene = cfg
            .scene
            .as_mut()
            .ok_or_else(|| config_err("no scene: pass --scene or add a [scene] table to the config"))?;
        if let Some(v) = self.velocity {
            scene.velocity = v;
        }
        cfg.seed = self.seed.or(cfg.seed).or(scene.seed);
        scene.seed = cfg.seed;
        if let Some(n) = self.frames {
            cfg.frames = n;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        if let Some(d) = self.doppler {
            cfg.options.doppler = d;
        }
        if let Some(d) = self.distortion {
            cfg.options.distortion = d;
        }
        require_seed(cfg.seed)?;
        require_path(&cfg.output, "output directory", "--out")?;
        if cfg.frames == 0 {
            return Err(config_err("frames must be at least 1"));
        }
        cfg.radar.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

/// Observed points of a scan next to where the same landmarks sit at the
/// scan reference time, in the sensor frame.
fn distortion_panels(sim: &SimScan, scene: &SimScene) -> [Vec<Vector2<f64>>; 2] {
    let cfg = sim.scan.config();
    let dt = sim.reference_time() - scene.start_time;
    let inv = sim.pose.inverse();
    let captured = sim
        .returns
        .iter()
        .map(|r| return_keypoint(r, cfg, ReturnPositions::Exact).cartesian)
        .collect();
    let reference = sim
        .returns
        .iter()
        .map(|r| inv.transform_planar(&scene.landmarks[r.landmark].position_after(dt)))
        .collect();
    [captured, reference]
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let seed = require_seed(cfg.seed)?;
    let out = OutDir::create(&require_path(&cfg.output, "output directory", "--out")?)?;
    let scene_file = cfg.scene.as_ref().expect("resolved scene");
    let scene = scene_file.to_scene().map_err(config_err)?;
    let mut timer = Timer::default();

    let scans = timer.time("simulate", || simulate_sequence(&scene, &cfg.radar, &cfg.options, cfg.frames, seed))?;
    log::info!("simulated {} scans of {} landmarks", scans.len(), scene.landmarks.len());

    timer.time("write", || -> CliResult<()> {
        for (k, s) in scans.iter().enumerate() {
            out.write_with(&format!("scans/scan_{k:04}.prs"), |buf| write_scan(&s.scan, buf))?;
        }
        let truth = Trajectory::new(
            scans.iter().map(SimScan::reference_time).collect(),
            scans.iter().map(|s| s.pose).collect(),
        )?;
        out.write_with("truth.csv", |buf| write_trajectory_csv(&truth, buf))?;
        out.write_rows(
            "velocities.csv",
            scans.iter().enumerate().map(|(k, s)| VelocityRow::new(k, s.reference_time(), &scene.velocity)),
        )?;
        let [captured, reference] = distortion_panels(&scans[0], &scene);
        out.write(
            "scan_0000.svg",
            scatter_panels("First scan", &[("as captured", captured), ("at reference time", reference)]),
        )
    })?;
    out.write_manifest("simulate", &cfg)?;
    timer.write(&out)
}
