//! Plumbing shared by the commands: configuration files, output
//! directories, manifests and the small CSV formats the commands exchange.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spinradar::scan::{load_scan, PolarScan, ScanFormat};
use spinradar::{par, BodyVelocity};

use crate::error::{config_err, CliError, CliResult, DataContext};

/// Reads a command configuration, or the defaults when no file is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn require_seed(seed: Option<u64>) -> CliResult<u64> {
    seed.ok_or_else(|| config_err("a seed is required: pass --seed or set `seed` in the config"))
}

pub fn require_path(path: &Option<PathBuf>, what: &str, flag: &str) -> CliResult<PathBuf> {
    path.clone()
        .ok_or_else(|| CliError::Config(format!("no {what} given: pass {flag} or set it in the config")))
}

pub fn require_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} is not a directory", path.display())))
    }
}

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} does not exist", path.display())))
    }
}

/// Parses `a,b,c` into three numbers.
pub fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(out)
}

pub fn default_format() -> ScanFormat {
    ScanFormat::Native
}

fn extension(format: ScanFormat) -> &'static str {
    match format {
        ScanFormat::Native => "prs",
        ScanFormat::OxfordPngRows => "png",
    }
}

/// Scan files of a directory in name order.
pub fn list_scans(dir: &Path, format: ScanFormat) -> CliResult<Vec<PathBuf>> {
    require_dir(dir)?;
    let ext = extension(format);
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .data(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no .{ext} scans in {}", dir.display())));
    }
    Ok(files)
}

pub fn load_scans(files: &[PathBuf], format: ScanFormat) -> CliResult<Vec<PolarScan>> {
    par::map(files, |f| load_scan(f, format).data(|| format!("loading {}", f.display())))
        .into_iter()
        .collect()
}

/// Output directory of a run.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).data(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).data(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, bytes).data(|| format!("writing {}", path.display()))
    }

    /// Writes the bytes produced by a core CSV writer.
    pub fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> spinradar::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        f(&mut buf).data(|| format!("encoding {name}"))?;
        self.write(name, buf)
    }

    pub fn write_rows<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).data(|| format!("encoding {name}"))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(format!("encoding {name}: {e}")))?;
        self.write(name, bytes)
    }

    /// Records the fully resolved configuration of the run.
    pub fn write_manifest<T: Serialize>(&self, command: &str, config: &T) -> CliResult<()> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            command: &'a str,
            version: &'a str,
            config: &'a T,
        }
        let text = toml::to_string(&Manifest { command, version: env!("CARGO_PKG_VERSION"), config })
            .map_err(|e| CliError::Config(format!("cannot encode manifest: {e}")))?;
        self.write("manifest.toml", text)
    }
}

/// Wall-clock stage timings, kept apart from the reproducible outputs.
#[derive(Default)]
pub struct Timer {
    rows: Vec<(String, f64)>,
}

impl Timer {
    pub fn time<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.rows.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn record(&mut self, stage: impl Into<String>, seconds: f64) {
        self.rows.push((stage.into(), seconds));
    }

    pub fn write(self, out: &OutDir) -> CliResult<()> {
        #[derive(Serialize)]
        struct Row {
            stage: String,
            seconds: f64,
        }
        out.write_rows("timing.csv", self.rows.into_iter().map(|(stage, seconds)| Row { stage, seconds }))
    }
}

/// One row of `velocities.csv`: the body velocity of a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityRow {
    pub scan: usize,
    pub timestamp: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
}

impl VelocityRow {
    pub fn new(scan: usize, timestamp: f64, w: &BodyVelocity) -> Self {
        Self {
            scan,
            timestamp,
            vx: w.nu.x,
            vy: w.nu.y,
            vz: w.nu.z,
            wx: w.omega.x,
            wy: w.omega.y,
            wz: w.omega.z,
        }
    }

    pub fn velocity(&self) -> BodyVelocity {
        BodyVelocity::new(
            nalgebra::Vector3::new(self.vx, self.vy, self.vz),
            nalgebra::Vector3::new(self.wx, self.wy, self.wz),
        )
    }
}

pub fn read_velocities(path: &Path) -> CliResult<Vec<VelocityRow>> {
    let mut r = csv::Reader::from_path(path).data(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<VelocityRow>, _>>()
        .data(|| format!("reading {}", path.display()))
}

pub fn read_trajectory(path: &Path) -> CliResult<spinradar::eval::Trajectory> {
    let file = fs::File::open(path).data(|| format!("opening {}", path.display()))?;
    spinradar::eval::read_trajectory_csv(file).data(|| format!("reading {}", path.display()))
}
