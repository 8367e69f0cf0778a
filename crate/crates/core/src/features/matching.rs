use serde::{Deserialize, Serialize};

use super::orb::hamming;
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub enum Descriptor {
    Binary([u64; 4]),
    Rsd(Vec<f32>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescriptorKind {
    Binary,
    Rsd,
}

impl Descriptor {
    pub fn kind(&self) -> DescriptorKind {
        match self {
            Descriptor::Binary(_) => DescriptorKind::Binary,
            Descriptor::Rsd(_) => DescriptorKind::Rsd,
        }
    }

    /// Hamming distance for binary descriptors, Euclidean for RSD.
    pub fn distance(&self, other: &Descriptor) -> Result<f64> {
        match (self, other) {
            (Descriptor::Binary(a), Descriptor::Binary(b)) => Ok(hamming(a, b) as f64),
            (Descriptor::Rsd(a), Descriptor::Rsd(b)) if a.len() == b.len() => Ok(a
                .iter()
                .zip(b)
                .map(|(x, y)| ((x - y) as f64).powi(2))
                .sum::<f64>()
                .sqrt()),
            (Descriptor::Rsd(a), Descriptor::Rsd(b)) => Err(Error::InvalidInput(format!(
                "RSD lengths differ: {} vs {}",
                a.len(),
                b.len()
            ))),
            _ => Err(Error::InvalidInput(
                "cannot compare descriptors of different kinds".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Nearest/second-nearest distance ratio a match must beat.
    pub nndr: f64,
    /// Also require the match to be the best in the reverse direction.
    pub mutual: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { nndr: 0.8, mutual: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescriptorMatch {
    pub index1: usize,
    pub index2: usize,
    pub distance: f64,
}

/// Best and second-best distances along one row, ties resolved to the
/// lowest index.
fn best_two(row: impl Iterator<Item = f64>) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut second = f64::INFINITY;
    for (j, d) in row.enumerate() {
        match best {
            None => best = Some((j, d)),
            Some((_, b)) if d < b => {
                second = b;
                best = Some((j, d));
            }
            Some(_) => second = second.min(d),
        }
    }
    best.map(|(j, b)| (j, b, second))
}

fn passes_ratio(best: f64, second: f64, nndr: f64) -> bool {
    if second.is_infinite() {
        return best.is_finite();
    }
    best < nndr * second
}

/// Brute-force matching with the nearest-neighbour distance ratio test.
///
/// Output is sorted by `index1`. A query with a single candidate passes the
/// ratio test; exact ties between the two nearest candidates do not.
pub fn match_descriptors(
    d1: &[Descriptor],
    d2: &[Descriptor],
    cfg: &MatchConfig,
) -> Result<Vec<DescriptorMatch>> {
    if !(cfg.nndr > 0.0 && cfg.nndr <= 1.0) {
        return Err(Error::InvalidInput("nndr must lie in (0, 1]".into()));
    }
    if let (Some(a), Some(b)) = (d1.first(), d2.first()) {
        if a.kind() != b.kind() {
            return Err(Error::InvalidInput(
                "cannot match descriptors of different kinds".into(),
            ));
        }
    }
    let rows: Vec<Result<Vec<f64>>> =
        par::map(d1, |a| d2.iter().map(|b| a.distance(b)).collect());
    let dist: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;

    let reverse: Vec<Option<(usize, f64, f64)>> = if cfg.mutual {
        par::map_range(d2.len(), |j| best_two(dist.iter().map(|row| row[j])))
    } else {
        Vec::new()
    };

    let mut out = Vec::new();
    for (i, row) in dist.iter().enumerate() {
        let Some((j, best, second)) = best_two(row.iter().copied()) else {
            continue;
        };
        if !passes_ratio(best, second, cfg.nndr) {
            continue;
        }
        if cfg.mutual {
            match reverse[j] {
                Some((back, b, s)) if back == i && passes_ratio(b, s, cfg.nndr) => {}
                _ => continue,
            }
        }
        out.push(DescriptorMatch {
            index1: i,
            index2: j,
            distance: best,
        });
    }
    Ok(out)
}
