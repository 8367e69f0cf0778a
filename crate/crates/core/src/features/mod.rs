//! Keypoints, descriptors and matching.

mod detect;
mod keypoint;
mod matching;
mod orb;
mod rsd;

pub use detect::{detect_cen2018, DetectorConfig};
pub use keypoint::{write_keypoints_csv, write_matches_csv, Keypoint, MatchPair, MatchSet};
pub use matching::{match_descriptors, Descriptor, DescriptorKind, DescriptorMatch, MatchConfig};
pub use orb::{hamming, orb_descriptors, OrbConfig};
pub use rsd::{compute_rsd, compute_rsd_all, RsdConfig};

use crate::error::Result;
use crate::scan::CartesianImage;

/// Keypoints that received a descriptor, with the descriptors in the same
/// order.
#[derive(Clone, Debug, Default)]
pub struct DescribedKeypoints {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    /// Keypoints dropped because their patch left the image.
    pub dropped: usize,
}

/// Binary descriptors on `image`, dropping keypoints too close to its edge.
pub fn describe_orb(
    keypoints: &[Keypoint],
    image: &CartesianImage,
    cfg: &OrbConfig,
) -> Result<DescribedKeypoints> {
    let points: Vec<_> = keypoints.iter().map(|k| k.cartesian).collect();
    let raw = orb_descriptors(image, &points, cfg)?;
    let mut out = DescribedKeypoints::default();
    for (k, d) in keypoints.iter().zip(raw) {
        match d {
            Some(bits) => {
                out.keypoints.push(*k);
                out.descriptors.push(Descriptor::Binary(bits));
            }
            None => out.dropped += 1,
        }
    }
    Ok(out)
}

/// RSD descriptors of every keypoint against the others.
pub fn describe_rsd(keypoints: &[Keypoint], cfg: &RsdConfig) -> Result<DescribedKeypoints> {
    let points: Vec<_> = keypoints.iter().map(|k| k.cartesian).collect();
    let descriptors = compute_rsd_all(&points, cfg)?
        .into_iter()
        .map(Descriptor::Rsd)
        .collect();
    Ok(DescribedKeypoints {
        keypoints: keypoints.to_vec(),
        descriptors,
        dropped: 0,
    })
}

/// Match two described keypoint sets into a [`MatchSet`].
pub fn match_keypoints(
    first: &DescribedKeypoints,
    second: &DescribedKeypoints,
    reference_times: (f64, f64),
    cfg: &MatchConfig,
) -> Result<MatchSet> {
    let matches = match_descriptors(&first.descriptors, &second.descriptors, cfg)?;
    let pairs = matches
        .into_iter()
        .map(|m| MatchPair {
            first: first.keypoints[m.index1],
            second: second.keypoints[m.index2],
            index1: m.index1,
            index2: m.index2,
            distance: m.distance,
        })
        .collect();
    Ok(MatchSet::new(pairs, reference_times))
}
