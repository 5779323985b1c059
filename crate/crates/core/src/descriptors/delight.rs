use crate::alignment::AlignedCloudSet;
use crate::geometry::{IntensityPoint, Vec3};

use super::{planar_angle, DelightParams};

pub const DELIGHT_REGIONS: usize = 16;
pub const INTENSITY_LEVELS: usize = 256;
pub const DELIGHT_LEN: usize = DELIGHT_REGIONS * INTENSITY_LEVELS;

/// Grayscale histograms for the 16 spherical regions, one set per PCA
/// variant. Entry `region * 256 + intensity` counts points.
#[derive(Clone, Debug, PartialEq)]
pub struct DelightSignature {
    pub histograms: [Vec<u32>; 4],
}

impl DelightSignature {
    pub fn empty() -> Self {
        Self {
            histograms: std::array::from_fn(|_| vec![0; DELIGHT_LEN]),
        }
    }
}

/// Region of an aligned point: `shell * 8 + quadrant * 2 + hemisphere`.
///
/// Shell 0 is `[0, inner)`, shell 1 is `[inner, outer]`; quadrants follow the
/// azimuth in the plane of the first two principal axes; hemisphere 0 is
/// `z ≥ 0`. Points beyond `outer` have no region.
pub fn delight_region(p: &Vec3, params: &DelightParams) -> Option<usize> {
    let r = p.norm();
    let shell = if r < params.inner_radius {
        0
    } else if r <= params.outer_radius {
        1
    } else {
        return None;
    };
    let quadrant = ((planar_angle(p.x, p.y) / std::f64::consts::FRAC_PI_2) as usize).min(3);
    let hemisphere = usize::from(p.z < 0.0);
    Some(shell * 8 + quadrant * 2 + hemisphere)
}

pub fn delight_histogram(points: &[IntensityPoint], params: &DelightParams) -> Vec<u32> {
    let mut hist = vec![0u32; DELIGHT_LEN];
    for p in points {
        if let Some(region) = delight_region(&p.position, params) {
            hist[region * INTENSITY_LEVELS + usize::from(p.intensity)] += 1;
        }
    }
    hist
}

pub fn describe_delight(aligned: &AlignedCloudSet, params: &DelightParams) -> DelightSignature {
    DelightSignature {
        histograms: std::array::from_fn(|k| delight_histogram(&aligned.variants[k], params)),
    }
}
