//! Global place signatures computed on PCA-aligned scans.
//!
//! - [`delight`]: per-region grayscale histograms over a 16-way spherical
//!   partition (intensity only).
//! - [`m2dp`]: multi-plane projection counts compressed by SVD (structure)
//!   plus a binarized mean-intensity grid.
//! - [`scan_context`]: ring × sector grid of height ranges (structure) plus a
//!   binarized mean-intensity grid.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::pca_align;
use crate::error::{Error, Result};
use crate::geometry::IntensityPoint;
use crate::scan::FilterKind;

pub mod delight;
pub mod m2dp;
pub mod scan_context;

pub use delight::{describe_delight, DelightSignature};
pub use m2dp::{describe_m2dp, M2dpSignature};
pub use scan_context::{describe_scan_context, ScanContextSignature};

/// Version tag of the intensity binarization rule, stamped into archives.
pub const BINARIZATION_RULE: &str = "mean-gt-global-mean-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    Delight,
    M2dp,
    ScanContext,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 3] = [DescriptorKind::Delight, DescriptorKind::M2dp, DescriptorKind::ScanContext];

    /// The scan filter this descriptor is normally paired with.
    pub fn preferred_filter(self) -> FilterKind {
        match self {
            DescriptorKind::Delight | DescriptorKind::M2dp => FilterKind::Polar,
            DescriptorKind::ScanContext => FilterKind::Voxel,
        }
    }

    pub fn has_structure(self) -> bool {
        !matches!(self, DescriptorKind::Delight)
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            DescriptorKind::Delight => "delight",
            DescriptorKind::M2dp => "m2dp",
            DescriptorKind::ScanContext => "scan-context",
        })
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delight" => Ok(DescriptorKind::Delight),
            "m2dp" => Ok(DescriptorKind::M2dp),
            "scan-context" | "scan_context" | "scancontext" => Ok(DescriptorKind::ScanContext),
            other => Err(Error::InvalidParameter(format!("unknown descriptor {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelightParams {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Default for DelightParams {
    fn default() -> Self {
        Self {
            inner_radius: 10.0,
            outer_radius: 45.0,
        }
    }
}

/// `rings` (l) × `sectors` (t) bins on each of `azimuths` (p) × `elevations`
/// (q) projection planes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct M2dpParams {
    pub rings: usize,
    pub sectors: usize,
    pub azimuths: usize,
    pub elevations: usize,
}

impl Default for M2dpParams {
    fn default() -> Self {
        Self {
            rings: 8,
            sectors: 16,
            azimuths: 4,
            elevations: 16,
        }
    }
}

impl M2dpParams {
    pub fn planes(&self) -> usize {
        self.azimuths * self.elevations
    }

    pub fn bins(&self) -> usize {
        self.rings * self.sectors
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanContextParams {
    pub rings: usize,
    pub sectors: usize,
    pub max_range: f64,
}

impl Default for ScanContextParams {
    fn default() -> Self {
        Self {
            rings: 20,
            sectors: 60,
            max_range: 45.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorParams {
    #[serde(default)]
    pub delight: DelightParams,
    #[serde(default)]
    pub m2dp: M2dpParams,
    #[serde(default)]
    pub scan_context: ScanContextParams,
}

impl DescriptorParams {
    pub fn validate(&self) -> Result<()> {
        let d = &self.delight;
        if !(d.inner_radius > 0.0 && d.inner_radius < d.outer_radius && d.outer_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "DELIGHT radii must satisfy 0 < inner < outer, got {} / {}",
                d.inner_radius, d.outer_radius
            )));
        }
        let m = &self.m2dp;
        if m.rings == 0 || m.sectors == 0 || m.azimuths == 0 || m.elevations == 0 {
            return Err(Error::InvalidParameter("M2DP l, t, p, q must all be positive".into()));
        }
        let s = &self.scan_context;
        if s.rings == 0 || s.sectors == 0 || !(s.max_range > 0.0 && s.max_range.is_finite()) {
            return Err(Error::InvalidParameter(
                "Scan Context rings, sectors and max range must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Signature {
    Delight(DelightSignature),
    M2dp(M2dpSignature),
    ScanContext(ScanContextSignature),
}

impl Signature {
    pub fn kind(&self) -> DescriptorKind {
        match self {
            Signature::Delight(_) => DescriptorKind::Delight,
            Signature::M2dp(_) => DescriptorKind::M2dp,
            Signature::ScanContext(_) => DescriptorKind::ScanContext,
        }
    }

    /// All-zero signature, used for scans too sparse to describe.
    pub fn empty(kind: DescriptorKind, params: &DescriptorParams) -> Self {
        match kind {
            DescriptorKind::Delight => Signature::Delight(DelightSignature::empty()),
            DescriptorKind::M2dp => Signature::M2dp(M2dpSignature::empty(&params.m2dp)),
            DescriptorKind::ScanContext => Signature::ScanContext(ScanContextSignature::empty(&params.scan_context)),
        }
    }
}

/// Aligns `points` and computes one signature. Scan Context uses variant 0
/// of the alignment only.
pub fn describe(points: &[IntensityPoint], kind: DescriptorKind, params: &DescriptorParams) -> Result<Signature> {
    let aligned = pca_align(points)?;
    Ok(match kind {
        DescriptorKind::Delight => Signature::Delight(describe_delight(&aligned, &params.delight)),
        DescriptorKind::M2dp => Signature::M2dp(describe_m2dp(&aligned, &params.m2dp)?),
        DescriptorKind::ScanContext => {
            Signature::ScanContext(describe_scan_context(&aligned.variants[0], &params.scan_context))
        }
    })
}

/// Angle of `(x, y)` in `[0, 2π)`.
pub(crate) fn planar_angle(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    if a < 0.0 {
        let wrapped = a + TAU;
        if wrapped >= TAU {
            0.0
        } else {
            wrapped
        }
    } else {
        a
    }
}

/// `floor(angle / (2π / sectors))`, clamped into range.
pub(crate) fn sector_of(angle: f64, sectors: usize) -> usize {
    ((angle * sectors as f64 / TAU).floor() as usize).min(sectors - 1)
}

/// Sector lookup by sign tests against the boundary directions
/// `2πk / sectors`, avoiding `atan2` in hot loops. Agrees with
/// `sector_of(planar_angle(x, y))` up to rounding at the boundaries.
#[derive(Clone, Debug)]
pub(crate) struct SectorTable {
    /// `(cos b_k, sin b_k)` for `k = 1..sectors`.
    dirs: Vec<(f64, f64)>,
    /// Number of boundaries in `(0, π]`.
    upper: usize,
}

impl SectorTable {
    pub(crate) fn new(sectors: usize) -> Self {
        let dirs: Vec<(f64, f64)> = (1..sectors)
            .map(|k| {
                let b = TAU * k as f64 / sectors as f64;
                (b.cos(), b.sin())
            })
            .collect();
        Self {
            upper: (1..sectors).filter(|&k| 2 * k <= sectors).count(),
            dirs,
        }
    }

    /// `b_k ≤ angle` is `sin(angle − b_k) ≥ 0` while both lie in the same
    /// half-turn.
    pub(crate) fn sector(&self, x: f64, y: f64) -> usize {
        let past = |&&(c, s): &&(f64, f64)| y * c - x * s >= 0.0;
        if y >= 0.0 {
            self.dirs[..self.upper].iter().take_while(past).count()
        } else {
            self.upper + self.dirs[self.upper..].iter().take_while(past).count()
        }
    }
}

/// Per-bin intensity accumulator for the binarized intensity signatures.
#[derive(Clone, Debug)]
pub(crate) struct IntensityGrid {
    sums: Vec<u64>,
    counts: Vec<u64>,
}

impl IntensityGrid {
    pub(crate) fn new(bins: usize) -> Self {
        Self {
            sums: vec![0; bins],
            counts: vec![0; bins],
        }
    }

    pub(crate) fn add(&mut self, bin: usize, intensity: u8) {
        self.sums[bin] += u64::from(intensity);
        self.counts[bin] += 1;
    }

    /// Bit per bin: 1 iff the bin's mean intensity strictly exceeds the
    /// cloud's global mean. Empty bins are 0. Compared exactly in integers.
    pub(crate) fn binarize(&self, points: &[IntensityPoint]) -> Vec<u8> {
        let total = points.len() as u128;
        let global_sum: u128 = points.iter().map(|p| u128::from(p.intensity)).sum();
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(&sum, &count)| u8::from(count > 0 && u128::from(sum) * total > global_sum * u128::from(count)))
            .collect()
    }
}
