//! Ring × sector height-range grid.
//!
//! The horizontal plane is spanned by the first two principal axes and the
//! height is the third coordinate. Height range (max − min) is unchanged when
//! the vertical axis flips sign, which is exactly the ambiguity PCA leaves.

use crate::geometry::IntensityPoint;

use super::{planar_angle, sector_of, IntensityGrid, ScanContextParams};

#[derive(Clone, Debug, PartialEq)]
pub struct ScanContextSignature {
    pub rings: usize,
    pub sectors: usize,
    /// Row-major `rings × sectors`; meters, 0 for empty and single-point bins.
    pub structure: Vec<f64>,
    /// Row-major `rings × sectors` bits.
    pub intensity: Vec<u8>,
}

impl ScanContextSignature {
    pub fn empty(params: &ScanContextParams) -> Self {
        let n = params.rings * params.sectors;
        Self {
            rings: params.rings,
            sectors: params.sectors,
            structure: vec![0.0; n],
            intensity: vec![0; n],
        }
    }

    pub fn structure_at(&self, ring: usize, sector: usize) -> f64 {
        self.structure[ring * self.sectors + sector]
    }
}

/// `(ring, sector)` cell of an aligned point, or `None` beyond `max_range`.
pub fn scan_context_cell(x: f64, y: f64, params: &ScanContextParams) -> Option<(usize, usize)> {
    let ring = (x.hypot(y) / (params.max_range / params.rings as f64)).floor() as usize;
    if ring >= params.rings {
        return None;
    }
    Some((ring, sector_of(planar_angle(x, y), params.sectors)))
}

pub fn describe_scan_context(points: &[IntensityPoint], params: &ScanContextParams) -> ScanContextSignature {
    let n = params.rings * params.sectors;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut grid = IntensityGrid::new(n);
    for p in points {
        let Some((ring, sector)) = scan_context_cell(p.position.x, p.position.y, params) else {
            continue;
        };
        let cell = ring * params.sectors + sector;
        lo[cell] = lo[cell].min(p.position.z);
        hi[cell] = hi[cell].max(p.position.z);
        grid.add(cell, p.intensity);
    }
    let structure = lo
        .iter()
        .zip(&hi)
        .map(|(&l, &h)| if h >= l { h - l } else { 0.0 })
        .collect();
    ScanContextSignature {
        rings: params.rings,
        sectors: params.sectors,
        structure,
        intensity: grid.binarize(points),
    }
}
