//! PCA reference frames and their four sign-resolved variants.
//!
//! The principal axes of a cloud are only defined up to sign. Fixing the
//! third axis as `e1 × e2` keeps every frame right-handed, leaving four
//! candidates `(±e1, ±e2)`. Variant 0 uses a data-driven sign (non-negative
//! third moment along each axis) so it follows the cloud under rigid motion;
//! variants 1..3 flip `e2`, `e1`, and both.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{IntensityPoint, Vec3};

/// λ2/λ1 below this means the cloud spans fewer than two directions.
pub const DEGENERACY_RATIO: f64 = 1e-9;

/// Sign flips of `(e1, e2)` per variant index.
pub const VARIANT_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

#[derive(Clone, Debug)]
pub struct AlignedCloudSet {
    /// Centred points rotated into each variant frame, in input order.
    pub variants: [Vec<IntensityPoint>; 4],
    /// Rows are the variant's axes; `aligned = frame · (p − centroid)`.
    pub frames: [Matrix3<f64>; 4],
    pub centroid: Vec3,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: [f64; 3],
}

impl AlignedCloudSet {
    pub fn len(&self) -> usize {
        self.variants[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants[0].is_empty()
    }
}

pub fn pca_align(points: &[IntensityPoint]) -> Result<AlignedCloudSet> {
    if points.len() < 3 {
        return Err(Error::DegenerateCloud(format!(
            "{} points, need at least 3",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.position) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.position - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.map(|i| eig.eigenvalues[i].max(0.0));
    if !(eigenvalues[0] > 0.0) || eigenvalues[1] / eigenvalues[0] < DEGENERACY_RATIO {
        return Err(Error::DegenerateCloud(format!(
            "eigenvalues {eigenvalues:?} span fewer than two directions"
        )));
    }

    let mut axes = [0, 1].map(|k| eig.eigenvectors.column(order[k]).into_owned());
    for axis in &mut axes {
        let skew: f64 = points
            .iter()
            .map(|p| axis.dot(&(p.position - centroid)).powi(3))
            .sum();
        if skew < 0.0 {
            *axis = -*axis;
        }
    }

    let frames = VARIANT_SIGNS.map(|(s1, s2)| {
        let e1 = axes[0] * s1;
        let e2 = axes[1] * s2;
        let e3 = e1.cross(&e2);
        Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()])
    });
    let variants = frames.map(|frame| {
        points
            .iter()
            .map(|p| IntensityPoint {
                position: frame * (p.position - centroid),
                intensity: p.intensity,
            })
            .collect()
    });

    Ok(AlignedCloudSet {
        variants,
        frames,
        centroid,
        eigenvalues,
    })
}
