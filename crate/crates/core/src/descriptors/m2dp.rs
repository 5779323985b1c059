//! Multi-plane projection descriptor with an intensity grid.
//!
//! Plane normals are `n(θ, φ) = (cos φ cos θ, cos φ sin θ, sin φ)` for
//! `θ_i = −π/2 + iπ/p` and `φ_j = jπ/(2q)`. Each plane is split into `l`
//! rings with radii `ρ_max·(k/l)²` and `t` sectors; row `i·q + j` of the bin
//! matrix counts points per `ring·t + sector` cell. The structure signature is
//! the first left singular vector followed by the first right singular vector.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::alignment::AlignedCloudSet;
use crate::error::{Error, Result};
use crate::geometry::{IntensityPoint, Vec3};

use super::{IntensityGrid, M2dpParams, SectorTable};

#[derive(Clone, Debug, PartialEq)]
pub struct M2dpSignature {
    /// `[u1; v1]`, length `p·q + l·t`, per variant.
    pub structure: [Vec<f64>; 4],
    /// Binarized mean intensity on the horizontal `l × t` grid, per variant.
    pub intensity: [Vec<u8>; 4],
}

impl M2dpSignature {
    pub fn empty(params: &M2dpParams) -> Self {
        Self {
            structure: std::array::from_fn(|_| vec![0.0; params.planes() + params.bins()]),
            intensity: std::array::from_fn(|_| vec![0; params.bins()]),
        }
    }
}

/// Unit normal and in-plane basis `(u, v)` for plane `(azimuth i, elevation j)`.
pub fn projection_plane(i: usize, j: usize, params: &M2dpParams) -> (Vec3, Vec3, Vec3) {
    let theta = -FRAC_PI_2 + i as f64 * PI / params.azimuths as f64;
    let phi = j as f64 * FRAC_PI_2 / params.elevations as f64;
    let normal = Vec3::new(phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin());
    let u = Vec3::new(-theta.sin(), theta.cos(), 0.0);
    let v = normal.cross(&u);
    (normal, u, v)
}

/// Squared inner radii of rings `1..l`: ring `k` starts at `ρ_max·(k/l)²`.
fn ring_edges_sq(max_rho: f64, rings: usize) -> Vec<f64> {
    (1..rings)
        .map(|k| {
            if max_rho > 0.0 {
                let r = max_rho * (k as f64 / rings as f64).powi(2);
                r * r
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

fn ring_of(rho_sq: f64, edges_sq: &[f64]) -> usize {
    edges_sq.iter().take_while(|&&e| rho_sq >= e).count()
}

fn max_radius(points: &[IntensityPoint]) -> f64 {
    points.iter().map(|p| p.position.norm()).fold(0.0, f64::max)
}

/// Point counts per (plane, bin): `p·q` rows × `l·t` columns.
pub fn m2dp_bin_matrix(points: &[IntensityPoint], params: &M2dpParams) -> DMatrix<f64> {
    let edges = ring_edges_sq(max_radius(points), params.rings);
    let cols = params.bins();
    let table = SectorTable::new(params.sectors);
    let mut counts = vec![0u32; params.planes() * cols];
    for i in 0..params.azimuths {
        for j in 0..params.elevations {
            let (_, u, v) = projection_plane(i, j, params);
            let row = i * params.elevations + j;
            let out = &mut counts[row * cols..(row + 1) * cols];
            for p in points {
                let x = p.position.dot(&u);
                let y = p.position.dot(&v);
                let ring = ring_of(x * x + y * y, &edges);
                let sector = table.sector(x, y);
                out[ring * params.sectors + sector] += 1;
            }
        }
    }
    DMatrix::from_fn(params.planes(), cols, |r, c| counts[r * cols + c] as f64)
}

/// Binarized mean-intensity grid on the plane of the first two principal
/// axes, with the same ring/sector geometry as the projection planes.
pub fn m2dp_intensity_bits(points: &[IntensityPoint], params: &M2dpParams) -> Vec<u8> {
    let edges = ring_edges_sq(max_radius(points), params.rings);
    let table = SectorTable::new(params.sectors);
    let mut grid = IntensityGrid::new(params.bins());
    for p in points {
        let (x, y) = (p.position.x, p.position.y);
        let ring = ring_of(x * x + y * y, &edges);
        let sector = table.sector(x, y);
        grid.add(ring * params.sectors + sector, p.intensity);
    }
    grid.binarize(points)
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `[u1; v1]` of the bin matrix for one aligned cloud.
pub fn m2dp_structure(points: &[IntensityPoint], params: &M2dpParams) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Degenerate("M2DP of an empty cloud".into()));
    }
    let a = m2dp_bin_matrix(points, params);
    let svd = a.svd(true, true);
    let top = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Degenerate("empty bin matrix".into()))?;
    if !(svd.singular_values[top] > 0.0) {
        return Err(Error::Degenerate("all-zero bin matrix".into()));
    }
    let u = svd.u.as_ref().expect("left vectors requested");
    let v_t = svd.v_t.as_ref().expect("right vectors requested");
    let mut left: Vec<f64> = u.column(top).iter().copied().collect();
    let mut right: Vec<f64> = v_t.row(top).iter().copied().collect();
    canonical_sign(&mut left);
    canonical_sign(&mut right);
    left.extend(right);
    Ok(left)
}

pub fn describe_m2dp(aligned: &AlignedCloudSet, params: &M2dpParams) -> Result<M2dpSignature> {
    let mut structure: [Vec<f64>; 4] = Default::default();
    for (slot, cloud) in structure.iter_mut().zip(&aligned.variants) {
        *slot = m2dp_structure(cloud, params)?;
    }
    Ok(M2dpSignature {
        structure,
        intensity: std::array::from_fn(|k| m2dp_intensity_bits(&aligned.variants[k], params)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_is_degenerate() {
        assert!(matches!(
            m2dp_structure(&[], &M2dpParams::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn uniform_intensity_gives_zero_bits() {
        let pts: Vec<_> = (0..50)
            .map(|k| IntensityPoint::new(k as f64 * 0.3 - 7.0, (k as f64).sin() * 4.0, 0.5, 90))
            .collect();
        assert!(m2dp_intensity_bits(&pts, &M2dpParams::default()).iter().all(|&b| b == 0));
    }

    #[test]
    fn plane_bases_are_orthonormal() {
        let params = M2dpParams::default();
        for i in 0..params.azimuths {
            for j in 0..params.elevations {
                let (n, u, v) = projection_plane(i, j, &params);
                for (a, b) in [(n, u), (n, v), (u, v)] {
                    assert!(a.dot(&b).abs() < 1e-12);
                }
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn structure_has_expected_length_and_sign() {
        let pts: Vec<_> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.37;
                IntensityPoint::new(10.0 * t.cos(), 4.0 * t.sin(), (t * 3.0).sin(), (k % 255) as u8)
            })
            .collect();
        let params = M2dpParams::default();
        let s = m2dp_structure(&pts, &params).unwrap();
        assert_eq!(s.len(), 64 + 128);
        let (u, v) = s.split_at(64);
        for part in [u, v] {
            let norm: f64 = part.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
            let max = part.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(max > 0.0);
        }
    }
}
