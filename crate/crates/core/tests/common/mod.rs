//! Brute-force reference implementations and random inputs shared by the
//! integration tests. Each oracle is written from the descriptor definitions
//! directly, without the library's binning helpers.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voplace::geometry::{IntensityPoint, RigidTransform, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Anisotropic cloud with a few dense clusters, intensities spread over
/// the full range. Clearly separated principal axes.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<IntensityPoint> {
    let clusters: Vec<(Vec3, f64)> = (0..5)
        .map(|_| {
            (
                Vec3::new(rng.random_range(-25.0..25.0), rng.random_range(-12.0..12.0), rng.random_range(-3.0..3.0)),
                rng.random_range(0.5..3.0),
            )
        })
        .collect();
    (0..n)
        .map(|k| {
            let p = if k % 3 == 0 {
                let (c, s) = clusters[k % clusters.len()];
                c + Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
            } else {
                Vec3::new(rng.random_range(-30.0..30.0), rng.random_range(-14.0..14.0), rng.random_range(-4.0..4.0))
            };
            IntensityPoint::new(p.x, p.y, p.z, rng.random_range(0..=255))
        })
        .collect()
}

pub fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let t = Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0));
    RigidTransform::from_axis_angle(axis, rng.random_range(-PI..PI), t)
}

/// Angle in degrees, `[0, 360)`.
fn azimuth_deg(x: f64, y: f64) -> f64 {
    let a = y.atan2(x).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

/// DELIGHT histogram: 2 shells × 4 quadrants × 2 hemispheres, 256 levels.
pub fn delight_oracle(points: &[IntensityPoint], inner: f64, outer: f64) -> Vec<u32> {
    let mut hist = vec![0u32; 16 * 256];
    for p in points {
        let (x, y, z) = (p.position.x, p.position.y, p.position.z);
        let r = (x * x + y * y + z * z).sqrt();
        if r > outer {
            continue;
        }
        let shell = if r < inner { 0 } else { 1 };
        let quadrant = match (x, y) {
            _ if y >= 0.0 && x > 0.0 => 0,
            _ if x <= 0.0 && y > 0.0 => 1,
            _ if y <= 0.0 && x < 0.0 => 2,
            _ if x >= 0.0 && y < 0.0 => 3,
            _ => 0,
        };
        let hemisphere = if z >= 0.0 { 0 } else { 1 };
        hist[(shell * 8 + quadrant * 2 + hemisphere) * 256 + p.intensity as usize] += 1;
    }
    hist
}

/// Bin-count matrix: one row per plane (azimuth-major), columns ring-major.
/// Ring `k` covers radii `[R (k/l)², R ((k+1)/l)²)`, `R` the largest point
/// distance from the origin.
pub fn m2dp_oracle(points: &[IntensityPoint], l: usize, t: usize, p: usize, q: usize) -> DMatrix<f64> {
    let max_r = points.iter().map(|pt| pt.position.norm()).fold(0.0, f64::max);
    let mut a = DMatrix::zeros(p * q, l * t);
    for i in 0..p {
        let theta = -PI / 2.0 + PI * i as f64 / p as f64;
        for j in 0..q {
            let phi = (PI / 2.0) * j as f64 / q as f64;
            // In-plane axes: horizontal one perpendicular to the azimuth, and
            // the other completing a right-handed frame with the normal.
            let n = [phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()];
            let u = [-theta.sin(), theta.cos(), 0.0];
            let v = [n[1] * u[2] - n[2] * u[1], n[2] * u[0] - n[0] * u[2], n[0] * u[1] - n[1] * u[0]];
            for pt in points {
                let c = [pt.position.x, pt.position.y, pt.position.z];
                let x: f64 = (0..3).map(|k| c[k] * u[k]).sum();
                let y: f64 = (0..3).map(|k| c[k] * v[k]).sum();
                let rho = x.hypot(y);
                let ring = (1..l).filter(|&k| rho >= max_r * (k as f64 / l as f64).powi(2)).count();
                let sector = ((azimuth_deg(x, y) / (360.0 / t as f64)) as usize).min(t - 1);
                a[(i * q + j, ring * t + sector)] += 1.0;
            }
        }
    }
    a
}

/// First left and right singular vectors by power iteration on `AᵀA`, each
/// with its largest-magnitude entry made positive.
pub fn top_singular_vectors(a: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let ata = a.transpose() * a;
    let mut v = nalgebra::DVector::from_element(a.ncols(), 1.0);
    for _ in 0..5000 {
        let next = &ata * &v;
        let next = &next / next.norm();
        let done = (&next - &v).norm() < 1e-15;
        v = next;
        if done {
            break;
        }
    }
    let u = a * &v;
    let u = &u / u.norm();
    let canonical = |x: Vec<f64>| {
        let big = x.iter().copied().fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
        if big < 0.0 {
            x.into_iter().map(|e| -e).collect()
        } else {
            x
        }
    };
    (canonical(u.iter().copied().collect()), canonical(v.iter().copied().collect()))
}

/// Height range per (ring, sector) cell, row-major, by scanning every
/// point for every cell.
pub fn scan_context_oracle(points: &[IntensityPoint], rings: usize, sectors: usize, max_range: f64) -> Vec<f64> {
    let mut out = vec![0.0; rings * sectors];
    for ring in 0..rings {
        for sector in 0..sectors {
            let heights: Vec<f64> = points
                .iter()
                .filter(|p| {
                    let (x, y) = (p.position.x, p.position.y);
                    let rho = x.hypot(y);
                    let r = (rho / (max_range / rings as f64)).floor() as usize;
                    let s = ((azimuth_deg(x, y) / (360.0 / sectors as f64)) as usize).min(sectors - 1);
                    rho < max_range && r == ring && s == sector
                })
                .map(|p| p.position.z)
                .collect();
            if let (Some(lo), Some(hi)) = (
                heights.iter().copied().reduce(f64::min),
                heights.iter().copied().reduce(f64::max),
            ) {
                out[ring * sectors + sector] = hi - lo;
            }
        }
    }
    out
}
