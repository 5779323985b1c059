//! Imitated omnidirectional scans built from cached keyframe points.
//!
//! Stereo VO only sees a forward frustum per keyframe. A rolling cache of
//! world-frame points from recent keyframes is kept, and for each keyframe
//! every cached point within the scan range is re-expressed in that
//! keyframe's camera frame. The result is then downsampled, either on a polar
//! grid (closest point per ray) or on a Cartesian voxel grid (centroid per
//! cell).
//!
//! Camera convention: x right, y down, z forward.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{IntensityPoint, RigidTransform};
use crate::keyframe::{parse_field, parse_point, write_point, Keyframe, Records};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Polar,
    Voxel,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            FilterKind::Polar => "polar",
            FilterKind::Voxel => "voxel",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polar" => Ok(FilterKind::Polar),
            "voxel" => Ok(FilterKind::Voxel),
            other => Err(Error::InvalidParameter(format!("unknown filter kind {other:?}"))),
        }
    }
}

/// A downsampled imitated scan, in the keyframe's camera frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredScan {
    pub keyframe_id: u64,
    pub filter_kind: FilterKind,
    pub points: Vec<IntensityPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CachedPoint {
    pub keyframe_id: u64,
    /// World frame.
    pub point: IntensityPoint,
}

/// Rolling world-frame buffer of points from recent keyframes.
///
/// After each update every entry lies within `eviction_radius` of the newest
/// keyframe's origin.
#[derive(Clone, Debug)]
pub struct LocalPointCache {
    entries: Vec<CachedPoint>,
    last_pose: Option<RigidTransform>,
    last_id: Option<u64>,
    eviction_radius: f64,
}

impl LocalPointCache {
    pub fn new(eviction_radius: f64) -> Self {
        Self {
            entries: Vec::new(),
            last_pose: None,
            last_id: None,
            eviction_radius,
        }
    }

    pub fn entries(&self) -> &[CachedPoint] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_pose(&self) -> Option<&RigidTransform> {
        self.last_pose.as_ref()
    }

    pub fn last_id(&self) -> Option<u64> {
        self.last_id
    }

    pub fn eviction_radius(&self) -> f64 {
        self.eviction_radius
    }

    /// Appends `kf`'s points in world coordinates, then drops every point
    /// farther than the eviction radius from `kf`'s origin.
    pub fn update(&mut self, kf: &Keyframe) -> Result<()> {
        if let Some(last) = self.last_id {
            if kf.id <= last {
                return Err(Error::NonMonotonicId {
                    previous: last,
                    next: kf.id,
                });
            }
        }
        self.entries.extend(kf.points.iter().map(|p| CachedPoint {
            keyframe_id: kf.id,
            point: p.transformed(&kf.pose),
        }));
        let origin = *kf.origin();
        let radius = self.eviction_radius;
        self.entries
            .retain(|e| (e.point.position - origin).norm() <= radius);
        self.last_pose = Some(kf.pose);
        self.last_id = Some(kf.id);
        Ok(())
    }

    /// Cached points within `range` (inclusive) of `pose`'s origin, expressed
    /// in the frame of `pose` (camera-to-world).
    pub fn imitate_scan(&self, pose: &RigidTransform, range: f64) -> Vec<IntensityPoint> {
        let origin = pose.translation();
        let world_to_camera = pose.inverse();
        self.entries
            .iter()
            .filter(|e| (e.point.position - origin).norm() <= range)
            .map(|e| e.point.transformed(&world_to_camera))
            .collect()
    }
}

/// Azimuth in `[0, 360)` degrees, measured in the horizontal camera plane
/// from +z (forward) towards +x (right).
fn camera_azimuth_deg(p: &IntensityPoint) -> f64 {
    let az = p.position.x.atan2(p.position.z).to_degrees();
    if az < 0.0 {
        let wrapped = az + 360.0;
        if wrapped >= 360.0 {
            0.0
        } else {
            wrapped
        }
    } else {
        az
    }
}

/// Elevation in `[-90, 90]` degrees; camera y points down.
fn camera_elevation_deg(p: &IntensityPoint) -> f64 {
    let horizontal = p.position.x.hypot(p.position.z);
    (-p.position.y).atan2(horizontal).to_degrees()
}

/// Keeps the closest point along each `(azimuth, elevation)` ray cell of
/// `angular_res_deg` degrees. Exact range ties keep the earlier point.
/// Survivors are returned in input order.
///
/// `angular_res_deg` must be positive and divide 360.
pub fn filter_polar(points: &[IntensityPoint], angular_res_deg: f64) -> Vec<IntensityPoint> {
    let mut best: HashMap<(i64, i64), (usize, f64)> = HashMap::with_capacity(points.len());
    for (idx, p) in points.iter().enumerate() {
        let key = (
            (camera_azimuth_deg(p) / angular_res_deg).floor() as i64,
            (camera_elevation_deg(p) / angular_res_deg).floor() as i64,
        );
        let range = p.range();
        best.entry(key)
            .and_modify(|slot| {
                if range < slot.1 {
                    *slot = (idx, range);
                }
            })
            .or_insert((idx, range));
    }
    let mut keep: Vec<usize> = best.into_values().map(|(idx, _)| idx).collect();
    keep.sort_unstable();
    keep.into_iter().map(|idx| points[idx]).collect()
}

/// One point per occupied voxel of size `cell` (x, y, z): the centroid of the
/// voxel's points with their mean intensity rounded to nearest. Output order
/// follows first occupancy.
pub fn filter_voxel(points: &[IntensityPoint], cell: [f64; 3]) -> Vec<IntensityPoint> {
    struct Acc {
        sum: nalgebra::Vector3<f64>,
        intensity: u64,
        count: u64,
    }
    let mut slots: HashMap<[i64; 3], usize> = HashMap::with_capacity(points.len());
    let mut accs: Vec<Acc> = Vec::new();
    for p in points {
        let key = [
            (p.position.x / cell[0]).floor() as i64,
            (p.position.y / cell[1]).floor() as i64,
            (p.position.z / cell[2]).floor() as i64,
        ];
        let slot = *slots.entry(key).or_insert_with(|| {
            accs.push(Acc {
                sum: nalgebra::Vector3::zeros(),
                intensity: 0,
                count: 0,
            });
            accs.len() - 1
        });
        let acc = &mut accs[slot];
        acc.sum += p.position;
        acc.intensity += u64::from(p.intensity);
        acc.count += 1;
    }
    accs.into_iter()
        .map(|acc| {
            let n = acc.count as f64;
            IntensityPoint {
                position: acc.sum / n,
                intensity: (acc.intensity as f64 / n).round() as u8,
            }
        })
        .collect()
}

/// Parameters for turning a keyframe sequence into filtered scans.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanSettings {
    pub range: f64,
    pub polar_resolution_deg: f64,
    pub voxel_cell: [f64; 3],
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            range: 45.0,
            polar_resolution_deg: 1.0,
            voxel_cell: [1.5, 0.75, 1.5],
        }
    }
}

impl ScanSettings {
    pub fn filter(&self, keyframe_id: u64, kind: FilterKind, raw: &[IntensityPoint]) -> FilteredScan {
        let points = match kind {
            FilterKind::Polar => filter_polar(raw, self.polar_resolution_deg),
            FilterKind::Voxel => filter_voxel(raw, self.voxel_cell),
        };
        FilteredScan {
            keyframe_id,
            filter_kind: kind,
            points,
        }
    }
}

/// Imitated scan for every keyframe, one entry per requested filter kind, in
/// keyframe order. The cache evicts at the scan range.
pub fn imitate_sequence(
    keyframes: &[Keyframe],
    settings: &ScanSettings,
    kinds: &[FilterKind],
) -> Result<Vec<FilteredScan>> {
    let mut cache = LocalPointCache::new(settings.range);
    let mut raw_scans = Vec::with_capacity(keyframes.len());
    for kf in keyframes {
        cache.update(kf)?;
        raw_scans.push((kf.id, cache.imitate_scan(&kf.pose, settings.range)));
    }
    use rayon::prelude::*;
    let scans = raw_scans
        .par_iter()
        .flat_map_iter(|(id, raw)| kinds.iter().map(move |&kind| settings.filter(*id, kind, raw)))
        .collect();
    Ok(scans)
}

/// A set of filtered scans tagged with the fingerprint of the configuration
/// that produced them.
///
/// ```text
/// SCANS <fingerprint>
/// SCAN <keyframe_id> <polar|voxel> <n_points>
/// <x> <y> <z> <intensity>
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct ScanArchive {
    pub fingerprint: String,
    pub scans: Vec<FilteredScan>,
}

impl ScanArchive {
    pub fn to_text(&self) -> String {
        let mut out = format!("SCANS {}\n", self.fingerprint);
        for scan in &self.scans {
            let _ = writeln!(
                out,
                "SCAN {} {} {}",
                scan.keyframe_id,
                scan.filter_kind,
                scan.points.len()
            );
            for p in &scan.points {
                write_point(&mut out, p);
            }
        }
        out
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut records = Records::new(text);
        let (line, header) = records
            .next()
            .ok_or_else(|| Error::EmptyInput(format!("{context}: empty scan archive")))?;
        if header.len() != 2 || header[0] != "SCANS" {
            return Err(Error::parse(context, line, "expected `SCANS <fingerprint>` header"));
        }
        let fingerprint = header[1].to_string();
        let mut scans = Vec::new();
        while let Some((line, fields)) = records.next() {
            if fields.len() != 4 || fields[0] != "SCAN" {
                return Err(Error::parse(context, line, "expected `SCAN <id> <kind> <n>` record"));
            }
            let keyframe_id = parse_field(context, line, fields[1], "keyframe id")?;
            let filter_kind: FilterKind = fields[2]
                .parse()
                .map_err(|e: Error| Error::parse(context, line, e.to_string()))?;
            let n: usize = parse_field(context, line, fields[3], "point count")?;
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let (pline, pfields) = records
                    .next()
                    .ok_or_else(|| Error::parse(context, line, "scan truncated"))?;
                points.push(parse_point(context, pline, &pfields)?);
            }
            scans.push(FilteredScan {
                keyframe_id,
                filter_kind,
                points,
            });
        }
        Ok(Self { fingerprint, scans })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Writes one archive file per scan into `dir` as
    /// `scan_<id>_<kind>.txt`.
    pub fn save_split(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for scan in &self.scans {
            let single = ScanArchive {
                fingerprint: self.fingerprint.clone(),
                scans: vec![scan.clone()],
            };
            single.save(dir.join(format!("scan_{:06}_{}.txt", scan.keyframe_id, scan.filter_kind)))?;
        }
        Ok(())
    }

    /// Loads either a single archive file or a directory written by
    /// [`ScanArchive::save_split`].
    pub fn load_any(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_dir() {
            return Self::load(path);
        }
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        files.sort();
        let mut merged: Option<ScanArchive> = None;
        for file in files {
            let part = Self::load(&file)?;
            match merged.as_mut() {
                None => merged = Some(part),
                Some(m) => {
                    if m.fingerprint != part.fingerprint {
                        return Err(Error::ParameterMismatch(format!(
                            "{} has fingerprint {}, expected {}",
                            file.display(),
                            part.fingerprint,
                            m.fingerprint
                        )));
                    }
                    m.scans.extend(part.scans);
                }
            }
        }
        let mut merged =
            merged.ok_or_else(|| Error::EmptyInput(format!("{}: no scan files", path.display())))?;
        merged.scans.sort_by_key(|s| (s.keyframe_id, s.filter_kind));
        Ok(merged)
    }

    /// Scans of one filter kind, in archive order.
    pub fn of_kind(&self, kind: FilterKind) -> impl Iterator<Item = &FilteredScan> {
        self.scans.iter().filter(move |s| s.filter_kind == kind)
    }

    pub fn mean_point_count(&self, kind: FilterKind) -> Option<f64> {
        let counts: Vec<usize> = self.of_kind(kind).map(|s| s.points.len()).collect();
        if counts.is_empty() {
            None
        } else {
            Some(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::Vec3;

    fn kf(id: u64, pose: RigidTransform, points: Vec<IntensityPoint>) -> Keyframe {
        Keyframe {
            id,
            pose,
            points,
            gt_position: None,
        }
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<IntensityPoint> {
        (0..n)
            .map(|_| {
                IntensityPoint::new(
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                    rng.random_range(-extent..extent),
                    rng.random(),
                )
            })
            .collect()
    }

    #[test]
    fn empty_cache_takes_all_points() {
        let mut cache = LocalPointCache::new(45.0);
        let points: Vec<_> = (0..10).map(|i| IntensityPoint::new(i as f64, 0.0, 1.0, 7)).collect();
        cache
            .update(&kf(0, RigidTransform::from_translation(Vec3::new(0.0, 0.0, 3.0)), points))
            .unwrap();
        assert_eq!(cache.len(), 10);
        assert_eq!(cache.entries()[4].point.position, Vec3::new(4.0, 0.0, 4.0));
    }

    #[test]
    fn far_points_are_evicted() {
        let mut cache = LocalPointCache::new(50.0);
        cache
            .update(&kf(0, RigidTransform::identity(), vec![IntensityPoint::new(0.0, 0.0, -100.0, 1)]))
            .unwrap();
        assert_eq!(cache.len(), 0);

        let mut cache = LocalPointCache::new(50.0);
        cache
            .update(&kf(0, RigidTransform::identity(), vec![IntensityPoint::new(0.0, 0.0, 0.0, 1)]))
            .unwrap();
        cache
            .update(&kf(1, RigidTransform::from_translation(Vec3::new(0.0, 0.0, 100.0)), vec![]))
            .unwrap();
        assert!(cache.is_empty());
    }

    #[test]
    fn out_of_order_update_is_rejected() {
        let mut cache = LocalPointCache::new(45.0);
        cache.update(&kf(5, RigidTransform::identity(), vec![])).unwrap();
        assert!(matches!(
            cache.update(&kf(5, RigidTransform::identity(), vec![])),
            Err(Error::NonMonotonicId { .. })
        ));
    }

    #[test]
    fn cache_size_plateaus_on_straight_line() {
        let radius = 45.0;
        let mut cache = LocalPointCache::new(radius);
        let mut all_world: Vec<Vec3> = Vec::new();
        let mut sizes = Vec::new();
        for step in 0..200u64 {
            let z0 = step as f64;
            let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, z0));
            let points: Vec<_> = (0..10)
                .map(|k| IntensityPoint::new(0.0, 0.0, 4.5 * k as f64 + 0.25, 100))
                .collect();
            all_world.extend(points.iter().map(|p| p.position + Vec3::new(0.0, 0.0, z0)));
            cache.update(&kf(step, pose, points)).unwrap();
            let brute = all_world
                .iter()
                .filter(|w| (*w - Vec3::new(0.0, 0.0, z0)).norm() <= radius)
                .count();
            assert_eq!(cache.len(), brute);
            sizes.push(cache.len());
        }
        assert!(sizes[100] > sizes[0]);
        assert!(sizes[120..].iter().all(|&s| s == sizes[120]));
    }

    #[test]
    fn imitate_scan_expresses_points_in_current_frame() {
        let mut cache = LocalPointCache::new(45.0);
        let origin = Vec3::new(3.0, -2.0, 7.0);
        let pose = RigidTransform::from_translation(origin);
        cache
            .update(&kf(0, pose, vec![IntensityPoint::new(10.0, 0.0, 0.0, 50)]))
            .unwrap();
        let scan = cache.imitate_scan(&pose, 45.0);
        assert_eq!(scan, vec![IntensityPoint::new(10.0, 0.0, 0.0, 50)]);
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let mut cache = LocalPointCache::new(100.0);
        cache
            .update(&kf(
                0,
                RigidTransform::identity(),
                vec![
                    IntensityPoint::new(45.0, 0.0, 0.0, 1),
                    IntensityPoint::new(45.0001, 0.0, 0.0, 2),
                ],
            ))
            .unwrap();
        let scan = cache.imitate_scan(&RigidTransform::identity(), 45.0);
        assert_eq!(scan.len(), 1);
        assert_eq!(scan[0].intensity, 1);
    }

    #[test]
    fn imitate_scan_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cache = LocalPointCache::new(1e9);
        let cloud = random_cloud(&mut rng, 1000, 80.0);
        cache.update(&kf(0, RigidTransform::identity(), cloud.clone())).unwrap();
        let current = RigidTransform::from_axis_angle(Vec3::new(0.3, 1.0, -0.2), 1.1, Vec3::new(5.0, 1.0, -9.0));
        let scan = cache.imitate_scan(&current, 45.0);

        let inv = current.inverse();
        let expected: Vec<IntensityPoint> = cloud
            .iter()
            .filter(|p| {
                let d = p.position - current.translation();
                (d.x * d.x + d.y * d.y + d.z * d.z).sqrt() <= 45.0
            })
            .map(|p| IntensityPoint {
                position: inv.rotation() * p.position + inv.translation(),
                intensity: p.intensity,
            })
            .collect();
        assert_eq!(scan.len(), expected.len());
        for (a, b) in scan.iter().zip(&expected) {
            assert!((a.position - b.position).abs().max() < 1e-9);
            assert_eq!(a.intensity, b.intensity);
        }
    }

    #[test]
    fn imitate_scan_is_frame_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let world_shift = RigidTransform::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 2.0, Vec3::new(100.0, -20.0, 3.0));
        let poses: Vec<RigidTransform> = (0..5)
            .map(|i| RigidTransform::from_axis_angle(Vec3::y(), 0.1 * i as f64, Vec3::new(0.0, 0.0, 2.0 * i as f64)))
            .collect();
        let mut a = LocalPointCache::new(45.0);
        let mut b = LocalPointCache::new(45.0);
        for (i, pose) in poses.iter().enumerate() {
            let pts = random_cloud(&mut rng, 200, 30.0);
            a.update(&kf(i as u64, *pose, pts.clone())).unwrap();
            b.update(&kf(i as u64, world_shift.compose(pose), pts)).unwrap();
        }
        let last = poses.last().unwrap();
        let sa = a.imitate_scan(last, 45.0);
        let sb = b.imitate_scan(&world_shift.compose(last), 45.0);
        assert_eq!(sa.len(), sb.len());
        for (p, q) in sa.iter().zip(&sb) {
            assert!((p.position - q.position).abs().max() < 1e-9);
        }
    }

    #[test]
    fn polar_keeps_closest_along_ray() {
        let pts = vec![
            IntensityPoint::new(0.0, 0.0, 7.0, 1),
            IntensityPoint::new(0.0, 0.0, 5.0, 2),
        ];
        assert_eq!(filter_polar(&pts, 1.0), vec![pts[1]]);

        let tie = vec![
            IntensityPoint::new(0.0, 0.0, 5.0, 1),
            IntensityPoint::new(0.0, 0.0, 5.0, 2),
        ];
        assert_eq!(filter_polar(&tie, 1.0), vec![tie[0]]);
    }

    #[test]
    fn polar_distinct_cells_pass_through() {
        let pts: Vec<_> = (0..36)
            .map(|k| {
                let az = (10.0 * k as f64 + 0.5).to_radians();
                IntensityPoint::new(8.0 * az.sin(), 0.0, 8.0 * az.cos(), k as u8)
            })
            .collect();
        assert_eq!(filter_polar(&pts, 1.0), pts);
    }

    /// Independent bucket-and-min: spherical angles from `asin`/`acos`, keyed
    /// through an ordered map.
    fn polar_oracle(points: &[IntensityPoint], res: f64) -> Vec<IntensityPoint> {
        let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            let r = p.position.norm();
            let h = (p.position.x.powi(2) + p.position.z.powi(2)).sqrt();
            let mut az = (p.position.z / h).clamp(-1.0, 1.0).acos().to_degrees();
            if p.position.x < 0.0 {
                az = 360.0 - az;
            }
            let el = (-p.position.y / r).clamp(-1.0, 1.0).asin().to_degrees();
            let key = ((az / res).floor() as i64, (el / res).floor() as i64);
            buckets.entry(key).or_default().push(i);
        }
        let mut keep: Vec<usize> = buckets
            .values()
            .map(|idxs| {
                let mut best = idxs[0];
                for &i in idxs {
                    if points[i].position.norm() < points[best].position.norm() {
                        best = i;
                    }
                }
                best
            })
            .collect();
        keep.sort_unstable();
        keep.into_iter().map(|i| points[i]).collect()
    }

    #[test]
    fn polar_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud = random_cloud(&mut rng, 5000, 40.0);
        assert_eq!(filter_polar(&cloud, 1.0), polar_oracle(&cloud, 1.0));
        assert_eq!(filter_polar(&cloud, 3.0), polar_oracle(&cloud, 3.0));
    }

    #[test]
    fn voxel_centroid_and_mean_intensity() {
        let pts = vec![
            IntensityPoint::new(0.0, 0.0, 0.0, 100),
            IntensityPoint::new(1.0, 0.0, 0.0, 200),
        ];
        let out = filter_voxel(&pts, [1.5, 0.75, 1.5]);
        assert_eq!(out, vec![IntensityPoint::new(0.5, 0.0, 0.0, 150)]);
    }

    #[test]
    fn voxel_distinct_cells_preserved() {
        let pts: Vec<_> = (0..20)
            .map(|k| IntensityPoint::new(1.5 * k as f64 + 0.1, 0.75 * k as f64 + 0.1, -3.0, 9))
            .collect();
        assert_eq!(filter_voxel(&pts, [1.5, 0.75, 1.5]).len(), pts.len());
    }

    #[test]
    fn voxel_count_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cloud = random_cloud(&mut rng, 4000, 20.0);
        let cell = [1.5, 0.75, 1.5];
        let occupied: HashSet<(i64, i64, i64)> = cloud
            .iter()
            .map(|p| {
                (
                    (p.position.x / 1.5).floor() as i64,
                    (p.position.y / 0.75).floor() as i64,
                    (p.position.z / 1.5).floor() as i64,
                )
            })
            .collect();
        assert_eq!(filter_voxel(&cloud, cell).len(), occupied.len());
    }

    #[test]
    fn filters_shrink_and_polar_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cloud = random_cloud(&mut rng, 3000, 30.0);
        let once = filter_polar(&cloud, 1.0);
        assert!(once.len() <= cloud.len());
        assert_eq!(filter_polar(&once, 1.0), once);

        let centred: Vec<_> = cloud
            .iter()
            .map(|p| {
                IntensityPoint::new(
                    ((p.position.x / 1.5).floor() + 0.5) * 1.5,
                    ((p.position.y / 0.75).floor() + 0.5) * 0.75,
                    ((p.position.z / 1.5).floor() + 0.5) * 1.5,
                    p.intensity,
                )
            })
            .collect();
        let v1 = filter_voxel(&centred, [1.5, 0.75, 1.5]);
        assert!(v1.len() <= centred.len());
        assert_eq!(filter_voxel(&v1, [1.5, 0.75, 1.5]), v1);
    }

    #[test]
    fn straight_line_scans_fill_in_after_warm_up() {
        let settings = ScanSettings::default();
        let kfs: Vec<Keyframe> = (0..150u64)
            .map(|i| {
                let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, i as f64));
                let points = (0..30)
                    .map(|k| IntensityPoint::new(((k % 7) as f64 - 3.0) * 2.0, 1.5, 1.5 * k as f64, 80))
                    .collect();
                kf(i, pose, points)
            })
            .collect();
        let scans = imitate_sequence(&kfs, &settings, &[FilterKind::Polar, FilterKind::Voxel]).unwrap();
        assert_eq!(scans.len(), 300);
        for scan in &scans {
            assert!(scan.points.iter().all(|p| p.range() <= settings.range + 1e-9));
        }
        let warm = (2.0 * settings.range) as usize;
        for scan in scans.iter().filter(|s| s.keyframe_id as usize >= warm) {
            assert!(!scan.points.is_empty());
        }
        let behind = scans
            .iter()
            .filter(|s| s.keyframe_id >= 100 && s.filter_kind == FilterKind::Polar)
            .all(|s| s.points.iter().any(|p| p.position.z < -10.0));
        assert!(behind);
    }

    #[test]
    fn archive_round_trip() {
        let archive = ScanArchive {
            fingerprint: "abc123".into(),
            scans: vec![
                FilteredScan {
                    keyframe_id: 3,
                    filter_kind: FilterKind::Voxel,
                    points: vec![IntensityPoint::new(0.1, -2.5, 1e-7, 255)],
                },
                FilteredScan {
                    keyframe_id: 4,
                    filter_kind: FilterKind::Polar,
                    points: vec![],
                },
            ],
        };
        let text = archive.to_text();
        assert!(text.starts_with("SCANS abc123\nSCAN 3 voxel 1\n"));
        assert_eq!(ScanArchive::parse(&text, "t").unwrap(), archive);
        assert!(ScanArchive::parse("SCANS x\nSCAN 1 cubic 0\n", "t").is_err());
    }

    #[test]
    fn split_archive_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let archive = ScanArchive {
            fingerprint: "f".into(),
            scans: (0..3)
                .map(|i| FilteredScan {
                    keyframe_id: i,
                    filter_kind: FilterKind::Polar,
                    points: vec![IntensityPoint::new(i as f64, 0.0, 1.0, 3)],
                })
                .collect(),
        };
        archive.save_split(dir.path()).unwrap();
        assert_eq!(ScanArchive::load_any(dir.path()).unwrap(), archive);
    }
}
