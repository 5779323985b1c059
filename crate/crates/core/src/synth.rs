//! Synthetic street worlds driven through by a forward-looking camera.
//!
//! The world frame is x east, y north, z up. A world is a fixed set of
//! surface points (ground, building facades, vegetation blobs); each keyframe
//! keeps the points inside the camera's horizontal field of view and range,
//! subsampled to at most `max_points`. Everything derives from `seed`, so a
//! spec always produces the same sequence.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{IntensityPoint, RigidTransform, Vec3};
use crate::keyframe::Keyframe;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub seed: u64,
    /// Meters travelled per keyframe.
    pub speed: f64,
    pub horizontal_fov_deg: f64,
    pub max_range: f64,
    pub max_points: usize,
    pub camera_height: f64,
    /// Std of the translation noise added to stored poses, meters. The
    /// points and ground truth use the noise-free pose.
    pub pose_jitter: f64,
    /// Std of the yaw noise added to stored poses, degrees.
    pub yaw_jitter_deg: f64,
    /// Planar path `[x, y]`; consecutive pairs are segments.
    pub waypoints: Vec<[f64; 2]>,
    pub revisits: Vec<Revisit>,
    pub facade_spacing: f64,
    pub ground: Option<GroundSpec>,
    pub street: Option<StreetSpec>,
    pub buildings: Vec<BuildingSpec>,
    pub vegetation: Vec<VegetationSpec>,
    /// Applied by [`SyntheticSequence::from_spec`] after generation.
    pub perturbation: Option<Perturbation>,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            speed: 2.0,
            horizontal_fov_deg: 90.0,
            max_range: 45.0,
            max_points: 800,
            camera_height: 1.7,
            pose_jitter: 0.0,
            yaw_jitter_deg: 0.0,
            waypoints: Vec::new(),
            revisits: Vec::new(),
            facade_spacing: 0.75,
            ground: None,
            street: None,
            buildings: Vec::new(),
            vegetation: Vec::new(),
            perturbation: None,
        }
    }
}

/// Segment `segment` retraces segment `of_segment`, shifted sideways by
/// `lateral_offset` meters (positive to the right of travel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Revisit {
    pub segment: usize,
    pub of_segment: usize,
    pub lateral_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundSpec {
    pub spacing: f64,
    /// Side of the square patches that share one mean intensity.
    pub patch_size: f64,
    /// Mean and std of patch intensities.
    pub intensity: [f64; 2],
}

impl Default for GroundSpec {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            patch_size: 6.0,
            intensity: [90.0, 35.0],
        }
    }
}

/// Procedural street along +x from the origin: lots of buildings on both
/// sides with gaps, and trees along the curbs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreetSpec {
    pub length: f64,
    pub half_width: f64,
    pub lot_length: [f64; 2],
    pub depth: [f64; 2],
    pub height: [f64; 2],
    pub gap_probability: f64,
    pub tree_spacing: f64,
    pub tree_probability: f64,
}

impl Default for StreetSpec {
    fn default() -> Self {
        Self {
            length: 300.0,
            half_width: 9.0,
            lot_length: [8.0, 25.0],
            depth: [8.0, 15.0],
            height: [4.0, 20.0],
            gap_probability: 0.3,
            tree_spacing: 12.0,
            tree_probability: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingSpec {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub height: f64,
    /// Mean facade intensity; alternate floors are offset by ±20.
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VegetationSpec {
    pub center: [f64; 3],
    pub radius: [f64; 3],
    pub points: usize,
    pub intensity: f64,
}

/// Appearance and structure change applied to (part of) a sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub seed: u64,
    pub intensity_gain: f64,
    pub intensity_bias: f64,
    /// Std of a per-element intensity offset.
    pub element_shift: f64,
    /// Std of a per-point intensity offset.
    pub point_noise: f64,
    /// Fraction of vegetation points moved to a new spot in their blob.
    pub vegetation_resample: f64,
    /// Inclusive keyframe id range; all keyframes when absent.
    pub keyframes: Option<[u64; 2]>,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            seed: 0,
            intensity_gain: 1.0,
            intensity_bias: 0.0,
            element_shift: 0.0,
            point_noise: 0.0,
            vegetation_resample: 0.0,
            keyframes: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementClass {
    Ground,
    Building,
    Vegetation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldPoint {
    pub position: Vec3,
    pub intensity: u8,
    pub class: ElementClass,
    /// Index within the class (ground patch, building or blob).
    pub element: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub points: Vec<WorldPoint>,
    pub blobs: Vec<VegetationSpec>,
}

/// Provenance of one keyframe point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointLabel {
    pub world_index: u32,
    pub class: ElementClass,
    pub element: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    pub world: World,
    pub keyframes: Vec<Keyframe>,
    /// Noise-free camera-to-world poses; points are expressed in these.
    pub true_poses: Vec<RigidTransform>,
    /// Parallel to each keyframe's points.
    pub labels: Vec<Vec<PointLabel>>,
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn normal(mean: f64, std: f64) -> Normal<f64> {
    Normal::new(mean, std.max(0.0)).expect("std is finite and non-negative")
}

fn to_intensity(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

impl WorldSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("world spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("world spec is always serializable")
    }

    /// A straight street of `length` meters driven out and back, the return
    /// pass `lateral_offset` meters to the side.
    pub fn out_and_back(seed: u64, length: f64, lateral_offset: f64) -> Self {
        Self {
            seed,
            waypoints: vec![[0.0, 0.0], [length, 0.0], [0.0, 0.0]],
            revisits: vec![Revisit {
                segment: 1,
                of_segment: 0,
                lateral_offset,
            }],
            ground: Some(GroundSpec::default()),
            street: Some(StreetSpec {
                length,
                ..StreetSpec::default()
            }),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("speed", self.speed)?;
        positive("max_range", self.max_range)?;
        positive("facade_spacing", self.facade_spacing)?;
        if !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg <= 360.0) {
            return Err(Error::InvalidParameter(format!(
                "horizontal_fov_deg must be in (0, 360], got {}",
                self.horizontal_fov_deg
            )));
        }
        if self.max_points == 0 {
            return Err(Error::InvalidParameter("max_points must be positive".into()));
        }
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidParameter("at least two waypoints are required".into()));
        }
        let segments = self.waypoints.len() - 1;
        for r in &self.revisits {
            if r.segment >= segments || r.of_segment >= segments {
                return Err(Error::InvalidParameter(format!(
                    "revisit refers to segment {} or {}, only {segments} exist",
                    r.segment, r.of_segment
                )));
            }
        }
        if let Some(g) = &self.ground {
            positive("ground.spacing", g.spacing)?;
            positive("ground.patch_size", g.patch_size)?;
        }
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        if self.ground.is_none() && self.street.is_none() && self.buildings.is_empty() && self.vegetation.is_empty() {
            return Err(Error::EmptyInput("world layout has no elements".into()));
        }
        Ok(())
    }

    /// Explicit buildings and blobs plus those of the procedural street.
    fn layout(&self, rng: &mut ChaCha8Rng) -> (Vec<BuildingSpec>, Vec<VegetationSpec>) {
        let mut buildings = self.buildings.clone();
        let mut blobs = self.vegetation.clone();
        let Some(street) = &self.street else {
            return (buildings, blobs);
        };
        for side in [-1.0, 1.0] {
            let mut x = 0.0;
            while x < street.length {
                let lot = uniform(rng, street.lot_length);
                if rng.random::<f64>() >= street.gap_probability {
                    let depth = uniform(rng, street.depth);
                    let setback = rng.random_range(0.0..3.0);
                    buildings.push(BuildingSpec {
                        center: [x + lot / 2.0, side * (street.half_width + setback + depth / 2.0)],
                        size: [lot * 0.9, depth],
                        height: uniform(rng, street.height),
                        intensity: rng.random_range(40.0..220.0),
                    });
                }
                x += lot;
            }
            let mut x = street.tree_spacing / 2.0;
            while street.tree_spacing > 0.0 && x < street.length {
                if rng.random::<f64>() < street.tree_probability {
                    let r = rng.random_range(1.5..3.5);
                    let h = rng.random_range(3.0..6.0);
                    blobs.push(VegetationSpec {
                        center: [x + rng.random_range(-2.0..2.0), side * (street.half_width - 1.0), h],
                        radius: [r, r, r * rng.random_range(0.8..1.4)],
                        points: (60.0 * r * r) as usize,
                        intensity: rng.random_range(30.0..150.0),
                    });
                }
                x += street.tree_spacing;
            }
        }
        (buildings, blobs)
    }

    /// Axis-aligned extent of the path grown by the sensor range.
    fn ground_extent(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for w in &self.waypoints {
            for k in 0..2 {
                lo[k] = lo[k].min(w[k] - self.max_range);
                hi[k] = hi[k].max(w[k] + self.max_range);
            }
        }
        (lo, hi)
    }

    pub fn build_world(&self) -> Result<World> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (buildings, blobs) = self.layout(&mut rng);
        let mut points = Vec::new();

        if let Some(g) = &self.ground {
            let (lo, hi) = self.ground_extent();
            let patch_mean = normal(g.intensity[0], g.intensity[1]);
            let grain = normal(0.0, 8.0);
            let mut patches: HashMap<(i64, i64), (u32, f64)> = HashMap::new();
            let nx = ((hi[0] - lo[0]) / g.spacing).floor() as i64;
            let ny = ((hi[1] - lo[1]) / g.spacing).floor() as i64;
            for iy in 0..=ny {
                for ix in 0..=nx {
                    let x = lo[0] + (ix as f64 + rng.random::<f64>()) * g.spacing;
                    let y = lo[1] + (iy as f64 + rng.random::<f64>()) * g.spacing;
                    let key = ((x / g.patch_size).floor() as i64, (y / g.patch_size).floor() as i64);
                    let next = patches.len() as u32;
                    let &mut (element, mean) = patches.entry(key).or_insert_with(|| (next, patch_mean.sample(&mut rng)));
                    points.push(WorldPoint {
                        position: Vec3::new(x, y, 0.0),
                        intensity: to_intensity(mean + grain.sample(&mut rng)),
                        class: ElementClass::Ground,
                        element,
                    });
                }
            }
        }

        let grain = normal(0.0, 10.0);
        for (element, b) in buildings.iter().enumerate() {
            let [cx, cy] = b.center;
            let [hx, hy] = [b.size[0] / 2.0, b.size[1] / 2.0];
            let corners = [[cx - hx, cy - hy], [cx + hx, cy - hy], [cx + hx, cy + hy], [cx - hx, cy + hy]];
            let floors = (b.height / self.facade_spacing).floor() as usize;
            for k in 0..4 {
                let (a, c) = (corners[k], corners[(k + 1) % 4]);
                let len = (c[0] - a[0]).hypot(c[1] - a[1]);
                let steps = (len / self.facade_spacing).floor() as usize;
                for s in 0..steps {
                    let t = (s as f64 + rng.random::<f64>()) / steps as f64;
                    for f in 0..=floors {
                        let z = (f as f64 * self.facade_spacing).min(b.height);
                        let stripe = if (z / 3.0) as i64 % 2 == 0 { 20.0 } else { -20.0 };
                        points.push(WorldPoint {
                            position: Vec3::new(a[0] + t * (c[0] - a[0]), a[1] + t * (c[1] - a[1]), z),
                            intensity: to_intensity(b.intensity + stripe + grain.sample(&mut rng)),
                            class: ElementClass::Building,
                            element: element as u32,
                        });
                    }
                }
            }
        }

        for (element, blob) in blobs.iter().enumerate() {
            for _ in 0..blob.points {
                points.push(WorldPoint {
                    position: sample_blob(blob, &mut rng),
                    intensity: to_intensity(blob.intensity + grain.sample(&mut rng)),
                    class: ElementClass::Vegetation,
                    element: element as u32,
                });
            }
        }

        if points.is_empty() {
            return Err(Error::EmptyInput("world layout produced no points".into()));
        }
        Ok(World { points, blobs })
    }

    /// Noise-free camera poses along the path, one every `speed` meters.
    pub fn trajectory(&self) -> Result<Vec<RigidTransform>> {
        self.validate()?;
        let mut poses = Vec::new();
        let mut carry = 0.0;
        for (seg, pair) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            if len == 0.0 {
                continue;
            }
            let heading = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            let right = [heading[1], -heading[0]];
            let offset = self
                .revisits
                .iter()
                .filter(|r| r.segment == seg)
                .map(|r| r.lateral_offset)
                .sum::<f64>();
            let rotation = Matrix3::from_columns(&[
                Vec3::new(right[0], right[1], 0.0),
                Vec3::new(0.0, 0.0, -1.0),
                Vec3::new(heading[0], heading[1], 0.0),
            ]);
            let mut s = carry;
            while s < len {
                let t = Vec3::new(
                    a[0] + s * heading[0] + offset * right[0],
                    a[1] + s * heading[1] + offset * right[1],
                    self.camera_height,
                );
                poses.push(RigidTransform::new(rotation, t)?);
                s += self.speed;
            }
            carry = s - len;
        }
        Ok(poses)
    }
}

fn sample_blob(blob: &VegetationSpec, rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let u = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if u.norm_squared() <= 1.0 {
            return Vec3::new(
                blob.center[0] + u.x * blob.radius[0],
                blob.center[1] + u.y * blob.radius[1],
                blob.center[2] + u.z * blob.radius[2],
            );
        }
    }
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.vegetation_resample) {
            return Err(Error::InvalidParameter(format!(
                "vegetation_resample must be in [0, 1], got {}",
                self.vegetation_resample
            )));
        }
        for (name, v) in [("element_shift", self.element_shift), ("point_noise", self.point_noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.intensity_gain.is_finite() || !self.intensity_bias.is_finite() {
            return Err(Error::InvalidParameter("intensity gain and bias must be finite".into()));
        }
        Ok(())
    }

    fn applies_to(&self, id: u64) -> bool {
        self.keyframes.is_none_or(|[lo, hi]| (lo..=hi).contains(&id))
    }

    /// Independent random stream for one world point or element, so every
    /// observation of it is perturbed the same way.
    fn stream(&self, namespace: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((namespace << 48) ^ index);
        rng
    }
}

fn class_code(class: ElementClass) -> u64 {
    match class {
        ElementClass::Ground => 0,
        ElementClass::Building => 1,
        ElementClass::Vegetation => 2,
    }
}

impl SyntheticSequence {
    /// World, trajectory and keyframes; the spec's perturbation, if any, is
    /// applied last.
    pub fn from_spec(spec: &WorldSpec) -> Result<Self> {
        let world = spec.build_world()?;
        let true_poses = spec.trajectory()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1);
        let half_fov = spec.horizontal_fov_deg.to_radians() / 2.0;
        let jitter = normal(0.0, spec.pose_jitter);
        let yaw_jitter = normal(0.0, spec.yaw_jitter_deg.to_radians());

        let mut keyframes = Vec::with_capacity(true_poses.len());
        let mut labels = Vec::with_capacity(true_poses.len());
        for (k, pose) in true_poses.iter().enumerate() {
            let to_camera = pose.inverse();
            let mut visible = Vec::new();
            for (w, wp) in world.points.iter().enumerate() {
                let p = to_camera.transform_point(&wp.position);
                if p.norm() <= spec.max_range && p.z > 0.0 && p.x.abs().atan2(p.z) <= half_fov.min(PI) {
                    visible.push((w, p));
                }
            }
            if visible.len() > spec.max_points {
                let mut keep = rand::seq::index::sample(&mut rng, visible.len(), spec.max_points).into_vec();
                keep.sort_unstable();
                visible = keep.into_iter().map(|i| visible[i]).collect();
            }
            let stored = if spec.pose_jitter > 0.0 || spec.yaw_jitter_deg > 0.0 {
                let noise = RigidTransform::from_axis_angle(
                    Vec3::z(),
                    yaw_jitter.sample(&mut rng),
                    Vec3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng)),
                );
                let moved = noise.compose(&RigidTransform::from_translation(-pose.translation()));
                RigidTransform::from_translation(*pose.translation()).compose(&moved).compose(pose)
            } else {
                pose.clone()
            };
            let mut kf = Keyframe::new(k as u64, stored);
            kf.gt_position = Some(*pose.translation());
            kf.points = visible
                .iter()
                .map(|&(w, p)| IntensityPoint {
                    position: p,
                    intensity: world.points[w].intensity,
                })
                .collect();
            labels.push(
                visible
                    .iter()
                    .map(|&(w, _)| PointLabel {
                        world_index: w as u32,
                        class: world.points[w].class,
                        element: world.points[w].element,
                    })
                    .collect(),
            );
            keyframes.push(kf);
        }

        let sequence = Self {
            world,
            keyframes,
            true_poses,
            labels,
        };
        match &spec.perturbation {
            Some(p) => sequence.perturb(p),
            None => Ok(sequence),
        }
    }

    /// Applies `p` to the keyframes in its id range. Buildings and ground
    /// keep their positions; only intensities and resampled vegetation move.
    pub fn perturb(&self, p: &Perturbation) -> Result<Self> {
        p.validate()?;
        let mut out = self.clone();
        let shift = normal(0.0, p.element_shift);
        let noise = normal(0.0, p.point_noise);
        let mut element_shift: HashMap<(ElementClass, u32), f64> = HashMap::new();

        for ((kf, labels), pose) in out.keyframes.iter_mut().zip(&self.labels).zip(&self.true_poses) {
            if !p.applies_to(kf.id) {
                continue;
            }
            let to_camera = pose.inverse();
            for (pt, label) in kf.points.iter_mut().zip(labels) {
                let w = label.world_index as u64;
                if label.class == ElementClass::Vegetation && p.vegetation_resample > 0.0 {
                    let mut rng = p.stream(1, w);
                    if rng.random::<f64>() < p.vegetation_resample {
                        let moved = sample_blob(&self.world.blobs[label.element as usize], &mut rng);
                        pt.position = to_camera.transform_point(&moved);
                    }
                }
                let offset = *element_shift.entry((label.class, label.element)).or_insert_with(|| {
                    let mut rng = p.stream(2 + class_code(label.class), label.element as u64);
                    shift.sample(&mut rng)
                });
                let mut rng = p.stream(5, w);
                let value = p.intensity_gain * pt.intensity as f64 + p.intensity_bias + offset + noise.sample(&mut rng);
                pt.intensity = to_intensity(value);
            }
        }
        Ok(out)
    }

    /// Keyframes with ids in `lo..=hi`.
    pub fn keyframes_in(&self, lo: u64, hi: u64) -> Vec<Keyframe> {
        self.keyframes.iter().filter(|k| (lo..=hi).contains(&k.id)).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyframe::format_sequence;

    fn small_spec(seed: u64) -> WorldSpec {
        let mut spec = WorldSpec::out_and_back(seed, 80.0, 0.0);
        spec.speed = 4.0;
        spec
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = SyntheticSequence::from_spec(&small_spec(3)).unwrap();
        let b = SyntheticSequence::from_spec(&small_spec(3)).unwrap();
        assert_eq!(format_sequence(&a.keyframes), format_sequence(&b.keyframes));
        let c = SyntheticSequence::from_spec(&small_spec(4)).unwrap();
        assert_ne!(format_sequence(&a.keyframes), format_sequence(&c.keyframes));
    }

    #[test]
    fn frustum_and_budget() {
        let spec = small_spec(1);
        let seq = SyntheticSequence::from_spec(&spec).unwrap();
        assert_eq!(seq.keyframes.len(), 40);
        for kf in &seq.keyframes {
            assert!(!kf.points.is_empty() && kf.points.len() <= spec.max_points);
            for p in &kf.points {
                assert!(p.position.z > 0.0 && p.position.norm() <= 45.0);
                assert!(p.position.x.abs() <= p.position.z + 1e-9);
            }
        }
    }

    #[test]
    fn out_and_back_revisits_pair_up() {
        let seq = SyntheticSequence::from_spec(&small_spec(1)).unwrap();
        let gt = |k: usize| seq.keyframes[k].gt_position.unwrap();
        for k in 0..20 {
            let back = 39 - k;
            assert!((gt(k) - gt(back)).norm() < 10.0);
        }
    }

    #[test]
    fn straight_street_has_no_distant_revisits() {
        let mut spec = WorldSpec::out_and_back(2, 200.0, 0.0);
        spec.waypoints.pop();
        spec.revisits.clear();
        let poses = spec.trajectory().unwrap();
        for (i, a) in poses.iter().enumerate() {
            for (j, b) in poses.iter().enumerate() {
                if i.abs_diff(j) > 5 {
                    assert!((a.translation() - b.translation()).norm() >= 10.0);
                }
            }
        }
    }

    #[test]
    fn lateral_offset_moves_return_pass() {
        let spec = WorldSpec::out_and_back(1, 40.0, 3.0);
        let poses = spec.trajectory().unwrap();
        let back = poses.last().unwrap().translation();
        // Travelling west, right is north.
        assert!((back.y - 3.0).abs() < 1e-12);
    }

    #[test]
    fn camera_looks_along_the_path() {
        let poses = small_spec(1).trajectory().unwrap();
        let forward = poses[0].rotation() * Vec3::z();
        let down = poses[0].rotation() * Vec3::y();
        assert!((forward - Vec3::x()).norm() < 1e-12);
        assert!((down + Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn empty_layout_is_rejected() {
        let spec = WorldSpec {
            waypoints: vec![[0.0, 0.0], [10.0, 0.0]],
            ..WorldSpec::default()
        };
        assert!(matches!(SyntheticSequence::from_spec(&spec), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let seq = SyntheticSequence::from_spec(&small_spec(5)).unwrap();
        assert_eq!(seq.perturb(&Perturbation::default()).unwrap(), seq);
    }

    #[test]
    fn intensity_only_keeps_positions() {
        let seq = SyntheticSequence::from_spec(&small_spec(5)).unwrap();
        let p = Perturbation {
            seed: 9,
            intensity_gain: 0.7,
            intensity_bias: 30.0,
            element_shift: 40.0,
            point_noise: 10.0,
            ..Perturbation::default()
        };
        let out = seq.perturb(&p).unwrap();
        let mut changed = 0;
        for (a, b) in seq.keyframes.iter().zip(&out.keyframes) {
            for (x, y) in a.points.iter().zip(&b.points) {
                assert_eq!(x.position, y.position);
                changed += usize::from(x.intensity != y.intensity);
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn vegetation_resample_fraction() {
        let seq = SyntheticSequence::from_spec(&small_spec(6)).unwrap();
        let p = Perturbation {
            seed: 2,
            vegetation_resample: 0.3,
            ..Perturbation::default()
        };
        let out = seq.perturb(&p).unwrap();
        let (mut veg, mut moved) = (0usize, 0usize);
        for ((a, b), labels) in seq.keyframes.iter().zip(&out.keyframes).zip(&seq.labels) {
            for ((x, y), l) in a.points.iter().zip(&b.points).zip(labels) {
                if l.class == ElementClass::Vegetation {
                    veg += 1;
                    moved += usize::from(x.position != y.position);
                } else {
                    assert_eq!(x.position, y.position);
                }
            }
        }
        let fraction = moved as f64 / veg as f64;
        assert!(veg > 500, "{veg} vegetation points");
        assert!((fraction - 0.3).abs() < 0.05, "{fraction}");
    }

    #[test]
    fn perturbation_respects_keyframe_range() {
        let seq = SyntheticSequence::from_spec(&small_spec(7)).unwrap();
        let p = Perturbation {
            intensity_bias: 50.0,
            keyframes: Some([20, 39]),
            ..Perturbation::default()
        };
        let out = seq.perturb(&p).unwrap();
        assert_eq!(seq.keyframes[..20], out.keyframes[..20]);
        assert_ne!(seq.keyframes[20..], out.keyframes[20..]);
    }

    #[test]
    fn jitter_moves_stored_pose_only() {
        let mut spec = small_spec(8);
        spec.pose_jitter = 0.5;
        spec.yaw_jitter_deg = 2.0;
        let noisy = SyntheticSequence::from_spec(&spec).unwrap();
        let clean = SyntheticSequence::from_spec(&small_spec(8)).unwrap();
        assert_eq!(noisy.true_poses, clean.true_poses);
        let kf = &noisy.keyframes[3];
        assert_ne!(kf.pose, clean.keyframes[3].pose);
        assert_eq!(kf.gt_position, clean.keyframes[3].gt_position);
        assert!((kf.origin() - kf.gt_position.unwrap()).norm() < 5.0);
    }

    #[test]
    fn spec_toml_round_trip() {
        let mut spec = small_spec(1);
        spec.perturbation = Some(Perturbation {
            keyframes: Some([3, 9]),
            ..Perturbation::default()
        });
        assert_eq!(WorldSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        assert!(WorldSpec::from_toml("seed = 1\nwaypoints = [[0.0, 0.0]]\n").is_err());
    }
}
