//! Keyframe sequences and their line-oriented text format.
//!
//! One record per keyframe:
//!
//! ```text
//! KF <id> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <n_points> [<gt_x> <gt_y> <gt_z>]
//! <x> <y> <z> <intensity>        (n_points lines, camera frame)
//! ```
//!
//! The pose is camera-to-world. Blank lines are ignored and fields may be
//! separated by any run of whitespace. [`format_sequence`] emits the canonical
//! form, which [`parse_sequence`] reads back bit-identically.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{IntensityPoint, RigidTransform, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct Keyframe {
    pub id: u64,
    /// Camera-to-world pose.
    pub pose: RigidTransform,
    /// Points in the camera frame.
    pub points: Vec<IntensityPoint>,
    /// Global position used only for evaluation.
    pub gt_position: Option<Vec3>,
}

impl Keyframe {
    pub fn new(id: u64, pose: RigidTransform) -> Self {
        Self {
            id,
            pose,
            points: Vec::new(),
            gt_position: None,
        }
    }

    pub fn origin(&self) -> &Vec3 {
        self.pose.translation()
    }
}

pub fn load_sequence(path: impl AsRef<Path>) -> Result<Vec<Keyframe>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sequence(&text, &path.display().to_string())
}

pub fn write_sequence(path: impl AsRef<Path>, keyframes: &[Keyframe]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_sequence(keyframes)).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers, split into fields.
pub(crate) struct Records<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Records<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
        }
    }
}

impl<'a> Iterator for Records<'a> {
    type Item = (usize, Vec<&'a str>);

    fn next(&mut self) -> Option<Self::Item> {
        for (idx, line) in self.lines.by_ref() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Some((idx + 1, fields));
            }
        }
        None
    }
}

pub(crate) fn parse_field<T: FromStr>(context: &str, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(context, line, format!("invalid {what} {field:?}")))
}

pub(crate) fn parse_real(context: &str, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = parse_field(context, line, field, what)?;
    if !v.is_finite() {
        return Err(Error::parse(context, line, format!("non-finite {what} {field:?}")));
    }
    Ok(v)
}

/// Parses one `<x> <y> <z> <intensity>` line.
pub(crate) fn parse_point(context: &str, line: usize, fields: &[&str]) -> Result<IntensityPoint> {
    if fields.len() != 4 {
        return Err(Error::parse(
            context,
            line,
            format!("expected 4 point fields, found {}", fields.len()),
        ));
    }
    let x = parse_real(context, line, fields[0], "x")?;
    let y = parse_real(context, line, fields[1], "y")?;
    let z = parse_real(context, line, fields[2], "z")?;
    let intensity: u8 = parse_field(context, line, fields[3], "intensity (0-255)")?;
    Ok(IntensityPoint::new(x, y, z, intensity))
}

pub(crate) fn write_point(out: &mut String, p: &IntensityPoint) {
    let _ = writeln!(
        out,
        "{} {} {} {}",
        p.position.x, p.position.y, p.position.z, p.intensity
    );
}

pub fn parse_sequence(text: &str, context: &str) -> Result<Vec<Keyframe>> {
    let mut records = Records::new(text);
    let mut keyframes: Vec<Keyframe> = Vec::new();

    while let Some((line, fields)) = records.next() {
        if fields[0] != "KF" {
            return Err(Error::parse(context, line, format!("expected KF record, found {:?}", fields[0])));
        }
        if fields.len() != 10 && fields.len() != 13 {
            return Err(Error::parse(
                context,
                line,
                format!("KF record needs 9 or 12 values, found {}", fields.len() - 1),
            ));
        }
        let id: u64 = parse_field(context, line, fields[1], "keyframe id")?;
        if let Some(prev) = keyframes.last() {
            if id <= prev.id {
                return Err(Error::NonMonotonicId {
                    previous: prev.id,
                    next: id,
                });
            }
        }
        let mut values = [0.0; 7];
        for (slot, field) in values.iter_mut().zip(&fields[2..9]) {
            *slot = parse_real(context, line, field, "pose value")?;
        }
        let translation = Vec3::new(values[0], values[1], values[2]);
        let pose = RigidTransform::from_quaternion([values[3], values[4], values[5], values[6]], translation)
            .map_err(|e| Error::parse(context, line, e.to_string()))?;
        let n_points: usize = parse_field(context, line, fields[9], "point count")?;
        let gt_position = if fields.len() == 13 {
            Some(Vec3::new(
                parse_real(context, line, fields[10], "gt_x")?,
                parse_real(context, line, fields[11], "gt_y")?,
                parse_real(context, line, fields[12], "gt_z")?,
            ))
        } else {
            None
        };

        let mut points = Vec::with_capacity(n_points);
        for _ in 0..n_points {
            let (pline, pfields) = records.next().ok_or_else(|| {
                Error::parse(
                    context,
                    line,
                    format!("keyframe {id} declares {n_points} points but the file ends after {}", points.len()),
                )
            })?;
            if pfields[0] == "KF" {
                return Err(Error::parse(
                    context,
                    pline,
                    format!("keyframe {id} declares {n_points} points, found {}", points.len()),
                ));
            }
            points.push(parse_point(context, pline, &pfields)?);
        }

        keyframes.push(Keyframe {
            id,
            pose,
            points,
            gt_position,
        });
    }
    Ok(keyframes)
}

pub fn format_sequence(keyframes: &[Keyframe]) -> String {
    let mut out = String::new();
    for kf in keyframes {
        let t = kf.pose.translation();
        let [qx, qy, qz, qw] = kf.pose.quaternion_xyzw();
        let _ = write!(
            out,
            "KF {} {} {} {} {} {} {} {} {}",
            kf.id,
            t.x,
            t.y,
            t.z,
            qx,
            qy,
            qz,
            qw,
            kf.points.len()
        );
        if let Some(gt) = kf.gt_position {
            let _ = write!(out, " {} {} {}", gt.x, gt.y, gt.z);
        }
        out.push('\n');
        for p in &kf.points {
            write_point(&mut out, p);
        }
    }
    out
}
