//! Difference matrices between query and reference signatures, their row-
//! normalized fusion, and nearest-reference matching.
//!
//! `D_fused = w_s · N_row(D_s) + N_row(D_i)`, where `N_row` shifts each row to
//! mean 0 and scales it to population standard deviation 1.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::SignatureArchive;
use crate::descriptors::{DescriptorKind, ScanContextSignature, Signature};
use crate::error::{Error, Result};

/// Which variant pairs `min_variant_distance` searches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantPairing {
    /// All 4 × 4 query/reference variant pairs; symmetric in its arguments.
    #[default]
    Symmetric,
    /// Query variant 0 against the 4 reference variants.
    QueryToReference,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchOptions {
    pub pairing: VariantPairing,
    pub structure_weight: f64,
    /// Same-sequence matching: references whose id is within this many of
    /// the query id are not candidates.
    pub exclusion_window: Option<u64>,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            pairing: VariantPairing::Symmetric,
            structure_weight: 2.0,
            exclusion_window: None,
        }
    }
}

impl MatchOptions {
    pub fn is_candidate(&self, query_id: u64, reference_id: u64) -> bool {
        match self.exclusion_window {
            None => true,
            Some(window) => query_id.abs_diff(reference_id) > window,
        }
    }
}

/// `Σ (a_i − b_i)² / (a_i + b_i)`, skipping bins where both are zero.
pub fn chi_squared_distance<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    // Four independent lanes so the loop vectorizes.
    let term = |x: T, y: T| {
        let (x, y) = (x.into(), y.into());
        let s = x + y;
        if s > 0.0 {
            let d = x - y;
            d * d / s
        } else {
            0.0
        }
    };
    let mut lanes = [0.0f64; 4];
    let (ca, ra) = (a.chunks_exact(4), a.chunks_exact(4).remainder());
    let rb = b.chunks_exact(4).remainder();
    for (xa, xb) in ca.zip(b.chunks_exact(4)) {
        for l in 0..4 {
            lanes[l] += term(xa[l], xb[l]);
        }
    }
    let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (&x, &y) in ra.iter().zip(rb) {
        acc += term(x, y);
    }
    Ok(acc)
}

/// A vector scaled to unit L2 norm, or marked as the zero vector.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector {
    values: Vec<f64>,
    zero: bool,
}

impl UnitVector {
    pub fn new<T: Copy + Into<f64>>(v: &[T]) -> Self {
        let values: Vec<f64> = v.iter().map(|&x| x.into()).collect();
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            Self {
                values: values.iter().map(|x| x / norm).collect(),
                zero: false,
            }
        } else {
            Self { values, zero: true }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean distance between unit vectors; 0 between two zero vectors
    /// and 2 between a zero and a non-zero vector.
    pub fn distance(&self, other: &UnitVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(match (self.zero, other.zero) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 2.0,
            (false, false) => self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        })
    }
}

/// `‖a/‖a‖ − b/‖b‖‖₂`, in `[0, 2]`. See [`UnitVector::distance`] for zero
/// vectors.
pub fn euclidean_signature_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    UnitVector::new(a).distance(&UnitVector::new(b))
}

/// Smallest `metric` distance between variants of `a` (query) and `b`
/// (reference).
pub fn min_variant_distance<S, F>(a: &[S; 4], b: &[S; 4], pairing: VariantPairing, metric: F) -> Result<f64>
where
    F: Fn(&S, &S) -> Result<f64>,
{
    let queries = match pairing {
        VariantPairing::Symmetric => &a[..],
        VariantPairing::QueryToReference => &a[..1],
    };
    let mut best = f64::INFINITY;
    for qa in queries {
        for rb in b {
            best = best.min(metric(qa, rb)?);
        }
    }
    Ok(best)
}

/// Row-major `rings × sectors` grid with columns rotated by `shift`:
/// `out[i][j] = grid[i][(j + shift) % sectors]`.
pub fn shift_columns<T: Copy>(grid: &[T], sectors: usize, shift: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(grid.len());
    for row in grid.chunks(sectors) {
        for j in 0..sectors {
            out.push(row[(j + shift) % sectors]);
        }
    }
    out
}

/// Normalized Scan Context grids ready for shift search.
#[derive(Clone, Debug)]
pub struct PreparedScanContext {
    rings: usize,
    sectors: usize,
    structure: UnitVector,
    intensity: UnitVector,
    /// Each structure row written twice, so shifted rows are contiguous.
    doubled: Vec<f64>,
}

impl PreparedScanContext {
    pub fn new(sig: &ScanContextSignature) -> Self {
        let structure = UnitVector::new(&sig.structure);
        Self {
            rings: sig.rings,
            sectors: sig.sectors,
            doubled: structure
                .values()
                .chunks(sig.sectors.max(1))
                .flat_map(|row| row.iter().chain(row))
                .copied()
                .collect(),
            structure,
            intensity: UnitVector::new(&sig.intensity),
        }
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.rings != other.rings || self.sectors != other.sectors {
            return Err(Error::ParameterMismatch(format!(
                "Scan Context grids {}x{} vs {}x{}",
                self.rings, self.sectors, other.rings, other.sectors
            )));
        }
        Ok(())
    }

    /// Column shift of `other` that best aligns its structure grid with
    /// `self`'s (smallest shift on ties), and the structure distance there.
    pub fn best_shift(&self, other: &Self) -> Result<(usize, f64)> {
        self.check_dims(other)?;
        if self.structure.is_zero() || other.structure.is_zero() {
            return Ok((0, self.structure.distance(&other.structure)?));
        }
        let s = self.sectors;
        let mut dots = vec![0.0; s];
        let a = self.structure.values();
        let b = other.structure.values();
        for (ra, rb) in a.chunks(s).zip(other.doubled.chunks(2 * s)) {
            for (j, &x) in ra.iter().enumerate() {
                if x != 0.0 {
                    for (dot, &y) in dots.iter_mut().zip(&rb[j..j + s]) {
                        *dot += x * y;
                    }
                }
            }
        }
        let mut best = 0;
        for (k, &d) in dots.iter().enumerate() {
            if d > dots[best] {
                best = k;
            }
        }
        Ok((best, shifted_distance(a, b, s, best)))
    }

    /// Intensity-grid distance with `other` rotated by `shift` columns.
    pub fn intensity_distance_at(&self, other: &Self, shift: usize) -> Result<f64> {
        self.check_dims(other)?;
        Ok(match (self.intensity.is_zero(), other.intensity.is_zero()) {
            (true, true) => 0.0,
            (true, false) | (false, true) => 2.0,
            (false, false) => shifted_distance(self.intensity.values(), other.intensity.values(), self.sectors, shift),
        })
    }
}

fn shifted_distance(a: &[f64], b: &[f64], sectors: usize, shift: usize) -> f64 {
    let mut acc = 0.0;
    for (ra, rb) in a.chunks(sectors).zip(b.chunks(sectors)) {
        for j in 0..sectors {
            let d = ra[j] - rb[(j + shift) % sectors];
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Structure distance minimized over all circular column shifts of `b`.
pub fn scan_context_distance(a: &ScanContextSignature, b: &ScanContextSignature) -> Result<f64> {
    Ok(PreparedScanContext::new(a).best_shift(&PreparedScanContext::new(b))?.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Structure,
    Intensity,
    Fused,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            MatrixKind::Structure => "structure",
            MatrixKind::Intensity => "intensity",
            MatrixKind::Fused => "fused",
        })
    }
}

/// Queries × references matrix. Entries that are not candidates (temporal
/// exclusion) are masked out and ignored by normalization and matching.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceMatrix {
    pub kind: MatrixKind,
    pub query_ids: Vec<u64>,
    pub reference_ids: Vec<u64>,
    values: Vec<f64>,
    candidate: Vec<bool>,
}

impl DifferenceMatrix {
    /// Row-major `values`, every entry a candidate.
    pub fn new(kind: MatrixKind, query_ids: Vec<u64>, reference_ids: Vec<u64>, values: Vec<f64>) -> Result<Self> {
        let candidate = vec![true; values.len()];
        Self::with_candidates(kind, query_ids, reference_ids, values, candidate)
    }

    pub fn with_candidates(
        kind: MatrixKind,
        query_ids: Vec<u64>,
        reference_ids: Vec<u64>,
        values: Vec<f64>,
        candidate: Vec<bool>,
    ) -> Result<Self> {
        let n = query_ids.len() * reference_ids.len();
        if values.len() != n || candidate.len() != n {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n,
            });
        }
        Ok(Self {
            kind,
            query_ids,
            reference_ids,
            values,
            candidate,
        })
    }

    pub fn rows(&self) -> usize {
        self.query_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.reference_ids.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn is_candidate(&self, row: usize, col: usize) -> bool {
        self.candidate[row * self.cols() + col]
    }

    fn row_candidates(&self, row: usize) -> &[bool] {
        let c = self.cols();
        &self.candidate[row * c..(row + 1) * c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_same_shape(&self, other: &DifferenceMatrix) -> Result<()> {
        if self.query_ids != other.query_ids || self.reference_ids != other.reference_ids || self.candidate != other.candidate
        {
            return Err(Error::ParameterMismatch("difference matrices have different shapes".into()));
        }
        Ok(())
    }

    /// CSV with a `# fingerprint=... kind=...` comment line, a header of
    /// reference ids, and one row per query. Masked entries are empty.
    pub fn write_csv<W: Write>(&self, out: W, fingerprint: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# fingerprint={fingerprint} kind={}", self.kind).map_err(|e| Error::io("<csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["query_id".to_string()];
        header.extend(self.reference_ids.iter().map(u64::to_string));
        w.write_record(&header).map_err(csv_error)?;
        for (q, qid) in self.query_ids.iter().enumerate() {
            let mut rec = vec![qid.to_string()];
            for c in 0..self.cols() {
                rec.push(if self.is_candidate(q, c) {
                    format!("{}", self.get(q, c))
                } else {
                    String::new()
                });
            }
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, fingerprint: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), fingerprint)
    }

    /// Reads what [`DifferenceMatrix::write_csv`] wrote; returns the matrix and
    /// its fingerprint.
    pub fn read_csv<R: Read>(input: R) -> Result<(Self, String)> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text).map_err(|e| Error::io("<csv>", e))?;
        let (fingerprint, kind) = parse_comment(&text)?;
        let kind = match kind.as_str() {
            "structure" => MatrixKind::Structure,
            "intensity" => MatrixKind::Intensity,
            "fused" => MatrixKind::Fused,
            other => return Err(Error::parse("<csv>", 1, format!("unknown matrix kind {other:?}"))),
        };
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_error)?.clone();
        let reference_ids = header
            .iter()
            .skip(1)
            .map(|f| parse_u64(f, 1))
            .collect::<Result<Vec<_>>>()?;
        let mut query_ids = Vec::new();
        let mut values = Vec::new();
        let mut candidate = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            let line = k + 3;
            query_ids.push(parse_u64(&rec[0], line)?);
            for field in rec.iter().skip(1) {
                if field.is_empty() {
                    values.push(f64::NAN);
                    candidate.push(false);
                } else {
                    values.push(field.parse().map_err(|_| Error::parse("<csv>", line, format!("bad value {field:?}")))?);
                    candidate.push(true);
                }
            }
        }
        Ok((Self::with_candidates(kind, query_ids, reference_ids, values, candidate)?, fingerprint))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::parse("<csv>", e.position().map_or(0, |p| p.line() as usize), e.to_string())
}

fn parse_u64(field: &str, line: usize) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse("<csv>", line, format!("bad id {field:?}")))
}

/// Extracts `fingerprint` and `kind` from the leading `# key=value` line.
fn parse_comment(text: &str) -> Result<(String, String)> {
    let first = text.lines().next().unwrap_or_default();
    let body = first
        .strip_prefix('#')
        .ok_or_else(|| Error::parse("<csv>", 1, "missing `# fingerprint=...` line"))?;
    let mut fingerprint = None;
    let mut kind = String::new();
    for token in body.split_whitespace() {
        match token.split_once('=') {
            Some(("fingerprint", v)) => fingerprint = Some(v.to_string()),
            Some(("kind", v)) => kind = v.to_string(),
            _ => {}
        }
    }
    let fingerprint = fingerprint.ok_or_else(|| Error::parse("<csv>", 1, "missing fingerprint"))?;
    Ok((fingerprint, kind))
}

/// Structure and intensity matrices for one descriptor. DELIGHT has no
/// structure part; its single chi-squared matrix is the intensity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceMatrices {
    pub structure: Option<DifferenceMatrix>,
    pub intensity: DifferenceMatrix,
}

/// Count histogram with its nonzero bins listed, for chi-squared distances
/// on mostly empty histograms.
#[derive(Clone, Debug)]
struct SparseHistogram {
    dense: Vec<u32>,
    nonzero: Vec<(usize, u32)>,
    total: u64,
}

impl SparseHistogram {
    fn new(h: &[u32]) -> Self {
        Self {
            dense: h.to_vec(),
            nonzero: h.iter().enumerate().filter(|(_, &v)| v > 0).map(|(i, &v)| (i, v)).collect(),
            total: h.iter().map(|&v| u64::from(v)).sum(),
        }
    }

    /// Same value as [`chi_squared_distance`] up to summation order. Bins
    /// empty in `self` contribute exactly their count in `other`.
    fn chi_squared(&self, other: &Self) -> Result<f64> {
        if self.dense.len() != other.dense.len() {
            return Err(Error::LengthMismatch {
                left: self.dense.len(),
                right: other.dense.len(),
            });
        }
        let mut acc = 0.0;
        let mut covered = 0u64;
        for &(i, x) in &self.nonzero {
            let y = other.dense[i];
            covered += u64::from(y);
            let d = f64::from(x) - f64::from(y);
            acc += d * d / (f64::from(x) + f64::from(y));
        }
        Ok(acc + (other.total - covered) as f64)
    }
}

enum Prepared {
    Delight([SparseHistogram; 4]),
    M2dp {
        structure: [UnitVector; 4],
        intensity: [UnitVector; 4],
    },
    ScanContext(PreparedScanContext),
}

impl Prepared {
    fn new(sig: &Signature) -> Self {
        match sig {
            Signature::Delight(d) => Prepared::Delight(std::array::from_fn(|k| SparseHistogram::new(&d.histograms[k]))),
            Signature::M2dp(m) => Prepared::M2dp {
                structure: std::array::from_fn(|k| UnitVector::new(&m.structure[k])),
                intensity: std::array::from_fn(|k| UnitVector::new(&m.intensity[k])),
            },
            Signature::ScanContext(s) => Prepared::ScanContext(PreparedScanContext::new(s)),
        }
    }

    /// `(structure, intensity)` distance; structure is NaN for DELIGHT.
    fn distances(&self, reference: &Prepared, pairing: VariantPairing) -> Result<(f64, f64)> {
        match (self, reference) {
            (Prepared::Delight(a), Prepared::Delight(b)) => Ok((
                f64::NAN,
                min_variant_distance(a, b, pairing, |x, y| x.chi_squared(y))?,
            )),
            (
                Prepared::M2dp {
                    structure: sa,
                    intensity: ia,
                },
                Prepared::M2dp {
                    structure: sb,
                    intensity: ib,
                },
            ) => Ok((
                min_variant_distance(sa, sb, pairing, |x, y| x.distance(y))?,
                min_variant_distance(ia, ib, pairing, |x, y| x.distance(y))?,
            )),
            (Prepared::ScanContext(a), Prepared::ScanContext(b)) => {
                let (shift, structure) = a.best_shift(b)?;
                Ok((structure, a.intensity_distance_at(b, shift)?))
            }
            _ => Err(Error::ParameterMismatch("signatures of different descriptors".into())),
        }
    }
}

/// Fills `D_s` and `D_i` for every (query, reference) candidate pair.
///
/// DELIGHT and M2DP take the smallest distance over PCA variant pairs. Scan
/// Context searches every column shift on the structure grid and evaluates
/// the intensity grid at that same shift, so both matrices refer to one yaw.
pub fn build_difference_matrices(
    queries: &SignatureArchive,
    references: &SignatureArchive,
    options: &MatchOptions,
) -> Result<DifferenceMatrices> {
    queries.header.check_compatible(&references.header)?;
    if queries.entries.is_empty() || references.entries.is_empty() {
        return Err(Error::EmptyInput("query and reference sets must be non-empty".into()));
    }
    let kind = queries.header.descriptor;
    let signatures = |archive: &SignatureArchive| -> Result<Vec<Prepared>> {
        archive
            .entries
            .iter()
            .map(|e| {
                if e.signature.kind() != kind {
                    Err(Error::ParameterMismatch(format!(
                        "keyframe {} holds a {} signature in a {kind} archive",
                        e.keyframe_id,
                        e.signature.kind()
                    )))
                } else {
                    Ok(Prepared::new(&e.signature))
                }
            })
            .collect()
    };
    let prepared_queries = signatures(queries)?;
    let prepared_refs = signatures(references)?;
    let query_ids = queries.ids();
    let reference_ids = references.ids();
    let cols = reference_ids.len();

    let rows: Vec<Vec<(f64, f64, bool)>> = prepared_queries
        .par_iter()
        .zip(query_ids.par_iter())
        .map(|(q, &qid)| {
            prepared_refs
                .iter()
                .zip(&reference_ids)
                .map(|(r, &rid)| {
                    if options.is_candidate(qid, rid) {
                        let (s, i) = q.distances(r, options.pairing)?;
                        Ok((s, i, true))
                    } else {
                        Ok((f64::NAN, f64::NAN, false))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut structure = Vec::with_capacity(rows.len() * cols);
    let mut intensity = Vec::with_capacity(rows.len() * cols);
    let mut candidate = Vec::with_capacity(rows.len() * cols);
    for (s, i, c) in rows.into_iter().flatten() {
        structure.push(s);
        intensity.push(i);
        candidate.push(c);
    }

    let structure = if kind.has_structure() {
        Some(DifferenceMatrix::with_candidates(
            MatrixKind::Structure,
            query_ids.clone(),
            reference_ids.clone(),
            structure,
            candidate.clone(),
        )?)
    } else {
        None
    };
    let intensity =
        DifferenceMatrix::with_candidates(MatrixKind::Intensity, query_ids, reference_ids, intensity, candidate)?;
    Ok(DifferenceMatrices { structure, intensity })
}

impl DifferenceMatrices {
    pub fn descriptor_matrices(&self) -> impl Iterator<Item = &DifferenceMatrix> {
        self.structure.iter().chain(std::iter::once(&self.intensity))
    }

    /// The fused matrix, or `None` for DELIGHT (intensity only).
    pub fn fused(&self, structure_weight: f64) -> Result<Option<DifferenceMatrix>> {
        self.structure
            .as_ref()
            .map(|s| fuse(s, &self.intensity, structure_weight))
            .transpose()
    }
}

/// Each row shifted to mean 0 and scaled to population std 1 over its
/// candidate entries. Rows with zero spread become all zeros.
pub fn row_normalize(d: &DifferenceMatrix) -> DifferenceMatrix {
    let cols = d.cols();
    let mut values = d.values.clone();
    for (r, row) in values.chunks_mut(cols.max(1)).enumerate().take(d.rows()) {
        let mask = d.row_candidates(r);
        let picked: Vec<f64> = row.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
        let n = picked.len() as f64;
        let mean = picked.iter().sum::<f64>() / n;
        let std = (picked.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let degenerate = picked.is_empty() || !(std > 0.0) || !std.is_finite();
        if degenerate && !picked.is_empty() {
            warn!(
                "{} row for query {} has zero spread; normalized to zeros",
                d.kind, d.query_ids[r]
            );
        }
        for (v, &m) in row.iter_mut().zip(mask) {
            if !m {
                continue;
            }
            *v = if degenerate { 0.0 } else { (*v - mean) / std };
        }
    }
    DifferenceMatrix {
        kind: d.kind,
        query_ids: d.query_ids.clone(),
        reference_ids: d.reference_ids.clone(),
        values,
        candidate: d.candidate.clone(),
    }
}

/// `w_s · N_row(D_s) + N_row(D_i)`.
pub fn fuse(structure: &DifferenceMatrix, intensity: &DifferenceMatrix, structure_weight: f64) -> Result<DifferenceMatrix> {
    structure.check_same_shape(intensity)?;
    let ns = row_normalize(structure);
    let ni = row_normalize(intensity);
    let values = ns
        .values
        .iter()
        .zip(&ni.values)
        .zip(&structure.candidate)
        .map(|((s, i), &c)| if c { structure_weight * s + i } else { f64::NAN })
        .collect();
    DifferenceMatrix::with_candidates(
        MatrixKind::Fused,
        structure.query_ids.clone(),
        structure.reference_ids.clone(),
        values,
        structure.candidate.clone(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchEntry {
    pub query_id: u64,
    pub reference_id: u64,
    pub difference: f64,
}

/// Best reference per query, in query order. Queries without any candidate
/// reference are absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchResult {
    pub entries: Vec<MatchEntry>,
}

/// Row argmin over candidates; ties go to the smallest reference id.
pub fn match_rows(d: &DifferenceMatrix) -> MatchResult {
    let mut entries = Vec::with_capacity(d.rows());
    for r in 0..d.rows() {
        let mut best: Option<(usize, f64)> = None;
        for (c, (&v, &m)) in d.row(r).iter().zip(d.row_candidates(r)).enumerate() {
            if !m {
                continue;
            }
            best = match best {
                None => Some((c, v)),
                Some((bc, bv)) => {
                    if v < bv || (v == bv && d.reference_ids[c] < d.reference_ids[bc]) {
                        Some((c, v))
                    } else {
                        Some((bc, bv))
                    }
                }
            };
        }
        if let Some((c, v)) = best {
            entries.push(MatchEntry {
                query_id: d.query_ids[r],
                reference_id: d.reference_ids[c],
                difference: v,
            });
        }
    }
    MatchResult { entries }
}

#[derive(Serialize, Deserialize)]
struct MatchRecord {
    query_id: u64,
    reference_id: u64,
    difference: f64,
}

impl MatchResult {
    pub fn write_csv<W: Write>(&self, out: W, fingerprint: &str) -> Result<()> {
        let mut out = out;
        writeln!(out, "# fingerprint={fingerprint}").map_err(|e| Error::io("<csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(MatchRecord {
                query_id: e.query_id,
                reference_id: e.reference_id,
                difference: e.difference,
            })
            .map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, fingerprint: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), fingerprint)
    }

    /// Returns the table and its fingerprint.
    pub fn read_csv<R: Read>(input: R) -> Result<(Self, String)> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text).map_err(|e| Error::io("<csv>", e))?;
        let (fingerprint, _) = parse_comment(&text)?;
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let entries = r
            .deserialize::<MatchRecord>()
            .map(|rec| {
                rec.map(|m| MatchEntry {
                    query_id: m.query_id,
                    reference_id: m.reference_id,
                    difference: m.difference,
                })
                .map_err(csv_error)
            })
            .collect::<Result<_>>()?;
        Ok((Self { entries }, fingerprint))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

/// Convenience for the common case of a single descriptor kind.
pub fn descriptor_kind_of(archive: &SignatureArchive) -> DescriptorKind {
    archive.header.descriptor
}
