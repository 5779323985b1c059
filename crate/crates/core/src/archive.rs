//! Text container for per-keyframe signatures.
//!
//! ```text
//! SIGNATURES <fingerprint>
//! DESCRIPTOR <delight|m2dp|scan-context>
//! FILTER <polar|voxel>
//! PARAMS <key>=<value> ...
//! SIG <keyframe_id>
//! <payload lines>
//! ```
//!
//! Payloads: DELIGHT writes `H <variant> <nnz> <bin>:<count>...` per variant;
//! M2DP writes `S <variant> <len> <values...>` and `I <variant> <bits>` per
//! variant; Scan Context writes `S <rings> <sectors> <values...>` and
//! `I <bits>`. Reals use shortest round-trip formatting, so reloading is
//! exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::PipelineConfig;
use crate::descriptors::delight::{DelightSignature, DELIGHT_LEN};
use crate::descriptors::{
    DescriptorKind, DescriptorParams, M2dpSignature, ScanContextSignature, Signature, BINARIZATION_RULE,
};
use crate::error::{Error, Result};
use crate::keyframe::{parse_field, parse_real, Records};
use crate::scan::FilterKind;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub fingerprint: String,
    pub descriptor: DescriptorKind,
    /// Filter of the scans the signatures were computed from.
    pub filter: FilterKind,
    /// Canonical `key=value` list of every parameter that shapes the payload.
    pub params: String,
}

impl ArchiveHeader {
    pub fn new(config: &PipelineConfig, descriptor: DescriptorKind, filter: FilterKind) -> Self {
        Self {
            fingerprint: config.fingerprint(),
            descriptor,
            filter,
            params: params_line(config),
        }
    }

    /// Signatures from two archives may only be compared when everything that
    /// shaped them agrees.
    pub fn check_compatible(&self, other: &ArchiveHeader) -> Result<()> {
        if self.descriptor != other.descriptor {
            return Err(Error::ParameterMismatch(format!(
                "descriptor {} vs {}",
                self.descriptor, other.descriptor
            )));
        }
        if self.params != other.params {
            return Err(Error::ParameterMismatch(format!(
                "parameters differ: [{}] vs [{}]",
                self.params, other.params
            )));
        }
        if self.fingerprint != other.fingerprint {
            return Err(Error::ParameterMismatch(format!(
                "configuration fingerprints differ: {} vs {}",
                self.fingerprint, other.fingerprint
            )));
        }
        Ok(())
    }
}

fn params_line(config: &PipelineConfig) -> String {
    let d = config.delight;
    let m = config.m2dp;
    let s = config.scan_context;
    let [vx, vy, vz] = config.voxel_cell;
    format!(
        "range={} polar_res={} voxel={},{},{} delight_radii={},{} m2dp_ltpq={},{},{},{} \
         sc_rings={} sc_sectors={} sc_range={} binarization={}",
        config.scan_range,
        config.polar_resolution_deg,
        vx,
        vy,
        vz,
        d.inner_radius,
        d.outer_radius,
        m.rings,
        m.sectors,
        m.azimuths,
        m.elevations,
        s.rings,
        s.sectors,
        s.max_range,
        BINARIZATION_RULE
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignatureEntry {
    pub keyframe_id: u64,
    pub signature: Signature,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignatureArchive {
    pub header: ArchiveHeader,
    pub entries: Vec<SignatureEntry>,
}

fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b != 0 { '1' } else { '0' }).collect()
}

fn join_reals(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 8);
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

impl SignatureArchive {
    pub fn new(header: ArchiveHeader) -> Self {
        Self {
            header,
            entries: Vec::new(),
        }
    }

    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.keyframe_id).collect()
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "SIGNATURES {}\nDESCRIPTOR {}\nFILTER {}\nPARAMS {}\n",
            h.fingerprint, h.descriptor, h.filter, h.params
        );
        for entry in &self.entries {
            let _ = writeln!(out, "SIG {}", entry.keyframe_id);
            match &entry.signature {
                Signature::Delight(sig) => {
                    for (k, hist) in sig.histograms.iter().enumerate() {
                        let nz: Vec<String> = hist
                            .iter()
                            .enumerate()
                            .filter(|(_, &c)| c > 0)
                            .map(|(bin, c)| format!("{bin}:{c}"))
                            .collect();
                        let _ = write!(out, "H {k} {}", nz.len());
                        for item in nz {
                            out.push(' ');
                            out.push_str(&item);
                        }
                        out.push('\n');
                    }
                }
                Signature::M2dp(sig) => {
                    for (k, s) in sig.structure.iter().enumerate() {
                        let _ = writeln!(out, "S {k} {} {}", s.len(), join_reals(s));
                    }
                    for (k, bits) in sig.intensity.iter().enumerate() {
                        let _ = writeln!(out, "I {k} {}", bits_to_string(bits));
                    }
                }
                Signature::ScanContext(sig) => {
                    let _ = writeln!(out, "S {} {} {}", sig.rings, sig.sectors, join_reals(&sig.structure));
                    let _ = writeln!(out, "I {}", bits_to_string(&sig.intensity));
                }
            }
        }
        out
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut records = Records::new(text);
        let mut header_field = |tag: &str| -> Result<(usize, Vec<&str>)> {
            let (line, fields) = records
                .next()
                .ok_or_else(|| Error::EmptyInput(format!("{context}: truncated signature archive header")))?;
            if fields[0] != tag {
                return Err(Error::parse(context, line, format!("expected {tag} header")));
            }
            Ok((line, fields))
        };
        let (line, f) = header_field("SIGNATURES")?;
        if f.len() != 2 {
            return Err(Error::parse(context, line, "expected `SIGNATURES <fingerprint>`"));
        }
        let fingerprint = f[1].to_string();
        let (line, f) = header_field("DESCRIPTOR")?;
        let descriptor: DescriptorKind = f
            .get(1)
            .ok_or_else(|| Error::parse(context, line, "missing descriptor"))?
            .parse()
            .map_err(|e: Error| Error::parse(context, line, e.to_string()))?;
        let (line, f) = header_field("FILTER")?;
        let filter: FilterKind = f
            .get(1)
            .ok_or_else(|| Error::parse(context, line, "missing filter"))?
            .parse()
            .map_err(|e: Error| Error::parse(context, line, e.to_string()))?;
        let (_, f) = header_field("PARAMS")?;
        let params = f[1..].join(" ");

        let mut entries = Vec::new();
        let mut next_line = |what: &str| {
            records
                .next()
                .ok_or_else(|| Error::EmptyInput(format!("{context}: archive ends inside {what}")))
        };
        loop {
            let (line, fields) = match next_line("signature") {
                Ok(r) => r,
                Err(_) => break,
            };
            if fields.len() != 2 || fields[0] != "SIG" {
                return Err(Error::parse(context, line, "expected `SIG <keyframe_id>`"));
            }
            let keyframe_id: u64 = parse_field(context, line, fields[1], "keyframe id")?;
            if let Some(prev) = entries.last().map(|e: &SignatureEntry| e.keyframe_id) {
                if keyframe_id <= prev {
                    return Err(Error::NonMonotonicId {
                        previous: prev,
                        next: keyframe_id,
                    });
                }
            }
            let signature = match descriptor {
                DescriptorKind::Delight => {
                    let mut histograms: [Vec<u32>; 4] = Default::default();
                    for (k, hist) in histograms.iter_mut().enumerate() {
                        let (line, f) = next_line("DELIGHT payload")?;
                        if f.len() < 3 || f[0] != "H" || f[1] != k.to_string() {
                            return Err(Error::parse(context, line, format!("expected `H {k} <nnz> ...`")));
                        }
                        let nnz: usize = parse_field(context, line, f[2], "entry count")?;
                        if f.len() != 3 + nnz {
                            return Err(Error::parse(context, line, "histogram entry count mismatch"));
                        }
                        *hist = vec![0; DELIGHT_LEN];
                        for item in &f[3..] {
                            let (bin, count) = item
                                .split_once(':')
                                .ok_or_else(|| Error::parse(context, line, format!("bad histogram entry {item:?}")))?;
                            let bin: usize = parse_field(context, line, bin, "histogram bin")?;
                            if bin >= DELIGHT_LEN {
                                return Err(Error::parse(context, line, format!("histogram bin {bin} out of range")));
                            }
                            hist[bin] = parse_field(context, line, count, "histogram count")?;
                        }
                    }
                    Signature::Delight(DelightSignature { histograms })
                }
                DescriptorKind::M2dp => {
                    let mut structure: [Vec<f64>; 4] = Default::default();
                    for (k, s) in structure.iter_mut().enumerate() {
                        let (line, f) = next_line("M2DP payload")?;
                        if f.len() < 3 || f[0] != "S" || f[1] != k.to_string() {
                            return Err(Error::parse(context, line, format!("expected `S {k} <len> ...`")));
                        }
                        let len: usize = parse_field(context, line, f[2], "vector length")?;
                        if f.len() != 3 + len {
                            return Err(Error::parse(context, line, "vector length mismatch"));
                        }
                        *s = f[3..]
                            .iter()
                            .map(|v| parse_real(context, line, v, "signature value"))
                            .collect::<Result<_>>()?;
                    }
                    let mut intensity: [Vec<u8>; 4] = Default::default();
                    for (k, bits) in intensity.iter_mut().enumerate() {
                        let (line, f) = next_line("M2DP payload")?;
                        if f.len() != 3 || f[0] != "I" || f[1] != k.to_string() {
                            return Err(Error::parse(context, line, format!("expected `I {k} <bits>`")));
                        }
                        *bits = parse_bits(context, line, f[2])?;
                    }
                    Signature::M2dp(M2dpSignature { structure, intensity })
                }
                DescriptorKind::ScanContext => {
                    let (line, f) = next_line("Scan Context payload")?;
                    if f.len() < 3 || f[0] != "S" {
                        return Err(Error::parse(context, line, "expected `S <rings> <sectors> ...`"));
                    }
                    let rings: usize = parse_field(context, line, f[1], "ring count")?;
                    let sectors: usize = parse_field(context, line, f[2], "sector count")?;
                    if f.len() != 3 + rings * sectors {
                        return Err(Error::parse(context, line, "matrix size mismatch"));
                    }
                    let structure = f[3..]
                        .iter()
                        .map(|v| parse_real(context, line, v, "height range"))
                        .collect::<Result<Vec<_>>>()?;
                    let (line, f) = next_line("Scan Context payload")?;
                    if f.len() != 2 || f[0] != "I" {
                        return Err(Error::parse(context, line, "expected `I <bits>`"));
                    }
                    let intensity = parse_bits(context, line, f[1])?;
                    if intensity.len() != rings * sectors {
                        return Err(Error::parse(context, line, "intensity size mismatch"));
                    }
                    Signature::ScanContext(ScanContextSignature {
                        rings,
                        sectors,
                        structure,
                        intensity,
                    })
                }
            };
            entries.push(SignatureEntry { keyframe_id, signature });
        }

        Ok(Self {
            header: ArchiveHeader {
                fingerprint,
                descriptor,
                filter,
                params,
            },
            entries,
        })
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

    /// Checks that every signature has the shape `params` prescribes.
    pub fn validate_shapes(&self, params: &DescriptorParams) -> Result<()> {
        let template = Signature::empty(self.header.descriptor, params);
        for entry in &self.entries {
            let ok = match (&entry.signature, &template) {
                (Signature::Delight(a), Signature::Delight(b)) => {
                    a.histograms.iter().zip(&b.histograms).all(|(x, y)| x.len() == y.len())
                }
                (Signature::M2dp(a), Signature::M2dp(b)) => {
                    a.structure.iter().zip(&b.structure).all(|(x, y)| x.len() == y.len())
                        && a.intensity.iter().zip(&b.intensity).all(|(x, y)| x.len() == y.len())
                }
                (Signature::ScanContext(a), Signature::ScanContext(b)) => a.rings == b.rings && a.sectors == b.sectors,
                _ => false,
            };
            if !ok {
                return Err(Error::ParameterMismatch(format!(
                    "signature of keyframe {} does not match the archive parameters",
                    entry.keyframe_id
                )));
            }
        }
        Ok(())
    }
}

fn parse_bits(context: &str, line: usize, field: &str) -> Result<Vec<u8>> {
    field
        .bytes()
        .map(|b| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => Err(Error::parse(context, line, "intensity bits must be 0 or 1")),
        })
        .collect()
}
