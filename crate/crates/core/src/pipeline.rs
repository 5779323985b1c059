//! The four stages (imitate, describe, match, evaluate) and their
//! composition. Every stage refuses inputs produced under another
//! configuration fingerprint.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use crate::archive::{ArchiveHeader, SignatureArchive, SignatureEntry};
use crate::config::PipelineConfig;
use crate::descriptors::{describe as describe_points, DescriptorKind, Signature};
use crate::error::{Error, Result};
use crate::evaluation::{build_ground_truth, export, positions_of, pr_curve, recognized_places, GroundTruthRelation, PrCurve, RecognizedPlace};
use crate::keyframe::Keyframe;
use crate::matching::{build_difference_matrices, match_rows, DifferenceMatrices, DifferenceMatrix, MatchResult};
use crate::scan::{imitate_sequence, FilterKind, ScanArchive};

pub fn imitate(keyframes: &[Keyframe], config: &PipelineConfig, kinds: &[FilterKind]) -> Result<ScanArchive> {
    config.validate()?;
    if keyframes.is_empty() {
        return Err(Error::EmptyInput("keyframe sequence is empty".into()));
    }
    Ok(ScanArchive {
        fingerprint: config.fingerprint(),
        scans: imitate_sequence(keyframes, &config.scan_settings(), kinds)?,
    })
}

/// Filter kind `describe` will read: `requested`, or the descriptor's
/// preferred kind, or whatever the archive holds.
fn pick_filter(scans: &ScanArchive, kind: DescriptorKind, requested: Option<FilterKind>) -> Result<FilterKind> {
    let has = |f: FilterKind| scans.of_kind(f).next().is_some();
    let preferred = kind.preferred_filter();
    let filter = match requested {
        Some(f) => f,
        None if has(preferred) => preferred,
        None => [FilterKind::Polar, FilterKind::Voxel]
            .into_iter()
            .find(|&f| has(f))
            .ok_or_else(|| Error::EmptyInput("scan archive is empty".into()))?,
    };
    if !has(filter) {
        return Err(Error::EmptyInput(format!("scan archive holds no {filter} scans")));
    }
    if filter != preferred {
        warn!("{kind} is normally computed from {preferred} scans, using {filter} scans");
    }
    Ok(filter)
}

/// One signature per scan of the chosen filter kind, in archive order.
/// Scans too degenerate to describe get an all-zero signature.
pub fn describe(
    scans: &ScanArchive,
    kind: DescriptorKind,
    filter: Option<FilterKind>,
    config: &PipelineConfig,
) -> Result<SignatureArchive> {
    config.validate()?;
    config.check_fingerprint(&scans.fingerprint, "scan archive")?;
    let filter = pick_filter(scans, kind, filter)?;
    let params = config.descriptor_params();
    let selected: Vec<_> = scans.of_kind(filter).collect();
    let entries = selected
        .par_iter()
        .map(|scan| {
            let signature = match describe_points(&scan.points, kind, &params) {
                Ok(s) => s,
                Err(e @ (Error::DegenerateCloud(_) | Error::Degenerate(_))) => {
                    warn!("keyframe {}: {e}; storing an empty {kind} signature", scan.keyframe_id);
                    Signature::empty(kind, &params)
                }
                Err(e) => return Err(e),
            };
            Ok(SignatureEntry {
                keyframe_id: scan.keyframe_id,
                signature,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SignatureArchive {
        header: ArchiveHeader::new(config, kind, filter),
        entries,
    })
}

/// Matrix the nearest-reference decision is taken on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchSource {
    /// The fused matrix; DELIGHT, having no structure part, uses its
    /// intensity matrix.
    #[default]
    Fused,
    Structure,
    Intensity,
}

impl fmt::Display for MatchSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            MatchSource::Fused => "fused",
            MatchSource::Structure => "structure",
            MatchSource::Intensity => "intensity",
        })
    }
}

impl FromStr for MatchSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(MatchSource::Fused),
            "structure" => Ok(MatchSource::Structure),
            "intensity" => Ok(MatchSource::Intensity),
            other => Err(Error::InvalidParameter(format!(
                "unknown match source {other:?} (expected fused, structure or intensity)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutput {
    pub matrices: DifferenceMatrices,
    pub fused: Option<DifferenceMatrix>,
    pub source: MatchSource,
    pub result: MatchResult,
}

impl MatchOutput {
    pub fn decision_matrix(&self) -> &DifferenceMatrix {
        match self.source {
            MatchSource::Structure => self.matrices.structure.as_ref().expect("checked when matching"),
            MatchSource::Intensity => &self.matrices.intensity,
            MatchSource::Fused => self.fused.as_ref().unwrap_or(&self.matrices.intensity),
        }
    }

    /// `D_s.csv` (when the descriptor has one), `D_i.csv`, `D_fused.csv`
    /// (likewise) and `matches.csv`.
    pub fn save(&self, dir: impl AsRef<Path>, fingerprint: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if let Some(s) = &self.matrices.structure {
            s.save_csv(dir.join("D_s.csv"), fingerprint)?;
        }
        self.matrices.intensity.save_csv(dir.join("D_i.csv"), fingerprint)?;
        if let Some(f) = &self.fused {
            f.save_csv(dir.join("D_fused.csv"), fingerprint)?;
        }
        self.result.save_csv(dir.join("matches.csv"), fingerprint)
    }
}

/// Difference matrices and row-argmin matches. With `same_sequence`,
/// references inside the exclusion window of a query are skipped.
pub fn match_signatures(
    queries: &SignatureArchive,
    references: &SignatureArchive,
    config: &PipelineConfig,
    same_sequence: bool,
    source: MatchSource,
) -> Result<MatchOutput> {
    config.validate()?;
    config.check_fingerprint(&queries.header.fingerprint, "query signature archive")?;
    config.check_fingerprint(&references.header.fingerprint, "reference signature archive")?;
    let kind = queries.header.descriptor;
    if source == MatchSource::Structure && !kind.has_structure() {
        return Err(Error::InvalidParameter(format!("{kind} has no structure signature")));
    }
    let options = config.match_options(same_sequence);
    let matrices = build_difference_matrices(queries, references, &options)?;
    let fused = matrices.fused(options.structure_weight)?;
    let mut out = MatchOutput {
        matrices,
        fused,
        source,
        result: MatchResult::default(),
    };
    out.result = match_rows(out.decision_matrix());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub ground_truth: GroundTruthRelation,
    pub curve: PrCurve,
    pub places: Vec<RecognizedPlace>,
}

impl Evaluation {
    pub fn save(&self, dir: impl AsRef<Path>, fingerprint: &str) -> Result<()> {
        export(dir, &self.curve, &self.places, fingerprint)
    }
}

/// Scores `result` against the ground-truth positions stored in the keyframes.
pub fn evaluate(
    result: &MatchResult,
    queries: &[Keyframe],
    references: &[Keyframe],
    config: &PipelineConfig,
    same_sequence: bool,
) -> Result<Evaluation> {
    let options = config.match_options(same_sequence);
    let ground_truth = build_ground_truth(
        &positions_of(queries)?,
        &positions_of(references)?,
        config.gt_threshold,
        options.exclusion_window,
    )?;
    let curve = pr_curve(result, &ground_truth)?;
    let places = recognized_places(result, &ground_truth, curve.full_precision_threshold);
    Ok(Evaluation {
        ground_truth,
        curve,
        places,
    })
}

/// Keyframes for the query and reference sides of a run. Without a
/// reference sequence the queries are matched against themselves.
#[derive(Clone, Copy, Debug)]
pub struct PipelineInput<'a> {
    pub queries: &'a [Keyframe],
    pub references: Option<&'a [Keyframe]>,
}

impl PipelineInput<'_> {
    pub fn same_sequence(&self) -> bool {
        self.references.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorRun {
    pub kind: DescriptorKind,
    pub query_signatures: SignatureArchive,
    pub reference_signatures: SignatureArchive,
    pub matches: MatchOutput,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineRun {
    pub query_scans: ScanArchive,
    pub reference_scans: Option<ScanArchive>,
    pub descriptors: Vec<DescriptorRun>,
}

fn filters_for(kinds: &[DescriptorKind]) -> Vec<FilterKind> {
    let mut filters: Vec<FilterKind> = Vec::new();
    for k in kinds {
        if !filters.contains(&k.preferred_filter()) {
            filters.push(k.preferred_filter());
        }
    }
    filters.sort_by_key(|f| *f as u8);
    filters
}

/// All stages for each descriptor. When `out_dir` is given every
/// intermediate is written there, laid out as
///
/// ```text
/// scans_query.txt  [scans_reference.txt]
/// <descriptor>/signatures_query.txt  [<descriptor>/signatures_reference.txt]
/// <descriptor>/{D_s,D_i,D_fused,matches,pr_curve,summary,recognized}.csv
/// ```
pub fn run_pipeline(
    input: PipelineInput<'_>,
    config: &PipelineConfig,
    kinds: &[DescriptorKind],
    source: MatchSource,
    out_dir: Option<&Path>,
) -> Result<PipelineRun> {
    config.validate()?;
    if kinds.is_empty() {
        return Err(Error::InvalidParameter("no descriptor selected".into()));
    }
    let fingerprint = config.fingerprint();
    let same_sequence = input.same_sequence();
    let filters = filters_for(kinds);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let query_scans = imitate(input.queries, config, &filters)?;
    let reference_scans = input.references.map(|r| imitate(r, config, &filters)).transpose()?;
    if let Some(dir) = out_dir {
        query_scans.save(dir.join("scans_query.txt"))?;
        if let Some(r) = &reference_scans {
            r.save(dir.join("scans_reference.txt"))?;
        }
    }
    for f in &filters {
        if let Some(mean) = query_scans.mean_point_count(*f) {
            info!("query scans: {mean:.1} {f}-filtered points on average");
        }
    }

    let mut descriptors = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let query_signatures = describe(&query_scans, kind, None, config)?;
        let reference_signatures = match &reference_scans {
            Some(r) => describe(r, kind, None, config)?,
            None => query_signatures.clone(),
        };
        let matches = match_signatures(&query_signatures, &reference_signatures, config, same_sequence, source)?;
        let evaluation = evaluate(
            &matches.result,
            input.queries,
            input.references.unwrap_or(input.queries),
            config,
            same_sequence,
        )?;
        if let Some(dir) = out_dir {
            let dir = dir.join(kind.to_string());
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            query_signatures.save(dir.join("signatures_query.txt"))?;
            if !same_sequence {
                reference_signatures.save(dir.join("signatures_reference.txt"))?;
            }
            matches.save(&dir, &fingerprint)?;
            evaluation.save(&dir, &fingerprint)?;
        }
        info!(
            "{kind}: AUC {:.4}, max recall at 100% precision {:.4}",
            evaluation.curve.auc, evaluation.curve.max_recall_at_full_precision
        );
        descriptors.push(DescriptorRun {
            kind,
            query_signatures,
            reference_signatures,
            matches,
            evaluation,
        });
    }
    Ok(PipelineRun {
        query_scans,
        reference_scans,
        descriptors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{SyntheticSequence, WorldSpec};

    fn sequence() -> Vec<Keyframe> {
        let mut spec = WorldSpec::out_and_back(11, 120.0, 0.0);
        spec.speed = 4.0;
        SyntheticSequence::from_spec(&spec).unwrap().keyframes
    }

    #[test]
    fn empty_sequence_is_rejected() {
        assert!(matches!(
            imitate(&[], &PipelineConfig::default(), &[FilterKind::Polar]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn stages_refuse_foreign_fingerprints() {
        let cfg = PipelineConfig::default();
        let kfs = sequence();
        let scans = imitate(&kfs[..5], &cfg, &[FilterKind::Voxel]).unwrap();
        let other = PipelineConfig {
            structure_weight: 3.0,
            ..cfg.clone()
        };
        assert!(matches!(
            describe(&scans, DescriptorKind::ScanContext, None, &other),
            Err(Error::ParameterMismatch(_))
        ));
        let sigs = describe(&scans, DescriptorKind::ScanContext, None, &cfg).unwrap();
        assert_eq!(sigs.entries.len(), 5);
        assert!(match_signatures(&sigs, &sigs, &other, false, MatchSource::Fused).is_err());
    }

    #[test]
    fn self_match_has_zero_structure_diagonal() {
        let cfg = PipelineConfig::default();
        let kfs = sequence();
        let scans = imitate(&kfs[..8], &cfg, &[FilterKind::Voxel]).unwrap();
        let sigs = describe(&scans, DescriptorKind::ScanContext, None, &cfg).unwrap();
        let out = match_signatures(&sigs, &sigs, &cfg, false, MatchSource::Structure).unwrap();
        let ds = out.matrices.structure.as_ref().unwrap();
        for k in 0..ds.rows() {
            assert_eq!(ds.get(k, k), 0.0);
        }
        assert!(match_signatures(
            &describe(&scans, DescriptorKind::Delight, Some(FilterKind::Voxel), &cfg).unwrap(),
            &describe(&scans, DescriptorKind::Delight, Some(FilterKind::Voxel), &cfg).unwrap(),
            &cfg,
            false,
            MatchSource::Structure
        )
        .is_err());
    }

    #[test]
    fn same_sequence_pipeline_runs() {
        let mut cfg = PipelineConfig::default();
        cfg.exclusion_window = 5;
        let kfs = sequence();
        let run = run_pipeline(
            PipelineInput {
                queries: &kfs,
                references: None,
            },
            &cfg,
            &[DescriptorKind::ScanContext],
            MatchSource::Fused,
            None,
        )
        .unwrap();
        let d = &run.descriptors[0];
        for e in &d.matches.result.entries {
            assert!(e.query_id.abs_diff(e.reference_id) > 5);
        }
        assert!(d.evaluation.curve.auc > 0.0);
    }
}
