//! Out-and-back revisit experiment on a synthetic street.
//!
//! The whole drive is imitated once, so the return pass sees the same cache
//! history it would in a live run. Return-pass keyframes are the queries,
//! outbound keyframes the references. Keyframes within `warmup` meters of the
//! start are dropped on both sides: their cache has not filled yet.

use crate::config::PipelineConfig;
use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};
use crate::evaluation::PrCurve;
use crate::keyframe::Keyframe;
use crate::pipeline::{describe, evaluate, imitate, match_signatures, MatchSource};
use crate::scan::{FilterKind, ScanArchive};
use crate::synth::{Perturbation, SyntheticSequence, WorldSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct RevisitSetup {
    pub seed: u64,
    pub street_length: f64,
    pub lateral_offset: f64,
    pub max_points: usize,
    /// Keyframes whose ground-truth x is below this are not scored.
    pub warmup: f64,
}

impl Default for RevisitSetup {
    fn default() -> Self {
        Self {
            seed: 1,
            street_length: 300.0,
            lateral_offset: 1.0,
            max_points: 1500,
            warmup: 90.0,
        }
    }
}

/// Appearance change on the return pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Clean,
    /// Gain, bias, per-element and per-point intensity offsets.
    Intensity,
    /// As `Intensity`, plus 30% of vegetation points resampled.
    Combined,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Clean, Scenario::Intensity, Scenario::Combined];

    pub fn perturbation(self, return_pass: [u64; 2]) -> Perturbation {
        let appearance = Perturbation {
            seed: 5,
            intensity_gain: 0.8,
            intensity_bias: 20.0,
            element_shift: 50.0,
            point_noise: 15.0,
            keyframes: Some(return_pass),
            ..Perturbation::default()
        };
        match self {
            Scenario::Clean => Perturbation::default(),
            Scenario::Intensity => appearance,
            Scenario::Combined => Perturbation {
                vegetation_resample: 0.3,
                ..appearance
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Clean => "clean",
            Scenario::Intensity => "intensity",
            Scenario::Combined => "combined",
        }
    }
}

/// Imitated scans and keyframes of both passes, warm-up removed.
#[derive(Clone, Debug)]
pub struct RevisitData {
    pub query_scans: ScanArchive,
    pub reference_scans: ScanArchive,
    pub query_keyframes: Vec<Keyframe>,
    pub reference_keyframes: Vec<Keyframe>,
}

impl RevisitSetup {
    pub fn world(&self) -> WorldSpec {
        let mut spec = WorldSpec::out_and_back(self.seed, self.street_length, self.lateral_offset);
        spec.max_points = self.max_points;
        spec
    }

    pub fn sequence(&self) -> Result<SyntheticSequence> {
        SyntheticSequence::from_spec(&self.world())
    }

    /// Applies `scenario` to the return half of `clean` and imitates it.
    pub fn prepare(&self, clean: &SyntheticSequence, scenario: Scenario, config: &PipelineConfig) -> Result<RevisitData> {
        let n = clean.keyframes.len() as u64;
        if n < 4 {
            return Err(Error::EmptyInput("sequence too short for an out-and-back split".into()));
        }
        let half = n / 2;
        let seq = clean.perturb(&scenario.perturbation([half, n]))?;
        let scans = imitate(&seq.keyframes, config, &[FilterKind::Polar, FilterKind::Voxel])?;
        let scored = |k: &Keyframe| k.gt_position.is_some_and(|p| p.x >= self.warmup);
        let query_keyframes: Vec<_> = seq.keyframes_in(half, n).into_iter().filter(scored).collect();
        let reference_keyframes: Vec<_> = seq.keyframes_in(0, half - 1).into_iter().filter(scored).collect();
        let keep = |ks: &[Keyframe]| ScanArchive {
            fingerprint: scans.fingerprint.clone(),
            scans: scans
                .scans
                .iter()
                .filter(|s| ks.binary_search_by_key(&s.keyframe_id, |k| k.id).is_ok())
                .cloned()
                .collect(),
        };
        Ok(RevisitData {
            query_scans: keep(&query_keyframes),
            reference_scans: keep(&reference_keyframes),
            query_keyframes,
            reference_keyframes,
        })
    }
}

impl RevisitData {
    /// Describes both passes with `kind` and scores each of `sources`.
    pub fn score(&self, kind: DescriptorKind, sources: &[MatchSource], config: &PipelineConfig) -> Result<Vec<PrCurve>> {
        let q = describe(&self.query_scans, kind, None, config)?;
        let r = describe(&self.reference_scans, kind, None, config)?;
        sources
            .iter()
            .map(|&source| {
                let m = match_signatures(&q, &r, config, false, source)?;
                Ok(evaluate(&m.result, &self.query_keyframes, &self.reference_keyframes, config, false)?.curve)
            })
            .collect()
    }
}
