//! Pipeline configuration and its fingerprint.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descriptors::{DelightParams, DescriptorParams, M2dpParams, ScanContextParams};
use crate::error::{Error, Result};
use crate::matching::{MatchOptions, VariantPairing};
use crate::scan::ScanSettings;

/// Every tunable of the pipeline. Loaded from TOML; missing keys take the
/// defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Imitated scan range and cache eviction radius, meters.
    pub scan_range: f64,
    pub polar_resolution_deg: f64,
    /// Voxel size along camera x (lateral), y (vertical), z (forward).
    pub voxel_cell: [f64; 3],
    /// Weight of the structure matrix in the fused difference matrix.
    pub structure_weight: f64,
    /// Ground-truth distance below which two places are the same, meters.
    pub gt_threshold: f64,
    /// Same-sequence matching ignores references within this many keyframe
    /// ids of the query.
    pub exclusion_window: u64,
    pub variant_pairing: VariantPairing,
    pub delight: DelightParams,
    pub m2dp: M2dpParams,
    pub scan_context: ScanContextParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scan_range: 45.0,
            polar_resolution_deg: 1.0,
            voxel_cell: [1.5, 0.75, 1.5],
            structure_weight: 2.0,
            gt_threshold: 10.0,
            exclusion_window: 100,
            variant_pairing: VariantPairing::Symmetric,
            delight: DelightParams::default(),
            m2dp: M2dpParams::default(),
            scan_context: ScanContextParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("scan_range", self.scan_range)?;
        positive("polar_resolution_deg", self.polar_resolution_deg)?;
        let bins = 360.0 / self.polar_resolution_deg;
        if (bins - bins.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "polar_resolution_deg {} does not divide 360",
                self.polar_resolution_deg
            )));
        }
        for v in self.voxel_cell {
            positive("voxel_cell", v)?;
        }
        positive("structure_weight", self.structure_weight)?;
        positive("gt_threshold", self.gt_threshold)?;
        self.descriptor_params().validate()
    }

    pub fn descriptor_params(&self) -> DescriptorParams {
        DescriptorParams {
            delight: self.delight,
            m2dp: self.m2dp,
            scan_context: self.scan_context,
        }
    }

    pub fn scan_settings(&self) -> ScanSettings {
        ScanSettings {
            range: self.scan_range,
            polar_resolution_deg: self.polar_resolution_deg,
            voxel_cell: self.voxel_cell,
        }
    }

    pub fn match_options(&self, same_sequence: bool) -> MatchOptions {
        MatchOptions {
            pairing: self.variant_pairing,
            structure_weight: self.structure_weight,
            exclusion_window: same_sequence.then_some(self.exclusion_window),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Fails unless `found` was produced under this configuration.
    pub fn check_fingerprint(&self, found: &str, what: &str) -> Result<()> {
        let expected = self.fingerprint();
        if found == expected {
            Ok(())
        } else {
            Err(Error::ParameterMismatch(format!(
                "{what} was produced with configuration {found}, current configuration is {expected}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.fingerprint().len(), 16);
    }

    #[test]
    fn partial_file_overrides_defaults() {
        let cfg = PipelineConfig::from_toml("structure_weight = 3.0\n[scan_context]\nrings = 10\nsectors = 30\nmax_range = 40.0\n")
            .unwrap();
        assert_eq!(cfg.structure_weight, 3.0);
        assert_eq!(cfg.scan_context.rings, 10);
        assert_eq!(cfg.m2dp, M2dpParams::default());
        assert_ne!(cfg.fingerprint(), PipelineConfig::default().fingerprint());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("scan_range = -1.0").is_err());
        assert!(PipelineConfig::from_toml("polar_resolution_deg = 7.0").is_err());
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
        assert!(matches!(
            PipelineConfig::default().check_fingerprint("0000", "x"),
            Err(Error::ParameterMismatch(_))
        ));
    }
}
