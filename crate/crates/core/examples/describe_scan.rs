//! Computes all three signatures for one imitated scan, then for the same
//! scan moved by an arbitrary rigid transform, and compares them.

use voplace::config::PipelineConfig;
use voplace::descriptors::{describe, DescriptorKind, Signature};
use voplace::geometry::{RigidTransform, Vec3};
use voplace::matching::{chi_squared_distance, min_variant_distance, scan_context_distance, UnitVector, VariantPairing};
use voplace::pipeline::imitate;
use voplace::scan::FilterKind;
use voplace::synth::{SyntheticSequence, WorldSpec};

fn distance(a: &Signature, b: &Signature) -> voplace::Result<f64> {
    let pairing = VariantPairing::Symmetric;
    match (a, b) {
        (Signature::Delight(a), Signature::Delight(b)) => {
            min_variant_distance(&a.histograms, &b.histograms, pairing, |x, y| chi_squared_distance(x, y))
        }
        (Signature::M2dp(a), Signature::M2dp(b)) => {
            let unit = |s: &[Vec<f64>; 4]| std::array::from_fn::<_, 4, _>(|k| UnitVector::new(&s[k]));
            min_variant_distance(&unit(&a.structure), &unit(&b.structure), pairing, |x, y| x.distance(y))
        }
        (Signature::ScanContext(a), Signature::ScanContext(b)) => scan_context_distance(a, b),
        _ => unreachable!("same descriptor on both sides"),
    }
}

fn main() -> voplace::Result<()> {
    let config = PipelineConfig::default();
    let seq = SyntheticSequence::from_spec(&WorldSpec::out_and_back(3, 300.0, 1.0))?;
    let scans = imitate(&seq.keyframes, &config, &[FilterKind::Polar, FilterKind::Voxel])?;
    let params = config.descriptor_params();
    let moved = RigidTransform::from_axis_angle(Vec3::new(0.3, -1.0, 0.2), 2.1, Vec3::new(40.0, -3.0, 12.0));

    for kind in DescriptorKind::ALL {
        let scan = scans
            .of_kind(kind.preferred_filter())
            .find(|s| s.keyframe_id == 60)
            .expect("keyframe 60 exists");
        let sig = describe(&scan.points, kind, &params)?;
        let transformed: Vec<_> = scan.points.iter().map(|p| p.transformed(&moved)).collect();
        let sig_moved = describe(&transformed, kind, &params)?;
        let size = match &sig {
            Signature::Delight(d) => format!("4 x {} bins", d.histograms[0].len()),
            Signature::M2dp(m) => format!("4 x {} values + 4 x {} bits", m.structure[0].len(), m.intensity[0].len()),
            Signature::ScanContext(s) => format!("{} x {} grid + bits", s.rings, s.sectors),
        };
        println!(
            "{kind:12} {} points, {size}; distance to moved copy {:.2e}",
            scan.points.len(),
            distance(&sig, &sig_moved)?
        );
    }
    Ok(())
}
