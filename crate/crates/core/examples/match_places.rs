//! Same-sequence loop detection on the block-loop world: every keyframe is
//! matched against the earlier part of the drive, skipping its neighbours.

use voplace::config::PipelineConfig;
use voplace::descriptors::DescriptorKind;
use voplace::pipeline::{describe, imitate, match_signatures, MatchSource};
use voplace::scan::FilterKind;
use voplace::synth::{SyntheticSequence, WorldSpec};

fn main() -> voplace::Result<()> {
    let spec = WorldSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/block_loop.toml"))?;
    let seq = SyntheticSequence::from_spec(&spec)?;
    let config = PipelineConfig::default();
    let scans = imitate(&seq.keyframes, &config, &[FilterKind::Voxel])?;
    let signatures = describe(&scans, DescriptorKind::ScanContext, None, &config)?;

    for source in [MatchSource::Structure, MatchSource::Intensity, MatchSource::Fused] {
        let out = match_signatures(&signatures, &signatures, &config, true, source)?;
        let position = |id: u64| seq.keyframes[id as usize].gt_position.expect("synthetic keyframes carry ground truth");
        let mut close = 0;
        let mut total = 0;
        for e in &out.result.entries {
            total += 1;
            if (position(e.query_id) - position(e.reference_id)).norm() < config.gt_threshold {
                close += 1;
            }
        }
        println!("{source:9}: {close} of {total} nearest references are within {} m", config.gt_threshold);
    }

    let out = match_signatures(&signatures, &signatures, &config, true, MatchSource::Fused)?;
    let mut best: Vec<_> = out.result.entries.iter().collect();
    best.sort_by(|a, b| a.difference.total_cmp(&b.difference));
    println!("\nstrongest fused matches:");
    for e in best.iter().take(8) {
        println!("  query {:3} -> reference {:3}  difference {:+.3}", e.query_id, e.reference_id, e.difference);
    }
    Ok(())
}
