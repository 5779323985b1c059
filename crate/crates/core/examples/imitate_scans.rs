//! Accumulates keyframe points into imitated omnidirectional scans and shows
//! how the scans fill up as the camera moves away from the start.
//!
//! ```text
//! cargo run --release --example imitate_scans -- [keyframes.txt]
//! ```

use voplace::config::PipelineConfig;
use voplace::keyframe::load_sequence;
use voplace::pipeline::imitate;
use voplace::scan::FilterKind;
use voplace::synth::{SyntheticSequence, WorldSpec};

fn main() -> voplace::Result<()> {
    let keyframes = match std::env::args().nth(1) {
        Some(path) => load_sequence(path)?,
        None => SyntheticSequence::from_spec(&WorldSpec::out_and_back(1, 300.0, 1.0))?.keyframes,
    };
    let config = PipelineConfig::default();
    let scans = imitate(&keyframes, &config, &[FilterKind::Polar, FilterKind::Voxel])?;

    println!("keyframe  polar  voxel");
    let polar: Vec<_> = scans.of_kind(FilterKind::Polar).collect();
    let voxel: Vec<_> = scans.of_kind(FilterKind::Voxel).collect();
    let step = (polar.len() / 12).max(1);
    for (p, v) in polar.iter().zip(&voxel).step_by(step) {
        println!("{:8}  {:5}  {:5}", p.keyframe_id, p.points.len(), v.points.len());
    }
    for kind in [FilterKind::Polar, FilterKind::Voxel] {
        if let Some(mean) = scans.mean_point_count(kind) {
            println!("mean {kind}: {mean:.1}");
        }
    }
    Ok(())
}
