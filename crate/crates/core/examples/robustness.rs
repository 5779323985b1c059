//! Out-and-back street with appearance change on the return pass: how each
//! signature and each difference matrix holds up.
//!
//! ```text
//! cargo run --release --example robustness -- [seed] [points per keyframe]
//! ```

use voplace::config::PipelineConfig;
use voplace::descriptors::DescriptorKind;
use voplace::experiment::{RevisitSetup, Scenario};
use voplace::pipeline::MatchSource;

fn main() -> voplace::Result<()> {
    let arg = |k: usize| std::env::args().nth(k).and_then(|s| s.parse::<u64>().ok());
    let setup = RevisitSetup {
        seed: arg(1).unwrap_or(1),
        max_points: arg(2).map_or(1500, |n| n as usize),
        ..RevisitSetup::default()
    };
    let config = PipelineConfig::default();
    let clean = setup.sequence()?;

    println!("{:9} {:12} {:9} {:>6} {:>10}", "scenario", "descriptor", "matrix", "AUC", "max recall");
    for scenario in Scenario::ALL {
        let data = setup.prepare(&clean, scenario, &config)?;
        for kind in DescriptorKind::ALL {
            let sources: &[MatchSource] = if kind.has_structure() {
                &[MatchSource::Fused, MatchSource::Structure, MatchSource::Intensity]
            } else {
                &[MatchSource::Intensity]
            };
            for (source, curve) in sources.iter().zip(data.score(kind, sources, &config)?) {
                println!(
                    "{:9} {:12} {:9} {:6.3} {:10.3}",
                    scenario.name(),
                    kind.to_string(),
                    source.to_string(),
                    curve.auc,
                    curve.max_recall_at_full_precision
                );
            }
        }
    }
    Ok(())
}
