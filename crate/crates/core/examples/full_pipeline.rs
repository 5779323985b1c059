//! Runs every stage for all descriptors on a query and a reference sequence
//! and keeps the intermediate files.
//!
//! ```text
//! cargo run --release --example full_pipeline -- [out_dir]
//! ```

use voplace::config::PipelineConfig;
use voplace::descriptors::DescriptorKind;
use voplace::pipeline::{run_pipeline, MatchSource, PipelineInput};
use voplace::synth::{SyntheticSequence, WorldSpec};

fn main() -> voplace::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into());
    let seq = SyntheticSequence::from_spec(&WorldSpec::out_and_back(2, 300.0, 1.0))?;
    let half = seq.keyframes.len() as u64 / 2;
    // Two separate sequences: each side builds its own scan cache.
    let references = seq.keyframes_in(0, half - 1);
    let queries = seq.keyframes_in(half, u64::MAX);

    let input = PipelineInput {
        queries: &queries,
        references: Some(&references),
    };
    let config = PipelineConfig::default();
    let run = run_pipeline(input, &config, &DescriptorKind::ALL, MatchSource::Fused, Some(out.as_ref()))?;
    for d in &run.descriptors {
        let c = &d.evaluation.curve;
        println!(
            "{:12} AUC {:.3}  max recall at 100% precision {:.3}",
            d.kind.to_string(),
            c.auc,
            c.max_recall_at_full_precision
        );
    }
    println!("intermediates in {out}/ (fingerprint {})", config.fingerprint());
    Ok(())
}
