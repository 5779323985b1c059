//! Builds a synthetic world from a TOML description, drives it, and writes
//! the keyframe file.
//!
//! ```text
//! cargo run --release --example synth_world -- [world.toml] [out.txt]
//! ```

use std::collections::HashMap;

use voplace::keyframe::write_sequence;
use voplace::synth::{SyntheticSequence, WorldSpec};

fn main() -> voplace::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec_path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/block_loop.toml").into());
    let out = args.next().unwrap_or_else(|| "block_loop_keyframes.txt".into());

    let spec = WorldSpec::load(&spec_path)?;
    let seq = SyntheticSequence::from_spec(&spec)?;

    let mut classes: HashMap<String, usize> = HashMap::new();
    for p in &seq.world.points {
        *classes.entry(format!("{:?}", p.class)).or_default() += 1;
    }
    println!("world: {} points {classes:?}", seq.world.points.len());

    let counts: Vec<usize> = seq.keyframes.iter().map(|k| k.points.len()).collect();
    println!(
        "{} keyframes, {:.0} points each on average",
        counts.len(),
        counts.iter().sum::<usize>() as f64 / counts.len() as f64
    );
    write_sequence(&out, &seq.keyframes)?;
    println!("written to {out}");
    Ok(())
}
