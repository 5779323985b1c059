//! Single-threaded timings of the per-scan work on one imitated scan, and of one Scan Context query against 1000 references.

use std::time::Instant;

use voplace::descriptors::{describe, DescriptorKind, DescriptorParams, Signature};
use voplace::geometry::IntensityPoint;
use voplace::matching::PreparedScanContext;
use voplace::scan::{filter_polar, filter_voxel, LocalPointCache, ScanSettings};
use voplace::synth::{SyntheticSequence, WorldSpec};

fn time<T>(label: &str, reps: u32, mut f: impl FnMut() -> T) -> T {
    let start = Instant::now();
    let mut out = f();
    for _ in 1..reps {
        out = f();
    }
    println!("{label:34} {:8.3} ms", start.elapsed().as_secs_f64() * 1e3 / reps as f64);
    out
}

fn main() -> voplace::Result<()> {
    let spec = WorldSpec::out_and_back(1, 300.0, 1.0);
    let seq = SyntheticSequence::from_spec(&spec)?;
    let settings = ScanSettings::default();
    let mut cache = LocalPointCache::new(settings.range);
    for kf in &seq.keyframes[..=70] {
        cache.update(kf)?;
    }
    let raw: Vec<IntensityPoint> = cache.imitate_scan(&seq.keyframes[70].pose, settings.range);
    let params = DescriptorParams::default();
    let voxel = time("voxel filter", 20, || filter_voxel(&raw, settings.voxel_cell));
    let polar = time("polar filter", 20, || filter_polar(&raw, settings.polar_resolution_deg));
    println!("raw scan {} points, voxel {}, polar {}", raw.len(), voxel.len(), polar.len());
    let sc = time("scan context describe", 20, || describe(&voxel, DescriptorKind::ScanContext, &params));
    time("delight describe", 20, || describe(&polar, DescriptorKind::Delight, &params))?;
    time("m2dp describe", 5, || describe(&polar, DescriptorKind::M2dp, &params))?;

    let Signature::ScanContext(sc) = sc? else { unreachable!() };
    let query = PreparedScanContext::new(&sc);
    let database: Vec<_> = (0..1000).map(|_| PreparedScanContext::new(&sc)).collect();
    time("scan context query vs 1000", 5, || {
        database.iter().map(|r| query.best_shift(r).map(|b| b.1)).collect::<voplace::Result<Vec<_>>>()
    })?;
    Ok(())
}
