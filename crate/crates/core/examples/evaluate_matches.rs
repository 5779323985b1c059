//! Precision-recall evaluation of a hand-written match table: five queries,
//! four of which have a true revisit.

use voplace::evaluation::{build_ground_truth, pr_curve, recognized_places};
use voplace::geometry::Vec3;
use voplace::matching::{MatchEntry, MatchResult};

fn main() -> voplace::Result<()> {
    // References along a line, 20 m apart.
    let references: Vec<(u64, Vec3)> = (0..5).map(|i| (i, Vec3::new(20.0 * i as f64, 0.0, 0.0))).collect();
    // Queries 100..104 revisit references 0..3; query 104 is somewhere new.
    let mut queries: Vec<(u64, Vec3)> = (0..4).map(|i| (100 + i, Vec3::new(20.0 * i as f64 + 2.0, 1.0, 0.0))).collect();
    queries.push((104, Vec3::new(500.0, 0.0, 0.0)));

    let gt = build_ground_truth(&queries, &references, 10.0, None)?;
    let entry = |query_id, reference_id, difference| MatchEntry { query_id, reference_id, difference };
    let result = MatchResult {
        entries: vec![
            entry(100, 0, 0.10),
            entry(101, 1, 0.20),
            entry(102, 4, 0.30), // wrong place
            entry(103, 3, 0.40),
            entry(104, 2, 0.50), // nothing to find
        ],
    };

    let curve = pr_curve(&result, &gt)?;
    println!("threshold  precision  recall");
    for p in &curve.points {
        println!("{:9.2}  {:9.3}  {:6.3}", p.threshold, p.precision, p.recall);
    }
    println!(
        "AUC {:.4}, max recall at 100% precision {:.3} ({} matchable queries)",
        curve.auc, curve.max_recall_at_full_precision, curve.matchable_queries
    );
    for place in recognized_places(&result, &gt, curve.full_precision_threshold) {
        println!("query {} at {:?}: recognized {}", place.query_id, place.position.as_slice(), place.recognized);
    }
    Ok(())
}
