//! Precision-recall scoring of row-argmin matches against ground-truth
//! positions.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::keyframe::Keyframe;
use crate::matching::MatchResult;

/// `true[q][r]` iff the ground-truth positions are strictly closer than the
/// threshold and `r` is a candidate for `q` (outside the exclusion window).
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthRelation {
    pub threshold: f64,
    pub query_ids: Vec<u64>,
    pub query_positions: Vec<Vec3>,
    pub reference_ids: Vec<u64>,
    same_place: Vec<bool>,
}

impl GroundTruthRelation {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.same_place[row * self.reference_ids.len() + col]
    }

    pub fn row(&self, row: usize) -> &[bool] {
        let c = self.reference_ids.len();
        &self.same_place[row * c..(row + 1) * c]
    }

    /// Queries with at least one true reference.
    pub fn matchable(&self) -> usize {
        (0..self.query_ids.len()).filter(|&q| self.row(q).iter().any(|&t| t)).count()
    }

    fn index(&self) -> (HashMap<u64, usize>, HashMap<u64, usize>) {
        let q = self.query_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        let r = self.reference_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        (q, r)
    }
}

/// `(id, gt_position)` of every keyframe; fails on the first one without.
pub fn positions_of(keyframes: &[Keyframe]) -> Result<Vec<(u64, Vec3)>> {
    keyframes
        .iter()
        .map(|k| k.gt_position.map(|p| (k.id, p)).ok_or(Error::MissingGroundTruth(k.id)))
        .collect()
}

pub fn build_ground_truth(
    queries: &[(u64, Vec3)],
    references: &[(u64, Vec3)],
    threshold: f64,
    exclusion_window: Option<u64>,
) -> Result<GroundTruthRelation> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("GT threshold must be positive, got {threshold}")));
    }
    let mut same_place = Vec::with_capacity(queries.len() * references.len());
    for (qid, qp) in queries {
        for (rid, rp) in references {
            let candidate = exclusion_window.is_none_or(|w| qid.abs_diff(*rid) > w);
            same_place.push(candidate && (qp - rp).norm() < threshold);
        }
    }
    Ok(GroundTruthRelation {
        threshold,
        query_ids: queries.iter().map(|q| q.0).collect(),
        query_positions: queries.iter().map(|q| q.1).collect(),
        reference_ids: references.iter().map(|r| r.0).collect(),
        same_place,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    /// One point per distinct match difference, loosest last.
    pub points: Vec<OperatingPoint>,
    pub auc: f64,
    pub max_recall_at_full_precision: f64,
    /// Largest threshold reaching `max_recall_at_full_precision` with zero
    /// false positives; `None` if no threshold has precision 1.
    pub full_precision_threshold: Option<f64>,
    pub matchable_queries: usize,
}

/// Per-match ground-truth verdicts, in match order.
fn verdicts(result: &MatchResult, gt: &GroundTruthRelation) -> Result<Vec<bool>> {
    let (qi, ri) = gt.index();
    result
        .entries
        .iter()
        .map(|e| {
            let q = *qi.get(&e.query_id).ok_or(Error::MissingGroundTruth(e.query_id))?;
            let r = *ri.get(&e.reference_id).ok_or(Error::MissingGroundTruth(e.reference_id))?;
            Ok(gt.get(q, r))
        })
        .collect()
}

/// Sweeps the acceptance threshold over the sorted distinct differences.
///
/// AUC integrates (recall, precision) with the trapezoid rule, starting from
/// recall 0 at the precision of the tightest threshold.
pub fn pr_curve(result: &MatchResult, gt: &GroundTruthRelation) -> Result<PrCurve> {
    let matchable = gt.matchable();
    if matchable == 0 {
        return Err(Error::Degenerate("no query has a ground-truth match; recall is undefined".into()));
    }
    let truth = verdicts(result, gt)?;
    let mut scored: Vec<(f64, bool)> = result.entries.iter().map(|e| e.difference).zip(truth).collect();
    if let Some(bad) = scored.iter().find(|s| s.0.is_nan()) {
        return Err(Error::InvalidParameter(format!("match difference {} is not a number", bad.0)));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = Vec::new();
    let (mut accepted, mut tp) = (0usize, 0usize);
    let mut k = 0;
    while k < scored.len() {
        let tau = scored[k].0;
        while k < scored.len() && scored[k].0 == tau {
            accepted += 1;
            tp += usize::from(scored[k].1);
            k += 1;
        }
        points.push(OperatingPoint {
            threshold: tau,
            precision: tp as f64 / accepted as f64,
            recall: tp as f64 / matchable as f64,
        });
    }

    let mut auc = 0.0;
    if let Some(first) = points.first() {
        let (mut r0, mut p0) = (0.0, first.precision);
        for p in &points {
            auc += (p.recall - r0) * (p.precision + p0) / 2.0;
            (r0, p0) = (p.recall, p.precision);
        }
    }

    let mut max_recall = 0.0;
    let mut full_precision_threshold = None;
    for p in &points {
        if p.precision == 1.0 && p.recall >= max_recall {
            max_recall = p.recall;
            full_precision_threshold = Some(p.threshold);
        }
    }

    Ok(PrCurve {
        points,
        auc,
        max_recall_at_full_precision: max_recall,
        full_precision_threshold,
        matchable_queries: matchable,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecognizedPlace {
    pub query_id: u64,
    pub position: Vec3,
    pub reference_id: Option<u64>,
    /// Accepted at the full-precision operating point.
    pub recognized: bool,
}

/// One record per ground-truth query. Without a full-precision threshold
/// nothing is recognized.
pub fn recognized_places(result: &MatchResult, gt: &GroundTruthRelation, threshold: Option<f64>) -> Vec<RecognizedPlace> {
    let by_query: HashMap<u64, (u64, f64)> =
        result.entries.iter().map(|e| (e.query_id, (e.reference_id, e.difference))).collect();
    gt.query_ids
        .iter()
        .zip(&gt.query_positions)
        .map(|(&qid, &position)| {
            let matched = by_query.get(&qid);
            RecognizedPlace {
                query_id: qid,
                position,
                reference_id: matched.map(|m| m.0),
                recognized: matches!((matched, threshold), (Some(m), Some(t)) if m.1 <= t),
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidParameter(format!("{}: {other:?}", path.display())),
    }
}

/// Writes `pr_curve.csv`, `summary.csv` and `recognized.csv` into `dir`.
pub fn export(dir: impl AsRef<Path>, curve: &PrCurve, places: &[RecognizedPlace], fingerprint: &str) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("pr_curve.csv");
    let mut out = create(&path)?;
    writeln!(out, "# fingerprint={fingerprint}").map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "precision", "recall"]).map_err(|e| csv_error(&path, e))?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.precision.to_string(), p.recall.to_string()])
            .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.csv");
    let mut out = create(&path)?;
    writeln!(out, "# fingerprint={fingerprint}").map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["auc", "max_recall_at_full_precision", "full_precision_threshold", "matchable_queries"])
        .map_err(|e| csv_error(&path, e))?;
    w.write_record([
        curve.auc.to_string(),
        curve.max_recall_at_full_precision.to_string(),
        curve.full_precision_threshold.map(|t| t.to_string()).unwrap_or_default(),
        curve.matchable_queries.to_string(),
    ])
    .map_err(|e| csv_error(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("recognized.csv");
    let mut out = create(&path)?;
    writeln!(out, "# fingerprint={fingerprint}").map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query_id", "x", "y", "z", "reference_id", "recognized"])
        .map_err(|e| csv_error(&path, e))?;
    for p in places {
        w.write_record([
            p.query_id.to_string(),
            p.position.x.to_string(),
            p.position.y.to_string(),
            p.position.z.to_string(),
            p.reference_id.map(|r| r.to_string()).unwrap_or_default(),
            u8::from(p.recognized).to_string(),
        ])
        .map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::matching::MatchEntry;

    /// Query `k` matches reference `k` (true when `truth[k]`) with the given
    /// difference; every query has reference `k` as its only GT-true partner
    /// when `matchable[k]`.
    fn case(diffs: &[f64], truth: &[bool], matchable: &[bool]) -> (MatchResult, GroundTruthRelation) {
        let n = diffs.len();
        let queries: Vec<(u64, Vec3)> = (0..n).map(|k| (k as u64, Vec3::new(100.0 * k as f64, 0.0, 0.0))).collect();
        let refs: Vec<(u64, Vec3)> = (0..n)
            .map(|k| {
                let y = if matchable[k] { 1.0 } else { 50.0 };
                (k as u64 + 1000, Vec3::new(100.0 * k as f64, y, 0.0))
            })
            .chain(std::iter::once((5000, Vec3::new(-1e6, 0.0, 0.0))))
            .collect();
        let gt = build_ground_truth(&queries, &refs, 10.0, None).unwrap();
        let entries = (0..n)
            .map(|k| MatchEntry {
                query_id: k as u64,
                reference_id: if truth[k] { k as u64 + 1000 } else { 5000 },
                difference: diffs[k],
            })
            .collect();
        (MatchResult { entries }, gt)
    }

    #[test]
    fn strict_threshold() {
        let q = [(0, Vec3::zeros())];
        let r = [(1, Vec3::new(9.99, 0.0, 0.0)), (2, Vec3::new(10.0, 0.0, 0.0))];
        let gt = build_ground_truth(&q, &r, 10.0, None).unwrap();
        assert!(gt.get(0, 0));
        assert!(!gt.get(0, 1));
    }

    #[test]
    fn ground_truth_matches_pairwise_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = |n: u64| -> Vec<(u64, Vec3)> {
            (0..n)
                .map(|k| (k, Vec3::new(rng.random_range(0.0..40.0), rng.random_range(0.0..40.0), 0.0)))
                .collect()
        };
        let (q, r) = (pts(30), pts(25));
        let gt = build_ground_truth(&q, &r, 10.0, Some(3)).unwrap();
        for (i, (qid, qp)) in q.iter().enumerate() {
            for (j, (rid, rp)) in r.iter().enumerate() {
                let d = ((qp.x - rp.x).powi(2) + (qp.y - rp.y).powi(2)).sqrt();
                assert_eq!(gt.get(i, j), d < 10.0 && qid.abs_diff(*rid) > 3);
            }
        }
    }

    #[test]
    fn missing_position_is_reported() {
        let kf = Keyframe::new(7, Default::default());
        assert!(matches!(positions_of(&[kf]), Err(Error::MissingGroundTruth(7))));
    }

    #[test]
    fn perfect_matcher() {
        let (m, gt) = case(&[0.1, 0.2, 0.3, 0.4], &[true; 4], &[true; 4]);
        let c = pr_curve(&m, &gt).unwrap();
        assert_eq!(c.auc, 1.0);
        assert_eq!(c.max_recall_at_full_precision, 1.0);
        assert!(recognized_places(&m, &gt, c.full_precision_threshold).iter().all(|p| p.recognized));
    }

    #[test]
    fn first_false_match_zeroes_max_recall() {
        let (m, gt) = case(&[0.1, 0.2, 0.3], &[false, true, true], &[true; 3]);
        let c = pr_curve(&m, &gt).unwrap();
        assert_eq!(c.max_recall_at_full_precision, 0.0);
        assert_eq!(c.full_precision_threshold, None);
        assert!(recognized_places(&m, &gt, c.full_precision_threshold).iter().all(|p| !p.recognized));
    }

    #[test]
    fn ten_query_hand_sweep() {
        // Sorted by difference: T T F T F T F F T F; query 9 has no GT-true
        // reference, so 9 queries are matchable.
        let diffs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        let truth = [true, true, false, true, false, true, false, false, true, false];
        let mut matchable = [true; 10];
        matchable[9] = false;
        let (m, gt) = case(&diffs, &truth, &matchable);
        let c = pr_curve(&m, &gt).unwrap();
        let tp = [1, 2, 2, 3, 3, 4, 4, 4, 5, 5];
        assert_eq!(c.points.len(), 10);
        for (k, p) in c.points.iter().enumerate() {
            assert_eq!(p.threshold, diffs[k]);
            assert_eq!(p.precision, tp[k] as f64 / (k + 1) as f64);
            assert_eq!(p.recall, tp[k] as f64 / 9.0);
        }
        let mut auc = 0.0;
        let (mut r0, mut p0) = (0.0, 1.0);
        for k in 0..10 {
            let (r, p) = (tp[k] as f64 / 9.0, tp[k] as f64 / (k + 1) as f64);
            auc += (r - r0) * (p + p0) / 2.0;
            (r0, p0) = (r, p);
        }
        assert_eq!(c.auc, auc);
        assert_eq!(c.max_recall_at_full_precision, 2.0 / 9.0);
        assert_eq!(c.full_precision_threshold, Some(0.2));
        let flags: Vec<bool> = recognized_places(&m, &gt, c.full_precision_threshold).iter().map(|p| p.recognized).collect();
        assert_eq!(flags, [true, true, false, false, false, false, false, false, false, false]);
    }

    #[test]
    fn tied_scores_share_one_operating_point() {
        let (m, gt) = case(&[0.5, 0.5, 0.7], &[true, false, true], &[true; 3]);
        let c = pr_curve(&m, &gt).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.points[0].precision, 0.5);
        assert_eq!(c.max_recall_at_full_precision, 0.0);
    }

    #[test]
    fn unmatchable_set_is_an_error() {
        let (m, gt) = case(&[0.1, 0.2], &[false, false], &[false, false]);
        assert!(matches!(pr_curve(&m, &gt), Err(Error::Degenerate(_))));
    }

    #[test]
    fn auc_depends_only_on_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let diffs: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..3.0)).collect();
        let truth: Vec<bool> = (0..40).map(|_| rng.random_bool(0.6)).collect();
        let (m, gt) = case(&diffs, &truth, &[true; 40]);
        let base = pr_curve(&m, &gt).unwrap();
        let mut warped = m.clone();
        for e in &mut warped.entries {
            e.difference = (2.0 * e.difference).exp() - 7.0;
        }
        let after = pr_curve(&warped, &gt).unwrap();
        assert_eq!(base.auc, after.auc);
        assert_eq!(base.max_recall_at_full_precision, after.max_recall_at_full_precision);
    }

    #[test]
    fn separated_scores_give_exact_max_recall() {
        let n = 30;
        let truth: Vec<bool> = (0..n).map(|k| k % 3 != 0).collect();
        let diffs: Vec<f64> = truth.iter().enumerate().map(|(k, &t)| if t { k as f64 } else { 100.0 + k as f64 }).collect();
        let (m, gt) = case(&diffs, &truth, &vec![true; n]);
        let c = pr_curve(&m, &gt).unwrap();
        let correct = truth.iter().filter(|&&t| t).count();
        assert_eq!(c.max_recall_at_full_precision, correct as f64 / n as f64);
    }

    #[test]
    fn export_writes_three_files() {
        let (m, gt) = case(&[0.1, 0.2], &[true, false], &[true, true]);
        let c = pr_curve(&m, &gt).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export(dir.path(), &c, &recognized_places(&m, &gt, c.full_precision_threshold), "fp").unwrap();
        let pr = std::fs::read_to_string(dir.path().join("pr_curve.csv")).unwrap();
        assert_eq!(pr, "# fingerprint=fp\nthreshold,precision,recall\n0.1,1,0.5\n0.2,0.5,0.5\n");
        let rec = std::fs::read_to_string(dir.path().join("recognized.csv")).unwrap();
        assert!(rec.contains("\n0,0,0,0,1000,1\n"));
        assert!(rec.contains("\n1,100,0,0,5000,0\n"));
    }
}
