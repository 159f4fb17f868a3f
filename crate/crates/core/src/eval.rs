//! Temporal IoU, R@1 at IoU thresholds, mIoU, and the random-proposal baseline.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::proposal::{ProposalSet, Segment};

/// Intersection over union of two inclusive frame intervals.
pub fn temporal_iou(a: Segment, b: Segment) -> f64 {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    if lo > hi {
        return 0.0;
    }
    let inter = (hi - lo + 1) as f64;
    let union = (a.len() + b.len()) as f64 - inter;
    inter / union
}

fn check_pairs(predictions: &[Segment], gts: &[Segment]) -> Result<()> {
    if predictions.len() != gts.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} ground truths",
            predictions.len(),
            gts.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate".into()));
    }
    Ok(())
}

/// Fraction of queries whose prediction reaches IoU ≥ `eta`.
pub fn recall_at_1(predictions: &[Segment], gts: &[Segment], eta: f64) -> Result<f64> {
    check_pairs(predictions, gts)?;
    let hits = predictions
        .iter()
        .zip(gts)
        .filter(|(p, g)| temporal_iou(**p, **g) >= eta)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

pub fn mean_iou(predictions: &[Segment], gts: &[Segment]) -> Result<f64> {
    check_pairs(predictions, gts)?;
    let total: f64 = predictions.iter().zip(gts).map(|(p, g)| temporal_iou(*p, *g)).sum();
    Ok(total / predictions.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    /// Recall at each threshold, as a fraction.
    pub recalls: Vec<f64>,
    pub miou: f64,
    pub queries: usize,
}

impl EvalReport {
    pub fn evaluate(predictions: &[Segment], gts: &[Segment], thresholds: &[f64]) -> Result<Self> {
        let recalls = thresholds
            .iter()
            .map(|&eta| recall_at_1(predictions, gts, eta))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport {
            thresholds: thresholds.to_vec(),
            recalls,
            miou: mean_iou(predictions, gts)?,
            queries: predictions.len(),
        })
    }

    pub fn recall_at(&self, eta: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| (t - eta).abs() < 1e-12)
            .map(|i| self.recalls[i])
    }

    /// Report file body:
    ///
    /// ```text
    /// eta,recall
    /// 0.1,0.540000
    /// 0.3,0.320000
    /// miou,0.281234
    /// ```
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,recall\n");
        for (t, r) in self.thresholds.iter().zip(&self.recalls) {
            let _ = writeln!(out, "{t},{r:.6}");
        }
        let _ = writeln!(out, "miou,{:.6}", self.miou);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Input(format!("report line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "eta,recall")) => {}
            _ => return Err(bad(1, "expected header `eta,recall`")),
        }
        let mut thresholds = Vec::new();
        let mut recalls = Vec::new();
        let mut miou = None;
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(',').ok_or_else(|| bad(i + 1, "missing comma"))?;
            let value: f64 = value.parse().map_err(|_| bad(i + 1, "bad number"))?;
            if key == "miou" {
                miou = Some(value);
            } else {
                thresholds.push(key.parse().map_err(|_| bad(i + 1, "bad threshold"))?);
                recalls.push(value);
            }
        }
        Ok(EvalReport {
            thresholds,
            recalls,
            miou: miou.ok_or_else(|| bad(0, "missing miou row"))?,
            queries: 0,
        })
    }

    /// Aligned text table in percent, one row per named report.
    pub fn table(rows: &[(&str, &EvalReport)]) -> String {
        let Some((_, first)) = rows.first() else {
            return String::new();
        };
        let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:<name_width$}", "Method");
        for t in &first.thresholds {
            let _ = write!(out, " | {:>13}", format!("R@1 IoU={t}"));
        }
        let _ = writeln!(out, " | {:>6}", "mIoU");
        let width = name_width + first.thresholds.len() * 16 + 9;
        let _ = writeln!(out, "{}", "-".repeat(width));
        for (name, r) in rows {
            let _ = write!(out, "{name:<name_width$}");
            for v in &r.recalls {
                let _ = write!(out, " | {:>13.1}", v * 100.0);
            }
            let _ = writeln!(out, " | {:>6.1}", r.miou * 100.0);
        }
        out
    }
}

/// Picks one proposal uniformly at random per query and evaluates it.
pub fn random_baseline(proposal_sets: &[ProposalSet], gts: &[Segment], thresholds: &[f64], seed: u64) -> Result<EvalReport> {
    if proposal_sets.is_empty() {
        return Err(Error::EmptyInput("no queries for the random baseline".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predictions = proposal_sets
        .iter()
        .map(|set| {
            if set.is_empty() {
                return Err(Error::EmptyInput("query without proposals".into()));
            }
            let i = rng.random_range(0..set.len());
            Ok(set.get(i).expect("index in range").segment)
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::evaluate(&predictions, gts, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(s: usize, e: usize) -> Segment {
        Segment { start: s, end: e }
    }

    #[test]
    fn iou_cases() {
        assert_eq!(temporal_iou(seg(3, 8), seg(3, 8)), 1.0);
        assert_eq!(temporal_iou(seg(0, 4), seg(5, 9)), 0.0);
        assert_eq!(temporal_iou(seg(0, 9), seg(5, 14)), 5.0 / 15.0);
    }

    #[test]
    fn recall_errors() {
        assert!(recall_at_1(&[seg(0, 1)], &[], 0.5).is_err());
        assert!(recall_at_1(&[], &[], 0.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let preds = [seg(0, 9), seg(0, 4)];
        let gts = [seg(5, 14), seg(0, 4)];
        let report = EvalReport::evaluate(&preds, &gts, &[0.1, 0.3, 0.5]).unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with("eta,recall\n0.1,1.000000\n0.3,1.000000\n0.5,0.500000\nmiou,"));
        let parsed = EvalReport::from_csv(&csv).unwrap();
        assert_eq!(parsed.thresholds, report.thresholds);
        assert_eq!(parsed.recalls, report.recalls);
        assert!((parsed.miou - report.miou).abs() < 1e-6);
    }

    #[test]
    fn table_has_a_row_per_report() {
        let r = EvalReport::evaluate(&[seg(0, 1)], &[seg(0, 1)], &[0.3, 0.5]).unwrap();
        let t = EvalReport::table(&[("Random", &r), ("Full", &r)]);
        assert_eq!(t.lines().count(), 4);
        assert!(t.contains("R@1 IoU=0.3"));
        assert!(t.contains("100.0"));
    }

    use proptest::prelude::*;

    fn segment() -> impl Strategy<Value = Segment> {
        (0usize..100, 0usize..100).prop_map(|(a, b)| Segment { start: a.min(b), end: a.max(b) })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn iou_symmetry_and_identity(a in segment(), b in segment()) {
            prop_assert_eq!(temporal_iou(a, b), temporal_iou(b, a));
            prop_assert_eq!(temporal_iou(a, a), 1.0);
            let v = temporal_iou(a, b);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn iou_of_nested_segment(a in segment(), x in 0usize..100, y in 0usize..100) {
            let s = a.start + x % a.len();
            let e = a.start + y % a.len();
            let inner = Segment { start: s.min(e), end: s.max(e) };
            let want = inner.len() as f64 / a.len() as f64;
            prop_assert!((temporal_iou(a, inner) - want).abs() < 1e-15);
        }

        #[test]
        fn recall_non_increasing(pairs in prop::collection::vec((segment(), segment()), 1..30)) {
            let (p, g): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let grid = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
            let report = EvalReport::evaluate(&p, &g, &grid).unwrap();
            prop_assert!(report.recalls.windows(2).all(|w| w[0] >= w[1]));
            if p.iter().zip(&g).all(|(a, b)| temporal_iou(*a, *b) > 0.0) {
                prop_assert_eq!(recall_at_1(&p, &g, 0.0).unwrap(), 1.0);
            }
        }
    }
}
