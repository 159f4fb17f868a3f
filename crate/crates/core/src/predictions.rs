//! Batch inference over corpus queries and the prediction files the tool
//! writes.
//!
//! `predictions.tsv` has a header line, then one row per query:
//! `query \t video_id \t start \t end \t coarse_start \t coarse_end`.
//!
//! `frame_scores.tsv` (written on request) has one row per query:
//! `query \t window_start \t window_end \t scores`, scores space-separated
//! raw frame scores in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::fine::FrameScores;
use crate::pipeline::{Grounder, Mode, Prediction};
use crate::proposal::Segment;

pub const PREDICTIONS_HEADER: &str = "query\tvideo_id\tstart\tend\tcoarse_start\tcoarse_end";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionRow {
    /// Corpus query index.
    pub query: usize,
    pub video_id: String,
    pub segment: Segment,
    pub coarse: Segment,
}

/// Grounds every query in `queries` (corpus indices).
pub fn predict(grounder: &Grounder, corpus: &Corpus, queries: &[usize], mode: Mode) -> Result<Vec<(usize, Prediction)>> {
    queries
        .iter()
        .map(|&q| {
            let query = corpus
                .queries
                .get(q)
                .ok_or_else(|| Error::Input(format!("no query {q}")))?;
            let video = corpus
                .video(&query.video_id)
                .ok_or_else(|| Error::Input(format!("unknown video `{}`", query.video_id)))?;
            Ok((q, grounder.ground(&video.features, &query.tokens, mode)?))
        })
        .collect()
}

pub fn rows(corpus: &Corpus, predictions: &[(usize, Prediction)]) -> Vec<PredictionRow> {
    predictions
        .iter()
        .map(|(q, p)| PredictionRow {
            query: *q,
            video_id: corpus.queries[*q].video_id.clone(),
            segment: p.segment,
            coarse: p.coarse.best,
        })
        .collect()
}

pub fn predictions_to_tsv(rows: &[PredictionRow]) -> String {
    let mut out = format!("{PREDICTIONS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.query, r.video_id, r.segment.start, r.segment.end, r.coarse.start, r.coarse.end
        )
        .unwrap();
    }
    out
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    fs::write(path, predictions_to_tsv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == PREDICTIONS_HEADER => {}
        _ => return Err(Error::parse(path, "line 1", "missing predictions header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("line {}", i + 1);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::parse(path, at, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(path, &at, format!("`{s}` is not a non-negative integer")))
        };
        let seg = |a: &str, b: &str| -> Result<Segment> {
            Segment::new(num(a)?, num(b)?).map_err(|e| Error::parse(path, &at, e.to_string()))
        };
        out.push(PredictionRow {
            query: num(f[0])?,
            video_id: f[1].to_string(),
            segment: seg(f[2], f[3])?,
            coarse: seg(f[4], f[5])?,
        });
    }
    Ok(out)
}

pub fn frame_scores_to_tsv(scores: &[(usize, &FrameScores)]) -> String {
    let mut out = String::new();
    for (q, s) in scores {
        let values: Vec<String> = s.values.iter().map(f64::to_string).collect();
        writeln!(out, "{q}\t{}\t{}\t{}", s.window.start, s.window.end, values.join(" ")).unwrap();
    }
    out
}

pub fn read_frame_scores(path: &Path) -> Result<Vec<(usize, FrameScores)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let at = format!("line {}", i + 1);
        let bad = |msg: &str| Error::parse(path, &at, msg);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let q = f[0].parse().map_err(|_| bad("bad query index"))?;
        let start = f[1].parse().map_err(|_| bad("bad window start"))?;
        let end = f[2].parse().map_err(|_| bad("bad window end"))?;
        let window = Segment::new(start, end).map_err(|e| bad(&e.to_string()))?;
        let values = f[3]
            .split(' ')
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad score")))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != window.len() {
            return Err(bad("score count differs from window length"));
        }
        out.push((q, FrameScores { window, values }));
    }
    Ok(out)
}

/// Scores predictions against the corpus ground truth.
pub fn evaluate_rows(corpus: &Corpus, rows: &[PredictionRow], thresholds: &[f64]) -> Result<EvalReport> {
    let mut preds = Vec::with_capacity(rows.len());
    let mut gts = Vec::with_capacity(rows.len());
    for r in rows {
        let query = corpus
            .queries
            .get(r.query)
            .ok_or_else(|| Error::Input(format!("prediction for unknown query {}", r.query)))?;
        if query.video_id != r.video_id {
            return Err(Error::Input(format!(
                "query {} belongs to video `{}`, prediction names `{}`",
                r.query, query.video_id, r.video_id
            )));
        }
        preds.push(r.segment);
        gts.push(corpus.ground_truth(r.query));
    }
    EvalReport::evaluate(&preds, &gts, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        let rows = vec![
            PredictionRow {
                query: 3,
                video_id: "v0001".into(),
                segment: Segment { start: 4, end: 9 },
                coarse: Segment { start: 2, end: 11 },
            },
            PredictionRow {
                query: 0,
                video_id: "v0000".into(),
                segment: Segment { start: 0, end: 0 },
                coarse: Segment { start: 0, end: 5 },
            },
        ];
        write_predictions(&path, &rows).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), rows);
    }

    #[test]
    fn malformed_predictions_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        fs::write(&path, format!("{PREDICTIONS_HEADER}\n1\tv0\t5\t2\t0\t1\n")).unwrap();
        let err = read_predictions(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn frame_scores_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        let s = FrameScores {
            window: Segment { start: 2, end: 4 },
            values: vec![0.1 + 0.2, -1e-300, 7.0],
        };
        fs::write(&path, frame_scores_to_tsv(&[(5, &s)])).unwrap();
        assert_eq!(read_frame_scores(&path).unwrap(), vec![(5, s)]);
    }
}
