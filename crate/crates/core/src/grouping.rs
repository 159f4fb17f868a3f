//! Grouping of fine frame scores into the final segment: min-max
//! normalization, a threshold sweep that collects maximal above-threshold
//! runs (a 1-D watershed), and selection by summed score.

use crate::error::{Error, Result};
use crate::fine::FrameScores;
use crate::proposal::Segment;

/// Frame scores rescaled to `[0, 1]`, aligned with `window`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedScores {
    pub window: Segment,
    pub values: Vec<f64>,
    /// All raw scores were equal; every value is 0.5.
    pub degenerate: bool,
}

pub fn normalize(scores: &FrameScores) -> Result<NormalizedScores> {
    if scores.values.is_empty() {
        return Err(Error::EmptyInput("no frame scores".into()));
    }
    if scores.values.len() != scores.window.len() {
        return Err(Error::Dimension(format!(
            "{} scores for window {}",
            scores.values.len(),
            scores.window
        )));
    }
    let min = scores.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let (values, degenerate) = if range > 0.0 {
        (scores.values.iter().map(|v| (v - min) / range).collect(), false)
    } else {
        (vec![0.5; scores.values.len()], true)
    };
    Ok(NormalizedScores {
        window: scores.window,
        values,
        degenerate,
    })
}

/// `{0.05, 0.10, …, 0.95}`
pub fn default_thresholds() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config("empty threshold grid".into()));
    }
    if let Some(t) = thresholds.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Config(format!("threshold {t} outside (0, 1)")));
    }
    Ok(())
}

/// Maximal runs of consecutive frames scoring at least `threshold`, as
/// window-relative segments.
pub fn runs_above(values: &[f64], threshold: f64) -> Vec<Segment> {
    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match (v >= threshold, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                runs.push(Segment { start: s, end: i - 1 });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push(Segment { start: s, end: values.len() - 1 });
    }
    runs
}

/// Union over all thresholds of the maximal above-threshold runs, in
/// window-relative frame indices, deduplicated and sorted by `(start, end)`.
pub fn watershed_candidates(scores: &NormalizedScores, thresholds: &[f64]) -> Result<Vec<Segment>> {
    validate_thresholds(thresholds)?;
    let mut all: Vec<Segment> = thresholds
        .iter()
        .flat_map(|&t| runs_above(&scores.values, t))
        .collect();
    all.sort_unstable();
    all.dedup();
    Ok(all)
}

/// Picks the window-relative candidate with the largest summed normalized
/// score `m_f` and maps it to absolute frames. Ties go to the earlier start,
/// then the shorter segment. Without candidates, or when normalization was
/// degenerate, returns `fallback`.
pub fn aggregate_and_select(candidates: &[Segment], scores: &NormalizedScores, fallback: Segment) -> Segment {
    if scores.degenerate {
        return fallback;
    }
    let mut best: Option<(Segment, f64)> = None;
    for &c in candidates {
        if c.end >= scores.values.len() {
            continue;
        }
        let m_f: f64 = scores.values[c.start..=c.end].iter().sum();
        let better = match best {
            None => true,
            Some((b, bm)) => m_f > bm || (m_f == bm && (c.start, c.len()) < (b.start, b.len())),
        };
        if better {
            best = Some((c, m_f));
        }
    }
    match best {
        Some((c, _)) => Segment {
            start: scores.window.start + c.start,
            end: scores.window.start + c.end,
        },
        None => fallback,
    }
}

/// Normalize, sweep, and select in one call.
pub fn group(scores: &FrameScores, thresholds: &[f64], fallback: Segment) -> Result<Segment> {
    let normalized = normalize(scores)?;
    let candidates = watershed_candidates(&normalized, thresholds)?;
    Ok(aggregate_and_select(&candidates, &normalized, fallback))
}
