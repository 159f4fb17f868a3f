//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use wstg::Segment;

/// Every window the sliding rule admits, found by testing every start.
pub fn brute_force_proposals(frames: usize, avg: f64, fractions: &[f64], overlap: f64) -> BTreeSet<(usize, usize)> {
    let mut lengths = BTreeSet::new();
    for f in fractions {
        let l = (f * avg).round() as usize;
        lengths.insert(if l == 0 { 1 } else { l });
    }
    let mut out = BTreeSet::new();
    for l in lengths {
        if l > frames {
            out.insert((0, frames - 1));
            continue;
        }
        let step = std::cmp::max(1, ((1.0 - overlap) * l as f64).round() as usize);
        for s in 0..frames {
            let fits = s + l <= frames;
            let on_grid = s % step == 0;
            let tail = s + l == frames;
            if fits && (on_grid || tail) {
                out.insert((s, s + l - 1));
            }
        }
    }
    out
}

/// Maximal above-threshold runs for every threshold, by checking every
/// `(i, j)` pair directly.
pub fn sweep_oracle(values: &[f64], thresholds: &[f64]) -> Vec<Segment> {
    let n = values.len();
    let mut out = BTreeSet::new();
    for &t in thresholds {
        for i in 0..n {
            for j in i..n {
                let inside = values[i..=j].iter().all(|&v| v >= t);
                let left_closed = i == 0 || values[i - 1] < t;
                let right_closed = j == n - 1 || values[j + 1] < t;
                if inside && left_closed && right_closed {
                    out.insert(Segment { start: i, end: j });
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Min-max normalization followed by the sweep oracle and selection by
/// summed normalized score, from raw frame scores over `window`.
pub fn regroup_oracle(raw: &[f64], window: Segment, thresholds: &[f64], fallback: Segment) -> Segment {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return fallback;
    }
    let norm: Vec<f64> = raw.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let mut best: Option<(f64, Segment)> = None;
    for c in sweep_oracle(&norm, thresholds) {
        let m: f64 = norm[c.start..=c.end].iter().sum();
        let take = match best {
            None => true,
            Some((bm, b)) => m > bm || (m == bm && (c.start, c.len()) < (b.start, b.len())),
        };
        if take {
            best = Some((m, c));
        }
    }
    match best {
        Some((_, c)) => Segment {
            start: window.start + c.start,
            end: window.start + c.end,
        },
        None => fallback,
    }
}
