//! Multi-scale sliding-window proposals.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Inclusive frame interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::Input(format!("segment start {start} after end {end}")));
        }
        Ok(Segment { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether the segment fits a video of `frames` frames.
    pub fn fits(&self, frames: usize) -> bool {
        self.end < frames
    }

    pub fn contains(&self, other: &Segment) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Sliding-window settings. Lengths are derived from the average training
/// video length `l_v` (in frames, one frame per second).
#[derive(Clone, Debug, PartialEq)]
pub struct WindowConfig {
    pub avg_train_length: f64,
    pub scale_fractions: Vec<f64>,
    pub overlap: f64,
}

impl WindowConfig {
    pub const DEFAULT_FRACTIONS: [f64; 3] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 2.0];
    pub const DEFAULT_OVERLAP: f64 = 0.8;

    pub fn new(avg_train_length: f64) -> Self {
        WindowConfig {
            avg_train_length,
            scale_fractions: Self::DEFAULT_FRACTIONS.to_vec(),
            overlap: Self::DEFAULT_OVERLAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.avg_train_length > 0.0) || !self.avg_train_length.is_finite() {
            return Err(Error::Config(format!(
                "average training length must be positive, got {}",
                self.avg_train_length
            )));
        }
        if self.scale_fractions.is_empty() {
            return Err(Error::Config("no window scale fractions".into()));
        }
        if let Some(f) = self.scale_fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::Config(format!("window fraction {f} outside (0, 1]")));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        Ok(())
    }

    /// Window lengths in frames: `round(fraction · l_v)`, at least 1,
    /// ascending and deduplicated.
    pub fn window_lengths(&self) -> Vec<usize> {
        let mut lengths: Vec<usize> = self
            .scale_fractions
            .iter()
            .map(|f| ((f * self.avg_train_length).round() as usize).max(1))
            .collect();
        lengths.sort_unstable();
        lengths.dedup();
        lengths
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub segment: Segment,
    /// Index into [`WindowConfig::window_lengths`] of the window that produced it.
    pub scale: usize,
}

/// Deduplicated proposals sorted by `(start, end)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProposalSet {
    proposals: Vec<Proposal>,
}

impl ProposalSet {
    /// Builds a set from arbitrary segments; duplicates keep the lowest scale.
    pub fn from_segments(items: impl IntoIterator<Item = (Segment, usize)>) -> Self {
        let mut unique: BTreeMap<Segment, usize> = BTreeMap::new();
        for (segment, scale) in items {
            unique
                .entry(segment)
                .and_modify(|s| *s = (*s).min(scale))
                .or_insert(scale);
        }
        ProposalSet {
            proposals: unique
                .into_iter()
                .map(|(segment, scale)| Proposal { segment, scale })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.iter()
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.proposals.iter().map(|p| p.segment).collect()
    }

    pub fn get(&self, i: usize) -> Option<&Proposal> {
        self.proposals.get(i)
    }
}

/// Stride between consecutive windows of length `len`.
pub fn stride(len: usize, overlap: f64) -> usize {
    (((1.0 - overlap) * len as f64).round() as usize).max(1)
}

/// Slides every configured window over a video of `frames` frames.
///
/// Windows start at multiples of the stride while they fit; a tail window
/// anchored at the last frame is added when the stride skips it, and a window
/// longer than the video collapses to the whole video.
pub fn generate(frames: usize, config: &WindowConfig) -> Result<ProposalSet> {
    if frames == 0 {
        return Err(Error::EmptyInput("video has no frames".into()));
    }
    config.validate()?;
    let mut items = Vec::new();
    for (scale, len) in config.window_lengths().into_iter().enumerate() {
        if len > frames {
            items.push((Segment { start: 0, end: frames - 1 }, scale));
            continue;
        }
        let step = stride(len, config.overlap);
        let mut last_start = 0;
        for start in (0..=frames - len).step_by(step) {
            items.push((Segment { start, end: start + len - 1 }, scale));
            last_start = start;
        }
        if last_start + len < frames {
            items.push((Segment { start: frames - len, end: frames - 1 }, scale));
        }
    }
    Ok(ProposalSet::from_segments(items))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_window_lengths() {
        assert_eq!(WindowConfig::new(120.0).window_lengths(), vec![20, 40, 60]);
        assert_eq!(WindowConfig::new(30.0).window_lengths(), vec![5, 10, 15]);
        // 4/6 → 1, 4/3 → 1, 4/2 → 2
        assert_eq!(WindowConfig::new(4.0).window_lengths(), vec![1, 2]);
    }

    #[test]
    fn single_scale_window_count() {
        let cfg = WindowConfig {
            avg_train_length: 20.0,
            scale_fractions: vec![1.0],
            overlap: 0.8,
        };
        let set = generate(100, &cfg).unwrap();
        assert_eq!(stride(20, 0.8), 4);
        assert_eq!(set.len(), 21);
        assert_eq!(set.segments()[0], Segment { start: 0, end: 19 });
        assert_eq!(set.segments()[20], Segment { start: 80, end: 99 });
    }

    #[test]
    fn oversized_window_covers_video() {
        let cfg = WindowConfig {
            avg_train_length: 60.0,
            scale_fractions: vec![1.0],
            overlap: 0.8,
        };
        let set = generate(50, &cfg).unwrap();
        assert_eq!(set.segments(), vec![Segment { start: 0, end: 49 }]);
    }

    #[test]
    fn tail_window_added() {
        let cfg = WindowConfig {
            avg_train_length: 10.0,
            scale_fractions: vec![1.0],
            overlap: 0.8,
        };
        // stride 2 over 13 frames: starts 0,2 leave frame 12 uncovered until the tail
        let set = generate(13, &cfg).unwrap();
        let segs = set.segments();
        assert_eq!(segs.last(), Some(&Segment { start: 3, end: 12 }));
        assert_eq!(segs.len(), 3);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = WindowConfig::new(30.0);
        cfg.overlap = 1.0;
        assert!(matches!(generate(10, &cfg), Err(Error::Config(_))));
        cfg.overlap = 0.5;
        cfg.scale_fractions = vec![0.0];
        assert!(generate(10, &cfg).is_err());
    }

    #[test]
    fn segment_rules() {
        assert!(Segment::new(3, 2).is_err());
        let s = Segment::new(2, 5).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.fits(6) && !s.fits(5));
    }
}
