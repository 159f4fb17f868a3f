mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wstg::proposal::generate;
use wstg::WindowConfig;

#[test]
fn generator_matches_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let frames = rng.random_range(1..150);
        let config = WindowConfig {
            avg_train_length: rng.random_range(1.0..200.0),
            scale_fractions: (0..rng.random_range(1..4)).map(|_| rng.random_range(0.01..=1.0)).collect(),
            overlap: rng.random_range(0.0..0.95),
        };
        let got: Vec<(usize, usize)> = generate(frames, &config)
            .unwrap()
            .segments()
            .iter()
            .map(|s| (s.start, s.end))
            .collect();
        let want: Vec<_> = common::brute_force_proposals(frames, config.avg_train_length, &config.scale_fractions, config.overlap)
            .into_iter()
            .collect();
        assert_eq!(got, want, "T={frames} {config:?}");
    }
}

#[test]
fn default_config_matches_oracle() {
    let config = WindowConfig::new(120.0);
    let got = generate(100, &config).unwrap().segments();
    let want = common::brute_force_proposals(100, 120.0, &WindowConfig::DEFAULT_FRACTIONS, 0.8);
    assert_eq!(got.len(), want.len());
    assert!(got.iter().all(|s| want.contains(&(s.start, s.end))));
}

#[test]
fn consecutive_windows_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let frames = rng.random_range(10..150);
        let config = WindowConfig::new(rng.random_range(10.0..200.0));
        let set = generate(frames, &config).unwrap();
        for (scale, len) in config.window_lengths().into_iter().enumerate() {
            let starts: Vec<usize> = set
                .iter()
                .filter(|p| p.scale == scale && p.segment.len() == len)
                .map(|p| p.segment.start)
                .collect();
            for w in starts.windows(2) {
                let shared = (w[0] + len).saturating_sub(w[1]) as f64 / len as f64;
                assert!(shared >= config.overlap - 1.0 / len as f64, "len {len} starts {w:?}");
            }
        }
        assert!(set.iter().all(|p| p.segment.fits(frames)));
    }
}
