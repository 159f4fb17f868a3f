use std::fs;

use wstg::dataset::{concept_table, generate_corpus, load_corpus, read_features, save_corpus, Split};
use wstg::{CorpusSpec, Error, Segment, Tensor};

fn small() -> CorpusSpec {
    CorpusSpec {
        n_videos: 6,
        n_test: 2,
        ..CorpusSpec::default()
    }
}

#[test]
fn generate_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&small()).unwrap();
    save_corpus(&corpus, dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();
    assert_eq!(loaded, corpus);
}

#[test]
fn saving_twice_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save_corpus(&generate_corpus(&small()).unwrap(), a.path()).unwrap();
    save_corpus(&generate_corpus(&small()).unwrap(), b.path()).unwrap();
    for name in ["manifest", "vocab.txt", "annotations.tsv", "features/v0003.feat"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn truncated_feature_file_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&generate_corpus(&small()).unwrap(), dir.path()).unwrap();
    let path = dir.path().join("features/v0002.feat");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    let err = load_corpus(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }));
    assert!(err.to_string().contains("v0002.feat"), "{err}");
}

#[test]
fn dangling_video_id_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&generate_corpus(&small()).unwrap(), dir.path()).unwrap();
    let ann = dir.path().join("annotations.tsv");
    let mut text = fs::read_to_string(&ann).unwrap();
    text.push_str("v9999\t1 2\t0\t3\ttrain\n");
    fs::write(&ann, text).unwrap();
    let err = load_corpus(dir.path()).unwrap_err().to_string();
    assert!(err.contains("annotations.tsv") && err.contains("line 7") && err.contains("v9999"), "{err}");
}

fn feat_bytes(t: u32, d: u32, values: &[f32]) -> Vec<u8> {
    let mut out = b"WSTG".to_vec();
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[test]
fn hand_built_fixture_loads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::create_dir(p.join("features")).unwrap();
    fs::write(p.join("manifest"), "video=a\nvideo=b\n").unwrap();
    fs::write(p.join("vocab.txt"), "red\ngreen\nblue\nball\n").unwrap();
    fs::write(p.join("annotations.tsv"), "a\t0 3\t1\t2\ttrain\nb\t2\t0\t0\ttest\n").unwrap();
    fs::write(p.join("features/a.feat"), feat_bytes(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5])).unwrap();
    fs::write(p.join("features/b.feat"), feat_bytes(1, 2, &[-1.0, 0.25])).unwrap();

    let c = load_corpus(p).unwrap();
    assert_eq!(c.vocab, ["red", "green", "blue", "ball"]);
    assert_eq!(c.videos.len(), 2);
    assert_eq!(c.videos[0].id, "a");
    assert_eq!(c.videos[0].features, Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap());
    assert_eq!(c.videos[1].features, Tensor::matrix(1, 2, vec![-1.0, 0.25]).unwrap());
    assert_eq!(c.queries[0].tokens, [0, 3]);
    assert_eq!(c.queries[0].split, Split::Train);
    assert_eq!(c.queries[1].video_id, "b");
    assert_eq!(c.queries[1].split, Split::Test);
    assert_eq!(c.ground_truth(0), Segment { start: 1, end: 2 });
    assert_eq!(c.ground_truth(1), Segment { start: 0, end: 0 });
    assert_eq!(c.spec, None);
}

#[test]
fn bad_magic_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.feat");
    let mut bytes = feat_bytes(1, 1, &[0.0]);
    bytes[0] = b'X';
    fs::write(&path, bytes).unwrap();
    let err = read_features(&path).unwrap_err().to_string();
    assert!(err.contains("x.feat") && err.contains("byte 0"), "{err}");
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Planted frames point toward the query's concept mean; the rest do not.
#[test]
fn planted_segments_are_separable_by_similarity() {
    let spec = CorpusSpec::default();
    let corpus = generate_corpus(&spec).unwrap();
    let concepts = concept_table(&spec);
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (q, query) in corpus.queries.iter().enumerate() {
        let mean: Vec<f64> = (0..spec.feature_dim)
            .map(|d| query.tokens.iter().map(|&c| concepts[c][d]).sum::<f64>() / query.tokens.len() as f64)
            .collect();
        let gt = corpus.ground_truth(q);
        let video = corpus.video(&query.video_id).unwrap();
        for t in 0..video.frames() {
            let sim = cosine(video.features.row(t), &mean);
            if gt.frames().contains(&t) { inside.push(sim) } else { outside.push(sim) }
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (a, b) = (avg(&inside), avg(&outside));
    println!("mean cosine to concept mean: inside {a:.3}, outside {b:.3}");
    assert!(a > 0.8 && b.abs() < 0.05, "inside {a}, outside {b}");
    assert!(a - b > 0.75);
}
