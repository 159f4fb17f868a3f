//! Synthetic corpus with planted sentence-aligned segments, its on-disk
//! formats, and batch construction.
//!
//! A corpus directory holds:
//!
//! * `manifest`: `key=value` lines with the generation spec, then one
//!   `video=<id>` line per video;
//! * `vocab.txt`: one token string per line, index = line number;
//! * `annotations.tsv`: `video_id \t tokens \t gt_start \t gt_end \t split`,
//!   tokens space-separated, split `train` or `test`;
//! * `features/<video_id>.feat`: magic `WSTG`, `u32` T, `u32` D (little
//!   endian), then `T·D` little-endian `f32` values, row-major.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::proposal::Segment;
use crate::tensor::Tensor;

pub const FEATURE_MAGIC: &[u8; 4] = b"WSTG";

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub n_videos: usize,
    /// The last `n_test` videos form the test split.
    pub n_test: usize,
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub seed: u64,
    /// Noise inside the planted segment.
    pub sigma_in: f64,
    /// Noise everywhere else.
    pub sigma_out: f64,
}

impl Default for CorpusSpec {
    /// 200 training and 50 test videos, `D = 16`, 20 concepts, seed 7.
    fn default() -> Self {
        CorpusSpec {
            n_videos: 250,
            n_test: 50,
            feature_dim: 16,
            vocab_size: 20,
            min_frames: 32,
            max_frames: 64,
            seed: 7,
            sigma_in: 0.3,
            sigma_out: 1.0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Input(m));
        if self.n_videos < 2 {
            return fail(format!("need at least 2 videos, got {}", self.n_videos));
        }
        if self.n_test >= self.n_videos {
            return fail(format!("{} test videos leave no training data", self.n_test));
        }
        if self.feature_dim < 2 {
            return fail(format!("feature dim must be at least 2, got {}", self.feature_dim));
        }
        if self.vocab_size < 4 {
            return fail(format!("vocabulary must hold at least 4 tokens, got {}", self.vocab_size));
        }
        if self.min_frames < 2 || self.min_frames > self.max_frames {
            return fail(format!("bad frame range [{}, {}]", self.min_frames, self.max_frames));
        }
        if !(self.sigma_in >= 0.0 && self.sigma_out >= 0.0) {
            return fail("noise levels must be non-negative".into());
        }
        Ok(())
    }

    fn manifest_lines(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_videos", self.n_videos.to_string()),
            ("n_test", self.n_test.to_string()),
            ("feature_dim", self.feature_dim.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("min_frames", self.min_frames.to_string()),
            ("max_frames", self.max_frames.to_string()),
            ("seed", self.seed.to_string()),
            ("sigma_in", self.sigma_in.to_string()),
            ("sigma_out", self.sigma_out.to_string()),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    /// `T × D` per-frame features.
    pub features: Tensor,
}

impl VideoRecord {
    pub fn frames(&self) -> usize {
        self.features.shape()[0]
    }
}

/// A query sentence. Its ground-truth segment lives in [`Corpus`] and is not
/// reachable from training code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub video_id: String,
    pub tokens: Vec<usize>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub vocab: Vec<String>,
    pub videos: Vec<VideoRecord>,
    pub queries: Vec<QueryRecord>,
    gts: Vec<Segment>,
    video_index: HashMap<String, usize>,
    pub spec: Option<CorpusSpec>,
}

/// Training-time view: videos and training queries, no ground truth.
#[derive(Clone, Copy)]
pub struct TrainingView<'a> {
    pub videos: &'a [VideoRecord],
    pub queries: &'a [QueryRecord],
    /// Corpus query indices of `queries` (training split only).
    pub query_ids: &'a [usize],
    pub vocab_size: usize,
    video_index: &'a HashMap<String, usize>,
}

impl TrainingView<'_> {
    pub fn video_of(&self, query: usize) -> &VideoRecord {
        &self.videos[self.video_index[&self.queries[query].video_id]]
    }

    pub fn video_position(&self, query: usize) -> usize {
        self.video_index[&self.queries[query].video_id]
    }

    pub fn feature_dim(&self) -> usize {
        self.videos[0].features.shape()[1]
    }

    /// Average frame count over the videos referenced by training queries.
    pub fn average_length(&self) -> f64 {
        let total: usize = self.query_ids.iter().map(|&q| self.video_of(q).frames()).sum();
        total as f64 / self.query_ids.len().max(1) as f64
    }
}

impl Corpus {
    pub fn new(vocab: Vec<String>, videos: Vec<VideoRecord>, queries: Vec<QueryRecord>, gts: Vec<Segment>) -> Result<Self> {
        if gts.len() != queries.len() {
            return Err(Error::Input(format!("{} ground truths for {} queries", gts.len(), queries.len())));
        }
        let mut video_index = HashMap::new();
        for (i, v) in videos.iter().enumerate() {
            if video_index.insert(v.id.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate video id `{}`", v.id)));
            }
        }
        for (q, gt) in queries.iter().zip(&gts) {
            let &vi = video_index
                .get(&q.video_id)
                .ok_or_else(|| Error::Input(format!("query references unknown video `{}`", q.video_id)))?;
            if q.tokens.is_empty() {
                return Err(Error::Input(format!("empty query for video `{}`", q.video_id)));
            }
            if let Some(&t) = q.tokens.iter().find(|&&t| t >= vocab.len()) {
                return Err(Error::Input(format!("token {t} outside vocabulary of {}", vocab.len())));
            }
            if !gt.fits(videos[vi].frames()) {
                return Err(Error::Input(format!("ground truth {gt} outside video `{}`", q.video_id)));
            }
        }
        Ok(Corpus {
            vocab,
            videos,
            queries,
            gts,
            video_index,
            spec: None,
        })
    }

    pub fn video(&self, id: &str) -> Option<&VideoRecord> {
        self.video_index.get(id).map(|&i| &self.videos[i])
    }

    pub fn video_position(&self, id: &str) -> Option<usize> {
        self.video_index.get(id).copied()
    }

    pub fn feature_dim(&self) -> usize {
        self.videos[0].features.shape()[1]
    }

    pub fn split_ids(&self, split: Split) -> Vec<usize> {
        (0..self.queries.len()).filter(|&i| self.queries[i].split == split).collect()
    }

    /// Ground truth of a query; evaluation only.
    pub fn ground_truth(&self, query: usize) -> Segment {
        self.gts[query]
    }

    pub fn ground_truths(&self, queries: &[usize]) -> Vec<Segment> {
        queries.iter().map(|&q| self.gts[q]).collect()
    }

    /// The training split without ground truth. `ids` must outlive the view,
    /// so callers obtain them from [`Corpus::split_ids`] first.
    pub fn training_view<'a>(&'a self, ids: &'a [usize]) -> TrainingView<'a> {
        TrainingView {
            videos: &self.videos,
            queries: &self.queries,
            query_ids: ids,
            vocab_size: self.vocab.len(),
            video_index: &self.video_index,
        }
    }
}

/// Fixed random concept vectors (`vocab × D`) shared by all videos of a corpus.
pub fn concept_table(spec: &CorpusSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..spec.vocab_size)
        .map(|_| (0..spec.feature_dim).map(|_| normal.sample(&mut rng)).collect())
        .collect()
}

/// Builds the corpus in memory. Pure function of `spec`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let concepts = concept_table(spec);
    let vocab: Vec<String> = (0..spec.vocab_size).map(|i| format!("c{i:02}")).collect();
    let mut videos = Vec::with_capacity(spec.n_videos);
    let mut queries = Vec::with_capacity(spec.n_videos);
    let mut gts = Vec::with_capacity(spec.n_videos);
    let n_train = spec.n_videos - spec.n_test;

    for index in 0..spec.n_videos {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ index as u64);
        rng.set_stream(1);
        let frames = rng.random_range(spec.min_frames..=spec.max_frames);
        let k = rng.random_range(2..=5.min(spec.vocab_size));
        let mut ids: Vec<usize> = (0..spec.vocab_size).collect();
        ids.shuffle(&mut rng);
        ids.truncate(k);

        let min_len = ((0.15 * frames as f64).ceil() as usize).max(1);
        let max_len = ((0.5 * frames as f64).floor() as usize).max(min_len);
        let len = rng.random_range(min_len..=max_len);
        let start = rng.random_range(0..=frames - len);
        let gt = Segment {
            start,
            end: start + len - 1,
        };

        let mean: Vec<f64> = (0..spec.feature_dim)
            .map(|d| ids.iter().map(|&c| concepts[c][d]).sum::<f64>() / k as f64)
            .collect();
        let mut data = Vec::with_capacity(frames * spec.feature_dim);
        for t in 0..frames {
            let inside = gt.frames().contains(&t);
            for &m in &mean {
                let v = if inside {
                    m + spec.sigma_in * standard_normal(&mut rng)
                } else {
                    spec.sigma_out * standard_normal(&mut rng)
                };
                // stored as f32 on disk; keep the in-memory copy identical
                data.push(v as f32 as f64);
            }
        }
        let id = format!("v{index:04}");
        videos.push(VideoRecord {
            id: id.clone(),
            features: Tensor::matrix(frames, spec.feature_dim, data)?,
        });
        queries.push(QueryRecord {
            video_id: id,
            tokens: ids,
            split: if index < n_train { Split::Train } else { Split::Test },
        });
        gts.push(gt);
    }
    let mut corpus = Corpus::new(vocab, videos, queries, gts)?;
    corpus.spec = Some(spec.clone());
    Ok(corpus)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

pub fn write_features(path: &Path, features: &Tensor) -> Result<()> {
    let (t, d) = features.dims2()?;
    let mut buf = Vec::with_capacity(12 + 4 * features.len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.write_u32::<LittleEndian>(t as u32).expect("vec write");
    buf.write_u32::<LittleEndian>(d as u32).expect("vec write");
    for &v in features.data() {
        buf.write_f32::<LittleEndian>(v as f32).expect("vec write");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = std::io::Cursor::new(bytes.as_slice());
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)
        .map_err(|_| Error::parse(path, "byte 0", "truncated header"))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::parse(path, "byte 0", format!("bad magic {magic:?}")));
    }
    let t = cur
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::parse(path, "byte 4", "truncated header"))? as usize;
    let d = cur
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::parse(path, "byte 8", "truncated header"))? as usize;
    if t == 0 || d == 0 {
        return Err(Error::parse(path, "byte 4", format!("empty feature shape {t}×{d}")));
    }
    let expected = 12 + 4 * t * d;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            format!("byte {}", bytes.len().min(expected)),
            format!("expected {expected} bytes for {t}×{d} features, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(t * d);
    for _ in 0..t * d {
        data.push(cur.read_f32::<LittleEndian>().expect("length checked") as f64);
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::parse(path, format!("byte {}", 12 + 4 * i), "non-finite feature value"));
    }
    Tensor::matrix(t, d, data)
}

fn features_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("features").join(format!("{id}.feat"))
}

/// Writes the corpus directory described in the module docs.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    let feat_dir = dir.join("features");
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;

    let mut manifest = String::from("# wstg corpus\n");
    if let Some(spec) = &corpus.spec {
        for (k, v) in spec.manifest_lines() {
            manifest.push_str(&format!("{k}={v}\n"));
        }
    }
    for v in &corpus.videos {
        manifest.push_str(&format!("video={}\n", v.id));
    }
    write_text(&dir.join("manifest"), &manifest)?;

    let mut vocab = corpus.vocab.join("\n");
    vocab.push('\n');
    write_text(&dir.join("vocab.txt"), &vocab)?;

    let mut ann = String::new();
    for (q, gt) in corpus.queries.iter().zip(&corpus.gts) {
        let tokens: Vec<String> = q.tokens.iter().map(|t| t.to_string()).collect();
        ann.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            q.video_id,
            tokens.join(" "),
            gt.start,
            gt.end,
            q.split.as_str()
        ));
    }
    write_text(&dir.join("annotations.tsv"), &ann)?;

    for v in &corpus.videos {
        write_features(&features_path(dir, &v.id), &v.features)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_manifest(path: &Path, text: &str) -> Result<(Option<CorpusSpec>, Vec<String>)> {
    let mut fields = HashMap::new();
    let mut ids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("line {}", i + 1), "expected key=value"))?;
        if k == "video" {
            ids.push(v.to_string());
        } else {
            fields.insert(k.to_string(), (i + 1, v.to_string()));
        }
    }
    if fields.is_empty() {
        return Ok((None, ids));
    }
    fn get<T: std::str::FromStr>(path: &Path, fields: &HashMap<String, (usize, String)>, key: &str) -> Result<T> {
        let (line, v) = fields
            .get(key)
            .ok_or_else(|| Error::parse(path, "header", format!("missing `{key}`")))?;
        v.parse()
            .map_err(|_| Error::parse(path, format!("line {line}"), format!("bad value for `{key}`")))
    }
    let spec = CorpusSpec {
        n_videos: get(path, &fields, "n_videos")?,
        n_test: get(path, &fields, "n_test")?,
        feature_dim: get(path, &fields, "feature_dim")?,
        vocab_size: get(path, &fields, "vocab_size")?,
        min_frames: get(path, &fields, "min_frames")?,
        max_frames: get(path, &fields, "max_frames")?,
        seed: get(path, &fields, "seed")?,
        sigma_in: get(path, &fields, "sigma_in")?,
        sigma_out: get(path, &fields, "sigma_out")?,
    };
    Ok((Some(spec), ids))
}

/// Reads and validates a corpus directory.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join("manifest");
    let (spec, ids) = parse_manifest(&manifest_path, &read_text(&manifest_path)?)?;
    if ids.is_empty() {
        return Err(Error::parse(&manifest_path, "end", "no videos listed"));
    }

    let vocab_path = dir.join("vocab.txt");
    let vocab: Vec<String> = read_text(&vocab_path)?.lines().map(str::to_string).collect();
    if vocab.is_empty() {
        return Err(Error::parse(&vocab_path, "line 1", "empty vocabulary"));
    }

    let mut videos = Vec::with_capacity(ids.len());
    let mut dim = None;
    for id in &ids {
        let path = features_path(dir, id);
        let features = read_features(&path)?;
        let d = features.shape()[1];
        if *dim.get_or_insert(d) != d {
            return Err(Error::parse(&path, "byte 8", format!("feature dim {d} differs from {}", dim.unwrap())));
        }
        videos.push(VideoRecord {
            id: id.clone(),
            features,
        });
    }
    let frames: HashMap<&str, usize> = videos.iter().map(|v| (v.id.as_str(), v.frames())).collect();

    let ann_path = dir.join("annotations.tsv");
    let mut queries = Vec::new();
    let mut gts = Vec::new();
    for (i, line) in read_text(&ann_path)?.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let at = format!("line {}", i + 1);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::parse(&ann_path, at, format!("expected 5 tab-separated fields, found {}", cols.len())));
        }
        let Some(&t) = frames.get(cols[0]) else {
            return Err(Error::parse(&ann_path, at, format!("unknown video id `{}`", cols[0])));
        };
        let tokens = cols[1]
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(&ann_path, &at, "bad token id"))?;
        if tokens.is_empty() {
            return Err(Error::parse(&ann_path, at, "query has no tokens"));
        }
        if let Some(bad) = tokens.iter().find(|&&t| t >= vocab.len()) {
            return Err(Error::parse(&ann_path, at, format!("token {bad} outside vocabulary")));
        }
        let start: usize = cols[2].parse().map_err(|_| Error::parse(&ann_path, &at, "bad gt_start"))?;
        let end: usize = cols[3].parse().map_err(|_| Error::parse(&ann_path, &at, "bad gt_end"))?;
        let gt = Segment::new(start, end).map_err(|e| Error::parse(&ann_path, &at, e.to_string()))?;
        if !gt.fits(t) {
            return Err(Error::parse(&ann_path, at, format!("ground truth {gt} outside {t} frames")));
        }
        let split = Split::parse(cols[4]).ok_or_else(|| Error::parse(&ann_path, &at, format!("bad split `{}`", cols[4])))?;
        queries.push(QueryRecord {
            video_id: cols[0].to_string(),
            tokens,
            split,
        });
        gts.push(gt);
    }
    let mut corpus = Corpus::new(vocab, videos, queries, gts)?;
    corpus.spec = spec;
    Ok(corpus)
}

/// Training pairs fed to one update, as indices into the corpus queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub queries: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// In-batch positions usable as negatives for position `i`: every other
    /// pair whose video differs.
    pub fn negatives<'a>(&'a self, i: usize, queries: &'a [QueryRecord]) -> impl Iterator<Item = usize> + 'a {
        let own = &queries[self.queries[i]].video_id;
        (0..self.queries.len()).filter(move |&j| j != i && queries[self.queries[j]].video_id != *own)
    }
}

/// Shuffles `ids` with `epoch_seed` and chunks them into batches of
/// `batch_size`; a trailing batch is kept when it has at least two pairs.
pub fn make_batches(ids: &[usize], batch_size: usize, epoch_seed: u64) -> Result<Vec<Batch>> {
    if batch_size < 2 {
        return Err(Error::Config(format!("batch size must be at least 2, got {batch_size}")));
    }
    let mut order = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
    order.shuffle(&mut rng);
    Ok(order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| Batch { queries: c.to_vec() })
        .collect())
}
