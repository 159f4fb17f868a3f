use std::fs;

use wstg::dataset::{generate_corpus, Split};
use wstg::train::{train_coarse, train_fine};
use wstg::{Checkpoint, CorpusSpec, Error, Preset, Stage, TrainConfig};

fn tiny_config() -> TrainConfig {
    TrainConfig {
        hidden_size: 4,
        embed_dim: 4,
        coarse_epochs: 1,
        fine_epochs: 1,
        batch_size: 4,
        ..TrainConfig::preset(Preset::Desk)
    }
}

fn tiny_corpus() -> wstg::Corpus {
    generate_corpus(&CorpusSpec {
        n_videos: 10,
        n_test: 2,
        ..CorpusSpec::default()
    })
    .unwrap()
}

#[test]
fn save_load_save_is_byte_identical() {
    let corpus = tiny_corpus();
    let ids = corpus.split_ids(Split::Train);
    let (ckpt, _) = train_coarse(&corpus.training_view(&ids), &tiny_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ckpt");
    let b = dir.path().join("b.ckpt");
    ckpt.save(&a).unwrap();
    let loaded = Checkpoint::load(&a).unwrap();
    loaded.save(&b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(loaded.stage, Stage::Coarse);
    assert_eq!(loaded.config, ckpt.config);
}

#[test]
fn fine_training_requires_a_coarse_checkpoint() {
    let corpus = tiny_corpus();
    let ids = corpus.split_ids(Split::Train);
    let view = corpus.training_view(&ids);
    let config = tiny_config();
    let (coarse, _) = train_coarse(&view, &config).unwrap();
    let (fine, _) = train_fine(&view, &coarse, &config).unwrap();
    assert!(matches!(train_fine(&view, &fine, &config), Err(Error::Checkpoint(_))));
}

#[test]
fn fine_training_leaves_frozen_parameters_untouched() {
    let corpus = tiny_corpus();
    let ids = corpus.split_ids(Split::Train);
    let view = corpus.training_view(&ids);
    let config = TrainConfig {
        fine_epochs: 3,
        ..tiny_config()
    };
    let (coarse, _) = train_coarse(&view, &config).unwrap();
    let (fine, log) = train_fine(&view, &coarse, &config).unwrap();
    assert!(log.steps > 0);
    let mut changed = 0;
    for (_, p) in fine.params.iter() {
        let before = coarse.params.get(coarse.params.id(&p.name).unwrap());
        if p.name.starts_with("fine.") {
            changed += usize::from(before.value != p.value);
        } else {
            assert_eq!(before.value, p.value, "{} moved", p.name);
        }
    }
    assert!(changed > 0);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let corpus = tiny_corpus();
    let ids = corpus.split_ids(Split::Train);
    let view = corpus.training_view(&ids);
    let config = TrainConfig { lr: 0.0, ..tiny_config() };
    let (a, log) = train_coarse(&view, &config).unwrap();
    assert!(log.epoch_losses.iter().all(|l| l.is_finite()));
    let init = wstg::model::Model::new(view.feature_dim(), view.vocab_size, 4, 4, config.seed).unwrap();
    for (_, p) in a.params.iter() {
        assert_eq!(p.value, init.store.get(init.store.id(&p.name).unwrap()).value, "{}", p.name);
    }
}
