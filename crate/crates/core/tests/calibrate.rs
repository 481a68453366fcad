use std::time::Instant;
use pairscore_core::baseline::{
    baseline_classify, baseline_train, embedding_pair_features, tfidf_fit, tfidf_pair_features,
};
use pairscore_core::corpus::{make_split, preprocess_pair, synthesize_corpus, PreprocessConfig, QAPair};
use pairscore_core::encoder::{extract_features, init_params, EncoderConfig, FeaturePooling};
use pairscore_core::eval::evaluate;
use pairscore_core::train::{train, NoopSink, Phase, PretrainMode, TrainConfig, TrainState};
use pairscore_core::vocab::{build_vocab, Vocabulary};

fn envf(k: &str, d: f64) -> f64 {
    std::env::var(k).map(|s| s.parse().unwrap()).unwrap_or(d)
}
fn envu(k: &str, d: usize) -> usize {
    std::env::var(k).map(|s| s.parse().unwrap()).unwrap_or(d)
}

fn accuracy_of_clf(
    feats: &dyn Fn(&QAPair) -> Vec<f64>,
    train_pairs: &[QAPair],
    test_pairs: &[QAPair],
) -> f64 {
    let xs: Vec<Vec<f64>> = train_pairs.iter().map(|p| feats(p)).collect();
    let ys: Vec<bool> = train_pairs.iter().map(|p| p.accepted).collect();
    let clf = baseline_train(&xs, &ys).unwrap();
    let correct = test_pairs
        .iter()
        .filter(|p| baseline_classify(&feats(p), &clf).unwrap().1 == p.accepted)
        .count();
    correct as f64 / test_pairs.len() as f64
}

#[test]
fn calibrate() {
    let scale = envu("CAL_SCALE", 1000);
    let ft_lr = envf("CAL_FT_LR", 1e-3);
    let ft_epochs = envu("CAL_FT_EPOCHS", 3);
    let pt_lr = envf("CAL_PT_LR", 1e-3);
    let pt_batch = envu("CAL_PT_BATCH", 32);
    let ft_wd = envf("CAL_FT_WD", 0.01);
    let sent_epochs = envu("CAL_SENT_EPOCHS", 0);
    let qa_epochs = envu("CAL_QA_EPOCHS", 0);

    let pc = PreprocessConfig::default();
    let t0 = Instant::now();
    let pairs: Vec<QAPair> = synthesize_corpus(42, scale + scale / 4, scale + scale / 4, 0.95)
        .iter()
        .map(|p| preprocess_pair(p, &pc).unwrap())
        .collect();
    let split = make_split(&pairs, (scale, scale), (scale / 4, scale / 4), 7).unwrap();
    let texts: Vec<String> = split
        .train
        .iter()
        .map(|p| format!("{} {}", p.question, p.answer))
        .collect();
    let vocab: Vocabulary = build_vocab(&texts, 2000, 1).unwrap();
    println!("setup {:.1}s vocab {}", t0.elapsed().as_secs_f64(), vocab.size());

    let cfg = EncoderConfig::desk_default(vocab.size());
    let ft = TrainConfig {
        epochs: ft_epochs,
        batch_size: 32,
        learning_rate: ft_lr,
        weight_decay: ft_wd,
        max_seq_len: 128,
        seed: 101,
        ..TrainConfig::default()
    };

    // 1. finetune-only
    let t1 = Instant::now();
    let ft_only = train(TrainState::fresh(init_params(&cfg, 11).unwrap()), &split, Phase::Finetune, &vocab, &ft, &mut NoopSink).unwrap();
    let ev_ft = evaluate(&ft_only.state.params, &split.test, &vocab, cfg.n_layers).unwrap();
    let ev_ft_train = evaluate(&ft_only.state.params, &split.train, &vocab, cfg.n_layers).unwrap();
    println!(
        "finetune-only: acc {:.4} (train {:.4})  ({:.0}s) losses {:?}",
        ev_ft.metrics.accuracy,
        ev_ft_train.metrics.accuracy,
        t1.elapsed().as_secs_f64(),
        ft_only.epoch_losses
    );

    // 2. two-stage pretrain + finetune
    let t2 = Instant::now();
    let mut state = TrainState::fresh(init_params(&cfg, 11).unwrap());
    if sent_epochs > 0 {
        let pt = TrainConfig { epochs: sent_epochs, batch_size: pt_batch, learning_rate: pt_lr, max_seq_len: 128, seed: 202, ..TrainConfig::default() };
        let out = train(state, &split, Phase::Pretrain(PretrainMode::Sentence), &vocab, &pt, &mut NoopSink).unwrap();
        let n = out.epoch_losses.len();
        println!(
            "pretrain-sentence {:.0}s first {:.3} mid {:.3} last {:.3}",
            t2.elapsed().as_secs_f64(),
            out.epoch_losses[0],
            out.epoch_losses[n / 2],
            out.epoch_losses[n - 1]
        );
        state = TrainState::fresh(out.state.params);
    }
    if qa_epochs > 0 {
        let t = Instant::now();
        let pt = TrainConfig { epochs: qa_epochs, batch_size: pt_batch, learning_rate: pt_lr, max_seq_len: 128, seed: 303, ..TrainConfig::default() };
        let out = train(state, &split, Phase::Pretrain(PretrainMode::QaParagraph), &vocab, &pt, &mut NoopSink).unwrap();
        let n = out.epoch_losses.len();
        println!(
            "pretrain-qa {:.0}s first {:.3} last {:.3}",
            t.elapsed().as_secs_f64(),
            out.epoch_losses[0],
            out.epoch_losses[n - 1]
        );
        state = TrainState::fresh(out.state.params);
    }
    let t3 = Instant::now();
    let pf = train(state, &split, Phase::Finetune, &vocab, &ft, &mut NoopSink).unwrap();
    let ev_pf = evaluate(&pf.state.params, &split.test, &vocab, cfg.n_layers).unwrap();
    let ev_pf_train = evaluate(&pf.state.params, &split.train, &vocab, cfg.n_layers).unwrap();
    println!(
        "pretrain+finetune: acc {:.4} (train {:.4})  ({:.0}s) losses {:?}",
        ev_pf.metrics.accuracy,
        ev_pf_train.metrics.accuracy,
        t3.elapsed().as_secs_f64(),
        pf.epoch_losses
    );

    // 3. tfidf baseline
    let docs: Vec<String> = split.train.iter().map(|p| format!("{} {}", p.question, p.answer)).collect();
    let tfidf = tfidf_fit(&docs).unwrap();
    let acc_tfidf = accuracy_of_clf(&|p| tfidf_pair_features(&tfidf, p), &split.train, &split.test);
    println!("tfidf: acc {:.4}", acc_tfidf);

    // 3b. word2vec baseline
    let table = pairscore_core::baseline::embed_fit(&docs, 32, 3, 3, 55).unwrap();
    let acc_w2v = accuracy_of_clf(&|p| embedding_pair_features(&table, p), &split.train, &split.test);
    println!("w2v: acc {:.4}", acc_w2v);

    // 4. frozen random encoder features @ layer 2
    let frozen = init_params(&cfg, 999).unwrap();
    let feats = |p: &QAPair| {
        let enc = pairscore_core::vocab::encode_pair(&p.question, &p.answer, &vocab, 128).unwrap();
        extract_features(&frozen, &enc, 2, FeaturePooling::Mean).unwrap()
    };
    let acc_frozen = accuracy_of_clf(&feats, &split.train, &split.test);
    println!("frozen-random: acc {:.4}", acc_frozen);

    println!(
        "ORDER: pf {:.4} >= ft {:.4} >= tfidf {:.4} >= frozen {:.4}",
        ev_pf.metrics.accuracy, ev_ft.metrics.accuracy, acc_tfidf, acc_frozen
    );
}
