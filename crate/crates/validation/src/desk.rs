//! Desk-scale settings: the reference liquid (L = 135) with reduced trial
//! counts so each statistical criterion runs in minutes on one core.

use lsm_core::harness::{ExperimentConfig, ExperimentKind};

pub const SEED: u64 = 1;

pub fn config(kind: ExperimentKind, trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.trials = trials;
    c.seed = SEED;
    c
}

pub fn pairwise() -> ExperimentConfig {
    config(ExperimentKind::Pairwise, 20)
}

pub fn distance_sweep() -> ExperimentConfig {
    config(ExperimentKind::DistanceSweep, 20)
}

/// `m = 40` training trains, probing every 4 presentations.
pub fn rank_sweep() -> ExperimentConfig {
    let mut c = config(ExperimentKind::RankSweep, 20);
    c.rank.trains = 40;
    c.rank.probe_every = 4;
    c
}

pub fn generalization() -> ExperimentConfig {
    config(ExperimentKind::Generalization, 20)
}

pub fn generality() -> ExperimentConfig {
    config(ExperimentKind::Generality, 20)
}

pub fn fading_memory() -> ExperimentConfig {
    config(ExperimentKind::FadingMemory, 50)
}

pub fn connectivity() -> ExperimentConfig {
    config(ExperimentKind::ConnectivityHistogram, 20)
}

/// Gated 4-class task: 400 training and 100 test samples per class.
pub fn classify() -> ExperimentConfig {
    let mut c = config(ExperimentKind::Classify, 10);
    c.classify.classes = vec![4];
    c.classify.train_per_class = 400;
    c.classify.test_per_class = 100;
    c
}

/// Larger class counts, reported only.
pub fn classify_reporting() -> ExperimentConfig {
    let mut c = classify();
    c.trials = 1;
    c.classify.classes = vec![8, 12];
    c
}
