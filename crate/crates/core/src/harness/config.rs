use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::LiquidConfig;
use crate::error::{Error, Result};
use crate::metrics::{DistanceKernel, StateFilter};
use crate::patterns::{BurstOnset, BurstParams, PairParams, TemplateParams};
use crate::readout::ReadoutParams;
use crate::sim::RateBand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Pairwise,
    SameLiquidDiffInput,
    DistanceSweep,
    RankSweep,
    Generalization,
    Generality,
    FadingMemory,
    ConnectivityHistogram,
    Classify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        Self::Pairwise,
        Self::SameLiquidDiffInput,
        Self::DistanceSweep,
        Self::RankSweep,
        Self::Generalization,
        Self::Generality,
        Self::FadingMemory,
        Self::ConnectivityHistogram,
        Self::Classify,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pairwise => "pairwise",
            Self::SameLiquidDiffInput => "same-liquid-diff-input",
            Self::DistanceSweep => "distance-sweep",
            Self::RankSweep => "rank-sweep",
            Self::Generalization => "generalization",
            Self::Generality => "generality",
            Self::FadingMemory => "fading-memory",
            Self::ConnectivityHistogram => "connectivity-histogram",
            Self::Classify => "classify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Settings shared by every protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommonParams {
    /// Pattern length `T_p` (ms).
    pub duration: f64,
    pub state_tau: f64,
    pub sample_step: f64,
    /// Calibrate `weight_scale` per liquid on a reference Poisson train.
    pub calibrate: bool,
    pub rate_band: RateBand,
    /// Rate (Hz) of the Poisson trains used as generic inputs.
    pub input_rate: f64,
    pub distance_tau: f64,
    /// Absolute tolerance on generated pair distances.
    pub pair_tolerance: f64,
}

impl Default for CommonParams {
    fn default() -> Self {
        Self {
            duration: 1000.0,
            state_tau: 30.0,
            sample_step: 20.0,
            calibrate: true,
            rate_band: RateBand::default(),
            input_rate: 20.0,
            distance_tau: 5.0,
            pair_tolerance: 0.005,
        }
    }
}

impl CommonParams {
    pub fn state_filter(&self) -> StateFilter {
        StateFilter { tau: self.state_tau, sample_step: self.sample_step }
    }

    pub fn distance_kernel(&self) -> DistanceKernel {
        DistanceKernel { tau: self.distance_tau }
    }

    pub fn pair_params(&self) -> PairParams {
        PairParams {
            rate: self.input_rate,
            duration: self.duration,
            kernel: self.distance_kernel(),
            ..PairParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairwiseParams {
    pub distances: Vec<f64>,
    /// Training iterations over the pair `(u, v)`.
    pub iterations: usize,
}

impl Default for PairwiseParams {
    fn default() -> Self {
        Self { distances: vec![0.0, 0.1, 0.2, 0.4], iterations: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SameLiquidParams {
    pub distance: f64,
    pub pairs: usize,
    /// Distinct Poisson trains presented once each to train the liquid.
    pub training_patterns: usize,
}

impl Default for SameLiquidParams {
    fn default() -> Self {
        Self { distance: 0.2, pairs: 50, training_patterns: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceSweepParams {
    pub distances: Vec<f64>,
    pub iterations: usize,
}

impl Default for DistanceSweepParams {
    fn default() -> Self {
        Self {
            distances: vec![0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5],
            iterations: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankParams {
    /// Distinct training trains `m`.
    pub trains: usize,
    /// Jittered variants `s` of one base train for the generalization rank.
    pub variants: usize,
    pub jitter: f64,
    pub probe_every: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        Self { trains: 40, variants: 40, jitter: 5.0, probe_every: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralityParams {
    pub training_patterns: usize,
    pub pairs: usize,
    pub distance: f64,
}

impl Default for GeneralityParams {
    fn default() -> Self {
        Self { training_patterns: 40, pairs: 50, distance: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingParams {
    pub iterations: usize,
    pub background_rate: f64,
    pub burst_spikes: usize,
    pub burst_rate: f64,
    /// Burst onset range as fractions of the duration.
    pub onset: [f64; 2],
}

impl Default for FadingParams {
    fn default() -> Self {
        let b = BurstParams::default();
        let onset = match b.onset {
            BurstOnset::Uniform { lo, hi } => [lo, hi],
            BurstOnset::Fixed(t) => [t, t],
        };
        Self {
            iterations: 15,
            background_rate: b.background_rate,
            burst_spikes: b.burst_spikes,
            burst_rate: b.burst_rate,
            onset,
        }
    }
}

impl FadingParams {
    pub fn burst_params(&self, duration: f64) -> BurstParams {
        BurstParams {
            duration,
            background_rate: self.background_rate,
            burst_spikes: self.burst_spikes,
            burst_rate: self.burst_rate,
            onset: BurstOnset::Uniform { lo: self.onset[0], hi: self.onset[1] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectivityParams {
    pub training_patterns: usize,
}

impl Default for ConnectivityParams {
    fn default() -> Self {
        Self { training_patterns: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    pub classes: Vec<usize>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub n_lines: usize,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub jitter: f64,
    /// Plasticity presentations of randomly drawn training samples.
    pub training_iterations: usize,
    pub readout_epochs: usize,
    pub readout_rate: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            classes: vec![4],
            train_per_class: 400,
            test_per_class: 100,
            n_lines: 8,
            gap_mean: 10.0,
            gap_std: 20.0,
            jitter: 5.0,
            training_iterations: 100,
            readout_epochs: 500,
            readout_rate: 0.01,
        }
    }
}

impl ClassifyParams {
    pub fn template_params(&self, duration: f64) -> TemplateParams {
        TemplateParams {
            n_lines: self.n_lines,
            duration,
            gap_mean: self.gap_mean,
            gap_std: self.gap_std,
        }
    }

    pub fn readout_params(&self, seed: u64) -> ReadoutParams {
        ReadoutParams { epochs: self.readout_epochs, rate: self.readout_rate, seed }
    }
}

/// One experiment: its kind, trial count, master seed and protocol settings.
/// Serialized as TOML; absent tables take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub full_scale: bool,
    #[serde(default)]
    pub liquid: LiquidConfig,
    #[serde(default)]
    pub common: CommonParams,
    #[serde(default)]
    pub pairwise: PairwiseParams,
    #[serde(default)]
    pub same_liquid: SameLiquidParams,
    #[serde(default)]
    pub distance_sweep: DistanceSweepParams,
    #[serde(default)]
    pub rank: RankParams,
    #[serde(default)]
    pub generality: GeneralityParams,
    #[serde(default)]
    pub fading: FadingParams,
    #[serde(default)]
    pub connectivity: ConnectivityParams,
    #[serde(default)]
    pub classify: ClassifyParams,
}

fn default_trials() -> usize {
    20
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            trials: default_trials(),
            seed: 0,
            out: None,
            full_scale: false,
            liquid: LiquidConfig::default(),
            common: CommonParams::default(),
            pairwise: PairwiseParams::default(),
            same_liquid: SameLiquidParams::default(),
            distance_sweep: DistanceSweepParams::default(),
            rank: RankParams::default(),
            generality: GeneralityParams::default(),
            fading: FadingParams::default(),
            connectivity: ConnectivityParams::default(),
            classify: ClassifyParams::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config is always representable as TOML")
    }

    /// Switch to the trial counts and set sizes of the original protocols.
    pub fn apply_full_scale(&mut self) {
        self.full_scale = true;
        self.trials = match self.kind {
            ExperimentKind::Pairwise | ExperimentKind::DistanceSweep => 200,
            ExperimentKind::SameLiquidDiffInput => 1,
            ExperimentKind::RankSweep | ExperimentKind::Generalization | ExperimentKind::Generality => 200,
            ExperimentKind::FadingMemory => 200,
            ExperimentKind::ConnectivityHistogram => 20,
            ExperimentKind::Classify => 50,
        };
        self.same_liquid.pairs = 500;
        self.rank.trains = 100;
        self.rank.variants = 100;
        self.rank.probe_every = 1;
        self.generality.training_patterns = 100;
        self.generality.pairs = 500;
        self.connectivity.training_patterns = 100;
        self.classify.classes = vec![4, 8, 12];
        self.classify.training_iterations = 500;
    }

    /// Check every setting the selected protocol relies on.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.liquid.validate()?;
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        let c = &self.common;
        if !(c.duration > 0.0) || !(c.state_tau > 0.0) || !(c.sample_step > 0.0) || !(c.distance_tau > 0.0) {
            return fail("duration, state_tau, sample_step and distance_tau must be positive".into());
        }
        if !(c.rate_band.lo > 0.0 && c.rate_band.lo <= c.rate_band.hi) {
            return fail(format!("invalid rate band [{}, {}]", c.rate_band.lo, c.rate_band.hi));
        }
        if !(c.input_rate > 0.0) || !(c.pair_tolerance > 0.0) {
            return fail("input_rate and pair_tolerance must be positive".into());
        }
        let bad_distance = |d: &f64| !(*d >= 0.0 && d.is_finite());
        match self.kind {
            ExperimentKind::Pairwise => {
                let p = &self.pairwise;
                if p.distances.is_empty() || p.distances.iter().any(bad_distance) {
                    return fail("pairwise.distances must be a nonempty list of non-negative values".into());
                }
            }
            ExperimentKind::SameLiquidDiffInput => {
                let p = &self.same_liquid;
                if p.pairs == 0 || bad_distance(&p.distance) {
                    return fail("same_liquid needs pairs >= 1 and a non-negative distance".into());
                }
            }
            ExperimentKind::DistanceSweep => {
                let p = &self.distance_sweep;
                if p.distances.is_empty() || p.distances.iter().any(bad_distance) {
                    return fail("distance_sweep.distances must be a nonempty list of non-negative values".into());
                }
            }
            ExperimentKind::RankSweep | ExperimentKind::Generalization => {
                let p = &self.rank;
                if p.trains < 2 || p.variants < 2 {
                    return fail("rank sweeps need at least 2 trains and 2 variants".into());
                }
                if !(p.jitter >= 0.0) {
                    return fail("rank.jitter must be >= 0".into());
                }
            }
            ExperimentKind::Generality => {
                let p = &self.generality;
                if p.pairs == 0 || bad_distance(&p.distance) {
                    return fail("generality needs pairs >= 1 and a non-negative distance".into());
                }
            }
            ExperimentKind::FadingMemory => {
                let p = &self.fading;
                if !(0.0..=1.0).contains(&p.onset[0]) || !(p.onset[0]..=1.0).contains(&p.onset[1]) {
                    return fail("fading.onset must satisfy 0 <= lo <= hi <= 1".into());
                }
                if p.burst_spikes == 0 || !(p.burst_rate > 0.0) || !(p.background_rate >= 0.0) {
                    return fail("fading burst needs spikes >= 1 and positive rates".into());
                }
            }
            ExperimentKind::ConnectivityHistogram => {}
            ExperimentKind::Classify => {
                let p = &self.classify;
                if p.classes.is_empty() || p.classes.iter().any(|&n| n < 2) {
                    return fail("classify.classes entries must be >= 2".into());
                }
                if p.train_per_class < 2 || p.test_per_class < 1 || p.n_lines == 0 {
                    return fail("classify needs train_per_class >= 2, test_per_class >= 1 and n_lines >= 1".into());
                }
                if !(p.jitter >= 0.0) || !(p.readout_rate > 0.0) {
                    return fail("classify.jitter must be >= 0 and readout_rate > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Liquid configuration used by this experiment's trials.
    pub fn liquid_config(&self) -> LiquidConfig {
        let mut config = self.liquid.clone();
        if self.kind == ExperimentKind::Classify {
            config.n_input_lines = config.n_input_lines.max(self.classify.n_lines);
        }
        config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.as_str().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn minimal_toml() {
        let c = ExperimentConfig::from_toml_str("kind = \"rank-sweep\"\n").unwrap();
        assert_eq!(c.trials, 20);
        assert_eq!(c.rank.trains, 40);
        assert_eq!(c.liquid, LiquidConfig::default());
    }

    #[test]
    fn overrides_and_round_trip() {
        let text = "kind = \"pairwise\"\ntrials = 3\n[liquid]\nn_neurons = 20\ncolumn_dims = [5, 2, 2]\n[pairwise]\ndistances = [0.0, 0.3]\n";
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.liquid.n_neurons, 20);
        assert_eq!(c.pairwise.distances, vec![0.0, 0.3]);
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn invalid_settings_rejected() {
        assert!(ExperimentConfig::from_toml_str("kind = \"pairwise\"\ntrials = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"rank-sweep\"\n[rank]\ntrains = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"classify\"\n[classify]\nclasses = [1]\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"pairwise\"\nbogus = 1\n").is_err());
    }
}
