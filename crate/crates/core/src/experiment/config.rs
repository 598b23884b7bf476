use serde::{Deserialize, Serialize};

use crate::classifiers::TrainConfig;
use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::querylog::SynthConfig;
use crate::recognizer::DecodeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmSettings {
    pub order: usize,
    /// Share of training weight given to the `<entity>` sentence.
    pub alpha: f64,
    /// Total training weight of the entity-name sentences, spread in proportion
    /// to query counts. Together with `general_sentences` this sets how much text
    /// the model has seen, and so how sharply it has memorized each name.
    pub entity_weight: f64,
    /// Unit-weight filler sentences mixed into the training corpus.
    pub general_sentences: usize,
    /// Filler sentences held out to check that boosting leaves other traffic alone.
    pub heldout_sentences: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            order: crate::lm::DEFAULT_ORDER,
            alpha: 0.01,
            entity_weight: 2_000.0,
            general_sentences: 50_000,
            heldout_sentences: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    /// Growth factor that defines a trending entity.
    pub c: f64,
    pub k_cuts: Vec<usize>,
    /// The cut reported as the headline p-value.
    pub primary_k: usize,
    pub train_target_window: usize,
    pub test_target_window: usize,
    pub feature_weeks: usize,
    pub features: FeatureParams,
    pub lm: LmSettings,
    pub decode: DecodeConfig,
    pub train: TrainConfig,
    /// Seeds the filler sentences and the random baseline.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            c: 3.0,
            k_cuts: vec![250, 500, 1000],
            primary_k: 500,
            train_target_window: 7,
            test_target_window: 8,
            feature_weeks: 3,
            features: FeatureParams::default(),
            lm: LmSettings::default(),
            decode: DecodeConfig::default(),
            train: TrainConfig::default(),
            seed: 11,
        }
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    (seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Derives every random stream (log, training, confusions, fillers) from one seed.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.synth.seed = mix(seed, 1);
        self.train.seed = mix(seed, 2);
        self.decode.seed = mix(seed, 3);
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.decode.validate()?;
        self.features.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if self.k_cuts.is_empty() || self.k_cuts.contains(&0) {
            return bad("k_cuts must be nonempty and positive".into());
        }
        if !self.k_cuts.contains(&self.primary_k) {
            return bad(format!("primary_k {} is not among k_cuts", self.primary_k));
        }
        if self.test_target_window != self.train_target_window + 1 {
            return bad("test_target_window must directly follow train_target_window".into());
        }
        if self.test_target_window > self.synth.n_windows {
            return bad(format!(
                "test window {} beyond the {} generated windows",
                self.test_target_window, self.synth.n_windows
            ));
        }
        if self.feature_weeks == 0 || self.feature_weeks + 1 > self.train_target_window {
            return bad(format!(
                "feature_weeks must lie in [1, {}]",
                self.train_target_window.saturating_sub(1)
            ));
        }
        if self.lm.order == 0 {
            return bad("lm order must be positive".into());
        }
        if !(self.lm.alpha > 0.0 && self.lm.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.lm.alpha));
        }
        if !(self.lm.entity_weight > 0.0) || !self.lm.entity_weight.is_finite() {
            return bad("entity_weight must be positive".into());
        }
        if self.lm.heldout_sentences == 0 {
            return bad("heldout_sentences must be positive".into());
        }
        Ok(())
    }

    /// A full run also ranks with the growth heuristics, which need two feature weeks.
    pub fn validate_for_run(&self) -> Result<()> {
        self.validate()?;
        if self.feature_weeks < 2 {
            return Err(Error::Config("a full run needs feature_weeks >= 2".into()));
        }
        Ok(())
    }
}
