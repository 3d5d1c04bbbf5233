use serde::{Deserialize, Serialize};

use super::Seq2SeqError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub ff_dim: usize,
    pub token_encoder_layers: usize,
    pub edu_encoder_layers: usize,
    pub decoder_layers: usize,
    pub max_positions: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Mixes a copy distribution over source tokens into the decoder output.
    #[serde(default)]
    pub copy: bool,
}

impl ModelConfig {
    /// Desk-scale default architecture for a given vocabulary.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 128,
            n_heads: 4,
            ff_dim: 512,
            token_encoder_layers: 2,
            edu_encoder_layers: 2,
            decoder_layers: 2,
            max_positions: 512,
            dropout: 0.1,
            seed: 0,
            copy: true,
        }
    }

    /// Smallest sensible model, used by gradient checks.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 8,
            n_heads: 2,
            ff_dim: 16,
            token_encoder_layers: 1,
            edu_encoder_layers: 1,
            decoder_layers: 1,
            max_positions: 64,
            dropout: 0.0,
            seed: 0,
            copy: true,
        }
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let counts = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("ff_dim", self.ff_dim),
            ("token_encoder_layers", self.token_encoder_layers),
            ("edu_encoder_layers", self.edu_encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("max_positions", self.max_positions),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Seq2SeqError::Config(format!("{name} must be at least 1")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Seq2SeqError::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Seq2SeqError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub num_candidates: usize,
    pub beam_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub length_penalty: f64,
    pub nucleus_p: f64,
    pub diversity_penalty: f64,
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            num_candidates: 16,
            beam_size: 16,
            min_len: 1,
            max_len: 64,
            length_penalty: 1.0,
            nucleus_p: 0.92,
            diversity_penalty: 1.0,
            temperature: 1.0,
            rng_seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn greedy(max_len: usize) -> Self {
        Self { num_candidates: 1, beam_size: 1, max_len, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let bad = |m: String| Err(Seq2SeqError::Config(m));
        if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) {
            return bad(format!("nucleus_p {} outside (0, 1]", self.nucleus_p));
        }
        if self.min_len > self.max_len {
            return bad(format!("min_len {} exceeds max_len {}", self.min_len, self.max_len));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        if self.num_candidates == 0 || self.beam_size == 0 {
            return bad("num_candidates and beam_size must be at least 1".into());
        }
        Ok(())
    }
}
