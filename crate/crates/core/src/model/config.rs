use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::NUM_CLASSES;

/// One of the three encoder feature-extraction paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderPath {
    /// Tokens are time steps of the scaled window.
    Time,
    /// Tokens are sensors: the transposed window.
    Sensor,
    /// Tokens are rows of the 2D DFT magnitude map.
    Frequency,
}

impl EncoderPath {
    /// Concatenation order of the encoder memory.
    pub const ALL: [EncoderPath; 3] = [
        EncoderPath::Time,
        EncoderPath::Sensor,
        EncoderPath::Frequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderPath::Time => "time",
            EncoderPath::Sensor => "sensor",
            EncoderPath::Frequency => "frequency",
        }
    }
}

impl fmt::Display for EncoderPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EncoderPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "time" | "t" => Ok(EncoderPath::Time),
            "sensor" | "s" => Ok(EncoderPath::Sensor),
            "frequency" | "freq" | "f" => Ok(EncoderPath::Frequency),
            other => Err(Error::Usage(format!("unknown encoder path {other:?}"))),
        }
    }
}

/// Parse a comma-separated path list such as `time,frequency`.
pub fn parse_paths(list: &str) -> Result<Vec<EncoderPath>> {
    let mut paths = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    paths.dedup();
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    /// Encoder layers per path.
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub d_ffn: usize,
    pub dropout: f64,
    pub num_classes: usize,
    /// Time points per window.
    pub window: usize,
    /// Monitoring parameters per time point.
    pub features: usize,
    pub enabled_paths: Vec<EncoderPath>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            d_ffn: 128,
            dropout: 0.1,
            num_classes: NUM_CLASSES,
            window: 40,
            features: 34,
            enabled_paths: EncoderPath::ALL.to_vec(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.heads == 0 || self.d_ffn == 0 {
            return fail("d_model, heads and d_ffn must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return fail(format!(
                "heads ({}) must divide d_model ({})",
                self.heads, self.d_model
            ));
        }
        if self.enabled_paths.is_empty() {
            return fail("at least one encoder path must be enabled".into());
        }
        let mut sorted = self.enabled_paths.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != self.enabled_paths {
            return fail(format!(
                "enabled_paths must be unique and in time, sensor, frequency order, got {:?}",
                self.enabled_paths
            ));
        }
        if self.num_classes != NUM_CLASSES {
            return fail(format!(
                "num_classes must be {NUM_CLASSES}, got {}",
                self.num_classes
            ));
        }
        if self.window < 3 || self.features == 0 {
            return fail(format!(
                "window must be at least 3 and features positive, got {}x{}",
                self.window, self.features
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn has_path(&self, path: EncoderPath) -> bool {
        self.enabled_paths.contains(&path)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Tokens a path contributes to the encoder memory.
    pub fn path_tokens(&self, path: EncoderPath) -> usize {
        match path {
            EncoderPath::Time | EncoderPath::Frequency => self.window,
            EncoderPath::Sensor => self.features,
        }
    }

    /// Width of a path's input tokens.
    pub fn path_token_width(&self, path: EncoderPath) -> usize {
        match path {
            EncoderPath::Time | EncoderPath::Frequency => self.features,
            EncoderPath::Sensor => self.window,
        }
    }

    pub fn memory_tokens(&self) -> usize {
        self.enabled_paths
            .iter()
            .map(|&p| self.path_tokens(p))
            .sum()
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let (d, f) = (self.d_model, self.d_ffn);
        let linear = |i: usize, o: usize| i * o + o;
        let attention = 4 * linear(d, d);
        let norm = 2 * d;
        let ffn = linear(d, f) + linear(f, d);
        let encoder_layer = attention + 2 * norm + ffn;
        let decoder_layer = 2 * attention + 3 * norm + ffn;
        let paths: usize = self
            .enabled_paths
            .iter()
            .map(|&p| linear(self.path_token_width(p), d) + self.encoder_layers * encoder_layer)
            .sum();
        paths
            + linear(self.features, d)
            + self.decoder_layers * decoder_layer
            + linear(d, self.num_classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.memory_tokens(), 114);
        // Summed by hand from the layer shapes: three paths of 69184, 69568 and
        // 69184, two decoder layers of 50240, the 34->64 statistic projection
        // (2240) and the 64->12 head (780).
        assert_eq!(c.parameter_count(), 311_436);
    }

    #[test]
    fn heads_must_divide_width() {
        let c = ModelConfig {
            heads: 3,
            ..ModelConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn empty_paths_rejected() {
        let c = ModelConfig {
            enabled_paths: vec![],
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn path_list_parsing() {
        assert_eq!(
            parse_paths("frequency,time").unwrap(),
            vec![EncoderPath::Time, EncoderPath::Frequency]
        );
        assert!(parse_paths("time,spectral").is_err());
    }
}
