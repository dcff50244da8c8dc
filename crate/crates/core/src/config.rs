use alloc::string::{String, ToString};
use core::fmt;

/// Runtime parameters of one pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub width: u32,
    pub height: u32,
    pub target_fps: f64,
    pub seed: u64,
    pub canny_low: f32,
    pub canny_high: f32,
    pub canny_sigma: f32,
    pub strength: f32,
    pub steps: u16,
    pub style_id: String,
    pub worker_endpoint: String,
    pub enhancement_enabled: bool,
}

pub const DEFAULT_WORKER_ENDPOINT: &str = "127.0.0.1:7073";

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            target_fps: 10.0,
            seed: 42,
            canny_low: 50.0,
            canny_high: 150.0,
            canny_sigma: 1.0,
            strength: 0.6,
            steps: 1,
            style_id: "thunderhill".to_string(),
            worker_endpoint: DEFAULT_WORKER_ENDPOINT.to_string(),
            enhancement_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Resolution { width: u32, height: u32 },
    Fps(f64),
    Thresholds { low: f32, high: f32 },
    Sigma(f32),
    Strength(f32),
    Steps,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Resolution { width, height } => {
                write!(f, "resolution {width}x{height} must be even and at least 64 in both axes")
            }
            ConfigError::Fps(v) => write!(f, "target fps {v} must be positive"),
            ConfigError::Thresholds { low, high } => {
                write!(f, "canny thresholds must satisfy 0 <= low <= high <= 255 (got {low}, {high})")
            }
            ConfigError::Sigma(s) => write!(f, "blur sigma {s} must be positive"),
            ConfigError::Strength(s) => write!(f, "strength {s} outside [0, 1]"),
            ConfigError::Steps => f.write_str("steps must be at least 1"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let dim_ok = |d: u32| d >= 64 && d % 2 == 0 && d <= u16::MAX as u32;
        if !dim_ok(self.width) || !dim_ok(self.height) {
            return Err(ConfigError::Resolution { width: self.width, height: self.height });
        }
        if !(self.target_fps > 0.0) || !self.target_fps.is_finite() {
            return Err(ConfigError::Fps(self.target_fps));
        }
        let (lo, hi) = (self.canny_low, self.canny_high);
        let ordered = (0.0..=255.0).contains(&lo) && (0.0..=255.0).contains(&hi) && lo <= hi;
        let strict = lo == 0.0 || hi == 0.0 || lo < hi;
        if !ordered || !strict {
            return Err(ConfigError::Thresholds { low: lo, high: hi });
        }
        if !(self.canny_sigma > 0.0) {
            return Err(ConfigError::Sigma(self.canny_sigma));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(ConfigError::Strength(self.strength));
        }
        if self.steps == 0 {
            return Err(ConfigError::Steps);
        }
        Ok(())
    }

    pub fn frame_period_ns(&self) -> u64 {
        (1e9 / self.target_fps) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.width, c.height), (640, 480));
        assert_eq!(c.frame_period_ns(), 100_000_000);
    }

    #[test]
    fn rejects_bad_values() {
        let base = PipelineConfig::default();
        let bad = [
            PipelineConfig { width: 63, ..base.clone() },
            PipelineConfig { height: 65, ..base.clone() },
            PipelineConfig { target_fps: 0.0, ..base.clone() },
            PipelineConfig { canny_low: 100.0, canny_high: 100.0, ..base.clone() },
            PipelineConfig { canny_low: 10.0, canny_high: 300.0, ..base.clone() },
            PipelineConfig { strength: 1.5, ..base.clone() },
            PipelineConfig { steps: 0, ..base.clone() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        // equal thresholds are allowed only at zero
        PipelineConfig { canny_low: 0.0, canny_high: 0.0, ..base }.validate().unwrap();
    }
}
