//! Run configuration. Files hold `section.key = value` lines; values are
//! JSON literals (`0.5`, `true`, `[80, 100]`, `"text"`) or bare strings.
//! Lines starting with `#` are comments.

use std::path::Path;

use freqplan::advloss::LossConfig;
use freqplan::degrade::DegradeRanges;
use freqplan::freqmoe::{Band, FirKernel, Granularity, RouterConfig, TokenDemoSpec};
use freqplan::hints::{CueConfig, HintThresholds};
use freqplan::spectra::{Operator, SpectralConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    pub thresholds: HintThresholds,
    pub cues: CueConfig,
    pub degrade: DegradeRanges,
    pub synth: SynthSection,
    pub router: RouterSection,
    pub demo: DemoSection,
    pub loss: LossConfig,
    pub critic: CriticSection,
    pub spectra: SpectraSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            thresholds: HintThresholds::default(),
            cues: CueConfig::default(),
            degrade: DegradeRanges::default(),
            synth: SynthSection::default(),
            router: RouterSection::default(),
            demo: DemoSection::default(),
            loss: LossConfig::default(),
            critic: CriticSection::default(),
            spectra: SpectraSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_per_class: usize,
    /// Side length of the square corpus images.
    pub size: usize,
    /// Number of procedural clean scenes the corpus cycles through.
    pub bases: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { n_per_class: 10, size: 512, bases: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterSection {
    pub lambda_s_raw: f64,
    pub temperature: f64,
    pub kernel_size: usize,
    pub kernel_sigma: f64,
    pub num_experts: usize,
    pub granularity: Granularity,
}

impl Default for RouterSection {
    fn default() -> Self {
        let d = RouterConfig::default();
        Self {
            lambda_s_raw: d.lambda_s_raw,
            temperature: d.temperature,
            kernel_size: FirKernel::DEFAULT_SIZE,
            kernel_sigma: FirKernel::DEFAULT_SIGMA,
            num_experts: d.num_experts,
            granularity: d.granularity,
        }
    }
}

impl RouterSection {
    pub fn build(&self) -> CliResult<RouterConfig> {
        let cfg = RouterConfig {
            lambda_s_raw: self.lambda_s_raw,
            temperature: self.temperature,
            kernel: FirKernel::gaussian(self.kernel_size, self.kernel_sigma)?,
            num_experts: self.num_experts,
            granularity: self.granularity,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSection {
    pub batch: usize,
    pub length: usize,
    pub dim: usize,
    pub text_length: usize,
    pub band: Band,
}

impl Default for DemoSection {
    fn default() -> Self {
        let d = TokenDemoSpec::default();
        Self {
            batch: d.batch,
            length: d.length,
            dim: d.dim,
            text_length: d.text_length,
            band: d.band,
        }
    }
}

impl DemoSection {
    pub fn spec(&self, seed: u64) -> TokenDemoSpec {
        TokenDemoSpec {
            batch: self.batch,
            length: self.length,
            dim: self.dim,
            text_length: self.text_length,
            band: self.band,
            seed,
        }
    }
}

/// Shape of the random feature stack and critic used by `loss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticSection {
    pub levels: usize,
    pub channels: usize,
}

impl Default for CriticSection {
    fn default() -> Self {
        Self { levels: 3, channels: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraSection {
    pub kappa: f64,
    pub sigma_eta: f64,
    pub sigma_t: f64,
    /// `identity`, `gaussian_blur(s)`, `ideal_lowpass(c)` or `mask_band(lo,hi)`.
    pub operator: String,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for SpectraSection {
    fn default() -> Self {
        let d = SpectralConfig::default();
        Self {
            kappa: d.kappa,
            sigma_eta: d.sigma_eta,
            sigma_t: d.sigma_t,
            operator: d.operator.to_string(),
            omega_min: d.omega_min,
            omega_max: 0.5,
            points: 64,
        }
    }
}

impl SpectraSection {
    pub fn build(&self) -> CliResult<SpectralConfig> {
        let operator: Operator = self.operator.parse()?;
        let cfg = SpectralConfig {
            kappa: self.kappa,
            sigma_eta: self.sigma_eta,
            sigma_t: self.sigma_t,
            operator,
            omega_min: self.omega_min,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `key = value` lines on top of `base`. Keys must name an existing
/// leaf of the configuration tree.
pub fn merge_text(base: &CliConfig, text: &str, origin: &str) -> CliResult<CliConfig> {
    let mut tree = serde_json::to_value(base)?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = || format!("{origin}:{}", n + 1);
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{}: expected `key = value`", at())))?;
        let key = key.trim();
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| CliError::usage(format!("{}: unknown key `{key}`", at())))?;
        }
        if node.is_object() {
            return Err(CliError::usage(format!("{}: `{key}` is a section, not a key", at())));
        }
        *node = parse_value(raw.trim());
    }
    serde_json::from_value(tree).map_err(|e| CliError::usage(format!("{origin}: {e}")))
}

pub fn load(path: Option<&Path>) -> CliResult<CliConfig> {
    let base = CliConfig::default();
    match path {
        None => Ok(base),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            merge_text(&base, &text, &p.display().to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_override_defaults() {
        let text = "# comment\nseed = 3\nthresholds.noise_score_min = 0.5\n\ndegrade.rain_angle_deg = [70, 110]\nrouter.granularity = token\nspectra.operator = gaussian_blur(2)\n";
        let c = merge_text(&CliConfig::default(), text, "t").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.thresholds.noise_score_min, 0.5);
        assert_eq!(c.degrade.rain_angle_deg, (70.0, 110.0));
        assert_eq!(c.router.granularity, Granularity::Token);
        assert_eq!(c.spectra.build().unwrap().operator, Operator::GaussianBlur { sigma: 2.0 });
        assert_eq!(c.thresholds.line_score_min, 0.16);
    }

    #[test]
    fn unknown_and_malformed_lines_are_rejected() {
        let d = CliConfig::default();
        for bad in ["thresholds.nope = 1", "nope = 1", "seed", "thresholds = 1", "seed = -4", "loss.alpha = fast"] {
            assert!(matches!(merge_text(&d, bad, "t"), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn defaults_carry_published_values() {
        let c = CliConfig::default();
        assert_eq!((c.loss.alpha, c.loss.beta, c.loss.lambda, c.loss.gamma), (50.0, 5.0, 0.5, 1e-3));
        assert_eq!(c.thresholds, HintThresholds::default());
        assert_eq!(c.router.build().unwrap().kernel, FirKernel::default());
    }
}
