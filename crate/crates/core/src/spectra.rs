//! Frequency-domain demonstrators for restoration objectives: the posterior
//! information weight under a power-law image prior, the flow-matching
//! spectral weight built on it, the total-variation accumulation bound, and
//! the W1 tube bound on 1-D discrete distributions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Forward operator, given by its frequency response magnitude. Frequencies
/// are in cycles per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    /// Gaussian blur with standard deviation `sigma` samples.
    GaussianBlur { sigma: f64 },
    /// Passes `omega <= cutoff`.
    IdealLowpass { cutoff: f64 },
    /// Removes the closed band `[lo, hi]`.
    MaskBand { lo: f64, hi: f64 },
    Identity,
}

impl Operator {
    pub fn response(&self, omega: f64) -> f64 {
        match *self {
            Operator::GaussianBlur { sigma } => {
                let a = std::f64::consts::PI * sigma * omega;
                (-2.0 * a * a).exp()
            }
            Operator::IdealLowpass { cutoff } => {
                if omega <= cutoff {
                    1.0
                } else {
                    0.0
                }
            }
            Operator::MaskBand { lo, hi } => {
                if (lo..=hi).contains(&omega) {
                    0.0
                } else {
                    1.0
                }
            }
            Operator::Identity => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Operator::GaussianBlur { sigma } => sigma.is_finite() && sigma >= 0.0,
            Operator::IdealLowpass { cutoff } => cutoff.is_finite() && cutoff >= 0.0,
            Operator::MaskBand { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
            Operator::Identity => true,
        };
        if ok {
            Ok(())
        } else {
            Err(usage(format!("invalid operator parameters: {self}")))
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::GaussianBlur { sigma } => write!(f, "gaussian_blur({sigma})"),
            Operator::IdealLowpass { cutoff } => write!(f, "ideal_lowpass({cutoff})"),
            Operator::MaskBand { lo, hi } => write!(f, "mask_band({lo},{hi})"),
            Operator::Identity => write!(f, "identity"),
        }
    }
}

impl FromStr for Operator {
    type Err = Error;

    /// Parses `identity`, `gaussian_blur(s)`, `ideal_lowpass(c)` or `mask_band(lo,hi)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || usage(format!("cannot parse operator {s:?}"));
        if s == "identity" {
            return Ok(Operator::Identity);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let op = match (name.trim(), nums.as_slice()) {
            ("gaussian_blur", [s]) => Operator::GaussianBlur { sigma: *s },
            ("ideal_lowpass", [c]) => Operator::IdealLowpass { cutoff: *c },
            ("mask_band", [lo, hi]) => Operator::MaskBand { lo: *lo, hi: *hi },
            _ => return Err(bad()),
        };
        op.validate()?;
        Ok(op)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Decay exponent of the prior power spectrum `omega^-kappa`.
    pub kappa: f64,
    pub sigma_eta: f64,
    pub sigma_t: f64,
    pub operator: Operator,
    /// Frequencies below this (but above zero) use the prior at `omega_min`.
    pub omega_min: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            sigma_eta: 0.1,
            sigma_t: 1.0,
            operator: Operator::Identity,
            omega_min: 1.0 / 1024.0,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(usage(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.sigma_eta.is_finite() && self.sigma_eta > 0.0) {
            return Err(usage(format!("sigma_eta must be positive, got {}", self.sigma_eta)));
        }
        if !(self.sigma_t.is_finite() && self.sigma_t >= 0.0) {
            return Err(usage(format!("sigma_t must be >= 0, got {}", self.sigma_t)));
        }
        if !(self.omega_min.is_finite() && self.omega_min >= 0.0) {
            return Err(usage(format!("omega_min must be >= 0, got {}", self.omega_min)));
        }
        self.operator.validate()
    }

    /// Prior power `max(omega, omega_min)^-kappa`, for `omega > 0`.
    pub fn prior_power(&self, omega: f64) -> f64 {
        omega.max(self.omega_min).powf(-self.kappa)
    }
}

/// Posterior information weight at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Xi {
    pub value: f64,
    /// `omega == 0`: the prior diverges there, so the weight is defined as 0.
    pub dc_excluded: bool,
}

/// `|H|^2 / (sigma_eta^2 + |H|^2 S(omega))` with the operator response.
pub fn xi_lg(omega: f64, cfg: &SpectralConfig) -> Result<Xi> {
    xi_lg_with_response(omega, cfg.operator.response(omega), cfg)
}

/// Same as [`xi_lg`] with an explicit response magnitude `h`.
pub fn xi_lg_with_response(omega: f64, h: f64, cfg: &SpectralConfig) -> Result<Xi> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(usage(format!("frequency must be finite and >= 0, got {omega}")));
    }
    if !h.is_finite() {
        return Err(usage("operator response must be finite"));
    }
    if omega == 0.0 {
        return Ok(Xi {
            value: 0.0,
            dc_excluded: true,
        });
    }
    let h2 = h * h;
    let value = h2 / (cfg.sigma_eta * cfg.sigma_eta + h2 * cfg.prior_power(omega));
    Ok(Xi {
        value,
        dc_excluded: false,
    })
}

/// `omega^2 exp(-sigma_t^2 omega^2) xi`.
pub fn fm_weight(omega: f64, xi: f64, sigma_t: f64) -> f64 {
    let w2 = omega * omega;
    w2 * (-sigma_t * sigma_t * w2).exp() * xi
}

/// `(1 - prod(1 - eps), sum(eps))`.
pub fn tv_accumulation(eps: &[f64]) -> Result<(f64, f64)> {
    if let Some(e) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(usage(format!("deviation {e} outside [0, 1]")));
    }
    let prod: f64 = eps.iter().map(|e| 1.0 - e).product();
    Ok((1.0 - prod, eps.iter().sum()))
}

/// Finite distribution on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist1D {
    support: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteDist1D {
    pub fn new(support: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != masses.len() {
            return Err(usage(format!(
                "{} support points with {} masses",
                support.len(),
                masses.len()
            )));
        }
        if support.iter().any(|s| !s.is_finite()) || support.windows(2).any(|w| w[0] > w[1]) {
            return Err(usage("support must be finite and sorted"));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(usage("masses must be non-negative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(usage(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { support, masses })
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Exact W1 as the integral of `|F_p - F_q|` over the merged support.
pub fn w1_distance(p: &DiscreteDist1D, q: &DiscreteDist1D) -> f64 {
    let mut events: Vec<(f64, f64)> = p
        .support
        .iter()
        .zip(&p.masses)
        .map(|(x, m)| (*x, *m))
        .chain(q.support.iter().zip(&q.masses).map(|(x, m)| (*x, -*m)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for w in 0..events.len() {
        diff += events[w].1;
        if let Some(next) = events.get(w + 1) {
            total += diff.abs() * (next.0 - events[w].0);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubeCheck {
    pub w1: f64,
    /// `q`-mass farther than `alpha` from every manifold point.
    pub outside_mass: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

pub fn tube_bound_check(p: &DiscreteDist1D, q: &DiscreteDist1D, manifold: &[f64], alpha: f64) -> Result<TubeCheck> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(usage(format!("tube radius must be positive, got {alpha}")));
    }
    if manifold.is_empty() {
        return Err(usage("manifold needs at least one point"));
    }
    let outside_mass: f64 = q
        .support
        .iter()
        .zip(&q.masses)
        .filter(|(x, _)| manifold.iter().all(|m| (*x - m).abs() > alpha))
        .map(|(_, m)| m)
        .sum();
    let w1 = w1_distance(p, q);
    let lower_bound = alpha * outside_mass;
    Ok(TubeCheck {
        w1,
        outside_mass,
        lower_bound,
        holds: w1 >= lower_bound - 1e-12,
    })
}

/// One row of a spectral-weight table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectraRow {
    pub omega: f64,
    pub h_hat: f64,
    pub xi: f64,
    pub w_tilde: f64,
}

pub fn tabulate(cfg: &SpectralConfig, omegas: &[f64]) -> Result<Vec<SpectraRow>> {
    cfg.validate()?;
    omegas
        .iter()
        .map(|&omega| {
            let h_hat = cfg.operator.response(omega);
            let xi = xi_lg_with_response(omega, h_hat, cfg)?.value;
            Ok(SpectraRow {
                omega,
                h_hat,
                xi,
                w_tilde: fm_weight(omega, xi, cfg.sigma_t),
            })
        })
        .collect()
}

/// `points` evenly spaced frequencies in `(0, omega_max]`.
pub fn omega_grid(omega_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(usage(format!("omega_max must be positive, got {omega_max}")));
    }
    Ok((1..=points).map(|i| omega_max * i as f64 / points as f64).collect())
}
