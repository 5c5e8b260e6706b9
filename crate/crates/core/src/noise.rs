//! Forcing spectrum, reproducible Brownian increments, and the closed-form
//! statistics of the linear stochastic problem.
//!
//! The force is ζ(t,x) = Σ_m λ_m β_m(t) e_m(x) over nonzero integers m, with
//! e_m = sin(mx)/√π for m > 0 and cos(|m|x)/√π for m < 0. Its regularity is
//! measured by A_s = Σ λ_m² m^{2s}. Increments of the β_m are generated by a
//! counter-based scheme keyed on (seed, trajectory_id, step, mode): every draw
//! is a pure function of its key, so ensembles parallelize with no shared
//! state and a noise path can be replayed exactly across viscosity values.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Forcing coefficients {λ_m}, m a nonzero integer with |m| <= m_max.
/// Unspecified modes are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    lambdas: BTreeMap<i64, f64>,
    m_max: i64,
}

/// Named spectrum shapes; the coefficient at |m| is scale * shape(|m|).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumPreset {
    /// λ_m = 1/|m|
    Inverse,
    /// λ_m = 1/m²
    InverseSquared,
    /// λ_m = 1
    FlatK,
}

impl SpectrumPreset {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "inverse" => Some(SpectrumPreset::Inverse),
            "inverse-squared" => Some(SpectrumPreset::InverseSquared),
            "flat-k" => Some(SpectrumPreset::FlatK),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectrumPreset::Inverse => "inverse",
            SpectrumPreset::InverseSquared => "inverse-squared",
            SpectrumPreset::FlatK => "flat-k",
        }
    }

    fn lambda(&self, m_abs: i64) -> f64 {
        let m = m_abs as f64;
        match self {
            SpectrumPreset::Inverse => 1.0 / m,
            SpectrumPreset::InverseSquared => 1.0 / (m * m),
            SpectrumPreset::FlatK => 1.0,
        }
    }
}

impl NoiseSpectrum {
    /// Symmetric spectrum from a named preset: λ_{±m} = scale·shape(m).
    pub fn preset(preset: SpectrumPreset, m_max: i64, scale: f64) -> Result<Self> {
        if m_max < 1 {
            return Err(Error::InvalidArgument("m_max must be >= 1".into()));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidArgument("spectrum scale must be finite and >= 0".into()));
        }
        let mut lambdas = BTreeMap::new();
        for m in 1..=m_max {
            let l = scale * preset.lambda(m);
            lambdas.insert(m, l);
            lambdas.insert(-m, l);
        }
        Ok(NoiseSpectrum { lambdas, m_max })
    }

    /// Explicit (m, λ_m) pairs; modes not listed are zero.
    pub fn from_pairs(pairs: &[(i64, f64)]) -> Result<Self> {
        let mut lambdas = BTreeMap::new();
        let mut m_max = 0i64;
        for &(m, l) in pairs {
            if m == 0 {
                return Err(Error::InvalidArgument("spectrum mode m = 0 is not allowed".into()));
            }
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "lambda for mode {m} must be finite and >= 0"
                )));
            }
            if lambdas.insert(m, l).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate spectrum mode {m}")));
            }
            m_max = m_max.max(m.abs());
        }
        if lambdas.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        Ok(NoiseSpectrum { lambdas, m_max })
    }

    pub fn m_max(&self) -> i64 {
        self.m_max
    }

    pub fn lambda(&self, m: i64) -> f64 {
        self.lambdas.get(&m).copied().unwrap_or(0.0)
    }

    /// Modes with λ_m > 0, in ascending order.
    pub fn active_modes(&self) -> Vec<i64> {
        self.lambdas
            .iter()
            .filter(|(_, &l)| l > 0.0)
            .map(|(&m, _)| m)
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> NoiseSpectrum {
        let lambdas = self.lambdas.iter().map(|(&m, &l)| (m, l * factor)).collect();
        NoiseSpectrum { lambdas, m_max: self.m_max }
    }

    /// max over modes of λ_m²; enters the no-atom envelope through
    /// γ = inf{A₀ - λ_m²}.
    pub fn max_lambda_sq(&self) -> f64 {
        self.lambdas.values().map(|l| l * l).fold(0.0, f64::max)
    }

    /// Stable identifier of the spectrum contents.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (m, l) in &self.lambdas {
            h.update(m.to_le_bytes());
            h.update(l.to_le_bytes());
        }
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// A_s = Σ_m λ_m² |m|^{2s}, the noise-regularity constant.
pub fn a_s(spec: &NoiseSpectrum, s: f64) -> f64 {
    spec.lambdas
        .iter()
        .map(|(&m, &l)| l * l * (m.abs() as f64).powf(2.0 * s))
        .sum()
}

/// A₀ ceiling under which the stationary statistics have Gaussian tails.
pub const A0_GAUSSIAN: f64 = 1.0 / (2.0 * std::f64::consts::E);

/// Rescale the spectrum so that A₀ = 1/(2e) exactly.
pub fn gaussian_decay_scaling(spec: &NoiseSpectrum) -> Result<NoiseSpectrum> {
    let a0 = a_s(spec, 0.0);
    if a0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "cannot rescale a zero spectrum to A0 = 1/(2e)".into(),
        ));
    }
    Ok(spec.scaled((A0_GAUSSIAN / a0).sqrt()))
}

/// E‖z_α(t)‖_n² for the linear stochastic problem started from zero:
/// Σ_m λ_m² m^{2n} (1 - e^{-2αm²t}) / (2m²). Each conjugate mode pair is a
/// damped rotation driven by white noise; the rotation preserves the pair
/// norm, leaving the scalar relaxation solved here.
pub fn ou_norm_oracle(spec: &NoiseSpectrum, alpha: f64, t: f64, n: u32) -> f64 {
    assert!(alpha > 0.0, "ou_norm_oracle needs alpha > 0");
    assert!(t >= 0.0, "ou_norm_oracle needs t >= 0");
    spec.lambdas
        .iter()
        .map(|(&m, &l)| {
            let m2 = (m * m) as f64;
            let w = (m.abs() as f64).powi(2 * n as i32);
            l * l * w * (-(-2.0 * alpha * m2 * t).exp_m1()) / (2.0 * m2)
        })
        .sum()
}

/// d/dt of [`ou_norm_oracle`]: Σ_m λ_m² m^{2n} α e^{-2αm²t}.
pub fn ou_norm_oracle_rate(spec: &NoiseSpectrum, alpha: f64, t: f64, n: u32) -> f64 {
    spec.lambdas
        .iter()
        .map(|(&m, &l)| {
            let m2 = (m * m) as f64;
            let w = (m.abs() as f64).powi(2 * n as i32);
            l * l * w * alpha * (-2.0 * alpha * m2 * t).exp()
        })
        .sum()
}

// --- counter-based draws -------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn mix_key(parts: [u64; 4]) -> u64 {
    let mut h = 0x2545F4914F6CDD1Du64;
    for p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn unit_open(x: u64) -> f64 {
    // (0, 1]: ln never sees zero
    ((x >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// One standard normal, a pure function of the key. Box-Muller, cosine branch.
pub fn standard_normal(seed: u64, trajectory_id: u64, step_index: u64, mode: i64) -> f64 {
    let h = mix_key([seed, trajectory_id, step_index, mode as u64]);
    let u1 = unit_open(splitmix64(h));
    let u2 = unit_open(splitmix64(h ^ 0xD6E8FEB86659FD93));
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// One step's Brownian increments: values\[m\] ~ N(0, dt), independent across
/// modes, reproducible from (seed, trajectory_id, step_index, m).
#[derive(Debug, Clone)]
pub struct BrownianIncrements {
    pub seed: u64,
    pub trajectory_id: u64,
    pub step_index: u64,
    pub dt: f64,
    pub values: BTreeMap<i64, f64>,
}

pub fn sample_increments(
    spec: &NoiseSpectrum,
    seed: u64,
    trajectory_id: u64,
    step_index: u64,
    dt: f64,
) -> BrownianIncrements {
    assert!(dt > 0.0, "dt must be positive");
    let sqrt_dt = dt.sqrt();
    let values = spec
        .active_modes()
        .into_iter()
        .map(|m| (m, sqrt_dt * standard_normal(seed, trajectory_id, step_index, m)))
        .collect();
    BrownianIncrements { seed, trajectory_id, step_index, dt, values }
}
