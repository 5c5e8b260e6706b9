//! Time-averaged (Bogoliubov-Krylov) statistics of stochastic runs and the
//! verdict checks the stationary theory implies.
//!
//! The estimator is a single long trajectory per viscosity with
//! autocorrelation-corrected standard errors; independent-seed ensembles are
//! merged through [`MomentAccumulator`], a value object whose merge is
//! order-independent. Every check is a pure function of a
//! [`StationaryReport`]; the checks are also exposed behind the
//! [`StationaryCheck`] trait so drivers can select them by name.

use crate::conservation::ObservableVector;
use crate::dynamics::{Etdrk4, SimConfig, TrajectoryRecord, BLOWUP_H2_LIMIT};
use crate::error::{Error, Result};
use crate::noise::{a_s, NoiseSpectrum, A0_GAUSSIAN};
use crate::spectral::{sobolev_norm, Field};
use crate::stats::{
    covariance2, ks_critical_value, ks_two_sample, line_fit, mean_with_error, sym2_eigenvalues,
    Histogram, MeanWithError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Scalar keys tracked per sample: the observable columns plus the derived
/// powers used by the stationary identities.
pub const SCALAR_KEYS: [&str; 15] = [
    "e0", "e_half", "e1", "e2", "f1", "f2", "h0", "h1", "h2", "h3", "o_defect", "h1_sq", "e0_p2",
    "e0_p3", "e1_tilde",
];

fn scalar_values(ov: &ObservableVector, c: f64, b: u32) -> [(&'static str, f64); 15] {
    [
        ("e0", ov.e0),
        ("e_half", ov.e_half),
        ("e1", ov.e1),
        ("e2", ov.e2),
        ("f1", ov.f1),
        ("f2", ov.f2),
        ("h0", ov.h0),
        ("h1", ov.h1),
        ("h2", ov.h2),
        ("h3", ov.h3),
        ("o_defect", ov.o_defect),
        ("h1_sq", ov.h1 * ov.h1),
        ("e0_p2", ov.e0 * ov.e0),
        ("e0_p3", ov.e0 * ov.e0 * ov.e0),
        ("e1_tilde", ov.e1_tilde(c, b)),
    ]
}

/// Running (count, sum, sum of squares, extremes) of one scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub min: f64,
    pub max: f64,
}

impl ScalarMoments {
    pub fn empty() -> Self {
        ScalarMoments { count: 0, sum: 0.0, sum_sq: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn merge(&mut self, other: &ScalarMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.sum / self.count as f64
        }
    }

    /// Nonnegative variance estimate.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq / n - self.mean().powi(2)) * n / (n - 1.0)).max(0.0)
    }
}

/// Options shared by accumulation and report building.
#[derive(Debug, Clone)]
pub struct AccumulateOpts {
    /// Ẽ₁ = E₁ + c‖u‖²(1+‖u‖²)^b
    pub e_tilde_c: f64,
    pub e_tilde_b: u32,
    /// (lo, hi, bins) for the ‖u‖ histogram.
    pub norm_hist: (f64, f64, usize),
    /// (lo, hi, bins) for the Ẽ₁ histogram.
    pub e1_tilde_hist: (f64, f64, usize),
}

impl Default for AccumulateOpts {
    fn default() -> Self {
        AccumulateOpts {
            e_tilde_c: 1.0,
            e_tilde_b: 1,
            norm_hist: (0.0, 8.0, 800),
            e1_tilde_hist: (0.0, 200.0, 1000),
        }
    }
}

/// Mergeable running statistics over the scalar keys, with histograms of
/// ‖u‖ and Ẽ₁. merge is commutative and associative (up to float roundoff
/// in the sums) with the empty accumulator as identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub e_tilde_c: f64,
    pub e_tilde_b: u32,
    pub moments: BTreeMap<String, ScalarMoments>,
    pub hist_norm: Histogram,
    pub hist_e1_tilde: Histogram,
}

impl MomentAccumulator {
    pub fn empty(opts: &AccumulateOpts) -> Self {
        let moments = SCALAR_KEYS
            .iter()
            .map(|k| (k.to_string(), ScalarMoments::empty()))
            .collect();
        MomentAccumulator {
            e_tilde_c: opts.e_tilde_c,
            e_tilde_b: opts.e_tilde_b,
            moments,
            hist_norm: Histogram::new(opts.norm_hist.0, opts.norm_hist.1, opts.norm_hist.2),
            hist_e1_tilde: Histogram::new(
                opts.e1_tilde_hist.0,
                opts.e1_tilde_hist.1,
                opts.e1_tilde_hist.2,
            ),
        }
    }

    pub fn count(&self) -> u64 {
        self.moments["e0"].count
    }

    pub fn push(&mut self, ov: &ObservableVector) {
        for (k, v) in scalar_values(ov, self.e_tilde_c, self.e_tilde_b) {
            self.moments.get_mut(k).expect("fixed key set").push(v);
        }
        self.hist_norm.push(ov.h0);
        self.hist_e1_tilde.push(ov.e1_tilde(self.e_tilde_c, self.e_tilde_b));
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!(self.e_tilde_c, other.e_tilde_c, "accumulator options differ");
        assert_eq!(self.e_tilde_b, other.e_tilde_b, "accumulator options differ");
        for (k, m) in &other.moments {
            self.moments.get_mut(k).expect("fixed key set").merge(m);
        }
        self.hist_norm.merge(&other.hist_norm);
        self.hist_e1_tilde.merge(&other.hist_e1_tilde);
    }

    pub fn mean(&self, key: &str) -> f64 {
        self.moments[key].mean()
    }
}

/// Fold all post-burn-in samples of a trajectory with default options.
pub fn accumulate(traj: &TrajectoryRecord, burn_in: f64) -> Result<MomentAccumulator> {
    accumulate_with(traj, burn_in, &AccumulateOpts::default())
}

pub fn accumulate_with(
    traj: &TrajectoryRecord,
    burn_in: f64,
    opts: &AccumulateOpts,
) -> Result<MomentAccumulator> {
    let mut acc = MomentAccumulator::empty(opts);
    for ov in traj.samples.iter().filter(|ov| ov.t >= burn_in) {
        acc.push(ov);
    }
    if acc.count() == 0 {
        return Err(Error::InsufficientData(format!(
            "no samples at t >= burn_in = {burn_in}"
        )));
    }
    Ok(acc)
}

/// One survival-curve point of the ‖u‖ distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub r: f64,
    pub count_above: u64,
    pub survival: f64,
}

/// Stationary statistics of one long run: means with corrected errors,
/// histograms, the ‖u‖ tail curve, the covariance of the preserved vectors
/// (E₀, E_½) and (F₁, F₂), and the two Ẽ₁ half-series for split-half
/// consistency checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryReport {
    pub alpha: f64,
    pub spectrum_fingerprint: String,
    pub a0: f64,
    pub burn_in: f64,
    pub n_samples: usize,
    pub e_tilde_c: f64,
    pub e_tilde_b: u32,
    pub means: BTreeMap<String, MeanWithError>,
    pub hist_e1_tilde: Histogram,
    pub hist_norm: Histogram,
    pub tail: Vec<TailPoint>,
    pub cov_e: [[f64; 2]; 2],
    pub cov_f: [[f64; 2]; 2],
    pub e1_tilde_first_half: Vec<f64>,
    pub e1_tilde_second_half: Vec<f64>,
    /// Free-form logged diagnostics (never asserted).
    pub diagnostics: BTreeMap<String, f64>,
}

impl StationaryReport {
    pub fn build(
        alpha: f64,
        spectrum: &NoiseSpectrum,
        samples: &[ObservableVector],
        burn_in: f64,
        opts: &AccumulateOpts,
    ) -> Result<Self> {
        let post: Vec<&ObservableVector> = samples.iter().filter(|ov| ov.t >= burn_in).collect();
        if post.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "{} post-burn-in samples, need at least 4",
                post.len()
            )));
        }
        let n = post.len();
        let mut columns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for ov in &post {
            for (k, v) in scalar_values(ov, opts.e_tilde_c, opts.e_tilde_b) {
                columns.entry(k).or_insert_with(|| Vec::with_capacity(n)).push(v);
            }
        }
        let means: BTreeMap<String, MeanWithError> = columns
            .iter()
            .map(|(k, xs)| (k.to_string(), mean_with_error(xs)))
            .collect();

        let e1t = &columns["e1_tilde"];
        // bin the density histogram over the central 98% quantile range so
        // tail outliers cannot widen the bins; mass outside lands in the
        // under/overflow counters, which the atom check inspects too
        let mut sorted_e1t = e1t.clone();
        sorted_e1t.sort_by(|a, b| a.total_cmp(b));
        let q = |f: f64| sorted_e1t[((n - 1) as f64 * f).round() as usize];
        let (lo, hi) = (q(0.01), q(0.99));
        let hist_e1_tilde = if hi > lo {
            let mut h = Histogram::new(lo, hi + (hi - lo) * 1e-12, 100);
            for &v in e1t {
                h.push(v);
            }
            h
        } else {
            Histogram::from_data(e1t, 100)
        };
        let norms = &columns["h0"];
        let max_norm = norms.iter().copied().fold(0.0f64, f64::max);
        let mut hist_norm = Histogram::new(0.0, (max_norm * 1.02).max(1e-9), 500);
        for &v in norms {
            hist_norm.push(v);
        }

        let mut sorted = norms.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let levels = 60usize;
        let tail = (0..=levels)
            .map(|i| {
                let r = max_norm * i as f64 / levels as f64;
                let below = sorted.partition_point(|&x| x <= r);
                let above = (n - below) as u64;
                TailPoint { r, count_above: above, survival: above as f64 / n as f64 }
            })
            .collect();

        let mut first: Vec<f64> = e1t[..n / 2].to_vec();
        let mut second: Vec<f64> = e1t[n / 2..].to_vec();
        first.sort_by(|a, b| a.total_cmp(b));
        second.sort_by(|a, b| a.total_cmp(b));

        Ok(StationaryReport {
            alpha,
            spectrum_fingerprint: spectrum.fingerprint(),
            a0: a_s(spectrum, 0.0),
            burn_in,
            n_samples: n,
            e_tilde_c: opts.e_tilde_c,
            e_tilde_b: opts.e_tilde_b,
            means,
            hist_e1_tilde,
            hist_norm,
            tail,
            cov_e: covariance2(&columns["e0"], &columns["e_half"]),
            cov_f: covariance2(&columns["f1"], &columns["f2"]),
            e1_tilde_first_half: first,
            e1_tilde_second_half: second,
            diagnostics: BTreeMap::new(),
        })
    }

    pub fn from_trajectory(
        traj: &TrajectoryRecord,
        cfg: &SimConfig,
        opts: &AccumulateOpts,
    ) -> Result<Self> {
        StationaryReport::build(cfg.alpha, &cfg.spectrum, &traj.samples, cfg.burn_in, opts)
    }
}

// --- verdicts -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub check: String,
    pub status: CheckStatus,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckVerdict {
    pub fn hard_failure(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

/// Artifact-chosen thresholds, all configurable; the properties behind
/// these checks are existence statements without numeric constants.
#[derive(Debug, Clone)]
pub struct CheckSettings {
    /// Relative slack added to the 3·SE band of the H¹ identity.
    pub h1_rel_slack: f64,
    pub moment_p: Vec<u32>,
    pub tail_c_max: f64,
    pub tail_min_samples: u64,
    pub no_atom_deltas: Vec<f64>,
    pub no_atom_ratio_factor: f64,
    pub density_max_bin_mass: f64,
    pub density_ks_alpha: f64,
    pub min_effective_samples: f64,
    pub eigen_min_ratio: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            h1_rel_slack: 0.0,
            moment_p: vec![1, 2, 3],
            tail_c_max: 10.0,
            tail_min_samples: 30,
            no_atom_deltas: vec![0.01, 0.05, 0.1, 0.2, 0.4],
            no_atom_ratio_factor: 10.0,
            density_max_bin_mass: 0.05,
            density_ks_alpha: 0.01,
            min_effective_samples: 16.0,
            eigen_min_ratio: 1e-4,
        }
    }
}

fn inconclusive(check: &str, detail: String) -> CheckVerdict {
    CheckVerdict {
        check: check.into(),
        status: CheckStatus::Inconclusive,
        statistic: f64::NAN,
        threshold: f64::NAN,
        detail,
    }
}

/// Mean of ‖u‖₁² against the α-independent target A₀/2, within
/// max(3·SE, rel_slack·target).
pub fn check_h1_identity(
    report: &StationaryReport,
    spec: &NoiseSpectrum,
    settings: &CheckSettings,
) -> CheckVerdict {
    let name = "h1-identity";
    let target = a_s(spec, 0.0) / 2.0;
    let m = &report.means["h1_sq"];
    if m.n_effective < settings.min_effective_samples || m.se.is_nan() || m.se <= 0.0 {
        return inconclusive(name, format!("degenerate SE: n_eff = {:.1}", m.n_effective));
    }
    let z = (m.mean - target) / m.se;
    let band = (3.0 * m.se).max(settings.h1_rel_slack * target);
    CheckVerdict {
        check: name.into(),
        status: if (m.mean - target).abs() <= band { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: z,
        threshold: band,
        detail: format!(
            "mean ||u||_1^2 = {:.6} +- {:.6} vs A0/2 = {:.6} (z = {:+.2}, n_eff = {:.0})",
            m.mean, m.se, target, z, m.n_effective
        ),
    }
}

/// One-sided moment bounds mean ‖u‖^{2p} <= p^p A₀^p + 3·SE for each p.
pub fn check_moment_bounds(
    report: &StationaryReport,
    spec: &NoiseSpectrum,
    settings: &CheckSettings,
) -> Vec<CheckVerdict> {
    let a0 = a_s(spec, 0.0);
    settings
        .moment_p
        .iter()
        .map(|&p| {
            let name = format!("moment-bound-p{p}");
            let key = match p {
                1 => "e0",
                2 => "e0_p2",
                3 => "e0_p3",
                _ => {
                    return inconclusive(&name, format!("moments tracked for p <= 3, got {p}"));
                }
            };
            let m = &report.means[key];
            if m.n_effective < settings.min_effective_samples {
                return inconclusive(&name, format!("n_eff = {:.1}", m.n_effective));
            }
            let bound = (p as f64).powi(p as i32) * a0.powi(p as i32);
            let limit = bound + 3.0 * m.se;
            CheckVerdict {
                check: name,
                status: if m.mean <= limit { CheckStatus::Pass } else { CheckStatus::Fail },
                statistic: m.mean,
                threshold: limit,
                detail: format!(
                    "mean ||u||^{} = {:.6} vs p^p A0^p = {:.6} (+3SE = {:.6})",
                    2 * p,
                    m.mean,
                    bound,
                    limit
                ),
            }
        })
        .collect()
}

/// Empirical tail domination P(‖u‖ > r) <= C e^{-r²} with fitted C <= c_max,
/// over tail points still carrying at least `tail_min_samples` exceedances.
/// Requires the spectrum scaled to A₀ <= 1/(2e).
pub fn check_gaussian_tail(
    report: &StationaryReport,
    spec: &NoiseSpectrum,
    settings: &CheckSettings,
) -> CheckVerdict {
    let name = "gaussian-tail";
    let a0 = a_s(spec, 0.0);
    if a0 > A0_GAUSSIAN * (1.0 + 1e-9) {
        return inconclusive(
            name,
            format!("A0 = {a0:.5} exceeds 1/(2e); rescale the spectrum first"),
        );
    }
    let pts: Vec<&TailPoint> = report
        .tail
        .iter()
        .filter(|p| p.count_above >= settings.tail_min_samples && p.r > 0.0)
        .collect();
    if pts.len() < 3 {
        return inconclusive(name, format!("{} usable tail points", pts.len()));
    }
    let c_fit = pts
        .iter()
        .map(|p| p.survival * (p.r * p.r).exp())
        .fold(0.0f64, f64::max);
    let xs: Vec<f64> = pts.iter().map(|p| p.r * p.r).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.survival.ln()).collect();
    let (slope, _) = line_fit(&xs, &ys);
    CheckVerdict {
        check: name.into(),
        status: if c_fit <= settings.tail_c_max { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: c_fit,
        threshold: settings.tail_c_max,
        detail: format!(
            "sup survival·e^(r²) = {:.3} over {} points; log-tail slope vs r² = {:.3}",
            c_fit,
            pts.len(),
            slope
        ),
    }
}

/// No mass spike at ‖u‖ = 0: the ratios P(‖u‖ <= δ)/δ stay bounded across
/// the δ list relative to the coarsest one. The theoretical envelope
/// √A₀·δ/γ with γ = inf(A₀ - λ_m²) is reported alongside.
pub fn check_no_atom(
    report: &StationaryReport,
    spec: &NoiseSpectrum,
    settings: &CheckSettings,
) -> CheckVerdict {
    let name = "no-atom";
    let n = report.hist_norm.total();
    if n < 100 {
        return inconclusive(name, format!("{n} samples"));
    }
    if settings.no_atom_deltas.is_empty() {
        return inconclusive(name, "no deltas configured".into());
    }
    let a0 = a_s(spec, 0.0);
    let gamma = a0 - spec.max_lambda_sq();
    let mut deltas = settings.no_atom_deltas.clone();
    deltas.sort_by(|a, b| a.total_cmp(b));
    let ratios: Vec<f64> = deltas
        .iter()
        .map(|&d| report.hist_norm.count_below(d) as f64 / n as f64 / d)
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0f64, f64::max);
    let coarse = *ratios.last().unwrap();
    let limit = settings.no_atom_ratio_factor * coarse.max(1e-12);
    let pass = max_ratio == 0.0 || max_ratio <= limit;
    let envelope: Vec<String> = deltas
        .iter()
        .zip(&ratios)
        .map(|(d, r)| format!("P(|u|<={d})/{d} = {r:.3} (envelope {:.3})", a0.sqrt() / gamma))
        .collect();
    CheckVerdict {
        check: name.into(),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: max_ratio,
        threshold: limit,
        detail: format!("gamma = {gamma:.4}; {}", envelope.join("; ")),
    }
}

/// Ẽ₁ pushforward looks like a density: no bin of the 100-bin histogram
/// (binned over the central 98% of the data, under/overflow counted as
/// potential edge atoms) carries more than `density_max_bin_mass`, and the
/// two trajectory halves agree in KS distance below the two-sample critical
/// value at `density_ks_alpha`, with autocorrelation-deflated sample sizes.
pub fn check_observable_density(
    report: &StationaryReport,
    settings: &CheckSettings,
) -> CheckVerdict {
    let name = "observable-density";
    let h = &report.hist_e1_tilde;
    let n = h.total();
    if n < 200 {
        return inconclusive(name, format!("{n} samples"));
    }
    // an atom at the trimmed-range edge shows up as under/overflow mass
    let atom_frac = h
        .max_bin_fraction()
        .max(h.underflow as f64 / n as f64)
        .max(h.overflow as f64 / n as f64);
    let d = ks_two_sample(&report.e1_tilde_first_half, &report.e1_tilde_second_half);
    let tau = report.means["e1_tilde"].tau_int;
    let n1 = (report.e1_tilde_first_half.len() as f64 / tau).max(1.0);
    let n2 = (report.e1_tilde_second_half.len() as f64 / tau).max(1.0);
    let crit = ks_critical_value(settings.density_ks_alpha, n1, n2);
    let pass = atom_frac <= settings.density_max_bin_mass && d < crit;
    CheckVerdict {
        check: name.into(),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: d,
        threshold: crit,
        detail: format!(
            "max bin mass {:.4} (limit {}); split-half KS = {:.4} vs critical {:.4} (tau = {:.1})",
            atom_frac, settings.density_max_bin_mass, d, crit, tau
        ),
    }
}

/// The pushforwards of (E₀, E_½) and (F₁, F₂) are not supported on a curve:
/// the scale-free smallest covariance eigenvalue λ_min/trace stays above
/// `eigen_min_ratio` for both vectors.
pub fn check_two_dimensionality(
    report: &StationaryReport,
    settings: &CheckSettings,
) -> CheckVerdict {
    let name = "two-dimensionality";
    let verdict_for = |cov: [[f64; 2]; 2]| -> (f64, (f64, f64)) {
        let (lo, hi) = sym2_eigenvalues(cov);
        let trace = cov[0][0] + cov[1][1];
        if trace <= 0.0 {
            (0.0, (lo, hi))
        } else {
            (lo / trace, (lo, hi))
        }
    };
    let (re, se) = verdict_for(report.cov_e);
    let (rf, sf) = verdict_for(report.cov_f);
    let worst = re.min(rf);
    CheckVerdict {
        check: name.into(),
        status: if worst >= settings.eigen_min_ratio { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic: worst,
        threshold: settings.eigen_min_ratio,
        detail: format!(
            "(E0, E_half) spectrum ({:.3e}, {:.3e}) ratio {:.3e}; (F1, F2) spectrum ({:.3e}, {:.3e}) ratio {:.3e}",
            se.0, se.1, re, sf.0, sf.1, rf
        ),
    }
}

// --- named check registry -------------------------------------------------

/// One stationary diagnostic, selectable by name from config.
pub trait StationaryCheck: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(
        &self,
        report: &StationaryReport,
        spec: &NoiseSpectrum,
        settings: &CheckSettings,
    ) -> Vec<CheckVerdict>;
}

macro_rules! simple_check {
    ($ty:ident, $name:literal, |$r:ident, $s:ident, $c:ident| $body:expr) => {
        struct $ty;
        impl StationaryCheck for $ty {
            fn name(&self) -> &'static str {
                $name
            }
            fn run(
                &self,
                $r: &StationaryReport,
                $s: &NoiseSpectrum,
                $c: &CheckSettings,
            ) -> Vec<CheckVerdict> {
                $body
            }
        }
    };
}

simple_check!(H1IdentityCheck, "h1-identity", |r, s, c| vec![check_h1_identity(r, s, c)]);
simple_check!(MomentBoundsCheck, "moment-bounds", |r, s, c| check_moment_bounds(r, s, c));
simple_check!(GaussianTailCheck, "gaussian-tail", |r, s, c| vec![check_gaussian_tail(r, s, c)]);
simple_check!(NoAtomCheck, "no-atom", |r, s, c| vec![check_no_atom(r, s, c)]);
simple_check!(ObservableDensityCheck, "observable-density", |r, _s, c| vec![
    check_observable_density(r, c)
]);
simple_check!(TwoDimensionalityCheck, "two-dimensionality", |r, _s, c| vec![
    check_two_dimensionality(r, c)
]);

/// All built-in stationary checks, in report order.
pub fn builtin_checks() -> Vec<Box<dyn StationaryCheck>> {
    vec![
        Box::new(H1IdentityCheck),
        Box::new(MomentBoundsCheck),
        Box::new(GaussianTailCheck),
        Box::new(NoAtomCheck),
        Box::new(ObservableDensityCheck),
        Box::new(TwoDimensionalityCheck),
    ]
}

pub fn check_by_name(name: &str) -> Option<Box<dyn StationaryCheck>> {
    builtin_checks().into_iter().find(|c| c.name() == name)
}

// --- recurrence -----------------------------------------------------------

/// Local minima of t -> max_s ‖S_t w - w‖_s over the sampled deterministic
/// trajectory, and the subset below the tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceScan {
    /// (t, distance) at every non-strict local minimum of the sampled curve.
    pub minima: Vec<(f64, f64)>,
    /// Minima with distance <= tol.
    pub hits: Vec<(f64, f64)>,
}

/// Run the deterministic flow from w and detect returns near the initial
/// state. An empty hit list is a valid outcome: recurrence is almost-sure
/// with respect to the invariant measure, not guaranteed for every datum.
pub fn detect_recurrence(
    w: &Field,
    cfg: &SimConfig,
    norms: &[f64],
    tol: f64,
) -> Result<RecurrenceScan> {
    if cfg.alpha != 0.0 {
        return Err(Error::InvalidArgument(
            "recurrence detection runs the deterministic flow (alpha = 0)".into(),
        ));
    }
    if norms.is_empty() {
        return Err(Error::InvalidArgument("at least one norm index required".into()));
    }
    let stepper = Etdrk4::new(cfg.grid, cfg.dt, 0.0, cfg.dealias_rule);
    let n_steps = cfg.n_steps();
    let mut u = w.clone();
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(n_steps / cfg.sample_every + 1);
    let dist = |u: &Field| -> f64 {
        let diff = u - w;
        norms.iter().map(|&s| sobolev_norm(&diff, s)).fold(0.0, f64::max)
    };
    curve.push((0.0, dist(&u)));
    for step in 1..=n_steps {
        u = stepper.step(&u);
        if !u.is_finite() || sobolev_norm(&u, 2.0) > BLOWUP_H2_LIMIT {
            return Err(Error::BlowUp {
                step,
                time: step as f64 * cfg.dt,
                reason: "recurrence run left the finite regime".into(),
            });
        }
        if step % cfg.sample_every == 0 {
            curve.push((step as f64 * cfg.dt, dist(&u)));
        }
    }
    let mut minima = Vec::new();
    for i in 1..curve.len().saturating_sub(1) {
        if curve[i].1 <= curve[i - 1].1 && curve[i].1 <= curve[i + 1].1 {
            minima.push(curve[i]);
        }
    }
    let hits = minima.iter().copied().filter(|&(_, d)| d <= tol).collect();
    Ok(RecurrenceScan { minima, hits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::standard_normal;
    use crate::spectral::Grid;

    fn spec25() -> NoiseSpectrum {
        NoiseSpectrum::from_pairs(&[(1, 1.0), (-1, 1.0), (2, 0.5), (-2, 0.5)]).unwrap()
    }

    /// Observable record with a prescribed norm and Ẽ₁ source value; the
    /// other columns are filled consistently enough for report building.
    fn ov(t: f64, h0: f64, e1: f64, e0: f64, e_half: f64, f1: f64, f2: f64) -> ObservableVector {
        ObservableVector {
            t,
            e0,
            e_half,
            e1,
            e2: 0.0,
            f1,
            f2,
            h0,
            h1: h0,
            h2: h0,
            h3: h0,
            o_defect: 0.0,
        }
    }

    fn report_from_norms(norms: &[f64], c: f64) -> StationaryReport {
        let samples: Vec<ObservableVector> = norms
            .iter()
            .enumerate()
            .map(|(i, &v)| ov(i as f64, v, v, v * v, v, v, v * v))
            .collect();
        let opts = AccumulateOpts { e_tilde_c: c, ..Default::default() };
        StationaryReport::build(0.5, &spec25(), &samples, 0.0, &opts).unwrap()
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        (0..n).map(|i| standard_normal(seed, 0, i as u64, 1)).collect()
    }

    #[test]
    fn moments_of_constant_series() {
        let mut m = ScalarMoments::empty();
        for _ in 0..50 {
            m.push(2.5);
        }
        assert_eq!(m.mean(), 2.5);
        assert!(m.variance() < 1e-12);
        assert_eq!((m.min, m.max), (2.5, 2.5));
    }

    #[test]
    fn accumulator_merge_laws() {
        let opts = AccumulateOpts::default();
        let make = |seed: u64, n: usize| {
            let mut acc = MomentAccumulator::empty(&opts);
            for i in 0..n {
                let v = standard_normal(seed, 0, i as u64, 0).abs();
                acc.push(&ov(i as f64, v, v, v * v, v, v, v));
            }
            acc
        };
        let (a, b, c) = (make(1, 40), make(2, 60), make(3, 30));

        // identity
        let mut ae = a.clone();
        ae.merge(&MomentAccumulator::empty(&opts));
        assert_eq!(ae, a);

        // commutativity (exact: sums of two terms)
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab.count(), ba.count());
        for k in SCALAR_KEYS {
            assert!((ab.moments[k].sum - ba.moments[k].sum).abs() < 1e-12);
            assert_eq!(ab.moments[k].min, ba.moments[k].min);
        }

        // associativity up to roundoff
        let mut left = a.clone();
        left.merge(&b);
        left.merge(&c);
        let mut bc = b.clone();
        bc.merge(&c);
        let mut right = a.clone();
        right.merge(&bc);
        assert_eq!(left.count(), right.count());
        for k in SCALAR_KEYS {
            let (l, r) = (left.moments[k].sum, right.moments[k].sum);
            assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0), "{k}: {l} vs {r}");
        }
        assert_eq!(left.hist_norm, right.hist_norm);
    }

    #[test]
    fn accumulate_constant_trajectory() {
        let g = Grid::new(16).unwrap();
        let traj = TrajectoryRecord {
            fingerprint: "t".into(),
            trajectory_id: 0,
            samples: (0..20).map(|i| ov(i as f64, 1.0, 3.0, 1.0, 0.5, 0.5, 0.1)).collect(),
            checkpoints: vec![],
            last_state: Field::zeros(g),
        };
        let acc = accumulate(&traj, 5.0).unwrap();
        assert_eq!(acc.count(), 15);
        assert_eq!(acc.mean("e1"), 3.0);
        assert!(acc.moments["e1"].variance() < 1e-12);
        assert!(accumulate(&traj, 100.0).is_err());
    }

    #[test]
    fn merge_of_halves_matches_whole() {
        let opts = AccumulateOpts::default();
        let samples: Vec<ObservableVector> = (0..200)
            .map(|i| {
                let v = standard_normal(4, 0, i, 0).abs();
                ov(i as f64, v, v, v * v, v, v, v)
            })
            .collect();
        let mut whole = MomentAccumulator::empty(&opts);
        let mut left = MomentAccumulator::empty(&opts);
        let mut right = MomentAccumulator::empty(&opts);
        for (i, s) in samples.iter().enumerate() {
            whole.push(s);
            if i < 100 {
                left.push(s)
            } else {
                right.push(s)
            }
        }
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        for k in SCALAR_KEYS {
            assert!((left.moments[k].sum - whole.moments[k].sum).abs() < 1e-10);
        }
        assert_eq!(left.hist_e1_tilde, whole.hist_e1_tilde);
    }

    #[test]
    fn iid_stream_mean_within_clt_band() {
        let xs = normals(100_000, 11);
        let m = mean_with_error(&xs);
        assert!(m.mean.abs() < 4.0 / (100_000f64).sqrt(), "mean {}", m.mean);
    }

    #[test]
    fn h1_identity_synthetic() {
        let spec = spec25();
        let settings = CheckSettings::default();
        // exactly on target: h1_sq column equals A0/2 plus tiny iid noise
        let target = 1.25f64;
        let samples: Vec<ObservableVector> = normals(2000, 3)
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let h1 = (target + 1e-3 * g).sqrt();
                let mut o = ov(i as f64, h1, 0.0, h1 * h1, 0.0, 0.0, 0.0);
                o.h1 = h1;
                o
            })
            .collect();
        let rep =
            StationaryReport::build(0.5, &spec, &samples, 0.0, &AccumulateOpts::default()).unwrap();
        let v = check_h1_identity(&rep, &spec, &settings);
        assert_eq!(v.status, CheckStatus::Pass);
        assert!(v.statistic.abs() < 3.5);

        // offset by ~10 SE: fail
        let se = rep.means["h1_sq"].se;
        let samples: Vec<ObservableVector> = normals(2000, 3)
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let h1 = (target + 10.0 * se + 1e-3 * g).sqrt();
                let mut o = ov(i as f64, h1, 0.0, h1 * h1, 0.0, 0.0, 0.0);
                o.h1 = h1;
                o
            })
            .collect();
        let rep =
            StationaryReport::build(0.5, &spec, &samples, 0.0, &AccumulateOpts::default()).unwrap();
        let v = check_h1_identity(&rep, &spec, &settings);
        assert_eq!(v.status, CheckStatus::Fail);
    }

    #[test]
    fn moment_bound_values() {
        // bound arithmetic: p^p A0^p
        assert_eq!(1f64.powi(1) * 2.5, 2.5);
        assert_eq!(2f64.powi(2) * 2.5f64.powi(2), 25.0);
        let b3 = 3f64.powi(3) * A0_GAUSSIAN.powi(3);
        assert!((b3 - 27.0 / (8.0 * std::f64::consts::E.powi(3))).abs() < 1e-12);
        assert!((b3 - 0.16798).abs() < 1e-4);
    }

    #[test]
    fn moment_bounds_pass_on_small_data() {
        let spec = spec25();
        let norms: Vec<f64> = normals(3000, 5).iter().map(|g| 0.3 * g.abs()).collect();
        let rep = report_from_norms(&norms, 1.0);
        let verdicts = check_moment_bounds(&rep, &spec, &CheckSettings::default());
        assert_eq!(verdicts.len(), 3);
        assert!(verdicts.iter().all(|v| v.status == CheckStatus::Pass));
    }

    #[test]
    fn gaussian_tail_synthetic() {
        let spec = gaussian_spec();
        let settings = CheckSettings::default();
        // |N(0, 0.3^2)| norms: dominated by e^{-r^2} comfortably
        let norms: Vec<f64> = normals(20_000, 6).iter().map(|g| (0.3 * g).abs()).collect();
        let rep = report_from_norms(&norms, 1.0);
        let v = check_gaussian_tail(&rep, &spec, &settings);
        assert_eq!(v.status, CheckStatus::Pass, "{}", v.detail);

        // Pareto tails: survival (1+r)^-3 is eventually above any C e^{-r^2}
        let norms: Vec<f64> = (0..20_000)
            .map(|i| {
                let u = (i as f64 + 0.5) / 20_000.0;
                (1.0 - u).powf(-1.0 / 3.0) - 1.0
            })
            .collect();
        let rep = report_from_norms(&norms, 1.0);
        let v = check_gaussian_tail(&rep, &spec, &settings);
        assert_eq!(v.status, CheckStatus::Fail, "{}", v.detail);
    }

    fn gaussian_spec() -> NoiseSpectrum {
        crate::noise::gaussian_decay_scaling(&spec25()).unwrap()
    }

    #[test]
    fn no_atom_synthetic() {
        let spec = spec25();
        let settings = CheckSettings::default();
        // uniform on [0,1]: ratio ~ 1 at every delta
        let norms: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let rep = report_from_norms(&norms, 1.0);
        let v = check_no_atom(&rep, &spec, &settings);
        assert_eq!(v.status, CheckStatus::Pass, "{}", v.detail);
        assert!((v.statistic - 1.0).abs() < 0.1, "ratio {}", v.statistic);

        // 30% point mass at zero
        let norms: Vec<f64> = (0..10_000)
            .map(|i| if i % 10 < 3 { 0.0 } else { (i as f64 + 0.5) / 10_000.0 })
            .collect();
        let rep = report_from_norms(&norms, 1.0);
        let v = check_no_atom(&rep, &spec, &settings);
        assert_eq!(v.status, CheckStatus::Fail, "{}", v.detail);

        // gamma example: A0 = 2.5, max lambda^2 = 1 -> gamma = 1.5
        assert!((a_s(&spec, 0.0) - spec.max_lambda_sq() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn observable_density_synthetic() {
        let settings = CheckSettings::default();
        // continuous: normals through e1 with c = 0 so e1_tilde = e1
        let vals = normals(8000, 8);
        let samples: Vec<ObservableVector> = vals
            .iter()
            .enumerate()
            .map(|(i, &g)| ov(i as f64, 1.0, g, 1.0, 0.0, 0.0, 0.0))
            .collect();
        let rep = StationaryReport::build(
            0.5,
            &spec25(),
            &samples,
            0.0,
            &AccumulateOpts { e_tilde_c: 0.0, ..Default::default() },
        )
        .unwrap();
        let v = check_observable_density(&rep, &settings);
        assert_eq!(v.status, CheckStatus::Pass, "{}", v.detail);

        // three atoms
        let samples: Vec<ObservableVector> = (0..8000)
            .map(|i| ov(i as f64, 1.0, (i % 3) as f64, 1.0, 0.0, 0.0, 0.0))
            .collect();
        let rep = StationaryReport::build(
            0.5,
            &spec25(),
            &samples,
            0.0,
            &AccumulateOpts { e_tilde_c: 0.0, ..Default::default() },
        )
        .unwrap();
        let v = check_observable_density(&rep, &settings);
        assert_eq!(v.status, CheckStatus::Fail, "{}", v.detail);
    }

    #[test]
    fn two_dimensionality_synthetic() {
        let settings = CheckSettings::default();
        // isotropic cloud in (e0, e_half) and (f1, f2)
        let samples: Vec<ObservableVector> = (0..4000)
            .map(|i| {
                let a = standard_normal(9, 0, i, 0);
                let b = standard_normal(9, 0, i, 1);
                ov(i as f64, 1.0, 0.0, a, b, a, b)
            })
            .collect();
        let rep =
            StationaryReport::build(0.5, &spec25(), &samples, 0.0, &AccumulateOpts::default())
                .unwrap();
        let v = check_two_dimensionality(&rep, &settings);
        assert_eq!(v.status, CheckStatus::Pass, "{}", v.detail);

        // supported on the line e_half = 2 e0
        let samples: Vec<ObservableVector> = (0..4000)
            .map(|i| {
                let a = standard_normal(9, 1, i, 0);
                ov(i as f64, 1.0, 0.0, a, 2.0 * a, a, a)
            })
            .collect();
        let rep =
            StationaryReport::build(0.5, &spec25(), &samples, 0.0, &AccumulateOpts::default())
                .unwrap();
        let v = check_two_dimensionality(&rep, &settings);
        assert_eq!(v.status, CheckStatus::Fail, "{}", v.detail);
    }

    #[test]
    fn verdicts_are_reproducible() {
        let norms: Vec<f64> = normals(3000, 10).iter().map(|g| g.abs()).collect();
        let rep = report_from_norms(&norms, 1.0);
        let s = CheckSettings::default();
        let a = check_no_atom(&rep, &spec25(), &s);
        let b = check_no_atom(&rep, &spec25(), &s);
        assert_eq!(a, b);
    }

    #[test]
    fn registry_lookup() {
        let names: Vec<&str> = builtin_checks().iter().map(|c| c.name()).collect();
        assert_eq!(
            names,
            vec![
                "h1-identity",
                "moment-bounds",
                "gaussian-tail",
                "no-atom",
                "observable-density",
                "two-dimensionality"
            ]
        );
        assert!(check_by_name("no-atom").is_some());
        assert!(check_by_name("nonsense").is_none());
    }

    #[test]
    fn recurrence_of_zero_field() {
        let g = Grid::new(32).unwrap();
        let spec = NoiseSpectrum::from_pairs(&[(1, 1.0), (-1, 1.0)]).unwrap();
        let mut cfg = SimConfig::new(g, spec);
        cfg.dt = 5e-3;
        cfg.t_final = 0.5;
        cfg.sample_every = 10;
        let w = Field::zeros(g);
        let scan = detect_recurrence(&w, &cfg, &[0.0, 2.0], 1e-12).unwrap();
        // every interior sample is a (flat) local minimum at distance zero
        assert_eq!(scan.minima.len(), scan.hits.len());
        assert!(!scan.hits.is_empty());
        // tol = infinity reports every local minimum
        let all = detect_recurrence(&w, &cfg, &[0.0], f64::INFINITY).unwrap();
        assert_eq!(all.minima.len(), all.hits.len());
    }

    #[test]
    fn recurrence_rejects_stochastic_config() {
        let g = Grid::new(32).unwrap();
        let spec = NoiseSpectrum::from_pairs(&[(1, 1.0), (-1, 1.0)]).unwrap();
        let mut cfg = SimConfig::new(g, spec);
        cfg.alpha = 0.5;
        assert!(detect_recurrence(&Field::zeros(g), &cfg, &[2.0], 1.0).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn acc_from(values: &[f64]) -> MomentAccumulator {
            let opts = AccumulateOpts::default();
            let mut acc = MomentAccumulator::empty(&opts);
            for (i, &v) in values.iter().enumerate() {
                acc.push(&ov(i as f64, v.abs(), v, v * v, v, v, v));
            }
            acc
        }

        fn close(a: &MomentAccumulator, b: &MomentAccumulator) -> bool {
            a.count() == b.count()
                && SCALAR_KEYS.iter().all(|k| {
                    let (x, y) = (&a.moments[*k], &b.moments[*k]);
                    (x.sum - y.sum).abs() <= 1e-10 * x.sum.abs().max(1.0)
                        && (x.sum_sq - y.sum_sq).abs() <= 1e-10 * x.sum_sq.abs().max(1.0)
                        && x.min == y.min
                        && x.max == y.max
                })
                && a.hist_norm == b.hist_norm
        }

        proptest! {
            #[test]
            fn merge_is_commutative_associative_with_identity(
                xs in proptest::collection::vec(-3.0f64..3.0, 1..40),
                ys in proptest::collection::vec(-3.0f64..3.0, 1..40),
                zs in proptest::collection::vec(-3.0f64..3.0, 1..40),
            ) {
                let (a, b, c) = (acc_from(&xs), acc_from(&ys), acc_from(&zs));

                let mut id = a.clone();
                id.merge(&MomentAccumulator::empty(&AccumulateOpts::default()));
                prop_assert!(close(&id, &a));

                let mut ab = a.clone();
                ab.merge(&b);
                let mut ba = b.clone();
                ba.merge(&a);
                prop_assert!(close(&ab, &ba));

                let mut left = ab.clone();
                left.merge(&c);
                let mut bc = b.clone();
                bc.merge(&c);
                let mut right = a.clone();
                right.merge(&bc);
                prop_assert!(close(&left, &right));

                prop_assert!(left.moments["e0"].variance() >= 0.0);
            }
        }
    }
}
