//! Fourier-side calculus on the torus [0, 2π).
//!
//! A [`Field`] is a real-valued mean-zero function held as complex Fourier
//! coefficients û(k), k = -K..K with K = n_modes/2 - 1. Two invariants are
//! enforced at every construction boundary:
//!
//! * Hermitian symmetry û(-k) = conj(û(k)) (the function is real),
//! * û(0) = 0 exactly (the function is mean-zero).
//!
//! The Hilbert transform is the multiplier -i·sgn(k), so H(sin nx) = -cos nx,
//! H(cos nx) = sin nx and (H ∂ₓ)^ = |k|. Products of fields are integrated
//! exactly by synthesizing on a zero-padded grid sized to the product degree;
//! trapezoid quadrature on n points is exact for trigonometric polynomials of
//! degree < n, so every polynomial functional evaluated here is alias-free.

use crate::error::{Error, Result};
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Collocation grid: n_modes points x_j = 2πj/n_modes, resolving |k| <= max_wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n_modes: usize,
}

impl Grid {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes < 8 || !n_modes.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "n_modes must be even and >= 8, got {n_modes}"
            )));
        }
        Ok(Grid { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// K = n_modes/2 - 1; the Nyquist mode n_modes/2 is never populated.
    pub fn max_wavenumber(&self) -> i64 {
        (self.n_modes / 2 - 1) as i64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_modes)
            .map(|j| TWO_PI * j as f64 / self.n_modes as f64)
            .collect()
    }
}

/// Real-valued mean-zero function on the torus, stored as the full complex
/// spectrum û(k), k = -K..K (index k + K).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        let len = 2 * grid.max_wavenumber() as usize + 1;
        Field { grid, coeffs: vec![Complex64::ZERO; len] }
    }

    /// Build from a spectrum closure over positive wavenumbers; negative modes
    /// follow by conjugation and the mean is zero by construction.
    pub fn from_spectrum<F>(grid: Grid, mut f: F) -> Self
    where
        F: FnMut(i64) -> Complex64,
    {
        let mut out = Field::zeros(grid);
        for k in 1..=grid.max_wavenumber() {
            let c = f(k);
            out.set(k, c);
            out.set(-k, c.conj());
        }
        out
    }

    /// a·sin(kx) + b·cos(kx): û(k) = (b - i·a)/2.
    pub fn harmonic(grid: Grid, k: i64, sin_amp: f64, cos_amp: f64) -> Self {
        let mut out = Field::zeros(grid);
        if k >= 1 && k <= grid.max_wavenumber() {
            let c = Complex64::new(cos_amp / 2.0, -sin_amp / 2.0);
            out.set(k, c);
            out.set(-k, c.conj());
        }
        out
    }

    /// Validate and adopt an explicit natural-order spectrum (k = -K..K).
    /// Hermitian symmetry is projected exactly; the mean mode is zeroed.
    pub fn from_coefficients(grid: Grid, coeffs: &[Complex64]) -> Result<Self> {
        let len = 2 * grid.max_wavenumber() as usize + 1;
        if coeffs.len() != len {
            return Err(Error::InvalidField(format!(
                "expected {len} coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidField("non-finite coefficient".into()));
        }
        let mut out = Field::zeros(grid);
        for k in 1..=grid.max_wavenumber() {
            let c = 0.5 * (coeffs[(k + grid.max_wavenumber()) as usize]
                + coeffs[(-k + grid.max_wavenumber()) as usize].conj());
            out.set(k, c);
            out.set(-k, c.conj());
        }
        Ok(out)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let kk = self.grid.max_wavenumber();
        if k.abs() > kk {
            Complex64::ZERO
        } else {
            self.coeffs[(k + kk) as usize]
        }
    }

    pub(crate) fn set(&mut self, k: i64, c: Complex64) {
        let kk = self.grid.max_wavenumber();
        self.coeffs[(k + kk) as usize] = c;
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn require_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidField("non-finite coefficient".into()))
        }
    }

    /// Apply a Fourier multiplier m(k). The caller is responsible for m
    /// satisfying m(-k) = conj(m(k)) so the result stays real-valued.
    pub fn multiplier<F>(&self, m: F) -> Field
    where
        F: Fn(i64) -> Complex64,
    {
        let kk = self.grid.max_wavenumber();
        let mut out = self.clone();
        for k in -kk..=kk {
            let c = out.coeff(k) * m(k);
            out.set(k, c);
        }
        out.set(0, Complex64::ZERO);
        out
    }

    /// Synthesize samples on an n-point grid (unchecked internals).
    pub(crate) fn synth(&self, n: usize) -> Vec<f64> {
        let kk = self.grid.max_wavenumber();
        debug_assert!(n > kk as usize, "synthesis grid too small");
        let mut buf = vec![Complex64::ZERO; n];
        for k in 1..=kk {
            buf[k as usize] = self.coeff(k);
            buf[n - k as usize] = self.coeff(-k);
        }
        fft::inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Evaluate the trigonometric polynomial at an arbitrary point; a slow
    /// direct sum used by quadrature oracles.
    pub fn eval_at(&self, x: f64) -> f64 {
        let kk = self.grid.max_wavenumber();
        let mut acc = 0.0;
        for k in 1..=kk {
            let c = self.coeff(k);
            let (s, co) = (k as f64 * x).sin_cos();
            acc += 2.0 * (c.re * co - c.im * s);
        }
        acc
    }

    /// Serialize to the flat binary record: n_modes (u64 LE), then (re, im)
    /// f64 LE pairs for k = 1..=K. Negative modes are implied by symmetry.
    pub fn to_bytes(&self) -> Vec<u8> {
        let kk = self.grid.max_wavenumber();
        let mut out = Vec::with_capacity(8 + 16 * kk as usize);
        out.extend_from_slice(&(self.grid.n_modes() as u64).to_le_bytes());
        for k in 1..=kk {
            let c = self.coeff(k);
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Field> {
        if bytes.len() < 8 {
            return Err(Error::InvalidField("field record truncated".into()));
        }
        let n_modes = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let grid = Grid::new(n_modes)?;
        let kk = grid.max_wavenumber() as usize;
        if bytes.len() != 8 + 16 * kk {
            return Err(Error::InvalidField(format!(
                "field record has {} bytes, expected {}",
                bytes.len(),
                8 + 16 * kk
            )));
        }
        let mut out = Field::zeros(grid);
        for k in 1..=kk {
            let off = 8 + 16 * (k - 1);
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::InvalidField("non-finite coefficient".into()));
            }
            let c = Complex64::new(re, im);
            out.set(k as i64, c);
            out.set(-(k as i64), c.conj());
        }
        Ok(out)
    }
}

impl std::ops::Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        assert_eq!(self.grid, rhs.grid, "field grids differ");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        out
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        assert_eq!(self.grid, rhs.grid, "field grids differ");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        out
    }
}

impl std::ops::Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, s: f64) -> Field {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a *= s;
        }
        out
    }
}

/// samples\[j\] = Σ_k û(k) e^{i k x_j} on the field's own grid.
pub fn to_physical(u: &Field) -> Result<Vec<f64>> {
    u.require_finite()?;
    let n = u.grid.n_modes();
    let kk = u.grid.max_wavenumber();
    let mut buf = vec![Complex64::ZERO; n];
    for k in 1..=kk {
        buf[k as usize] = u.coeff(k);
        buf[n - k as usize] = u.coeff(-k);
    }
    fft::inverse(&mut buf);
    let amp = buf.iter().map(|c| c.re.abs()).fold(0.0f64, f64::max).max(1e-30);
    let imag = buf.iter().map(|c| c.im.abs()).fold(0.0f64, f64::max);
    if imag > 1e-10 * amp {
        return Err(Error::InvalidField(format!(
            "imaginary residue {imag:.3e} exceeds 1e-10 x amplitude {amp:.3e}"
        )));
    }
    Ok(buf.iter().map(|c| c.re).collect())
}

/// Inverse of [`to_physical`] on band-limited mean-zero data. The sample mean
/// is subtracted from the spectrum and reported alongside the field.
pub fn from_physical(samples: &[f64], grid: Grid) -> Result<(Field, f64)> {
    if samples.len() != grid.n_modes() {
        return Err(Error::InvalidField(format!(
            "expected {} samples, got {}",
            grid.n_modes(),
            samples.len()
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidField("non-finite sample".into()));
    }
    let n = grid.n_modes();
    let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    fft::forward(&mut buf);
    let mean = buf[0].re / n as f64;
    let mut out = Field::zeros(grid);
    for k in 1..=grid.max_wavenumber() {
        let c = buf[k as usize] / n as f64;
        out.set(k, c);
        out.set(-k, c.conj());
    }
    Ok((out, mean))
}

/// Periodic Hilbert transform: (Hu)^(k) = -i·sgn(k)·û(k).
pub fn hilbert(u: &Field) -> Field {
    u.multiplier(|k| Complex64::new(0.0, -(k.signum() as f64)))
}

/// order-th derivative: multiplication by (ik)^order.
pub fn derivative(u: &Field, order: u32) -> Field {
    u.multiplier(|k| Complex64::new(0.0, k as f64).powu(order))
}

/// Homogeneous Sobolev norm ‖u‖_s = (2π Σ_k |k|^{2s} |û(k)|²)^{1/2}.
/// s = 0 gives the L² norm, so ‖sin x‖ = √π and ‖sin(nx)/√π‖_s = n^s.
pub fn sobolev_norm(u: &Field, s: f64) -> f64 {
    let kk = u.grid.max_wavenumber();
    let mut acc = 0.0;
    for k in 1..=kk {
        let w = (k as f64).powf(2.0 * s);
        acc += 2.0 * w * u.coeff(k).norm_sqr();
    }
    (TWO_PI * acc).sqrt()
}

/// ∫_T Π u_i dx, exact for trigonometric polynomials: the factors are
/// synthesized on a common grid padded past the product degree, multiplied
/// pointwise, and summed with the trapezoid weight 2π/n_pad.
pub fn integrate_product(us: &[&Field]) -> Result<f64> {
    let d = us.len();
    if d == 0 || d > 6 {
        return Err(Error::InvalidArgument(format!(
            "integrate_product takes 1..=6 fields, got {d}"
        )));
    }
    let grid = us[0].grid;
    for u in us {
        if u.grid != grid {
            return Err(Error::GridMismatch {
                left: grid.n_modes(),
                right: u.grid.n_modes(),
            });
        }
        u.require_finite()?;
    }
    let kk = grid.max_wavenumber() as usize;
    let n_pad = fft::next_pow2(d * kk + 1);
    let mut prod = us[0].synth(n_pad);
    for u in &us[1..] {
        for (p, v) in prod.iter_mut().zip(u.synth(n_pad)) {
            *p *= v;
        }
    }
    Ok(TWO_PI * prod.iter().sum::<f64>() / n_pad as f64)
}

/// ∫ f g dx, the L² pairing.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    integrate_product(&[f, g])
}

/// Exact pointwise product of fields, projected back onto the grid band.
/// The (constant) mean of the product is dropped; polynomial nonlinearities
/// built from this stay mean-zero by construction.
pub fn pointwise_product(us: &[&Field]) -> Result<Field> {
    let d = us.len();
    if d == 0 || d > 6 {
        return Err(Error::InvalidArgument(format!(
            "pointwise_product takes 1..=6 fields, got {d}"
        )));
    }
    let grid = us[0].grid;
    for u in us {
        if u.grid != grid {
            return Err(Error::GridMismatch {
                left: grid.n_modes(),
                right: u.grid.n_modes(),
            });
        }
        u.require_finite()?;
    }
    let kk = grid.max_wavenumber() as usize;
    let n_pad = fft::next_pow2(d * kk + 1);
    let mut prod = us[0].synth(n_pad);
    for u in &us[1..] {
        for (p, v) in prod.iter_mut().zip(u.synth(n_pad)) {
            *p *= v;
        }
    }
    let mut buf: Vec<Complex64> = prod.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    fft::forward(&mut buf);
    let mut out = Field::zeros(grid);
    for k in 1..=grid.max_wavenumber() {
        let c = buf[k as usize] / n_pad as f64;
        out.set(k, c);
        out.set(-k, c.conj());
    }
    Ok(out)
}

/// Integer dealias cutoff for a rule fraction: modes with |k| above
/// floor(rule·K) are zeroed. rule = 1 is the identity.
pub fn dealias_cutoff(grid: Grid, rule: f64) -> i64 {
    assert!(rule > 0.0 && rule <= 1.0, "dealias rule must lie in (0, 1]");
    ((rule * grid.max_wavenumber() as f64) + 1e-9).floor() as i64
}

/// Zero all coefficients with |k| > rule·max_wavenumber.
pub fn dealias(u: &Field, rule: f64) -> Field {
    let cut = dealias_cutoff(u.grid, rule);
    u.multiplier(|k| {
        if k.abs() > cut {
            Complex64::ZERO
        } else {
            Complex64::ONE
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    /// Dense Riemann-sum quadrature oracle, independent of the FFT path.
    fn riemann_product(us: &[&Field], n: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            let x = TWO_PI * j as f64 / n as f64;
            acc += us.iter().map(|u| u.eval_at(x)).product::<f64>();
        }
        TWO_PI * acc / n as f64
    }

    fn random_field(grid: Grid, kmax: i64, seed: u64) -> Field {
        // cheap deterministic pseudo-random amplitudes
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        Field::from_spectrum(grid, |k| {
            if k <= kmax {
                Complex64::new(next(), next()) / (1.0 + k as f64)
            } else {
                Complex64::ZERO
            }
        })
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn sin_to_physical_matches_definition() {
        let g = grid(16);
        let u = Field::harmonic(g, 1, 1.0, 0.0);
        assert_eq!(u.coeff(1), Complex64::new(0.0, -0.5));
        assert_eq!(u.coeff(-1), Complex64::new(0.0, 0.5));
        let s = to_physical(&u).unwrap();
        for (j, x) in g.points().iter().enumerate() {
            assert!((s[j] - x.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_all_zero_samples() {
        let g = grid(16);
        let s = to_physical(&Field::zeros(g)).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cos_2x_matches_pointwise_evaluation() {
        let g = grid(16);
        let u = Field::harmonic(g, 2, 0.0, 1.0);
        let s = to_physical(&u).unwrap();
        for (j, x) in g.points().iter().enumerate() {
            assert!((s[j] - (2.0 * x).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn from_physical_of_sin() {
        let g = grid(16);
        let samples: Vec<f64> = g.points().iter().map(|x| x.sin()).collect();
        let (u, mean) = from_physical(&samples, g).unwrap();
        assert!(mean.abs() < 1e-15);
        assert!((u.coeff(1) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        for k in 2..=g.max_wavenumber() {
            assert!(u.coeff(k).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_samples_give_zero_field_with_mean() {
        let g = grid(16);
        let (u, mean) = from_physical(&[3.25; 16], g).unwrap();
        assert_eq!(mean, 3.25);
        assert!(sobolev_norm(&u, 0.0) < 1e-14);
    }

    #[test]
    fn physical_roundtrip_random_band_limited() {
        let g = grid(64);
        let u = random_field(g, 20, 9);
        let (v, _) = from_physical(&to_physical(&u).unwrap(), g).unwrap();
        for k in -g.max_wavenumber()..=g.max_wavenumber() {
            assert!((u.coeff(k) - v.coeff(k)).norm() < 1e-14);
        }
    }

    #[test]
    fn from_physical_rejects_non_finite() {
        let g = grid(16);
        let mut s = vec![0.0; 16];
        s[3] = f64::NAN;
        assert!(from_physical(&s, g).is_err());
    }

    #[test]
    fn hilbert_on_harmonics() {
        let g = grid(32);
        for n in 1..=4 {
            // H(sin nx) = -cos nx
            let hs = hilbert(&Field::harmonic(g, n, 1.0, 0.0));
            let expect = Field::harmonic(g, n, 0.0, -1.0);
            assert!(sobolev_norm(&(&hs - &expect), 0.0) < 1e-14);
            // H(cos nx) = sin nx
            let hc = hilbert(&Field::harmonic(g, n, 0.0, 1.0));
            let expect = Field::harmonic(g, n, 1.0, 0.0);
            assert!(sobolev_norm(&(&hc - &expect), 0.0) < 1e-14);
        }
    }

    #[test]
    fn hilbert_squared_is_minus_identity() {
        let g = grid(32);
        let u = &Field::harmonic(g, 1, 1.0, 0.0) + &(&Field::harmonic(g, 3, 0.0, 1.0) * 2.0);
        let hh = hilbert(&hilbert(&u));
        let diff = &hh + &u;
        assert!(sobolev_norm(&diff, 0.0) < 1e-14);
    }

    #[test]
    fn derivative_of_sin() {
        let g = grid(32);
        let u = Field::harmonic(g, 1, 1.0, 0.0);
        let ux = derivative(&u, 1);
        let expect = Field::harmonic(g, 1, 0.0, 1.0);
        assert!(sobolev_norm(&(&ux - &expect), 0.0) < 1e-14);
        let uxx = derivative(&u, 2);
        let expect = Field::harmonic(g, 1, -1.0, 0.0);
        assert!(sobolev_norm(&(&uxx - &expect), 0.0) < 1e-14);
    }

    #[test]
    fn hilbert_second_derivative_of_sin_is_cos() {
        let g = grid(32);
        let u = Field::harmonic(g, 1, 1.0, 0.0);
        let h = hilbert(&derivative(&u, 2));
        let expect = Field::harmonic(g, 1, 0.0, 1.0);
        assert!(sobolev_norm(&(&h - &expect), 0.0) < 1e-14);
    }

    #[test]
    fn basis_norms() {
        let g = grid(64);
        let inv_sqrt_pi = 1.0 / PI.sqrt();
        for n in [1i64, 3, 7] {
            let e_n = Field::harmonic(g, n, inv_sqrt_pi, 0.0);
            assert!((sobolev_norm(&e_n, 0.0) - 1.0).abs() < 1e-14);
            for s in [0.5, 1.0, 2.0] {
                assert!((sobolev_norm(&e_n, s) - (n as f64).powf(s)).abs() < 1e-12);
            }
        }
        assert_eq!(sobolev_norm(&Field::zeros(g), 1.5), 0.0);
    }

    #[test]
    fn quadrature_closed_forms() {
        let g = grid(32);
        let s1 = Field::harmonic(g, 1, 1.0, 0.0);
        let c1 = Field::harmonic(g, 1, 0.0, 1.0);
        assert!((integrate_product(&[&s1, &s1]).unwrap() - PI).abs() < 1e-13);
        assert!((integrate_product(&[&s1; 4]).unwrap() - 3.0 * PI / 4.0).abs() < 1e-13);
        assert!((integrate_product(&[&s1; 6]).unwrap() - 5.0 * PI / 8.0).abs() < 1e-13);
        assert!(integrate_product(&[&s1, &c1]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn quadrature_grid_mismatch() {
        let a = Field::zeros(grid(16));
        let b = Field::zeros(grid(32));
        assert!(matches!(
            integrate_product(&[&a, &b]),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn quadrature_matches_riemann_oracle() {
        let g = grid(64);
        for seed in 0..4 {
            let fields: Vec<Field> = (0..3).map(|i| random_field(g, 8, seed * 10 + i)).collect();
            let refs: Vec<&Field> = fields.iter().collect();
            // degree-6 product of three degree-<=2 factors... use pairs too
            let exact = integrate_product(&refs).unwrap();
            let dense = riemann_product(&refs, 100_000);
            assert!(
                (exact - dense).abs() < 1e-8,
                "seed {seed}: {exact} vs {dense}"
            );
        }
    }

    #[test]
    fn parseval() {
        let g = grid(64);
        let u = random_field(g, 25, 3);
        let l2 = sobolev_norm(&u, 0.0);
        let quad = integrate_product(&[&u, &u]).unwrap();
        assert!((quad - l2 * l2).abs() < 1e-12 * quad.abs().max(1.0));
    }

    #[test]
    fn hilbert_antisymmetry_and_isometry() {
        let g = grid(64);
        let f = random_field(g, 20, 11);
        let gg = random_field(g, 20, 12);
        let lhs = inner_product(&gg, &hilbert(&f)).unwrap();
        let rhs = -inner_product(&hilbert(&gg), &f).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(integrate_product(&[&hilbert(&f)]).unwrap().abs() < 1e-13);
        for s in [0.0, 0.5, 1.0, 2.0] {
            assert!((sobolev_norm(&hilbert(&f), s) - sobolev_norm(&f, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_rules() {
        let g = grid(8); // K = 3
        let u = Field::harmonic(g, 3, 1.0, 0.0);
        assert!(sobolev_norm(&dealias(&u, 1.0), 0.0) > 0.0);
        assert_eq!(sobolev_norm(&dealias(&u, 2.0 / 3.0), 0.0), 0.0);
        let v = Field::harmonic(g, 2, 1.0, 0.0);
        assert!(sobolev_norm(&dealias(&v, 2.0 / 3.0), 0.0) > 0.0);
    }

    #[test]
    fn dealias_never_increases_energy() {
        let g = grid(64);
        for seed in 0..8 {
            let u = random_field(g, 31, seed);
            for rule in [0.3, 0.5, 2.0 / 3.0, 0.9, 1.0] {
                assert!(sobolev_norm(&dealias(&u, rule), 0.0) <= sobolev_norm(&u, 0.0) + 1e-15);
            }
        }
    }

    #[test]
    fn byte_roundtrip() {
        let g = grid(64);
        let u = random_field(g, 31, 17);
        let v = Field::from_bytes(&u.to_bytes()).unwrap();
        assert_eq!(u, v);
        assert!(Field::from_bytes(&u.to_bytes()[..40]).is_err());
    }

    #[test]
    fn non_finite_field_is_rejected() {
        let g = grid(16);
        let mut u = Field::harmonic(g, 1, 1.0, 0.0);
        u.set(2, Complex64::new(f64::INFINITY, 0.0));
        assert!(to_physical(&u).is_err());
        assert!(integrate_product(&[&u, &u]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn field_strategy() -> impl Strategy<Value = Field> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 15).prop_map(|coeffs| {
                let g = Grid::new(32).unwrap();
                Field::from_spectrum(g, |k| {
                    let (re, im) = coeffs[(k - 1) as usize];
                    Complex64::new(re, im) / (1.0 + k as f64)
                })
            })
        }

        proptest! {
            #[test]
            fn byte_roundtrip_is_identity(u in field_strategy()) {
                let v = Field::from_bytes(&u.to_bytes()).unwrap();
                prop_assert_eq!(u, v);
            }

            #[test]
            fn hilbert_involution_and_isometry(u in field_strategy()) {
                let h = hilbert(&u);
                prop_assert!(sobolev_norm(&(&hilbert(&h) + &u), 0.0) < 1e-13);
                prop_assert!((sobolev_norm(&h, 1.0) - sobolev_norm(&u, 1.0)).abs() < 1e-12);
            }

            #[test]
            fn parseval_and_dealias_contract(u in field_strategy(), rule in 0.2f64..1.0) {
                let quad = integrate_product(&[&u, &u]).unwrap();
                let l2 = sobolev_norm(&u, 0.0).powi(2);
                prop_assert!((quad - l2).abs() <= 1e-12 * l2.max(1e-12));
                prop_assert!(sobolev_norm(&dealias(&u, rule), 0.0) <= sobolev_norm(&u, 0.0) + 1e-15);
            }

            #[test]
            fn physical_roundtrip(u in field_strategy()) {
                let (v, mean) = from_physical(&to_physical(&u).unwrap(), u.grid()).unwrap();
                prop_assert!(mean.abs() < 1e-12);
                prop_assert!(sobolev_norm(&(&v - &u), 0.0) < 1e-12);
            }
        }
    }
}
