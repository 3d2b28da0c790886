//! Quadrature distributions, homodyne smearing, Husimi and Wigner functions.
//!
//! Quadratures are `x(phi) = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2)`, so the
//! vacuum variance is 1/2, `<x, phi|p> = e^{-i p phi} psi_p(x)` with `psi_p` the
//! normalized Hermite functions, and coherent amplitudes are `alpha = (x + i y)/sqrt(2)`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::ConditionalMixture;
use crate::error::{invalid, Error, Result};
use crate::fock::FockVector;
use crate::prep::{legendre_normalization, normalization_constant, PreparationConfig};
use crate::special::{binomial, hermite, hermite_functions, log_factorial};

/// Density below which the grid boundary counts as converged.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Uniform grid of quadrature values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            x_min: -8.0,
            x_max: 8.0,
            points: 801,
        }
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        let g = Self { x_min, x_max, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(invalid("grid range must be finite with x_min < x_max"));
        }
        if self.points < 3 {
            return Err(invalid("grid needs at least 3 points"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| self.x_min + h * i as f64).collect()
    }

    /// Same spacing, range grown by a quarter on each side.
    fn widened(&self) -> Self {
        let h = self.spacing();
        let pad = ((self.x_max - self.x_min) / 4.0 / h).ceil() as usize;
        Self {
            x_min: self.x_min - pad as f64 * h,
            x_max: self.x_max + pad as f64 * h,
            points: self.points + 2 * pad,
        }
    }

    /// Widens until `f` at both ends is below `BOUNDARY_TOL`.
    pub fn fitted(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut g = *self;
        for _ in 0..40 {
            if f(g.x_min) < BOUNDARY_TOL && f(g.x_max) < BOUNDARY_TOL {
                return Ok(g);
            }
            g = g.widened();
        }
        Err(Error::NonConvergence(
            "grid extension did not reach a negligible boundary density".into(),
        ))
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Probability density of the quadrature at phase `phi` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureDistribution {
    pub phi: f64,
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
}

impl QuadratureDistribution {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.xs, &self.density)
    }

    pub fn mean(&self) -> f64 {
        let w: Vec<f64> = self.xs.iter().zip(&self.density).map(|(x, d)| x * d).collect();
        trapezoid(&self.xs, &w) / self.integral()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let w: Vec<f64> = self
            .xs
            .iter()
            .zip(&self.density)
            .map(|(x, d)| (x - mu).powi(2) * d)
            .collect();
        trapezoid(&self.xs, &w) / self.integral()
    }

    /// Interference visibility, see [`fringe_contrast`].
    pub fn contrast(&self) -> f64 {
        fringe_contrast(&self.xs, &self.density)
    }
}

/// Closed-form quadrature density of the vacuum-input state `|Psi_m>`:
/// `p(x) = |kappa'|^m / (2^m N_m sqrt(pi Delta^{m+1})) exp(-(1-|kappa'|^2) x^2/Delta) |H_m(K x)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQuadrature {
    m: usize,
    prefactor: f64,
    gauss: f64,
    k: C64,
}

impl PureQuadrature {
    pub fn new(kappa_prime: C64, m: usize, phi: f64) -> Result<Self> {
        let ka = kappa_prime.norm();
        if ka >= 1.0 {
            return Err(invalid("|kappa'| must be < 1"));
        }
        let delta = 1.0 + ka * ka + 2.0 * ka * (2.0 * phi - kappa_prime.arg()).cos();
        if !(delta > 0.0) {
            return Err(invalid(format!("Delta = {delta} must be positive")));
        }
        let nm = legendre_normalization(kappa_prime, m)?;
        if !(nm > 0.0) {
            return Err(Error::ImpossibleOutcome(nm));
        }
        let k = ((-kappa_prime.conj() * C64::from_polar(1.0, 2.0 * phi) - ka * ka) / delta).sqrt();
        let log_pre = if m == 0 { 0.0 } else { m as f64 * (ka / 2.0).ln() }
            - nm.ln()
            - 0.5 * (PI.ln() + (m as f64 + 1.0) * delta.ln());
        Ok(Self {
            m,
            prefactor: log_pre.exp(),
            gauss: (1.0 - ka * ka) / delta,
            k,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * (-self.gauss * x * x).exp() * hermite(self.m, self.k * x).norm_sqr()
    }

    /// Coefficients `c_s` of `|H_m(K x)|^2 = sum_s c_s x^s`.
    fn poly_coefficients(&self) -> Vec<f64> {
        // H_m(z) = sum_j h_j z^j by the recurrence on coefficient vectors
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 2.0];
        let h = if self.m == 0 {
            prev
        } else {
            for j in 1..self.m {
                let mut next = vec![0.0; j + 2];
                for (i, c) in cur.iter().enumerate() {
                    next[i + 1] += 2.0 * c;
                }
                for (i, c) in prev.iter().enumerate() {
                    next[i] -= 2.0 * j as f64 * c;
                }
                prev = cur;
                cur = next;
            }
            cur
        };
        let kp: Vec<C64> = (0..=self.m).map(|j| self.k.powu(j as u32)).collect();
        let mut out = vec![0.0; 2 * self.m + 1];
        for (j, hj) in h.iter().enumerate() {
            for (l, hl) in h.iter().enumerate() {
                out[j + l] += (hj * hl * kp[j] * kp[l].conj()).re;
            }
        }
        out
    }
}

/// `p(x, phi | m)` for vacuum input, on `grid` widened until the tails are negligible.
pub fn quadrature_pdf_pure(kappa_prime: C64, m: usize, phi: f64, grid: &Grid) -> Result<QuadratureDistribution> {
    grid.validate()?;
    let q = PureQuadrature::new(kappa_prime, m, phi)?;
    let g = grid.fitted(|x| q.eval(x))?;
    let xs = g.xs();
    let density = xs.iter().map(|&x| q.eval(x)).collect();
    Ok(QuadratureDistribution { phi, xs, density })
}

/// `|<x, phi|psi>|^2` from Fock amplitudes and Hermite functions; `grid` is used as given.
pub fn quadrature_pdf_fock(state: &FockVector, phi: f64, grid: &Grid) -> Result<QuadratureDistribution> {
    grid.validate()?;
    let dim = state.support_end(1e-15);
    let phases: Vec<C64> = (0..dim)
        .map(|p| state.get(p) * C64::from_polar(1.0, -(p as f64) * phi))
        .collect();
    let xs = grid.xs();
    let density = xs
        .par_iter()
        .map(|&x| {
            let psi = hermite_functions(dim, x);
            phases.iter().zip(&psi).map(|(c, h)| c * h).sum::<C64>().norm_sqr()
        })
        .collect();
    Ok(QuadratureDistribution { phi, xs, density })
}

/// `sum_m P(m|k) p(x, phi | m)`, with the grid widened for the broadest component.
pub fn quadrature_pdf_mixture(mix: &ConditionalMixture, phi: f64, grid: &Grid) -> Result<QuadratureDistribution> {
    mix.validate()?;
    grid.validate()?;
    let parts: Vec<(f64, PureQuadrature)> = mix
        .support()
        .map(|(m, w)| Ok((w, PureQuadrature::new(mix.kappa_prime, m, phi)?)))
        .collect::<Result<_>>()?;
    let eval = |x: f64| parts.iter().map(|(w, q)| w * q.eval(x)).sum::<f64>();
    let g = grid.fitted(eval)?;
    let xs = g.xs();
    let density = xs.par_iter().map(|&x| eval(x)).collect();
    Ok(QuadratureDistribution { phi, xs, density })
}

/// Gaussian smearing from homodyne inefficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmearingKernel {
    pub eta: f64,
}

impl SmearingKernel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid(format!("homodyne efficiency must lie in (0, 1], got {eta}")));
        }
        Ok(Self { eta })
    }

    /// `sigma = (1 - eta) / (2 eta)`, the variance of the smearing Gaussian.
    pub fn sigma(&self) -> f64 {
        (1.0 - self.eta) / (2.0 * self.eta)
    }

    /// `f(x; eta) = exp(-x^2 / (2 sigma)) / sqrt(2 pi sigma)`.
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.sigma();
        (-x * x / (2.0 * s)).exp() / (2.0 * PI * s).sqrt()
    }

    fn check_grid(&self, spacing: f64) -> Result<()> {
        let required = self.sigma().sqrt() / 4.0;
        if self.sigma() > 0.0 && spacing >= required {
            return Err(Error::GridTooCoarse { spacing, required });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmearingMethod {
    /// Numerical convolution on the grid.
    #[default]
    Convolution,
    /// Polynomial-times-Gaussian convolution done analytically.
    ClosedForm,
}

/// Convolves a density with the smearing kernel on its own grid.
pub fn smear(dist: &QuadratureDistribution, kern: &SmearingKernel) -> Result<QuadratureDistribution> {
    if kern.sigma() == 0.0 {
        return Ok(dist.clone());
    }
    let h = dist.xs[1] - dist.xs[0];
    kern.check_grid(h)?;
    let n = dist.xs.len();
    let weights: Vec<f64> = (0..n).map(|i| kern.eval(i as f64 * h) * h).collect();
    let density = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| dist.density[j] * weights[i.abs_diff(j)]).sum())
        .collect();
    Ok(QuadratureDistribution {
        phi: dist.phi,
        xs: dist.xs.clone(),
        density,
    })
}

/// Homodyne-smeared `p_eta(x, phi | m)` of the vacuum-input state.
pub fn smeared_pdf(
    kappa_prime: C64,
    m: usize,
    phi: f64,
    kern: &SmearingKernel,
    grid: &Grid,
    method: SmearingMethod,
) -> Result<QuadratureDistribution> {
    let q = PureQuadrature::new(kappa_prime, m, phi)?;
    // widen for the smeared tails as well
    let spread = 8.0 * kern.sigma().sqrt();
    let g = grid.fitted(|x| q.eval(x.abs() - spread.min(x.abs())))?;
    match method {
        SmearingMethod::Convolution => {
            let xs = g.xs();
            let density = xs.iter().map(|&x| q.eval(x)).collect();
            smear(&QuadratureDistribution { phi, xs, density }, kern)
        }
        SmearingMethod::ClosedForm => {
            kern.check_grid(g.spacing())?;
            let xs = g.xs();
            let density = if kern.sigma() == 0.0 {
                xs.iter().map(|&x| q.eval(x)).collect()
            } else {
                let conv = GaussianPolyConvolution::new(&q, kern.sigma());
                xs.iter().map(|&x| conv.eval(x)).collect()
            };
            Ok(QuadratureDistribution { phi, xs, density })
        }
    }
}

/// `int C e^{-a y^2} sum_s c_s y^s f(x - y) dy` for a Gaussian `f` of variance `v`.
struct GaussianPolyConvolution {
    prefactor: f64,
    a: f64,
    v: f64,
    coeffs: Vec<f64>,
}

impl GaussianPolyConvolution {
    fn new(q: &PureQuadrature, v: f64) -> Self {
        Self {
            prefactor: q.prefactor,
            a: q.gauss,
            v,
            coeffs: q.poly_coefficients(),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let b = self.a + 1.0 / (2.0 * self.v);
        let y0 = x / (2.0 * self.v * b);
        let rem = -x * x / (2.0 * self.v) + b * y0 * y0;
        // central moments of exp(-b t^2): sqrt(pi/b) (i-1)!! / (2b)^{i/2} for even i
        let smax = self.coeffs.len();
        let mut moments = vec![0.0; smax];
        let mut mom = (PI / b).sqrt();
        for i in (0..smax).step_by(2) {
            moments[i] = mom;
            mom *= (i + 1) as f64 / (2.0 * b);
        }
        let mut total = 0.0;
        for (s, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let shifted: f64 = (0..=s)
                .step_by(2)
                .map(|i| binomial(s as i64, i as i64) * y0.powi((s - i) as i32) * moments[i])
                .sum();
            total += c * shifted;
        }
        self.prefactor * rem.exp() * total / (2.0 * PI * self.v).sqrt()
    }
}

/// Husimi function `Q(x, y) = |<alpha|Psi_{n,m}>|^2 / (2 pi)`, `alpha = (x + i y)/sqrt(2)`,
/// in closed form:
///
/// `Q = |R|^{4 nu} |T|^{4m} / (2 pi N_{n,m}) |alpha|^{2 nu} exp(-|alpha|^2 + Re(kappa'^* alpha^2))
///      |sum_{j=delta}^{m} C(n, j+nu)/j! (|R|^2 u / |T|^2)^j H_j(u)|^2`, `u = sqrt(-kappa'/2) alpha^*`.
pub fn husimi(cfg: &PreparationConfig, x: f64, y: f64) -> Result<f64> {
    Ok(HusimiClosedForm::new(cfg)?.eval(x, y))
}

/// Reusable closed-form Husimi evaluator for one configuration.
pub struct HusimiClosedForm {
    n: usize,
    m: usize,
    nu: i64,
    delta: usize,
    ratio: f64,
    s: C64,
    kappa_prime: C64,
    prefactor: f64,
}

impl HusimiClosedForm {
    pub fn new(cfg: &PreparationConfig) -> Result<Self> {
        let norm = normalization_constant(cfg)?;
        let nu = cfg.nu();
        let (r2, t2) = (cfg.bs.reflectance(), cfg.bs.transmittance());
        let log_pre = 2.0 * nu as f64 * r2.ln() + 2.0 * cfg.m as f64 * t2.ln() - (2.0 * PI * norm).ln();
        Ok(Self {
            n: cfg.n,
            m: cfg.m,
            nu,
            delta: cfg.delta(),
            ratio: r2 / t2,
            s: (-cfg.kappa_prime() / 2.0).sqrt(),
            kappa_prime: cfg.kappa_prime(),
            prefactor: log_pre.exp(),
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let alpha = C64::new(x, y) / SQRT_2;
        let ac = alpha.conj();
        let u = self.s * ac;
        let mut sum = C64::new(0.0, 0.0);
        for j in self.delta..=self.m {
            let c = binomial(self.n as i64, j as i64 + self.nu) * (-log_factorial(j)).exp();
            // for nu < 0 the factor |alpha|^{2 nu} is absorbed as alpha^{*nu} up to a phase
            let power = if self.nu < 0 {
                (self.s * self.ratio).powu(j as u32) * ac.powu((j as i64 + self.nu) as u32)
            } else {
                (u * self.ratio).powu(j as u32)
            };
            sum += c * power * hermite(j, u);
        }
        let radial = if self.nu > 0 {
            alpha.norm_sqr().powi(self.nu as i32)
        } else {
            1.0
        };
        let gauss = (-alpha.norm_sqr() + (self.kappa_prime.conj() * alpha * alpha).re).exp();
        self.prefactor * radial * gauss * sum.norm_sqr()
    }
}

/// `|e^{-|alpha|^2/2} sum_p c_p alpha^{*p} / sqrt(p!)|^2 / (2 pi)`.
pub fn husimi_fock(state: &FockVector, x: f64, y: f64) -> f64 {
    let alpha = C64::new(x, y) / SQRT_2;
    let ac = alpha.conj();
    let dim = state.support_end(1e-300);
    let mut term = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut sum = C64::new(0.0, 0.0);
    for p in 0..dim {
        if p > 0 {
            term *= ac / (p as f64).sqrt();
        }
        sum += state.get(p) * term;
    }
    sum.norm_sqr() / (2.0 * PI)
}

/// Wigner function from the Fock-basis Laguerre expansion, normalized so that
/// the vacuum gives `exp(-x^2 - y^2) / pi`.
pub fn wigner(v: &FockVector, x: f64, y: f64) -> Result<f64> {
    let n = v.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    warn_truncation(v);
    let dim = v.support_end(1e-15);
    Ok(wigner_point(&v.amps()[..dim], x, y))
}

fn warn_truncation(v: &FockVector) {
    let dim = v.dim();
    let edge = dim - (dim / 10).max(1);
    let mass = v.tail_mass(edge);
    if mass > 1e-8 {
        log::warn!("Wigner function: {mass:.3e} of the state lies in the top tenth of the truncation (dim = {dim})");
    }
}

/// `W` over the Cartesian product `xs x ys`, row-major in `y`.
pub fn wigner_grid(v: &FockVector, xs: &[f64], ys: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = v.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    warn_truncation(v);
    let dim = v.support_end(1e-15);
    let c = &v.amps()[..dim];
    Ok(ys
        .par_iter()
        .map(|&y| xs.iter().map(|&x| wigner_point(c, x, y)).collect())
        .collect())
}

fn wigner_point(c: &[C64], x: f64, y: f64) -> f64 {
    let dim = c.len();
    let a = C64::new(x, y) / SQRT_2;
    let sq: Vec<f64> = (0..dim).map(|k| (k as f64).sqrt()).collect();
    // w[n] holds the (m, n) Laguerre function of the current diagonal m
    let mut w = vec![C64::new(0.0, 0.0); dim];
    w[0] = C64::new((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
    let rho = |i: usize, j: usize| c[i] * c[j].conj();
    let mut total = rho(0, 0).re * w[0].re;
    for n in 1..dim {
        w[n] = 2.0 * a * w[n - 1] / sq[n];
        total += 2.0 * (rho(0, n) * w[n]).re;
    }
    for m in 1..dim {
        let mut temp = w[m];
        w[m] = (2.0 * a.conj() * temp - sq[m] * w[m - 1]) / sq[m];
        total += (rho(m, m) * w[m]).re;
        for n in m + 1..dim {
            let next = (2.0 * a * w[n - 1] - sq[m] * temp) / sq[n];
            temp = w[n];
            w[n] = next;
            total += 2.0 * (rho(m, n) * w[n]).re;
        }
    }
    total
}

/// `(max - min) / (max + min)` over the three local extrema nearest `x = 0`,
/// counting only points where the density exceeds `1e-4` of its maximum;
/// zero when fewer than three extrema exist.
pub fn fringe_contrast(xs: &[f64], density: &[f64]) -> f64 {
    let peak = density.iter().copied().fold(0.0, f64::max);
    let thr = 1e-4 * peak;
    let mut ext: Vec<usize> = (1..density.len().saturating_sub(1))
        .filter(|&i| {
            let (l, c, r) = (density[i - 1], density[i], density[i + 1]);
            c > thr && ((c > l && c >= r) || (c < l && c <= r))
        })
        .collect();
    if ext.len() < 3 {
        return 0.0;
    }
    ext.sort_by(|&i, &j| xs[i].abs().total_cmp(&xs[j].abs()));
    let vals: Vec<f64> = ext[..3].iter().map(|&i| density[i]).collect();
    let hi = vals.iter().copied().fold(f64::MIN, f64::max);
    let lo = vals.iter().copied().fold(f64::MAX, f64::min);
    (hi - lo) / (hi + lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{DetectorModel, VacuumSource};
    use crate::fock::SqueezeParams;
    use crate::fock::{FockVector, DEFAULT_DIM};
    use crate::prep::{psjp_pajp_state, vacuum_input_state, BeamSplitterParams};
    use approx::assert_relative_eq;

    const KP: C64 = C64::new(-0.81, 0.0);

    #[test]
    fn vacuum_squeezed_gaussian() {
        for &kp in &[KP, C64::from_polar(0.6, 1.2)] {
            for &phi in &[0.0, 0.7, PI / 2.0] {
                let d = quadrature_pdf_pure(kp, 0, phi, &Grid::default()).unwrap();
                let ka = kp.norm();
                let delta = 1.0 + ka * ka + 2.0 * ka * (2.0 * phi - kp.arg()).cos();
                let a = (1.0 - ka * ka) / delta;
                for (x, p) in d.xs.iter().zip(&d.density) {
                    let want = (-a * x * x).exp() * (a / PI).sqrt();
                    assert!((p - want).abs() < 1e-12);
                }
                assert_relative_eq!(d.integral(), 1.0, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn three_zeros_for_m3() {
        let d = quadrature_pdf_pure(KP, 3, 0.0, &Grid::new(-8.0, 8.0, 1601).unwrap()).unwrap();
        let peak = d.density.iter().copied().fold(0.0, f64::max);
        // local minima that reach (numerically) zero
        let zeros = (1..d.xs.len() - 1)
            .filter(|&i| {
                d.density[i] < d.density[i - 1] && d.density[i] <= d.density[i + 1] && d.density[i] < 1e-3 * peak
            })
            .count();
        assert_eq!(zeros, 3);
    }

    #[test]
    fn closed_form_matches_fock_route() {
        for &kp in &[KP, C64::from_polar(0.5, 2.2)] {
            for m in 0..=6 {
                let state = vacuum_input_state(kp, m, DEFAULT_DIM).unwrap();
                for &phi in &[0.0, 0.4, PI / 2.0, 2.5] {
                    let a = quadrature_pdf_pure(kp, m, phi, &Grid::default()).unwrap();
                    let g = Grid::new(a.xs[0], *a.xs.last().unwrap(), a.xs.len()).unwrap();
                    let b = quadrature_pdf_fock(&state, phi, &g).unwrap();
                    let diff = a
                        .density
                        .iter()
                        .zip(&b.density)
                        .map(|(p, q)| (p - q).abs())
                        .fold(0.0, f64::max);
                    assert!(diff < 1e-8, "m={m} phi={phi} diff={diff}");
                }
            }
        }
    }

    #[test]
    fn mixture_of_single_component_is_pure() {
        let mix = ConditionalMixture::pure(3, KP).unwrap();
        let a = quadrature_pdf_mixture(&mix, 0.0, &Grid::default()).unwrap();
        let b = quadrature_pdf_pure(KP, 3, 0.0, &Grid::default()).unwrap();
        assert_eq!(a, b);
        let two = ConditionalMixture::new(1, vec![0.0, 0.5, 0.5], KP).unwrap();
        let g = Grid::new(-20.0, 20.0, 801).unwrap();
        let avg = quadrature_pdf_mixture(&two, 0.3, &g).unwrap();
        let p1 = quadrature_pdf_pure(KP, 1, 0.3, &g).unwrap();
        let p2 = quadrature_pdf_pure(KP, 2, 0.3, &g).unwrap();
        for i in 0..avg.xs.len() {
            assert_relative_eq!(avg.density[i], 0.5 * (p1.density[i] + p2.density[i]), epsilon = 1e-15);
        }
    }

    #[test]
    fn fig4a_mixture_has_no_fringes() {
        let src = VacuumSource::new(KP, 0.9).unwrap();
        let mix = ConditionalMixture::from_source(&DetectorModel::Single { eta: 0.3 }, &src, 3).unwrap();
        let d = quadrature_pdf_mixture(&mix, 0.0, &Grid::new(-8.0, 8.0, 1601).unwrap()).unwrap();
        assert!(d.contrast() < 0.05);
        let mix =
            ConditionalMixture::from_source(&DetectorModel::Chopping { channels: 20, eta: 0.9 }, &src, 3).unwrap();
        let d = quadrature_pdf_mixture(&mix, 0.0, &Grid::new(-8.0, 8.0, 1601).unwrap()).unwrap();
        assert!(d.contrast() > 0.2);
    }

    #[test]
    fn smearing_identity_and_gaussian_variance() {
        let g = Grid::new(-8.0, 8.0, 1601).unwrap();
        let one = SmearingKernel::new(1.0).unwrap();
        let p = quadrature_pdf_pure(KP, 3, 0.0, &g).unwrap();
        assert_eq!(
            smeared_pdf(KP, 3, 0.0, &one, &g, SmearingMethod::Convolution).unwrap(),
            p
        );
        let kern = SmearingKernel::new(0.8).unwrap();
        let p0 = quadrature_pdf_pure(KP, 0, 0.4, &g).unwrap();
        let s0 = smeared_pdf(KP, 0, 0.4, &kern, &g, SmearingMethod::Convolution).unwrap();
        assert_relative_eq!(s0.variance(), p0.variance() + kern.sigma(), max_relative = 1e-6);
        assert_relative_eq!(s0.integral(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn closed_form_smearing_matches_convolution() {
        let g = Grid::new(-8.0, 8.0, 1601).unwrap();
        for &eta in &[0.94, 0.98, 0.7] {
            let kern = SmearingKernel::new(eta).unwrap();
            for m in [0, 1, 3, 5] {
                let a = smeared_pdf(KP, m, 0.3, &kern, &g, SmearingMethod::Convolution).unwrap();
                let b = smeared_pdf(KP, m, 0.3, &kern, &g, SmearingMethod::ClosedForm).unwrap();
                let diff = a
                    .density
                    .iter()
                    .zip(&b.density)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-8, "eta={eta} m={m} diff={diff}");
            }
        }
    }

    #[test]
    fn smearing_threshold() {
        let g = Grid::new(-8.0, 8.0, 1601).unwrap();
        let c = |eta| {
            smeared_pdf(
                KP,
                3,
                0.0,
                &SmearingKernel::new(eta).unwrap(),
                &g,
                SmearingMethod::Convolution,
            )
            .unwrap()
            .contrast()
        };
        let (lo, hi) = (c(0.94), c(0.98));
        assert!(hi > 3.0 * lo, "contrast(0.98) = {hi}, contrast(0.94) = {lo}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = Grid::new(-8.0, 8.0, 41).unwrap();
        let kern = SmearingKernel::new(0.98).unwrap();
        assert!(matches!(
            smeared_pdf(KP, 3, 0.0, &kern, &g, SmearingMethod::Convolution),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    fn cfg(t2: f64, kappa: C64, n: usize, m: usize) -> PreparationConfig {
        PreparationConfig::new(
            BeamSplitterParams::from_transmittance(t2, 0.4, 1.3).unwrap(),
            SqueezeParams::from_kappa(kappa).unwrap(),
            n,
            m,
            DEFAULT_DIM,
        )
        .unwrap()
    }

    #[test]
    fn husimi_vacuum() {
        let c = cfg(0.5, C64::new(0.0, 0.0), 0, 0);
        assert_relative_eq!(husimi(&c, 0.0, 0.0).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_relative_eq!(
            husimi(&c, 1.0, -0.5).unwrap(),
            (-(1.0 + 0.25) / 2.0f64).exp() / (2.0 * PI),
            epsilon = 1e-15
        );
    }

    #[test]
    fn husimi_closed_form_matches_fock_sum() {
        for &(n, m) in &[(0, 0), (0, 1), (1, 4), (2, 1), (3, 0), (0, 3), (2, 5)] {
            let c = cfg(0.7, C64::from_polar(0.6, 0.9), n, m);
            let q = HusimiClosedForm::new(&c).unwrap();
            let state = psjp_pajp_state(&c).unwrap();
            for i in 0..9 {
                for j in 0..9 {
                    let (x, y) = (-4.0 + i as f64, -4.0 + j as f64);
                    let a = q.eval(x, y);
                    let b = husimi_fock(&state, x, y);
                    assert!((a - b).abs() < 1e-8 * b.max(1e-3), "({n},{m}) at ({x},{y}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn wigner_reference_values() {
        let vac = FockVector::vacuum(8).unwrap();
        assert_relative_eq!(wigner(&vac, 0.0, 0.0).unwrap(), 1.0 / PI, epsilon = 1e-15);
        assert_relative_eq!(wigner(&vac, 0.5, -1.0).unwrap(), (-1.25f64).exp() / PI, epsilon = 1e-15);
        let one = FockVector::basis(1, 8).unwrap();
        assert_relative_eq!(wigner(&one, 0.0, 0.0).unwrap(), -1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn wigner_marginals_match_quadratures() {
        let state = vacuum_input_state(C64::from_polar(0.5, 0.8), 2, 96).unwrap();
        let n = 361;
        let h = 18.0 / (n - 1) as f64;
        for &phi in &[0.0, 0.6, 1.9] {
            let (c, s) = (f64::cos(phi), f64::sin(phi));
            for i in (0..n).step_by(20) {
                let xp = -9.0 + h * i as f64;
                let marg: f64 = (0..n)
                    .map(|j| {
                        let t = -9.0 + h * j as f64;
                        wigner(&state, xp * c - t * s, xp * s + t * c).unwrap() * h
                    })
                    .sum();
                let g = Grid::new(xp - 1.0, xp + 1.0, 3).unwrap();
                let want = quadrature_pdf_fock(&state, phi, &g).unwrap().density[1];
                assert!((marg - want).abs() < 1e-6, "phi={phi} x={xp}: {marg} vs {want}");
            }
        }
    }

    #[test]
    fn contrast_metric() {
        let xs: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
        let d: Vec<f64> = xs.iter().map(|x| (-x * x / 8.0).exp()).collect();
        assert_eq!(fringe_contrast(&xs, &d), 0.0);
        let d: Vec<f64> = xs
            .iter()
            .map(|x| (-x * x / 8.0).exp() * (1.0 + 0.5 * (3.0 * x).cos()))
            .collect();
        let c = fringe_contrast(&xs, &d);
        assert!(c > 0.5 && c < 0.9, "{c}");
    }
}
