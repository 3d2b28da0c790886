//! Conditional output states of a beam splitter fed with a squeezed vacuum
//! and a number state, conditioned on counting `m` photons in the second
//! output port.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{squeezed_vacuum, FockVector, SqueezeParams, DEFAULT_DIM, DEFAULT_TAIL_TOL};
use crate::special::{jacobi_poly, legendre, log_binomial, log_factorial};

/// Lossless beam splitter with `T = |T| e^{i phi_T}`, `R = |R| e^{i phi_R}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterParams {
    pub t_mag: f64,
    pub r_mag: f64,
    pub phi_t: f64,
    pub phi_r: f64,
}

impl BeamSplitterParams {
    pub fn new(t_mag: f64, r_mag: f64, phi_t: f64, phi_r: f64) -> Result<Self> {
        let bs = Self {
            t_mag,
            r_mag,
            phi_t,
            phi_r,
        };
        bs.validate()?;
        Ok(bs)
    }

    /// From the intensity transmittance `|T|^2`.
    pub fn from_transmittance(t2: f64, phi_t: f64, phi_r: f64) -> Result<Self> {
        if !(t2 > 0.0 && t2 < 1.0) {
            return Err(invalid(format!("|T|^2 must lie in (0, 1), got {t2}")));
        }
        Self::new(t2.sqrt(), (1.0 - t2).sqrt(), phi_t, phi_r)
    }

    /// From the mixing angle, `|T| = cos(theta)`, `|R| = sin(theta)`.
    pub fn from_theta(theta: f64, phi_t: f64, phi_r: f64) -> Result<Self> {
        Self::new(theta.cos(), theta.sin(), phi_t, phi_r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v < 1.0;
        if !ok(self.t_mag) || !ok(self.r_mag) {
            return Err(invalid(format!(
                "|T| and |R| must lie in (0, 1), got {} and {}",
                self.t_mag, self.r_mag
            )));
        }
        if !self.phi_t.is_finite() || !self.phi_r.is_finite() {
            return Err(invalid("beam-splitter phases must be finite"));
        }
        let s = self.t_mag * self.t_mag + self.r_mag * self.r_mag;
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("|T|^2 + |R|^2 = {s}, expected 1")));
        }
        Ok(())
    }

    pub fn t(&self) -> C64 {
        C64::from_polar(self.t_mag, self.phi_t)
    }

    pub fn r(&self) -> C64 {
        C64::from_polar(self.r_mag, self.phi_r)
    }

    pub fn theta(&self) -> f64 {
        self.r_mag.atan2(self.t_mag)
    }

    pub fn transmittance(&self) -> f64 {
        self.t_mag * self.t_mag
    }

    pub fn reflectance(&self) -> f64 {
        self.r_mag * self.r_mag
    }
}

/// Physical parameters of one conditional preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationConfig {
    pub bs: BeamSplitterParams,
    pub sq: SqueezeParams,
    /// Photons in the number-state input.
    pub n: usize,
    /// Photons detected in the readout mode.
    pub m: usize,
    pub dim: usize,
}

impl PreparationConfig {
    pub fn new(bs: BeamSplitterParams, sq: SqueezeParams, n: usize, m: usize, dim: usize) -> Result<Self> {
        let cfg = Self { bs, sq, n, m, dim };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Real transmittance and a complex `kappa`; zero beam-splitter phases.
    pub fn simple(t2: f64, kappa: C64, n: usize, m: usize) -> Result<Self> {
        Self::new(
            BeamSplitterParams::from_transmittance(t2, 0.0, 0.0)?,
            SqueezeParams::from_kappa(kappa)?,
            n,
            m,
            DEFAULT_DIM,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.bs.validate()?;
        if self.dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        if self.n.max(self.m) >= self.dim {
            return Err(invalid(format!(
                "photon numbers n = {}, m = {} must be below dim = {}",
                self.n, self.m, self.dim
            )));
        }
        if self.kappa_prime().norm() >= 1.0 {
            return Err(invalid("|kappa'| must be < 1"));
        }
        Ok(())
    }

    /// `nu = n - m`.
    pub fn nu(&self) -> i64 {
        self.n as i64 - self.m as i64
    }

    /// `mu = max(0, nu)`.
    pub fn mu(&self) -> usize {
        self.nu().max(0) as usize
    }

    /// `delta = mu - nu`.
    pub fn delta(&self) -> usize {
        (self.mu() as i64 - self.nu()) as usize
    }

    pub fn kappa(&self) -> C64 {
        self.sq.kappa()
    }

    /// `kappa' = T^2 kappa`.
    pub fn kappa_prime(&self) -> C64 {
        let t = self.bs.t();
        t * t * self.kappa()
    }

    /// Squeezing whose `kappa` equals `kappa'`, i.e. `tanh|xi'| = |T|^2 tanh|xi|`.
    pub fn xi_prime(&self) -> Result<SqueezeParams> {
        SqueezeParams::from_kappa(self.kappa_prime())
    }

    /// `n = m = 0`: the output is the transmitted squeezed vacuum.
    pub fn is_plain_squeezed_vacuum(&self) -> bool {
        self.n == 0 && self.m == 0
    }
}

/// Two-mode amplitudes, row-major over `(p1, p2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeArray {
    dim: usize,
    amps: Vec<C64>,
}

impl TwoModeArray {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, p1: usize, p2: usize) -> C64 {
        self.amps[p1 * self.dim + p2]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitudes of mode 1 with mode 2 projected on `|p2>`.
    pub fn slice(&self, p2: usize) -> Vec<C64> {
        (0..self.dim).map(|p1| self.get(p1, p2)).collect()
    }
}

/// Applies the beam-splitter unitary to `in1 (x) |n>` by explicit matrix elements.
///
/// The creation operators map as `a1^dag -> T a1^dag - R^* a2^dag` and
/// `a2^dag -> R a1^dag + T^* a2^dag`. Output photon numbers up to
/// `in1.dim() + n` are computed; any mass outside `[0, dim)^2` beyond
/// the default tail tolerance is an error.
pub fn beam_splitter_oracle(in1: &FockVector, n: usize, bs: &BeamSplitterParams, dim: usize) -> Result<TwoModeArray> {
    bs.validate()?;
    if n >= dim {
        return Err(invalid(format!("n = {n} must be below dim = {dim}")));
    }
    let norm = in1.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    let din = in1.dim();
    let ext = din + n;
    let c = in1.amps();
    let (lt, lr) = (bs.t_mag.ln(), bs.r_mag.ln());
    let lfn = log_factorial(n);

    // row s, column t: contributions come from input p = s + t - n,
    // with a photons of mode 1 and b of mode 2 routed to output 2 (a + b = t)
    let rows: Vec<Vec<C64>> = (0..ext)
        .into_par_iter()
        .map(|s| {
            let mut row = vec![C64::new(0.0, 0.0); ext];
            for (t, slot) in row.iter_mut().enumerate() {
                let Some(p) = (s + t).checked_sub(n) else {
                    continue;
                };
                if p >= din || c[p] == C64::new(0.0, 0.0) {
                    continue;
                }
                let lc = 0.5 * (log_factorial(s) + log_factorial(t) - log_factorial(p) - lfn);
                let mut acc = C64::new(0.0, 0.0);
                for b in t.saturating_sub(p)..=n.min(t) {
                    let a = t - b;
                    let lm = lc
                        + log_binomial(p, a)
                        + log_binomial(n, b)
                        + (p - a + b) as f64 * lt
                        + (a + n - b) as f64 * lr;
                    // T^{p-a} (-R^*)^a R^{n-b} (T^*)^b, sign kept apart from the phase
                    let phase = (p - a) as f64 * bs.phi_t - a as f64 * bs.phi_r + (n - b) as f64 * bs.phi_r
                        - b as f64 * bs.phi_t;
                    let term = C64::from_polar(lm.exp(), phase);
                    if a % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                *slot = c[p] * acc;
            }
            row
        })
        .collect();

    let mut outside = 0.0;
    let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
    for (s, row) in rows.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            if s < dim && t < dim {
                amps[s * dim + t] = v;
            } else {
                outside += v.norm_sqr();
            }
        }
    }
    if outside > DEFAULT_TAIL_TOL {
        return Err(Error::TruncationOverflow { dim, mass: outside });
    }
    let out = TwoModeArray { dim, amps };
    let total = out.norm_sqr();
    if total > 1.0 + 1e-12 {
        return Err(Error::NotNormalized(total));
    }
    Ok(out)
}

/// Projects mode 2 on `|m>`: the normalized mode-1 state and its probability.
pub fn conditional_state_oracle(out: &TwoModeArray, m: usize) -> Result<(FockVector, f64)> {
    if m >= out.dim() {
        return Err(invalid(format!("m = {m} must be below dim = {}", out.dim())));
    }
    let slice = FockVector::new(out.slice(m))?;
    let prob = slice.norm_sqr();
    if prob < 1e-300 {
        return Err(Error::ImpossibleOutcome(prob));
    }
    Ok((slice.normalized()?, prob))
}

/// Brute-force route: squeezed vacuum and `|n>` through the beam splitter,
/// then projection. Returns the state cropped to `cfg.dim` and `P(n, m)`.
///
/// Post-selection on a rare outcome magnifies the input truncation tail, so
/// the input space is enlarged until the cropped result stops changing.
pub fn oracle_state(cfg: &PreparationConfig) -> Result<(FockVector, f64)> {
    cfg.validate()?;
    let mut din = cfg.dim.max(cfg.sq.required_dim(DEFAULT_TAIL_TOL));
    let mut prev = oracle_state_with(cfg, din)?;
    for _ in 0..8 {
        din += din / 2;
        let next = oracle_state_with(cfg, din)?;
        let settled = next.0.max_diff_up_to_phase(&prev.0) < 1e-13 && (next.1 / prev.1 - 1.0).abs() < 1e-13;
        prev = next;
        if settled {
            return Ok(prev);
        }
    }
    Err(Error::NonConvergence(format!(
        "oracle state still changing at input dimension {din}"
    )))
}

fn oracle_state_with(cfg: &PreparationConfig, din: usize) -> Result<(FockVector, f64)> {
    let input = squeezed_vacuum(cfg.sq, din)?;
    let out = beam_splitter_oracle(&input, cfg.n, &cfg.bs, din + cfg.n)?;
    let (state, prob) = conditional_state_oracle(&out, cfg.m)?;
    let cropped = FockVector::new(state.amps()[..cfg.dim].to_vec())?;
    let lost = 1.0 - cropped.norm_sqr();
    if lost > DEFAULT_TAIL_TOL {
        return Err(Error::TruncationTooSmall {
            dim: cfg.dim,
            tail: lost,
            tol: DEFAULT_TAIL_TOL,
            required: state.support_end(0.0),
        });
    }
    Ok((cropped.normalized()?, prob))
}

/// Terms of the photon-number expansion: `A_k = (-|R|^2)^k C(n,k) / (k - nu)!`
/// for `k = mu..=n`, as (sign, log magnitude).
fn a_coefficients(cfg: &PreparationConfig) -> Vec<(usize, f64, f64)> {
    let nu = cfg.nu();
    let lr2 = cfg.bs.reflectance().ln();
    (cfg.mu()..=cfg.n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let lm = k as f64 * lr2 + log_binomial(cfg.n, k) - log_factorial((k as i64 - nu) as usize);
            (k, sign, lm)
        })
        .collect()
}

/// Unnormalized closed-form amplitude at photon number `p`.
fn closed_form_amplitude(cfg: &PreparationConfig, coeffs: &[(usize, f64, f64)], p: usize) -> C64 {
    let nu = cfg.nu();
    let shifted = p as i64 - nu;
    if p < cfg.mu() || shifted < 0 || shifted % 2 != 0 {
        return C64::new(0.0, 0.0);
    }
    let q = (shifted / 2) as usize;
    let kp = cfg.kappa_prime();
    let kabs = kp.norm();
    if q > 0 && kabs == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let lq = if q == 0 { 0.0 } else { q as f64 * (kabs / 2.0).ln() };
    let base = -0.5 * log_factorial(p) - log_factorial(q) + lq;
    let sum: f64 = coeffs
        .iter()
        .map(|&(k, sign, lm)| {
            let top = (shifted + k as i64) as usize;
            sign * (lm + log_factorial(top) + base).exp()
        })
        .sum();
    C64::from_polar(1.0, q as f64 * kp.arg()) * sum
}

/// Photon number from which `needed` consecutive squared terms stay below
/// `rel` times the running total, or `None` if `limit` is reached first.
fn series_end(
    mut term: impl FnMut(usize) -> f64,
    start: usize,
    limit: usize,
    rel: f64,
    needed: usize,
) -> (f64, Option<usize>) {
    let mut total = 0.0;
    let mut quiet = 0;
    for p in start..limit {
        let t = term(p);
        total += t;
        if t <= rel * total {
            quiet += 1;
            if quiet >= needed {
                return (total, Some(p + 1));
            }
        } else {
            quiet = 0;
        }
    }
    (total, None)
}

/// Normalizes `amps`, refusing when the series mass beyond them exceeds the
/// tail tolerance relative to the total.
fn finish_truncated(amps: Vec<C64>, sq_term: impl Fn(usize) -> f64, dim: usize) -> Result<FockVector> {
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    // continue the series past the truncation to measure the discarded mass
    let mut beyond = Vec::new();
    let (tail, _) = series_end(
        |p| {
            let t = sq_term(p);
            beyond.push(t);
            t
        },
        dim,
        dim + 100_000,
        1e-18,
        40,
    );
    let total = kept + tail;
    if tail > DEFAULT_TAIL_TOL * total {
        let mut rest = tail;
        let mut required = dim;
        for t in &beyond {
            if rest <= DEFAULT_TAIL_TOL * total {
                break;
            }
            rest -= t;
            required += 1;
        }
        return Err(Error::TruncationTooSmall {
            dim,
            tail: tail / total,
            tol: DEFAULT_TAIL_TOL,
            required,
        });
    }
    FockVector::new(amps)?.normalized()
}

/// Closed-form photon-number expansion of the conditional state (PSJP for
/// `n < m`, PAJP for `n > m`), normalized.
///
/// `<p|Psi> ~ sum_{k=mu}^{n} (-|R|^2)^k C(n,k)/(k-nu)! (p-nu+k)! / (sqrt(p!) q!) (kappa'/2)^q`
/// with `q = (p - nu)/2`; zero unless `p >= mu` and `p - nu` is even.
pub fn psjp_pajp_state(cfg: &PreparationConfig) -> Result<FockVector> {
    cfg.validate()?;
    let coeffs = a_coefficients(cfg);
    let amps: Vec<C64> = (0..cfg.dim).map(|p| closed_form_amplitude(cfg, &coeffs, p)).collect();
    finish_truncated(amps, |p| closed_form_amplitude(cfg, &coeffs, p).norm_sqr(), cfg.dim)
}

/// Operator form: the Jacobi polynomial `P_l^{(|nu|, n_hat - m)}(2|T|^2 - 1)`
/// applied to `S(xi')|0>`, followed by `a^{|nu|}` (n < m) or `(a^dag)^nu` (n > m).
/// `l = n` for `n < m`, otherwise `l = m`.
pub fn jacobi_operator_state(cfg: &PreparationConfig) -> Result<FockVector> {
    cfg.validate()?;
    let nu = cfg.nu();
    let shift = nu.unsigned_abs() as usize;
    let xi_p = cfg.xi_prime()?;
    let ext = cfg.dim.max(xi_p.required_dim(DEFAULT_TAIL_TOL * 1e-6)) + shift + 2;
    let base = squeezed_vacuum(xi_p, ext)?;
    let l = if cfg.n < cfg.m { cfg.n } else { cfg.m };
    let z = 2.0 * cfg.bs.transmittance() - 1.0;
    let alpha = shift as f64;
    let mut v = base.apply_diagonal(|p| jacobi_poly(l, alpha, p as f64 - cfg.m as f64, z));
    for _ in 0..shift {
        v = if nu < 0 {
            v.annihilate()
        } else {
            let tol = 1e-12 * v.norm_sqr();
            v.create(tol)?
        };
    }
    let total = v.norm_sqr();
    let kept = FockVector::new(v.amps()[..cfg.dim].to_vec())?;
    let tail = (total - kept.norm_sqr()) / total;
    if tail > DEFAULT_TAIL_TOL {
        return Err(Error::TruncationTooSmall {
            dim: cfg.dim,
            tail,
            tol: DEFAULT_TAIL_TOL,
            required: v.support_end(1e-6 * total.sqrt() * 1e-3),
        });
    }
    kept.normalized()
}

/// `N_{n,m} = sum_{k,j=mu}^{n} A_k A_j sum_p (2p+k)! (2p+j)! / (p!^2 (2p+nu)!) (|kappa'|^2/4)^p`,
/// the p-sum running over `2p + nu >= 0`.
pub fn normalization_constant(cfg: &PreparationConfig) -> Result<f64> {
    cfg.validate()?;
    let coeffs = a_coefficients(cfg);
    let nu = cfg.nu();
    let kabs = cfg.kappa_prime().norm();
    let start = if nu >= 0 { 0 } else { ((-nu) as usize).div_ceil(2) };
    let l4 = (kabs * kabs / 4.0).ln();
    let term = |p: usize| -> f64 {
        if p > 0 && kabs == 0.0 {
            return 0.0;
        }
        let pf = p as f64;
        let lp = if p == 0 { 0.0 } else { pf * l4 };
        let common = lp - 2.0 * log_factorial(p) - log_factorial((2 * p as i64 + nu) as usize);
        let s: f64 = coeffs
            .iter()
            .map(|&(k, sk, lk)| sk * (lk + 0.5 * common + log_factorial(2 * p + k)).exp())
            .sum();
        s * s
    };
    let limit = start + cfg.dim;
    let (total, end) = series_end(term, start, limit, 1e-16, 20);
    if end.is_none() {
        return Err(Error::NonConvergence(format!(
            "normalization series not converged within {} terms",
            cfg.dim
        )));
    }
    if !(total > 0.0) {
        return Err(Error::ImpossibleOutcome(total));
    }
    Ok(total)
}

/// `P(n,m) = m!/n! (1-|kappa|^2)^{1/2} N_{n,m} / (|R|^{2 nu} |T|^{2m})`.
pub fn preparation_probability(cfg: &PreparationConfig) -> Result<f64> {
    let norm = normalization_constant(cfg)?;
    let k2 = cfg.kappa().norm_sqr();
    let ln_p = log_factorial(cfg.m) - log_factorial(cfg.n) + 0.5 * (1.0 - k2).ln() + norm.ln()
        - cfg.nu() as f64 * cfg.bs.reflectance().ln()
        - cfg.m as f64 * cfg.bs.transmittance().ln();
    Ok(ln_p.exp())
}

/// `r = |kappa'| / sqrt(1 - |kappa'|^2)`.
fn legendre_ratio(kp_abs: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&kp_abs) {
        return Err(invalid(format!("|kappa'| must lie in [0, 1), got {kp_abs}")));
    }
    Ok(kp_abs / (1.0 - kp_abs * kp_abs).sqrt())
}

/// Normalization of the vacuum-input state,
/// `N_m = i^m m! / |kappa'| r^{m+1} P_m(-i r)`.
pub fn legendre_normalization(kappa_prime: C64, m: usize) -> Result<f64> {
    let ka = kappa_prime.norm();
    let r = legendre_ratio(ka)?;
    if ka == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let val = C64::i().powu(m as u32)
        * legendre(m, C64::new(0.0, -r))
        * (log_factorial(m) + (m as f64 + 1.0) * r.ln() - ka.ln()).exp();
    Ok(val.re)
}

/// `<p|Psi_m>` of the vacuum-input state, unnormalized:
/// `H_{m+p}(0)/sqrt(p!) (-kappa'/2)^{(p+m)/2}`.
fn vacuum_input_amplitude(kappa_prime: C64, m: usize, p: usize) -> C64 {
    let tot = m + p;
    if tot % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let r = tot / 2;
    let base = -kappa_prime / 2.0;
    if r > 0 && base.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    // H_{2r}(0) = (-1)^r (2r)!/r!
    let lmag = log_factorial(2 * r) - log_factorial(r) - 0.5 * log_factorial(p)
        + if r == 0 { 0.0 } else { r as f64 * base.norm().ln() };
    let sign = if r.is_multiple_of(2) { 1.0 } else { -1.0 };
    C64::from_polar(sign * lmag.exp(), r as f64 * base.arg())
}

/// `|Psi_m>` for vacuum in the second input, normalized with `N_m`.
pub fn vacuum_input_state(kappa_prime: C64, m: usize, dim: usize) -> Result<FockVector> {
    let nm = legendre_normalization(kappa_prime, m)?;
    if dim == 0 {
        return Err(invalid("dim must be >= 1"));
    }
    if !(nm > 0.0) {
        return Err(Error::ImpossibleOutcome(nm));
    }
    let s = nm.sqrt().recip();
    let amps: Vec<C64> = (0..dim)
        .map(|p| vacuum_input_amplitude(kappa_prime, m, p) * s)
        .collect();
    finish_truncated(
        amps,
        |p| vacuum_input_amplitude(kappa_prime, m, p).norm_sqr() * s * s,
        dim,
    )
}

/// Probability of detecting `m` photons with vacuum in the second input,
/// `P(m) = i^m |R|^{2m} |kappa'|^m sqrt(1-|kappa|^2) / (|T|^{2m} (1-|kappa'|^2)^{(m+1)/2}) P_m(-i r)`.
pub fn vacuum_detection_probability(kappa_prime: C64, t2: f64, m: usize) -> Result<f64> {
    if !(t2 > 0.0 && t2 < 1.0) {
        return Err(invalid(format!("|T|^2 must lie in (0, 1), got {t2}")));
    }
    let ka = kappa_prime.norm();
    let r = legendre_ratio(ka)?;
    let kappa_abs = ka / t2;
    if kappa_abs >= 1.0 {
        return Err(invalid("|kappa| = |kappa'|/|T|^2 must be < 1"));
    }
    let lmag = m as f64 * ((1.0 - t2) / t2).ln() + 0.5 * (1.0 - kappa_abs * kappa_abs).ln()
        - 0.5 * (m as f64 + 1.0) * (1.0 - ka * ka).ln()
        + if m == 0 { 0.0 } else { m as f64 * ka.ln() };
    let val = C64::i().powu(m as u32) * legendre(m, C64::new(0.0, -r)) * lmag.exp();
    Ok(val.re)
}

/// Detection probabilities `P(m)` for `m = 0, 1, ...`, cut once the cumulative
/// sum exceeds `1 - tol` and renormalized.
pub fn vacuum_detection_prior(kappa_prime: C64, t2: f64, tol: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut cum = 0.0;
    for m in 0..10_000 {
        let p = vacuum_detection_probability(kappa_prime, t2, m)?;
        out.push(p);
        cum += p;
        if cum > 1.0 - tol {
            let s: f64 = out.iter().sum();
            return Ok(out.into_iter().map(|v| v / s).collect());
        }
    }
    Err(Error::NonConvergence(
        "detection prior did not accumulate within 10000 terms".into(),
    ))
}
