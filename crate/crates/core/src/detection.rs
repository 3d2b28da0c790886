//! Photocounting models: N-fold photon chopping with avalanche photodiodes
//! (type I) and a single photon-number-resolving detector (type II).

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64 as C64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::FockVector;
use crate::prep::{vacuum_detection_prior, vacuum_input_state};
use crate::special::binomial;

/// Cumulative-mass cut applied to the detection prior.
pub const PRIOR_TOL: f64 = 1e-10;

/// `entries[k][m]`: probability of recording `k` given `m` incident photons.
/// Columns sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    fn zeros(size: usize) -> Self {
        Self {
            size,
            entries: vec![0.0; size * size],
        }
    }

    /// Rows `k` and columns `m` both run over `0..size`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn m_max(&self) -> usize {
        self.size - 1
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        if k >= self.size || m >= self.size {
            return 0.0;
        }
        self.entries[k * self.size + m]
    }

    fn set(&mut self, k: usize, m: usize, v: f64) {
        self.entries[k * self.size + m] = v;
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.size..(k + 1) * self.size]
    }

    pub fn column_sum(&self, m: usize) -> f64 {
        (0..self.size).map(|k| self.get(k, m)).sum()
    }

    /// Largest deviation of a column sum from one.
    pub fn stochasticity_defect(&self) -> f64 {
        (0..self.size)
            .map(|m| (self.column_sum(m) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `self * other`; both upper triangular, so the inner sum runs over `k..=m`.
    pub fn compose(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.size != other.size {
            return Err(invalid("matrix sizes differ"));
        }
        let mut out = Self::zeros(self.size);
        for k in 0..self.size {
            for m in k..self.size {
                let v: f64 = (k..=m).map(|l| self.get(k, l) * other.get(l, m)).sum();
                out.set(k, m, v);
            }
        }
        Ok(out)
    }

    /// `sum_m entries[k][m] v[m]` for every `k`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|k| self.row(k).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn big_ratio_to_f64(num: &BigInt, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let den = BigInt::from(den.clone());
    // scale so the integer quotient carries about 64 significant bits
    let shift = den.bits() as i64 - num.magnitude().bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / &den
    } else {
        num / (&den << (-shift) as u64)
    };
    q.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-shift as i32)
}

/// Chopping statistics `P_N(k|m) = C(N,k) N^{-m} sum_{l=0}^{k} (-1)^l C(k,l) (k-l)^m`
/// for `m = 0..=m_max`.
///
/// The alternating sum is evaluated exactly in integer arithmetic.
pub fn chopping_matrix(channels: usize, m_max: usize) -> Result<StochasticMatrix> {
    if channels == 0 {
        return Err(invalid("chopping needs at least one channel"));
    }
    if m_max > 4096 {
        return Err(invalid(format!("m_max = {m_max} too large for exact chopping sums")));
    }
    let size = m_max + 1;
    let mut out = StochasticMatrix::zeros(size);
    let n_big = BigUint::from(channels);
    let mut n_pow = BigUint::from(1u32);
    for m in 0..size {
        for k in 0..=m.min(channels) {
            let mut sum = BigInt::zero();
            let mut c_kl = BigInt::from(1u32);
            for l in 0..=k {
                let term = &c_kl * BigInt::from(BigUint::from(k - l).pow(m as u32));
                if l % 2 == 0 {
                    sum += term;
                } else {
                    sum -= term;
                }
                c_kl = c_kl * (k - l) / (l + 1);
            }
            let c_nk = binomial_big(channels, k);
            out.set(k, m, big_ratio_to_f64(&(sum * c_nk), &n_pow));
        }
        n_pow *= &n_big;
    }
    Ok(out)
}

fn binomial_big(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::from(1u32);
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Binomial loss `M_{l,m}(eta) = C(m,l) eta^l (1-eta)^{m-l}`.
pub fn bernoulli_matrix(eta: f64, m_max: usize) -> Result<StochasticMatrix> {
    check_efficiency(eta)?;
    let size = m_max + 1;
    let mut out = StochasticMatrix::zeros(size);
    for m in 0..size {
        for l in 0..=m {
            let v = binomial(m as i64, l as i64) * eta.powi(l as i32) * (1.0 - eta).powi((m - l) as i32);
            out.set(l, m, v);
        }
    }
    Ok(out)
}

/// `P_{N,eta}(k|m) = sum_l P_N(k|l) M_{l,m}(eta)`.
pub fn compose_chopping_loss(channels: usize, eta: f64, m_max: usize) -> Result<StochasticMatrix> {
    chopping_matrix(channels, m_max)?.compose(&bernoulli_matrix(eta, m_max)?)
}

fn check_efficiency(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorModel {
    /// `channels` avalanche photodiodes of efficiency `eta` behind a multiport.
    Chopping { channels: usize, eta: f64 },
    /// One photon-number-resolving detector of efficiency `eta`.
    Single { eta: f64 },
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DetectorModel::Chopping { channels, eta } => {
                if channels == 0 {
                    return Err(invalid("chopping needs at least one channel"));
                }
                check_efficiency(eta)
            }
            DetectorModel::Single { eta } => check_efficiency(eta),
        }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            DetectorModel::Chopping { eta, .. } | DetectorModel::Single { eta } => eta,
        }
    }

    /// Click statistics `L(k|m)` for `m = 0..=m_max`.
    pub fn likelihood(&self, m_max: usize) -> Result<StochasticMatrix> {
        self.validate()?;
        match *self {
            DetectorModel::Chopping { channels, eta } => compose_chopping_loss(channels, eta, m_max),
            DetectorModel::Single { eta } => bernoulli_matrix(eta, m_max),
        }
    }
}

fn check_prior(prior: &[f64]) -> Result<f64> {
    if prior.is_empty() {
        return Err(invalid("prior must not be empty"));
    }
    if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(invalid("prior entries must be finite and nonnegative"));
    }
    let s: f64 = prior.iter().sum();
    if s > 1.0 + 1e-10 || s <= 0.0 {
        return Err(invalid(format!("prior sums to {s}")));
    }
    Ok(s)
}

/// Unconditional click probabilities `P(k) = sum_m L(k|m) P(m)` for `k = 0..prior.len()`.
/// A prior that sums to less than one is renormalized first.
pub fn click_priors(model: &DetectorModel, prior: &[f64]) -> Result<Vec<f64>> {
    let s = check_prior(prior)?;
    let l = model.likelihood(prior.len() - 1)?;
    let p: Vec<f64> = prior.iter().map(|v| v / s).collect();
    Ok(l.apply(&p))
}

/// Bayes rule `P(m|k) = L(k|m) P(m) / sum_m' L(k|m') P(m')`.
pub fn posterior(model: &DetectorModel, prior: &[f64], k: usize) -> Result<Vec<f64>> {
    check_prior(prior)?;
    let l = model.likelihood(prior.len() - 1)?;
    posterior_with(&l, prior, k)
}

pub(crate) fn posterior_with(l: &StochasticMatrix, prior: &[f64], k: usize) -> Result<Vec<f64>> {
    if k >= prior.len() {
        return Err(Error::ImpossibleOutcome(0.0));
    }
    let joint: Vec<f64> = prior.iter().enumerate().map(|(m, p)| l.get(k, m) * p).collect();
    let z: f64 = joint.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ImpossibleOutcome(z));
    }
    Ok(joint.into_iter().map(|w| w / z).collect())
}

/// `S = -sum w ln w` in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(weights: &[f64]) -> f64 {
    -weights.iter().filter(|w| **w > 0.0).map(|w| w * w.ln()).sum::<f64>()
}

/// Squeezed vacuum through a beam splitter with vacuum in the other port:
/// the source whose readout statistics feed the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VacuumSource {
    pub kappa_prime: C64,
    /// `|T|^2`.
    pub transmittance: f64,
}

impl VacuumSource {
    pub fn new(kappa_prime: C64, transmittance: f64) -> Result<Self> {
        let s = Self {
            kappa_prime,
            transmittance,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance > 0.0 && self.transmittance < 1.0) {
            return Err(invalid("|T|^2 must lie in (0, 1)"));
        }
        if self.kappa_prime.norm() >= self.transmittance {
            return Err(invalid("|kappa'| must be below |T|^2 so that |kappa| < 1"));
        }
        Ok(())
    }

    /// Readout photon-number distribution `P(m)`, cut at cumulative `1 - PRIOR_TOL`.
    pub fn prior(&self) -> Result<Vec<f64>> {
        self.validate()?;
        vacuum_detection_prior(self.kappa_prime, self.transmittance, PRIOR_TOL)
    }
}

/// Conditional state after `k` clicks: `sum_m P(m|k) |Psi_m><Psi_m|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMixture {
    pub k: usize,
    pub weights: Vec<f64>,
    pub kappa_prime: C64,
}

impl ConditionalMixture {
    pub fn new(k: usize, weights: Vec<f64>, kappa_prime: C64) -> Result<Self> {
        let mix = Self {
            k,
            weights,
            kappa_prime,
        };
        mix.validate()?;
        Ok(mix)
    }

    /// Pure component `|Psi_m>`: all weight on `m`.
    pub fn pure(m: usize, kappa_prime: C64) -> Result<Self> {
        let mut weights = vec![0.0; m + 1];
        weights[m] = 1.0;
        Self::new(m, weights, kappa_prime)
    }

    pub fn from_source(model: &DetectorModel, source: &VacuumSource, k: usize) -> Result<Self> {
        let weights = posterior(model, &source.prior()?, k)?;
        Self::new(k, weights, source.kappa_prime)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("mixture weights must be finite and nonnegative"));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("mixture weights sum to {s}")));
        }
        if self.weights.iter().take(self.k).any(|w| *w != 0.0) {
            return Err(invalid("mixture weight below the click count"));
        }
        if self.kappa_prime.norm() >= 1.0 {
            return Err(invalid("|kappa'| must be < 1"));
        }
        Ok(())
    }

    /// `(m, weight)` pairs with nonzero weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().copied().enumerate().filter(|(_, w)| *w > 0.0)
    }

    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.weights)
    }

    /// `|Psi_m>` for every supported `m`.
    pub fn components(&self, dim: usize) -> Result<Vec<(usize, f64, FockVector)>> {
        self.support()
            .map(|(m, w)| Ok((m, w, vacuum_input_state(self.kappa_prime, m, dim)?)))
            .collect()
    }
}

/// Entropy sequences approaching the pure-state limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    /// `(eta_II, S_II)` for `eta_II = 0.9, 0.99, 0.999, 1`.
    pub single: Vec<(f64, f64)>,
    /// `(N_I, S_I)` for `N_I = 10^2, 10^3, 10^4` at `eta_I = 1 - 1e-6`.
    pub chopping: Vec<(usize, f64)>,
    pub single_monotone: bool,
    pub chopping_monotone: bool,
}

impl PurityReport {
    pub fn passed(&self) -> bool {
        self.single_monotone
            && self.chopping_monotone
            && self.single.last().is_some_and(|s| s.1 < 1e-12)
            && self.chopping.last().is_some_and(|s| s.1 < 0.05)
    }
}

fn decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0 && w[1] == 0.0)
}

/// Checks that both schemes become pure as efficiency and channel count grow.
pub fn purity_limits_check(source: &VacuumSource, k: usize) -> Result<PurityReport> {
    let prior = source.prior()?;
    let single = [0.9, 0.99, 0.999, 1.0]
        .iter()
        .map(|&eta| {
            Ok((
                eta,
                shannon_entropy(&posterior(&DetectorModel::Single { eta }, &prior, k)?),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let chopping = [100usize, 1000, 10_000]
        .iter()
        .map(|&channels| {
            let model = DetectorModel::Chopping {
                channels,
                eta: 1.0 - 1e-6,
            };
            Ok((channels, shannon_entropy(&posterior(&model, &prior, k)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PurityReport {
        single_monotone: decreasing(single.iter().map(|s| s.1)),
        chopping_monotone: decreasing(chopping.iter().map(|s| s.1)),
        single,
        chopping,
    })
}
