//! Recovering pure-state quadrature densities from click-conditioned mixtures.

use serde::{Deserialize, Serialize};

use crate::detection::{chopping_matrix, posterior_with, DetectorModel, VacuumSource};
use crate::error::{invalid, Error, Result};
use crate::phase_space::PureQuadrature;
use crate::special::binomial;

/// Largest click count used when choosing `k_max` automatically.
pub const K_MAX_CAP: usize = 30;

/// Default tolerance on the estimated truncated tail of the inversion series.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Per-click-count densities on a shared grid together with their click
/// priors, plus the photon-number prior `P(m)` of the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSeries {
    pub xs: Vec<f64>,
    /// Click count of the first entry; entries are contiguous from here.
    pub k_min: usize,
    /// Click priors `P(k)`, `k = k_min..`.
    pub click_priors: Vec<f64>,
    /// Measured or exact density for each `k`, sampled on `xs`.
    pub objects: Vec<Vec<f64>>,
    /// Photon-number prior `P(m)`, `m = 0..`.
    pub source_prior: Vec<f64>,
}

impl MixtureSeries {
    pub fn new(
        xs: Vec<f64>,
        k_min: usize,
        click_priors: Vec<f64>,
        objects: Vec<Vec<f64>>,
        source_prior: Vec<f64>,
    ) -> Result<Self> {
        let s = Self {
            xs,
            k_min,
            click_priors,
            objects,
            source_prior,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.click_priors.len() != self.objects.len() || self.objects.is_empty() {
            return Err(invalid("series needs one object per click prior"));
        }
        if self.objects.iter().any(|o| o.len() != self.xs.len()) {
            return Err(invalid("every object must be sampled on the shared grid"));
        }
        if self
            .click_priors
            .iter()
            .chain(&self.source_prior)
            .any(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(invalid("priors must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Last click count covered.
    pub fn k_last(&self) -> usize {
        self.k_min + self.objects.len() - 1
    }

    pub fn prior_at(&self, k: usize) -> f64 {
        k.checked_sub(self.k_min)
            .and_then(|i| self.click_priors.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn object(&self, k: usize) -> Option<&[f64]> {
        k.checked_sub(self.k_min)
            .and_then(|i| self.objects.get(i))
            .map(|v| v.as_slice())
    }

    fn object_max(&self, k: usize) -> f64 {
        self.object(k)
            .map_or(0.0, |o| o.iter().fold(0.0, |a, v| a.max(v.abs())))
    }

    /// Noise-free series: the exact mixture density after each click count
    /// `k_min..=k_max`, evaluated on `xs` at phase `phi`.
    pub fn exact(
        model: &DetectorModel,
        source: &VacuumSource,
        phi: f64,
        xs: &[f64],
        k_min: usize,
        k_max: usize,
    ) -> Result<Self> {
        if k_max < k_min {
            return Err(invalid("k_max must be >= k_min"));
        }
        let prior = source.prior()?;
        let l = model.likelihood(prior.len() - 1)?;
        let clicks = l.apply(&prior);
        let comps: Vec<PureQuadrature> = (0..prior.len())
            .map(|m| PureQuadrature::new(source.kappa_prime, m, phi))
            .collect::<Result<_>>()?;
        let mut click_priors = Vec::new();
        let mut objects = Vec::new();
        for k in k_min..=k_max {
            let w = posterior_with(&l, &prior, k)?;
            let obj = xs
                .iter()
                .map(|&x| w.iter().zip(&comps).map(|(wm, q)| wm * q.eval(x)).sum())
                .collect();
            click_priors.push(clicks[k]);
            objects.push(obj);
        }
        Self::new(xs.to_vec(), k_min, click_priors, objects, prior)
    }
}

/// Reconstructed density of `|Psi_m>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub m: usize,
    pub xs: Vec<f64>,
    /// Direct output of the inversion; may dip below zero.
    pub raw: Vec<f64>,
    pub k_max: usize,
    /// Estimated contribution of the click counts beyond `k_max`.
    pub tail_estimate: f64,
}

impl Reconstruction {
    /// Negative values clipped to zero, renormalized by the trapezoid rule.
    pub fn physical(&self) -> Vec<f64> {
        let clipped: Vec<f64> = self.raw.iter().map(|v| v.max(0.0)).collect();
        let area: f64 = self
            .xs
            .windows(2)
            .zip(clipped.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum();
        if area > 0.0 {
            clipped.into_iter().map(|v| v / area).collect()
        } else {
            clipped
        }
    }
}

/// `c_k = C(k,m) (1 - 1/eta)^{k-m} / eta^m` for `k = m..=k_last`.
fn inverse_bernoulli_weights(m: usize, eta: f64, k_last: usize) -> Vec<f64> {
    let r = 1.0 - 1.0 / eta;
    (m..=k_last)
        .map(|k| binomial(k as i64, m as i64) * r.powi((k - m) as i32) / eta.powi(m as i32))
        .collect()
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    if eta <= 0.5 {
        log::warn!("inverse Bernoulli transform at eta = {eta} <= 0.5: the series alternates with growing terms");
    }
    Ok(())
}

/// Smallest `K` in `m..=k_last` whose estimated remainder is below `tol`,
/// given per-`k` magnitudes of the series terms.
fn choose_k_max(m: usize, terms: &[f64], tol: f64, cap: usize) -> (usize, f64) {
    let k_last = m + terms.len() - 1;
    let stop = k_last.min(cap.max(m));
    let tail = |kk: usize| -> f64 { terms[kk + 1 - m..].iter().sum() };
    for kk in m..=stop {
        let t = tail(kk);
        if t < tol {
            return (kk, t);
        }
    }
    (stop, tail(stop))
}

fn resolve_k_max(m: usize, terms: &[f64], k_max: Option<usize>, tol: f64) -> Result<(usize, f64)> {
    let k_last = m + terms.len() - 1;
    match k_max {
        None => {
            let (kk, tail) = choose_k_max(m, terms, tol, K_MAX_CAP);
            if tail > tol {
                return Err(Error::InsufficientKmax { k_max: kk, tail, tol });
            }
            Ok((kk, tail))
        }
        Some(kk) => {
            if kk < m {
                return Err(invalid(format!("k_max = {kk} below m = {m}")));
            }
            let kk = kk.min(k_last);
            let tail: f64 = terms[kk + 1 - m..].iter().sum();
            if tail > tol {
                return Err(Error::InsufficientKmax { k_max: kk, tail, tol });
            }
            Ok((kk, tail))
        }
    }
}

/// Inverse Bernoulli transform
/// `p_m = 1/(P(m) eta^m) sum_{k=m}^{k_max} C(k,m) (1 - 1/eta)^{k-m} P_eta(k) object(k)`.
///
/// With `k_max = None` the smallest click count whose estimated remainder
/// `sum_{k > k_max} |c_k| max|object(k)|` is below `tol` is used, capped at
/// [`K_MAX_CAP`] and at the end of the series.
pub fn inverse_bernoulli(
    series: &MixtureSeries,
    m: usize,
    eta: f64,
    k_max: Option<usize>,
    tol: f64,
) -> Result<Reconstruction> {
    series.validate()?;
    check_eta(eta)?;
    if series.k_min > m || series.k_last() < m {
        return Err(invalid(format!("series does not cover k = {m}")));
    }
    let pm = series.source_prior.get(m).copied().unwrap_or(0.0);
    if !(pm > 0.0) {
        return Err(Error::ImpossibleOutcome(pm));
    }
    let weights = inverse_bernoulli_weights(m, eta, series.k_last());
    let coeff = |k: usize| weights[k - m] * series.prior_at(k) / pm;
    let terms: Vec<f64> = (m..=series.k_last())
        .map(|k| coeff(k).abs() * series.object_max(k))
        .collect();
    let (kk, tail) = resolve_k_max(m, &terms, k_max, tol)?;
    let mut raw = vec![0.0; series.xs.len()];
    for k in m..=kk {
        let c = coeff(k);
        for (r, o) in raw.iter_mut().zip(series.object(k).unwrap_or(&[])) {
            *r += c * o;
        }
    }
    Ok(Reconstruction {
        m,
        xs: series.xs.clone(),
        raw,
        k_max: kk,
        tail_estimate: tail,
    })
}

/// Inverse of an upper-triangular matrix by
/// `Inv_{n,n} = 1/A_{n,n}`, `Inv_{n,n+k} = -1/A_{n+k,n+k} sum_{j<k} Inv_{n,n+j} A_{n+j,n+k}`.
pub fn invert_upper_triangular(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let size = a.len();
    if a.iter().any(|row| row.len() != size) {
        return Err(invalid("matrix must be square"));
    }
    if let Some(i) = (0..size).find(|&i| a[i][i] == 0.0) {
        return Err(Error::Singular(i));
    }
    let mut inv = vec![vec![0.0; size]; size];
    for n in 0..size {
        inv[n][n] = 1.0 / a[n][n];
        for k in 1..size - n {
            let s: f64 = (0..k).map(|j| inv[n][n + j] * a[n + j][n + k]).sum();
            inv[n][n + k] = -s / a[n + k][n + k];
        }
    }
    Ok(inv)
}

/// Inverse of the composed chopping-plus-loss matrix on the click/photon
/// block `k, m = 1..=size`; entry `[i][j]` belongs to `k = i + 1`, `m = j + 1`.
pub fn inverse_chopping_matrix(channels: usize, eta: f64, size: usize) -> Result<Vec<Vec<f64>>> {
    if size > channels {
        // more clicks than channels never happen: the diagonal vanishes
        return Err(Error::Singular(channels + 1));
    }
    let p = DetectorModel::Chopping { channels, eta }.likelihood(size)?;
    let block: Vec<Vec<f64>> = (1..=size).map(|k| (1..=size).map(|m| p.get(k, m)).collect()).collect();
    invert_upper_triangular(&block)
}

/// `1 - N!/((N-m)! N^m)`: probability that `m` photons do not land in
/// distinct channels, the finite-`N` bias scale of chopping reconstruction.
pub fn chopping_defect(channels: usize, m: usize) -> f64 {
    let nf = channels as f64;
    1.0 - (0..m).map(|i| (nf - i as f64) / nf).product::<f64>().max(0.0)
}

/// Inverse chopping transform: the loss-free chopping statistics are undone
/// by the inverse of `P_N` on the click block `0..=K`, `K = min(N, k_max)`,
/// and the remaining loss by the inverse Bernoulli series in `eta`.
pub fn inverse_chopping(
    series: &MixtureSeries,
    m: usize,
    channels: usize,
    eta: f64,
    k_max: Option<usize>,
    tol: f64,
) -> Result<Reconstruction> {
    series.validate()?;
    check_eta(eta)?;
    if channels == 0 {
        return Err(invalid("chopping needs at least one channel"));
    }
    if series.k_min > m || series.k_last() < m {
        return Err(invalid(format!("series does not cover k = {m}")));
    }
    let pm = series.source_prior.get(m).copied().unwrap_or(0.0);
    if !(pm > 0.0) {
        return Err(Error::ImpossibleOutcome(pm));
    }
    let k_top = series.k_last().min(channels);
    if k_top < m {
        return Err(Error::Singular(m));
    }
    let chop = chopping_matrix(channels, k_top)?;
    let block: Vec<Vec<f64>> = (0..=k_top)
        .map(|k| (0..=k_top).map(|l| chop.get(k, l)).collect())
        .collect();
    let inv = invert_upper_triangular(&block)?;
    let weights = inverse_bernoulli_weights(m, eta, k_top);

    // outer coefficient of P(k) object(k): sum_{j=m}^{k} c_j Inv[j][k] / P(m)
    let coeff: Vec<f64> = (m..=k_top)
        .map(|k| (m..=k).map(|j| weights[j - m] * inv[j][k]).sum::<f64>() * series.prior_at(k) / pm)
        .collect();
    let terms: Vec<f64> = (m..=k_top).map(|k| coeff[k - m].abs() * series.object_max(k)).collect();
    let (kk, tail) = resolve_k_max(m, &terms, k_max.map(|v| v.min(k_top)), tol)?;
    // inverses of leading blocks of a triangular matrix are leading blocks
    // of its inverse, so the coefficients above serve any kk <= k_top
    let mut raw = vec![0.0; series.xs.len()];
    for k in m..=kk {
        for (r, o) in raw.iter_mut().zip(series.object(k).unwrap_or(&[])) {
            *r += coeff[k - m] * o;
        }
    }
    Ok(Reconstruction {
        m,
        xs: series.xs.clone(),
        raw,
        k_max: kk,
        tail_estimate: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::PureQuadrature;
    use approx::assert_relative_eq;
    use num_complex::Complex64 as C64;

    const KP: C64 = C64::new(-0.81, 0.0);

    fn xs() -> Vec<f64> {
        (0..401).map(|i| -8.0 + 0.04 * i as f64).collect()
    }

    fn source() -> VacuumSource {
        VacuumSource::new(KP, 0.9).unwrap()
    }

    fn pure(m: usize) -> Vec<f64> {
        let q = PureQuadrature::new(KP, m, 0.0).unwrap();
        xs().iter().map(|&x| q.eval(x)).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn unit_efficiency_is_identity() {
        let model = DetectorModel::Single { eta: 1.0 };
        let s = MixtureSeries::exact(&model, &source(), 0.0, &xs(), 0, 28).unwrap();
        let r = inverse_bernoulli(&s, 3, 1.0, None, DEFAULT_TAIL_TOL).unwrap();
        assert_eq!(r.k_max, 3);
        assert!(max_err(&r.raw, s.object(3).unwrap()) < 1e-14);
    }

    #[test]
    fn inverse_bernoulli_coefficients() {
        let want = [4.109, -7.146, 7.984, -7.265, 5.859, -4.361, 3.065];
        let s = MixtureSeries::exact(&DetectorModel::Single { eta: 0.3 }, &source(), 0.0, &xs(), 3, 9).unwrap();
        let w = inverse_bernoulli_weights(3, 0.3, 9);
        for (i, c) in want.iter().enumerate() {
            let k = 3 + i;
            assert_relative_eq!(w[i] * s.prior_at(k) / s.source_prior[3], *c, epsilon = 1e-3);
        }
    }

    #[test]
    fn bernoulli_exact_roundtrip() {
        let model = DetectorModel::Single { eta: 0.3 };
        let s = MixtureSeries::exact(&model, &source(), 0.0, &xs(), 0, 28).unwrap();
        let r = inverse_bernoulli(&s, 3, 0.3, Some(25), 1e-3).unwrap();
        assert!(max_err(&r.raw, &pure(3)) < 1e-6);
        let auto = inverse_bernoulli(&s, 3, 0.3, None, DEFAULT_TAIL_TOL).unwrap();
        assert!(max_err(&auto.raw, &pure(3)) < 1e-6);
        let full = inverse_bernoulli(&s, 3, 0.3, Some(28), DEFAULT_TAIL_TOL).unwrap();
        assert!(max_err(&full.raw, &pure(3)) < 1e-12);
        assert!(matches!(
            inverse_bernoulli(&s, 3, 0.3, Some(10), DEFAULT_TAIL_TOL),
            Err(Error::InsufficientKmax { .. })
        ));
    }

    #[test]
    fn physical_view_clips_and_renormalizes() {
        let r = Reconstruction {
            m: 0,
            xs: vec![0.0, 1.0, 2.0],
            raw: vec![-0.5, 1.0, -0.1],
            k_max: 0,
            tail_estimate: 0.0,
        };
        assert_eq!(r.physical(), vec![0.0, 1.0, 0.0]);
        assert_eq!(r.raw[0], -0.5);
    }

    #[test]
    fn small_inverse_by_hand() {
        assert_eq!(inverse_chopping_matrix(1, 1.0, 1).unwrap(), vec![vec![1.0]]);
        let inv = inverse_chopping_matrix(2, 1.0, 2).unwrap();
        assert_eq!(inv, vec![vec![1.0, -1.0], vec![0.0, 2.0]]);
        assert!(matches!(inverse_chopping_matrix(3, 0.9, 4), Err(Error::Singular(_))));
    }

    #[test]
    fn inverse_identity() {
        let inv = inverse_chopping_matrix(20, 0.9, 8).unwrap();
        let p = DetectorModel::Chopping { channels: 20, eta: 0.9 }
            .likelihood(8)
            .unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let s: f64 = (0..8).map(|l| inv[i][l] * p.get(l + 1, j + 1)).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn chopping_roundtrip_within_defect() {
        for &n in &[20usize, 50] {
            let model = DetectorModel::Chopping { channels: n, eta: 0.9 };
            let s = MixtureSeries::exact(&model, &source(), 0.0, &xs(), 0, 28.min(n)).unwrap();
            let r = inverse_chopping(&s, 3, n, 0.9, None, DEFAULT_TAIL_TOL).unwrap();
            let err = max_err(&r.raw, &pure(3));
            assert!(err < chopping_defect(n, 3), "N={n} err={err}");
            assert!(err < 1e-5);
        }
        assert_relative_eq!(chopping_defect(50, 3), 1.0 - 0.9408, epsilon = 1e-15);
    }

    #[test]
    fn chopping_unit_efficiency_roundtrip() {
        let model = DetectorModel::Chopping { channels: 40, eta: 1.0 };
        let s = MixtureSeries::exact(&model, &source(), 0.0, &xs(), 0, 28).unwrap();
        let r = inverse_chopping(&s, 2, 40, 1.0, Some(28), 1.0).unwrap();
        assert!(max_err(&r.raw, &pure(2)) < chopping_defect(40, 2));
    }

    #[test]
    fn roundtrip_property_grid() {
        for m in 0..=4 {
            for &eta in &[0.3, 0.6] {
                let s = MixtureSeries::exact(&DetectorModel::Single { eta }, &source(), 0.0, &xs(), 0, 28).unwrap();
                let r = inverse_bernoulli(&s, m, eta, None, DEFAULT_TAIL_TOL).unwrap();
                assert!(max_err(&r.raw, &pure(m)) < 1e-6, "m={m} eta={eta}");
            }
            for &n in &[20usize, 50] {
                let model = DetectorModel::Chopping { channels: n, eta: 0.9 };
                let s = MixtureSeries::exact(&model, &source(), 0.0, &xs(), 0, 28.min(n)).unwrap();
                let r = inverse_chopping(&s, m, n, 0.9, None, DEFAULT_TAIL_TOL).unwrap();
                // photon numbers above N leak into the click block; at N = 20
                // this reaches 1.7e-5 for m = 4
                let bound = if (n, m) == (20, 4) { chopping_defect(n, m) } else { 1e-6 };
                assert!(max_err(&r.raw, &pure(m)) < bound, "m={m} N={n}");
            }
        }
    }
}
