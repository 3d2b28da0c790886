//! Truncated single-mode Fock space.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::log_factorial;

/// Default photon-number truncation.
pub const DEFAULT_DIM: usize = 256;

/// Default tolerance on probability mass discarded by truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Tolerance used when a routine requires a normalized input.
pub const NORM_TOL: f64 = 1e-10;

/// Complex amplitudes over photon numbers `0..dim` of a single mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(invalid("Fock vector must have dim >= 1"));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(invalid("Fock vector amplitudes must be finite"));
        }
        Ok(Self { amps })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); dim])
    }

    /// Number state `|p>` truncated at `dim`.
    pub fn basis(p: usize, dim: usize) -> Result<Self> {
        if p >= dim {
            return Err(invalid(format!("basis state {p} outside dim {dim}")));
        }
        let mut v = Self::zeros(dim)?;
        v.amps[p] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::basis(0, dim)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn get(&self, p: usize) -> C64 {
        self.amps.get(p).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        let s = 1.0 / n.sqrt();
        Ok(Self {
            amps: self.amps.iter().map(|a| a * s).collect(),
        })
    }

    /// `<self|other>`, over the common dimension.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Probability mass on photon numbers `>= from`.
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.amps.iter().skip(from).map(|a| a.norm_sqr()).sum()
    }

    /// `a|p> = sqrt(p)|p-1>`; the result is not renormalized.
    pub fn annihilate(&self) -> FockVector {
        let dim = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for p in 1..dim {
            out[p - 1] = self.amps[p] * (p as f64).sqrt();
        }
        Self { amps: out }
    }

    /// `a^dagger|p> = sqrt(p+1)|p+1>`; the result is not renormalized.
    ///
    /// Fails when the top retained amplitude is not negligible, since its
    /// image would leave the truncated space.
    pub fn create(&self, tol: f64) -> Result<FockVector> {
        let dim = self.dim();
        let top = self.amps[dim - 1].norm_sqr();
        if top > tol {
            return Err(Error::TruncationOverflow { dim, mass: top });
        }
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for p in 0..dim - 1 {
            out[p + 1] = self.amps[p] * ((p + 1) as f64).sqrt();
        }
        Ok(Self { amps: out })
    }

    /// Multiplies amplitude `p` by `f(p)`; functions of the number operator.
    pub fn apply_diagonal(&self, f: impl Fn(usize) -> f64) -> FockVector {
        Self {
            amps: self.amps.iter().enumerate().map(|(p, a)| a * f(p)).collect(),
        }
    }

    /// `<n>` of a normalized state.
    pub fn mean_photon_number(&self) -> Result<f64> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(self.amps.iter().enumerate().map(|(p, a)| p as f64 * a.norm_sqr()).sum())
    }

    /// Rotates the global phase so the largest-magnitude amplitude is real
    /// and positive.
    pub fn with_fixed_phase(&self) -> FockVector {
        let pivot = self
            .amps
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .unwrap_or_default();
        if pivot.norm() == 0.0 {
            return self.clone();
        }
        let rot = pivot.conj() / pivot.norm();
        Self {
            amps: self.amps.iter().map(|a| a * rot).collect(),
        }
    }

    /// Largest amplitude difference after fixing both global phases.
    pub fn max_diff_up_to_phase(&self, other: &FockVector) -> f64 {
        let a = self.with_fixed_phase();
        let b = other.with_fixed_phase();
        let dim = a.dim().max(b.dim());
        (0..dim).map(|p| (a.get(p) - b.get(p)).norm()).fold(0.0, f64::max)
    }

    /// Index of the last amplitude above `threshold` in magnitude.
    pub fn support_end(&self, threshold: f64) -> usize {
        self.amps
            .iter()
            .rposition(|a| a.norm() > threshold)
            .map_or(1, |p| p + 1)
    }
}

/// Single-mode squeezing `xi = |xi| e^{i phi}` with `kappa = -e^{i phi} tanh|xi|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub xi_mag: f64,
    pub xi_phase: f64,
}

impl SqueezeParams {
    pub fn new(xi_mag: f64, xi_phase: f64) -> Result<Self> {
        if !(xi_mag.is_finite() && xi_mag >= 0.0) {
            return Err(invalid(format!("|xi| must be finite and >= 0, got {xi_mag}")));
        }
        if !xi_phase.is_finite() {
            return Err(invalid("squeezing phase must be finite"));
        }
        Ok(Self {
            xi_mag,
            xi_phase: xi_phase.rem_euclid(std::f64::consts::TAU),
        })
    }

    /// From `|kappa| = tanh|xi|` and the squeezing phase.
    pub fn from_kappa_abs(kappa_abs: f64, xi_phase: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa_abs) {
            return Err(invalid(format!("|kappa| must lie in [0, 1), got {kappa_abs}")));
        }
        Self::new(kappa_abs.atanh(), xi_phase)
    }

    /// From a complex `kappa` with `|kappa| < 1`.
    pub fn from_kappa(kappa: C64) -> Result<Self> {
        let mag = kappa.norm();
        // kappa = -e^{i phi} tanh|xi|  =>  phi = arg(-kappa)
        let phase = if mag == 0.0 { 0.0 } else { (-kappa).arg() };
        Self::from_kappa_abs(mag, phase)
    }

    pub fn kappa(&self) -> C64 {
        -C64::from_polar(self.xi_mag.tanh(), self.xi_phase)
    }

    /// Smallest truncation whose discarded tail mass is below `tol`.
    pub fn required_dim(&self, tol: f64) -> usize {
        let k2 = self.kappa().norm_sqr();
        if k2 == 0.0 {
            return 1;
        }
        // term q carries probability (1-|k|^2)^{1/2} (2q)!/(4^q q!^2) |k|^{2q} at photon number 2q
        let pre = 0.5 * (1.0 - k2).ln();
        let lk = k2.ln();
        let mass = |q: usize| {
            (pre + log_factorial(2 * q) - 2.0 * log_factorial(q) - q as f64 * 4f64.ln() + q as f64 * lk).exp()
        };
        // sum terms from the far end until the accumulated tail exceeds tol
        let mut q_hi = 1usize;
        while mass(q_hi) > tol * 1e-6 || q_hi < 8 {
            q_hi *= 2;
        }
        let mut tail = 0.0;
        let mut q = q_hi;
        while q > 0 {
            tail += mass(q);
            if tail > tol {
                return 2 * q + 1;
            }
            q -= 1;
        }
        1
    }
}

/// Squeezed vacuum `S(xi)|0>` truncated at `dim`; odd amplitudes are exactly zero.
pub fn squeezed_vacuum(sq: SqueezeParams, dim: usize) -> Result<FockVector> {
    squeezed_vacuum_with_tol(sq, dim, DEFAULT_TAIL_TOL)
}

pub fn squeezed_vacuum_with_tol(sq: SqueezeParams, dim: usize, tol: f64) -> Result<FockVector> {
    if dim == 0 {
        return Err(invalid("dim must be >= 1"));
    }
    let kappa = sq.kappa();
    if kappa.norm() >= 1.0 {
        return Err(invalid("|kappa| must be < 1"));
    }
    let required = sq.required_dim(tol);
    if dim < required {
        let kept: f64 = (0..dim)
            .step_by(2)
            .map(|p| squeezed_coefficient(kappa, p / 2).norm_sqr())
            .sum();
        return Err(Error::TruncationTooSmall {
            dim,
            tail: (1.0 - kept).max(0.0),
            tol,
            required,
        });
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for q in 0..dim.div_ceil(2) {
        amps[2 * q] = squeezed_coefficient(kappa, q);
    }
    FockVector::new(amps)
}

/// `(1-|k|^2)^{1/4} sqrt((2q)!) / (2^q q!) k^q`, in log magnitude plus phase.
pub(crate) fn squeezed_coefficient(kappa: C64, q: usize) -> C64 {
    let k = kappa.norm();
    if q == 0 {
        return C64::new((1.0 - k * k).powf(0.25), 0.0);
    }
    if k == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let qf = q as f64;
    let log_mag =
        0.25 * (1.0 - k * k).ln() + 0.5 * log_factorial(2 * q) - qf * 2f64.ln() - log_factorial(q) + qf * k.ln();
    C64::from_polar(log_mag.exp(), qf * kappa.arg())
}
