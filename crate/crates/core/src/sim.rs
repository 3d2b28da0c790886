//! Monte Carlo homodyne records and end-to-end virtual experiments.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{click_priors, ConditionalMixture, DetectorModel, VacuumSource};
use crate::error::{invalid, Error, Result};
use crate::phase_space::{quadrature_pdf_mixture, Grid, PureQuadrature, QuadratureDistribution};
use crate::reconstruction::{inverse_bernoulli, inverse_chopping, MixtureSeries, Reconstruction, DEFAULT_TAIL_TOL};

/// Samples drawn per RNG stream.
pub const CHUNK: usize = 1 << 16;

/// Points of the cumulative grid used for inverse-CDF sampling.
const CDF_POINTS: usize = 4001;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            x_min: -8.0,
            x_max: 8.0,
            bins: 101,
        }
    }
}

impl HistogramSpec {
    pub fn new(x_min: f64, x_max: f64, bins: usize) -> Result<Self> {
        let s = Self { x_min, x_max, bins };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 10 {
            return Err(invalid(format!("histogram needs at least 10 bins, got {}", self.bins)));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(invalid("histogram range must be finite with x_min < x_max"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.x_max - self.x_min) / self.bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins).map(|i| self.x_min + w * (i as f64 + 0.5)).collect()
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max) {
            return None;
        }
        Some((((x - self.x_min) / self.width()) as usize).min(self.bins - 1))
    }

    /// Mean of `f` over each bin, Simpson's rule with 16 panels per bin.
    pub fn bin_average(&self, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        let w = self.width();
        let panels = 16;
        let h = w / panels as f64;
        (0..self.bins)
            .into_par_iter()
            .map(|b| {
                let a = self.x_min + w * b as f64;
                let s: f64 = (0..=panels)
                    .map(|i| {
                        let c = if i == 0 || i == panels {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        c * f(a + h * i as f64)
                    })
                    .sum();
                s * h / 3.0 / w
            })
            .collect()
    }

    /// Probability mass of `f` outside the range, by the trapezoid rule on `grid`.
    fn outside_mass(&self, dist: &QuadratureDistribution) -> f64 {
        let xs = &dist.xs;
        let d = &dist.density;
        xs.windows(2)
            .zip(d.windows(2))
            .filter(|(x, _)| x[1] <= self.x_min || x[0] >= self.x_max)
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub counts: Vec<u64>,
    /// Samples outside the range, counted in the normalization.
    pub outside: u64,
}

impl Histogram {
    pub fn empty(spec: HistogramSpec) -> Self {
        Self {
            spec,
            counts: vec![0; spec.bins],
            outside: 0,
        }
    }

    pub fn add(&mut self, x: f64) {
        match self.spec.bin_of(x) {
            Some(b) => self.counts[b] += 1,
            None => self.outside += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.outside
    }

    pub fn merge(mut self, other: &Histogram) -> Result<Histogram> {
        if self.spec != other.spec {
            return Err(invalid("cannot merge histograms with different bins"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.outside += other.outside;
        Ok(self)
    }

    /// Counts scaled to a probability density.
    pub fn density(&self) -> Vec<f64> {
        let n = self.total();
        if n == 0 {
            return vec![0.0; self.spec.bins];
        }
        let s = 1.0 / (n as f64 * self.spec.width());
        self.counts.iter().map(|c| *c as f64 * s).collect()
    }
}

/// Cumulative distribution on a grid, inverted by linear interpolation.
#[derive(Debug, Clone)]
struct InverseCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(xs: &[f64], density: &[f64]) -> Result<Self> {
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 1..xs.len() {
            let step = 0.5 * (xs[i] - xs[i - 1]) * (density[i] + density[i - 1]);
            if !(step >= 0.0) {
                return Err(Error::Sampling(format!(
                    "negative or invalid density near x = {}",
                    xs[i]
                )));
            }
            cdf.push(cdf[i - 1] + step);
        }
        let total = *cdf.last().unwrap_or(&0.0);
        if !(total > 0.0) {
            return Err(Error::Sampling("density integrates to zero".into()));
        }
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { xs: xs.to_vec(), cdf })
    }

    fn sample(&self, u: f64) -> f64 {
        // first index with cdf > u; the interval below it contains u
        let i = self.cdf.partition_point(|c| *c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }
}

/// Two-stage sampler for a conditional mixture at one phase.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    cum_weights: Vec<f64>,
    components: Vec<InverseCdf>,
    grid: Grid,
}

impl MixtureSampler {
    pub fn new(mix: &ConditionalMixture, phi: f64) -> Result<Self> {
        mix.validate()?;
        let parts: Vec<(usize, f64)> = mix.support().collect();
        let quads: Vec<PureQuadrature> = parts
            .iter()
            .map(|&(m, _)| PureQuadrature::new(mix.kappa_prime, m, phi))
            .collect::<Result<_>>()?;
        // one grid wide enough for the broadest component
        let base = Grid::new(-8.0, 8.0, CDF_POINTS)?;
        let grid = base.fitted(|x| quads.iter().map(|q| q.eval(x)).fold(0.0, f64::max))?;
        let xs = grid.xs();
        let components = quads
            .iter()
            .map(|q| {
                let d: Vec<f64> = xs.iter().map(|&x| q.eval(x)).collect();
                InverseCdf::new(&xs, &d)
            })
            .collect::<Result<_>>()?;
        let mut acc = 0.0;
        let cum_weights = parts
            .iter()
            .map(|&(_, w)| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            cum_weights,
            components,
            grid,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let total = *self.cum_weights.last().unwrap_or(&1.0);
        let u: f64 = rng.random::<f64>() * total;
        let c = self
            .cum_weights
            .partition_point(|w| *w <= u)
            .min(self.components.len() - 1);
        self.components[c].sample(rng.random::<f64>())
    }

    /// `count` samples; chunk `i` uses its own stream seeded by `derive_seed(seed, i)`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let chunks = count.div_ceil(CHUNK);
        let parts: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|i| {
                let n = CHUNK.min(count - i * CHUNK);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                (0..n).map(|_| self.draw(&mut rng)).collect()
            })
            .collect();
        parts.concat()
    }

    /// Histogram of `count` samples, identical to binning [`Self::sample`].
    pub fn histogram(&self, count: usize, seed: u64, spec: HistogramSpec) -> Result<Histogram> {
        spec.validate()?;
        let chunks = count.div_ceil(CHUNK);
        let parts: Vec<Histogram> = (0..chunks)
            .into_par_iter()
            .map(|i| {
                let n = CHUNK.min(count - i * CHUNK);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                let mut h = Histogram::empty(spec);
                for _ in 0..n {
                    h.add(self.draw(&mut rng));
                }
                h
            })
            .collect();
        parts.iter().try_fold(Histogram::empty(spec), |acc, h| acc.merge(h))
    }
}

/// Sampled homodyne record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub phi: f64,
    pub xs: Vec<f64>,
    pub seed: u64,
    pub source: String,
}

/// Draws `count` quadrature values at phase `phi` from the mixture.
pub fn sample_quadrature(mix: &ConditionalMixture, phi: f64, count: usize, seed: u64) -> Result<SampleBatch> {
    let sampler = MixtureSampler::new(mix, phi)?;
    Ok(SampleBatch {
        phi,
        xs: sampler.sample(count, seed),
        seed,
        source: format!("k={} kappa'={}", mix.k, mix.kappa_prime),
    })
}

/// Largest distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// One virtual experiment: prepare, detect `k` clicks, measure at `phi`, reconstruct `|Psi_m>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: VacuumSource,
    pub model: DetectorModel,
    pub k: usize,
    pub phi: f64,
    /// Samples for the mixture histogram and for each click count used in the reconstruction.
    pub samples: usize,
    pub seed: u64,
    pub hist: HistogramSpec,
    /// Photon number to reconstruct; defaults to `k`.
    pub target_m: Option<usize>,
    /// Last click count of the inversion; chosen from the tail estimate when absent.
    pub k_max: Option<usize>,
    pub tail_tol: f64,
    pub grid: Grid,
    /// Whether sampled runs also invert per-click histograms.
    pub reconstruct: bool,
}

impl ExperimentConfig {
    pub fn new(source: VacuumSource, model: DetectorModel, k: usize) -> Self {
        Self {
            source,
            model,
            k,
            phi: 0.0,
            samples: 0,
            seed: 0,
            hist: HistogramSpec::default(),
            target_m: None,
            k_max: None,
            tail_tol: DEFAULT_TAIL_TOL,
            grid: Grid::default(),
            reconstruct: true,
        }
    }

    pub fn target(&self) -> usize {
        self.target_m.unwrap_or(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.model.validate()?;
        self.hist.validate()?;
        self.grid.validate()?;
        if !self.phi.is_finite() {
            return Err(invalid("phi must be finite"));
        }
        if !(self.tail_tol > 0.0) {
            return Err(invalid("tail_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub seed: u64,
    pub samples: usize,
    /// Photon-number prior `P(m)` of the source.
    pub source_prior: Vec<f64>,
    /// Click priors `P(k)` of the configured detector.
    pub click_priors: Vec<f64>,
    /// Posterior `P(m|k)`.
    pub weights: Vec<f64>,
    pub entropy: f64,
    pub mixture_contrast: f64,
    pub pure_contrast: f64,
    pub histogram_contrast: Option<f64>,
    pub reconstruction_contrast: Option<f64>,
    /// Samples drawn for each click count of the reconstruction.
    pub reconstruction_counts: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    /// Exact density of the conditional mixture.
    pub mixture: QuadratureDistribution,
    /// Exact density of the target pure state on the same grid.
    pub pure: QuadratureDistribution,
    /// Bin averages of the exact target density.
    pub pure_binned: Vec<f64>,
    /// Bin averages of the exact mixture density.
    pub mixture_binned: Vec<f64>,
    pub histogram: Option<Histogram>,
    /// Inversion of the sampled per-click histograms.
    pub reconstruction: Option<Reconstruction>,
    pub metadata: ExperimentMetadata,
}

/// Runs the full pipeline. With `samples = 0` only exact densities are produced.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let prior = cfg.source.prior()?;
    let clicks = click_priors(&cfg.model, &prior)?;
    let mix = ConditionalMixture::from_source(&cfg.model, &cfg.source, cfg.k)?;
    let mixture = quadrature_pdf_mixture(&mix, cfg.phi, &cfg.grid)?;
    let m = cfg.target();
    let pure_mix = ConditionalMixture::pure(m, cfg.source.kappa_prime)?;
    let pure = quadrature_pdf_mixture(&pure_mix, cfg.phi, &cfg.grid)?;
    let outside = cfg.hist.outside_mass(&mixture).max(cfg.hist.outside_mass(&pure));
    if outside > 1e-6 {
        return Err(invalid(format!(
            "histogram range misses {outside:.3e} of the probability mass"
        )));
    }

    let q_pure = PureQuadrature::new(cfg.source.kappa_prime, m, cfg.phi)?;
    let pure_binned = cfg.hist.bin_average(|x| q_pure.eval(x));
    let comps: Vec<(f64, PureQuadrature)> = mix
        .support()
        .map(|(mm, w)| Ok((w, PureQuadrature::new(cfg.source.kappa_prime, mm, cfg.phi)?)))
        .collect::<Result<_>>()?;
    let mixture_binned = cfg.hist.bin_average(|x| comps.iter().map(|(w, q)| w * q.eval(x)).sum());

    let mut histogram = None;
    let mut reconstruction = None;
    let mut counts = Vec::new();
    if cfg.samples > 0 {
        let sampler = MixtureSampler::new(&mix, cfg.phi)?;
        histogram = Some(sampler.histogram(cfg.samples, cfg.seed, cfg.hist)?);
        if cfg.reconstruct {
            let (rec, used) = reconstruct_from_samples(cfg, &prior, &clicks, m)?;
            reconstruction = Some(rec);
            counts = used;
        }
    }

    let centers = cfg.hist.centers();
    let metadata = ExperimentMetadata {
        seed: cfg.seed,
        samples: cfg.samples,
        source_prior: prior,
        click_priors: clicks,
        weights: mix.weights.clone(),
        entropy: mix.entropy(),
        mixture_contrast: mixture.contrast(),
        pure_contrast: pure.contrast(),
        histogram_contrast: histogram
            .as_ref()
            .map(|h| crate::phase_space::fringe_contrast(&centers, &h.density())),
        reconstruction_contrast: reconstruction
            .as_ref()
            .map(|r| crate::phase_space::fringe_contrast(&r.xs, &r.raw)),
        reconstruction_counts: counts,
    };
    Ok(ExperimentRecord {
        config: cfg.clone(),
        mixture,
        pure,
        pure_binned,
        mixture_binned,
        histogram,
        reconstruction,
        metadata,
    })
}

/// Exact per-click series on the histogram bins: bin averages of each mixture density.
pub fn exact_binned_series(cfg: &ExperimentConfig, k_min: usize, k_max: usize) -> Result<MixtureSeries> {
    let prior = cfg.source.prior()?;
    let clicks = click_priors(&cfg.model, &prior)?;
    let mut objects = Vec::new();
    for k in k_min..=k_max {
        let mix = ConditionalMixture::from_source(&cfg.model, &cfg.source, k)?;
        let comps: Vec<(f64, PureQuadrature)> = mix
            .support()
            .map(|(mm, w)| Ok((w, PureQuadrature::new(cfg.source.kappa_prime, mm, cfg.phi)?)))
            .collect::<Result<_>>()?;
        objects.push(cfg.hist.bin_average(|x| comps.iter().map(|(w, q)| w * q.eval(x)).sum()));
    }
    MixtureSeries::new(
        cfg.hist.centers(),
        k_min,
        clicks[k_min..=k_max].to_vec(),
        objects,
        prior,
    )
}

/// Applies the model's inverse transform to a series.
pub fn invert_series(
    model: &DetectorModel,
    series: &MixtureSeries,
    m: usize,
    k_max: Option<usize>,
    tol: f64,
) -> Result<Reconstruction> {
    match *model {
        DetectorModel::Single { eta } => inverse_bernoulli(series, m, eta, k_max, tol),
        DetectorModel::Chopping { channels, eta } => inverse_chopping(series, m, channels, eta, k_max, tol),
    }
}

/// Click counts `m..=k_max` that carry probability, with `k_max` resolved
/// on the exact binned series.
pub fn reconstruction_range(cfg: &ExperimentConfig, prior_len: usize) -> Result<(usize, usize)> {
    let m = cfg.target();
    let mut k_last = prior_len - 1;
    if let DetectorModel::Chopping { channels, .. } = cfg.model {
        k_last = k_last.min(channels);
    }
    if m > k_last {
        return Err(Error::ImpossibleOutcome(0.0));
    }
    let exact = exact_binned_series(cfg, m, k_last)?;
    let rec = invert_series(&cfg.model, &exact, m, cfg.k_max, cfg.tail_tol)?;
    Ok((m, rec.k_max))
}

fn reconstruct_from_samples(
    cfg: &ExperimentConfig,
    prior: &[f64],
    clicks: &[f64],
    m: usize,
) -> Result<(Reconstruction, Vec<(usize, usize)>)> {
    let (k_min, k_max) = reconstruction_range(cfg, prior.len())?;
    let mut objects = Vec::new();
    let mut used = Vec::new();
    for k in k_min..=k_max {
        let mix = ConditionalMixture::from_source(&cfg.model, &cfg.source, k)?;
        let sampler = MixtureSampler::new(&mix, cfg.phi)?;
        let h = sampler.histogram(cfg.samples, derive_seed(cfg.seed, 1 << 32 | k as u64), cfg.hist)?;
        objects.push(h.density());
        used.push((k, cfg.samples));
    }
    let series = MixtureSeries::new(
        cfg.hist.centers(),
        k_min,
        clicks[k_min..=k_max].to_vec(),
        objects,
        prior.to_vec(),
    )?;
    // the range was fixed on exact data, so the noisy tail estimate is not re-checked
    let rec = invert_series(&cfg.model, &series, m, Some(k_max), f64::INFINITY)?;
    Ok((rec, used))
}

/// Expected L1 error of a sampled reconstruction from multinomial bin noise,
/// `sqrt(2/pi) sum_i width sqrt(sum_k c_k^2 p_ki (1 - p_ki) / (n width^2))`,
/// where `c_k` are the inversion coefficients and `p_ki` the exact bin
/// probabilities. Bias from truncating the series is not included.
pub fn expected_noise_l1(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.samples == 0 {
        return Err(invalid("expected noise needs samples > 0"));
    }
    let prior = cfg.source.prior()?;
    let m = cfg.target();
    let (k_min, k_max) = reconstruction_range(cfg, prior.len())?;
    let exact = exact_binned_series(cfg, k_min, k_max)?;
    let w = cfg.hist.width();
    let n = cfg.samples as f64;
    let mut var = vec![0.0; cfg.hist.bins];
    for k in k_min..=k_max {
        // the inversion is linear: a unit object isolates the coefficient of k
        let mut unit = exact.clone();
        for (j, o) in unit.objects.iter_mut().enumerate() {
            o.fill(if j + k_min == k { 1.0 } else { 0.0 });
        }
        let c = invert_series(&cfg.model, &unit, m, Some(k_max), f64::INFINITY)?.raw[0];
        for (v, d) in var.iter_mut().zip(exact.object(k).unwrap_or(&[])) {
            let p = d * w;
            *v += c * c * p * (1.0 - p) / (n * w * w);
        }
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * w * var.iter().map(|v| v.sqrt()).sum::<f64>())
}

/// L1 distance `sum |a - b| * width`.
pub fn l1_distance(a: &[f64], b: &[f64], width: f64) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() * width
}

/// Convenience for the common vacuum-input source with real `kappa'`.
pub fn vacuum_source(kappa_prime: f64, transmittance: f64) -> Result<VacuumSource> {
    VacuumSource::new(C64::new(kappa_prime, 0.0), transmittance)
}
