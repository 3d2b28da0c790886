//! Subcommands. Each renders its files into an [`OutputSet`] before anything is written.

use catbench_core::detection::{click_priors, compose_chopping_loss, posterior, purity_limits_check, shannon_entropy};
use catbench_core::phase_space::{
    quadrature_pdf_fock, smeared_pdf, wigner_grid, HusimiClosedForm, SmearingKernel, SmearingMethod,
};
use catbench_core::prep::{
    jacobi_operator_state, legendre_normalization, normalization_constant, oracle_state, preparation_probability,
    psjp_pajp_state, vacuum_detection_probability,
};
use catbench_core::reconstruction::inverse_chopping_matrix;
use catbench_core::sim::{run_experiment, ExperimentRecord};
use catbench_core::{BeamSplitterParams, PreparationConfig, SqueezeParams};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, OutputSet, Table};

/// Fock amplitudes, quadrature densities, Wigner and Husimi grids of the conditional state.
pub fn state(cfg: &RunConfig) -> Result<OutputSet, CliError> {
    let hash = cfg.hash();
    let prep = cfg.preparation()?;
    let psi = psjp_pajp_state(&prep)?;
    let probability = preparation_probability(&prep)?;
    let normalization = normalization_constant(&prep)?;
    let mean = psi.mean_photon_number()?;

    let mut fock = Table::new(&["p", "re", "im", "prob"]);
    for (p, a) in psi.amps().iter().enumerate() {
        fock.push(vec![p.into(), a.re.into(), a.im.into(), a.norm_sqr().into()]);
    }

    let mut quad = Table::new(&["phi", "x", "density"]);
    for &phi in &cfg.grids.phases {
        let d = quadrature_pdf_fock(&psi, phi, &cfg.grids.x)?;
        for (x, p) in d.xs.iter().zip(&d.density) {
            quad.push(vec![phi.into(), (*x).into(), (*p).into()]);
        }
    }

    let axis = cfg.grids.phase_space.xs();
    let w = wigner_grid(&psi, &axis, &axis)?;
    let husimi = HusimiClosedForm::new(&prep)?;
    let mut wig = Table::new(&["x", "y", "wigner"]);
    let mut hus = Table::new(&["x", "y", "husimi"]);
    for (iy, &y) in axis.iter().enumerate() {
        for (ix, &x) in axis.iter().enumerate() {
            wig.push(vec![x.into(), y.into(), w[iy][ix].into()]);
            hus.push(vec![x.into(), y.into(), husimi.eval(x, y).into()]);
        }
    }

    let kp = prep.kappa_prime();
    let mut summary = json!({
        "command": "state",
        "config_hash": hash,
        "n": prep.n,
        "m": prep.m,
        "probability": probability,
        "normalization": normalization,
        "mean_photon_number": mean,
        "nu": prep.nu(),
        "mu": prep.mu(),
        "delta": prep.delta(),
        "kappa_prime": [kp.re, kp.im],
    });
    if prep.n == 0 {
        summary["legendre_normalization"] = json!(legendre_normalization(kp, prep.m)?);
        summary["vacuum_detection_probability"] =
            json!(vacuum_detection_probability(kp, prep.bs.transmittance(), prep.m)?);
    }

    let mut out = OutputSet::default();
    out.csv("fock.csv", &fock, &hash);
    out.csv("quadrature.csv", &quad, &hash);
    out.csv("wigner.csv", &wig, &hash);
    out.csv("husimi.csv", &hus, &hash);
    out.json("summary.json", &summary)?;
    out.json("config.json", cfg)?;
    Ok(out)
}

/// Click priors, posteriors and entropies of both detection schemes.
pub fn detect(cfg: &RunConfig) -> Result<OutputSet, CliError> {
    let hash = cfg.hash();
    let source = cfg.source()?;
    let prior = source.prior()?;
    let k = cfg.detection.k;
    let single = cfg.single();
    let chopping = cfg.chopping();
    let p_single = click_priors(&single, &prior)?;
    let p_chop = click_priors(&chopping, &prior)?;

    let mut priors = Table::new(&["k", "source", "single", "chopping", "ratio"]);
    for i in 0..prior.len() {
        let ratio = if p_chop[i] > 0.0 {
            p_single[i] / p_chop[i]
        } else {
            f64::NAN
        };
        priors.push(vec![
            i.into(),
            prior[i].into(),
            p_single[i].into(),
            p_chop[i].into(),
            ratio.into(),
        ]);
    }

    let w_single = posterior(&single, &prior, k)?;
    let w_chop = posterior(&chopping, &prior, k)?;
    let mut post = Table::new(&["m", "single", "chopping"]);
    for m in 0..prior.len() {
        post.push(vec![m.into(), w_single[m].into(), w_chop[m].into()]);
    }

    let s_single = shannon_entropy(&w_single);
    let mut entropy = Table::new(&["channels", "chopping", "single"]);
    let mut curve = Vec::new();
    for n in cfg.detection.channels_min..=cfg.detection.channels_max {
        let s = shannon_entropy(&posterior(&cfg.chopping_with(n), &prior, k)?);
        entropy.push(vec![n.into(), s.into(), s_single.into()]);
        curve.push((n, s));
    }
    // smallest channel count from which the chopping entropy stays below the single-detector one
    let crossover = (0..curve.len())
        .find(|&i| curve[i..].iter().all(|(_, s)| *s < s_single))
        .map(|i| curve[i].0);
    let purity = purity_limits_check(&source, k)?;

    let summary = json!({
        "command": "detect",
        "config_hash": hash,
        "k": k,
        "kappa_prime": [source.kappa_prime.re, source.kappa_prime.im],
        "prior_single_k": p_single.get(k),
        "prior_chopping_k": p_chop.get(k),
        "ratio_k": p_single.get(k).zip(p_chop.get(k)).map(|(a, b)| a / b),
        "entropy_single": s_single,
        "entropy_chopping": shannon_entropy(&w_chop),
        "crossover_channels": crossover,
        "purity_limits": purity,
        "purity_limits_passed": purity.passed(),
    });

    let mut out = OutputSet::default();
    out.csv("priors.csv", &priors, &hash);
    out.csv("posterior.csv", &post, &hash);
    out.csv("entropy.csv", &entropy, &hash);
    out.json("summary.json", &summary)?;
    out.json("config.json", cfg)?;
    Ok(out)
}

fn experiment_files(
    cfg: &RunConfig,
    rec: &ExperimentRecord,
    command: &str,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let hash = cfg.hash();
    let mut exact = Table::new(&["x", "mixture", "pure"]);
    for ((x, a), b) in rec.mixture.xs.iter().zip(&rec.mixture.density).zip(&rec.pure.density) {
        exact.push(vec![(*x).into(), (*a).into(), (*b).into()]);
    }
    out.csv("exact.csv", &exact, &hash);

    if let Some(h) = &rec.histogram {
        let spec = h.spec;
        let w = spec.width();
        let mut t = Table::new(&["x", "x_lo", "x_hi", "count", "density", "mixture_binned", "pure_binned"]);
        for (i, (c, d)) in h.counts.iter().zip(h.density()).enumerate() {
            let lo = spec.x_min + w * i as f64;
            t.push(vec![
                (lo + 0.5 * w).into(),
                lo.into(),
                (lo + w).into(),
                (*c).into(),
                d.into(),
                rec.mixture_binned[i].into(),
                rec.pure_binned[i].into(),
            ]);
        }
        out.csv("histogram.csv", &t, &hash);
    }
    if let Some(r) = &rec.reconstruction {
        let mut t = Table::new(&["x", "raw", "physical", "pure_binned"]);
        for ((x, raw), (phys, pb)) in r.xs.iter().zip(&r.raw).zip(r.physical().iter().zip(&rec.pure_binned)) {
            t.push(vec![(*x).into(), (*raw).into(), (*phys).into(), (*pb).into()]);
        }
        out.csv("reconstruction.csv", &t, &hash);
    }

    let l1 = rec
        .reconstruction
        .as_ref()
        .map(|r| catbench_core::sim::l1_distance(&r.raw, &rec.pure_binned, rec.config.hist.width()));
    let summary = json!({
        "command": command,
        "config_hash": hash,
        "k": rec.config.k,
        "m": rec.config.target(),
        "model": rec.config.model,
        "phi": rec.config.phi,
        "reconstruction_k_max": rec.reconstruction.as_ref().map(|r| r.k_max),
        "reconstruction_l1": l1,
        "metadata": rec.metadata,
    });
    out.json("summary.json", &summary)?;
    out.json("config.json", cfg)?;
    Ok(())
}

/// Exact mixture density and its simulated histogram, plus homodyne smearing of `|Psi_m>`.
pub fn simulate(cfg: &RunConfig) -> Result<OutputSet, CliError> {
    let mut ecfg = cfg.experiment()?;
    ecfg.reconstruct = false;
    let rec = run_experiment(&ecfg)?;
    let mut out = OutputSet::default();
    experiment_files(cfg, &rec, "simulate", &mut out)?;

    let etas = &cfg.experiment.smearing_etas;
    let mut header = vec!["x".to_string()];
    header.extend(etas.iter().map(|e| format!("eta_{e}")));
    let mut cols = Vec::new();
    for &eta in etas {
        let d = smeared_pdf(
            ecfg.source.kappa_prime,
            ecfg.target(),
            ecfg.phi,
            &SmearingKernel::new(eta)?,
            &cfg.grids.x,
            SmearingMethod::Convolution,
        )?;
        cols.push(d);
    }
    let mut t = Table::with_header(header);
    if let Some(first) = cols.first() {
        for (i, x) in first.xs.iter().enumerate() {
            let mut row: Vec<Cell> = vec![(*x).into()];
            row.extend(cols.iter().map(|c| Cell::from(c.density[i])));
            t.push(row);
        }
    }
    out.csv("smearing.csv", &t, &cfg.hash());
    Ok(out)
}

/// Full virtual experiment ending in the reconstruction of `|Psi_m>`.
pub fn reconstruct(cfg: &RunConfig) -> Result<OutputSet, CliError> {
    let rec = run_experiment(&cfg.experiment()?)?;
    let mut out = OutputSet::default();
    experiment_files(cfg, &rec, "reconstruct", &mut out)?;
    Ok(out)
}

/// Outcome of one self-test suite.
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst < self.tol
    }
}

/// Closed form against the brute-force beam splitter, operator form against
/// the closed form, and the inverse chopping matrix identity.
pub fn selftest() -> Result<Vec<Check>, CliError> {
    let mut amp = 0.0f64;
    let mut prob = 0.0f64;
    let mut op = 0.0f64;
    for &t2 in &[0.5, 0.7, 0.9] {
        for &k in &[0.3, 0.9] {
            for n in 0..=5 {
                for m in 0..=5 {
                    let bs = BeamSplitterParams::from_transmittance(t2, 0.4, -1.2)?;
                    let sq = SqueezeParams::from_kappa_abs(k, 0.7)?;
                    let cfg = PreparationConfig::new(bs, sq, n, m, catbench_core::DEFAULT_DIM)?;
                    let closed = psjp_pajp_state(&cfg)?;
                    let (brute, p_oracle) = oracle_state(&cfg)?;
                    amp = amp.max(closed.max_diff_up_to_phase(&brute));
                    prob = prob.max((preparation_probability(&cfg)? / p_oracle - 1.0).abs());
                    op = op.max(jacobi_operator_state(&cfg)?.max_diff_up_to_phase(&closed));
                }
            }
        }
    }
    let size = 8;
    let inv = inverse_chopping_matrix(20, 0.9, size)?;
    let p = compose_chopping_loss(20, 0.9, size)?;
    let mut ident = 0.0f64;
    for (i, row) in inv.iter().enumerate().take(size) {
        for j in 0..size {
            let v: f64 = (0..size).map(|l| row[l] * p.get(l + 1, j + 1)).sum();
            ident = ident.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    Ok(vec![
        Check {
            name: "oracle amplitudes",
            worst: amp,
            tol: 1e-10,
        },
        Check {
            name: "oracle probability",
            worst: prob,
            tol: 1e-8,
        },
        Check {
            name: "operator polynomial",
            worst: op,
            tol: 1e-10,
        },
        Check {
            name: "inverse chopping matrix",
            worst: ident,
            tol: 1e-10,
        },
    ])
}
