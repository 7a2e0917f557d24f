use std::f64::consts::TAU;

use serde::Serialize;

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::models::{angle_coordinates, reference_phi_probability};
use crate::sampler::{RejectionTally, Sampler};
use crate::stats::{chi_square_goodness_of_fit, ChiSquareTest};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub index: usize,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub count: u64,
    /// `count / (n · width)`
    pub density: f64,
    /// Reference mass of the bin; only for a vanishing potential.
    pub reference_probability: Option<f64>,
    /// Reference mass divided by the bin width.
    pub reference_density: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramResult {
    pub n_iter: u64,
    pub thin: u64,
    pub n_samples: u64,
    pub bins: Vec<HistogramBin>,
    pub chi_square: Option<ChiSquareTest>,
    pub tally: RejectionTally,
}

impl HistogramResult {
    pub fn counts(&self) -> Vec<u64> {
        self.bins.iter().map(|b| b.count).collect()
    }
}

/// Histogram of the poloidal angle `φ` along one chain, compared with the
/// uniform surface measure when the potential vanishes.
pub fn run_histogram(cfg: &ExperimentConfig) -> Result<HistogramResult> {
    let params = cfg
        .torus_params()
        .ok_or_else(|| Error::InvalidConfig("--experiment histogram needs a torus model".into()))?;
    let model = cfg.build_model()?;
    let sampler = Sampler::new(model.as_ref(), cfg.sampler_config(cfg.dt)?)?;
    let thin = cfg.thin.unwrap_or(1);
    let n_bins = cfg.n_bins;
    let width = TAU / n_bins as f64;

    let mut counts = vec![0u64; n_bins];
    let mut failure = None;
    let mut state = sampler.initial_state();
    let tally = sampler.run(&mut state, cfg.n_iter, thin, |_, x, _| {
        match angle_coordinates(&x.q, &params) {
            Ok((_, phi)) => counts[((phi / width) as usize).min(n_bins - 1)] += 1,
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let n_samples: u64 = counts.iter().sum();
    let reference = params.potential.is_zero();
    let bins: Vec<HistogramBin> = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let (lo, hi) = (i as f64 * width, (i + 1) as f64 * width);
            let prob = reference.then(|| reference_phi_probability(&params, lo, hi));
            HistogramBin {
                index: i,
                phi_lo: lo,
                phi_hi: hi,
                count,
                density: count as f64 / (n_samples as f64 * width),
                reference_probability: prob,
                reference_density: prob.map(|p| p / width),
            }
        })
        .collect();
    let chi_square = if reference {
        let probs: Vec<f64> = bins.iter().filter_map(|b| b.reference_probability).collect();
        Some(chi_square_goodness_of_fit(&counts, &probs)?)
    } else {
        None
    };
    Ok(HistogramResult {
        n_iter: cfg.n_iter,
        thin,
        n_samples,
        bins,
        chi_square,
        tally,
    })
}
