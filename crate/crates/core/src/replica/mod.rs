//! Overlap arrays and the statistics computed on them: weighted overlaps,
//! the Ghirlanda-Guerra Δ statistic, ultrametricity violations and isotonic
//! synchronization fits. Samples come from exact Gibbs sampling at small N
//! or from cascades.

mod gg;
mod gibbs;
mod perturbation;
mod sync;

pub use gg::{gg_delta, median_overlap, GgDelta, TestFunction};
pub use gibbs::{gibbs_probabilities, gibbs_replica_samples, GibbsConfig};
pub use perturbation::{default_weight_grid, perturbation_hamiltonian, perturbation_polynomial, PerturbationSpec};
pub use sync::{
    fit_synchronization, overlap_law_distance, ultrametricity_violation, SpeciesFit, SyncFit,
    UltrametricityReport,
};

use serde::Serialize;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// One `n`-replica overlap array: combined `R_{ll'}` and per-species
/// `R^s_{ll'}`, both row-major `n × n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapDraw {
    n: usize,
    combined: Vec<f64>,
    species: Vec<Vec<f64>>,
    weight: f64,
}

impl OverlapDraw {
    pub fn new(n: usize, combined: Vec<f64>, species: Vec<Vec<f64>>, weight: f64) -> Self {
        Self { n, combined, species, weight }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    #[inline]
    pub fn r(&self, l: usize, lp: usize) -> f64 {
        self.combined[l * self.n + lp]
    }

    #[inline]
    pub fn rs(&self, s: usize, l: usize, lp: usize) -> f64 {
        self.species[s][l * self.n + lp]
    }

    /// `R` for `species = None`, `R^s` otherwise.
    pub fn entry(&self, species: Option<usize>, l: usize, lp: usize) -> f64 {
        match species {
            None => self.r(l, lp),
            Some(s) => self.rs(s, l, lp),
        }
    }

    pub fn combined(&self) -> &[f64] {
        &self.combined
    }

    pub fn species_array(&self, s: usize) -> &[f64] {
        &self.species[s]
    }

    /// Array with replicas relabeled so that new replica `l` is old `perm[l]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let map = |a: &[f64]| {
            let mut out = vec![0.0; n * n];
            for l in 0..n {
                for lp in 0..n {
                    out[l * n + lp] = a[perm[l] * n + perm[lp]];
                }
            }
            out
        };
        Self {
            n,
            combined: map(&self.combined),
            species: self.species.iter().map(|a| map(a)).collect(),
            weight: self.weight,
        }
    }
}

/// A collection of overlap draws sharing species labels and the proportions
/// used in `R = Σ_s λ_s R^s` (realized `N_s/N` for spin samples).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapSample {
    species: Vec<String>,
    lambda: Vec<f64>,
    draws: Vec<OverlapDraw>,
}

impl OverlapSample {
    pub fn new(species: Vec<String>, lambda: Vec<f64>, draws: Vec<OverlapDraw>) -> Result<Self> {
        Error::check_len(species.len(), lambda.len())?;
        for (k, d) in draws.iter().enumerate() {
            Error::check_len(species.len(), d.species.len())?;
            Error::check_len(d.n * d.n, d.combined.len())?;
            if !(d.weight >= 0.0) || !d.weight.is_finite() {
                return Err(Error::config(format!("draw {k} has invalid weight {}", d.weight)));
            }
            for a in std::iter::once(&d.combined).chain(&d.species) {
                Error::check_len(d.n * d.n, a.len())?;
                for l in 0..d.n {
                    for lp in (l + 1)..d.n {
                        if (a[l * d.n + lp] - a[lp * d.n + l]).abs() > SYMMETRY_TOL {
                            return Err(Error::config(format!("draw {k} is not symmetric at ({l},{lp})")));
                        }
                    }
                }
            }
        }
        Ok(Self { species, lambda, draws })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn draws(&self) -> &[OverlapDraw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Smallest replica count over the draws.
    pub fn min_replicas(&self) -> usize {
        self.draws.iter().map(|d| d.n).min().unwrap_or(0)
    }
}

/// `R_w = Σ_s λ_s w_s R^s_{ll'}` for draw `draw`.
pub fn weighted_overlap(sample: &OverlapSample, draw: usize, w: &[f64], l: usize, lp: usize) -> Result<f64> {
    Error::check_len(sample.n_species(), w.len())?;
    check_weight_vector(w)?;
    let d = sample
        .draws
        .get(draw)
        .ok_or_else(|| Error::config(format!("draw {draw} is out of range")))?;
    if l >= d.n || lp >= d.n {
        return Err(Error::config(format!("replica index out of range for n = {}", d.n)));
    }
    Ok(weighted(d, &sample.lambda, w, l, lp))
}

#[inline]
pub(crate) fn weighted(d: &OverlapDraw, lambda: &[f64], w: &[f64], l: usize, lp: usize) -> f64 {
    lambda.iter().zip(w).enumerate().map(|(s, (lam, ws))| lam * ws * d.rs(s, l, lp)).sum()
}

pub(crate) fn check_weight_vector(w: &[f64]) -> Result<()> {
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::config("weight vector entries must lie in [0,1]"));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
