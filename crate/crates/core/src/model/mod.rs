//! The multi-species SK model.
//!
//! Spins are split into species blocks `I_s` of sizes `N_s ≈ λ_s N`. The
//! Hamiltonian is `H(σ) = N^{-1/2} Σ_{i,j} g_ij σ_i σ_j` with independent
//! centered Gaussian couplings of variance `Δ²_{st}` for `i ∈ I_s, j ∈ I_t`,
//! diagonal terms included.

mod covariance;
mod free_energy;

pub use covariance::{
    empirical_cavity_covariance, empirical_hamiltonian_covariance, CavityCheck, CavityReport,
    CovarianceCheck, CovarianceConfig, CovarianceReport, PairKind,
};
pub use free_energy::{exact_log_partition, exact_log_partition_with_cap, free_energy_mc, FreeEnergyEstimate};

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::enumeration::SpinPolynomial;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

const SUM_TOL: f64 = 1e-12;
const SYM_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// Model description as read from JSON, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub species: Vec<String>,
    pub lambda: Vec<f64>,
    pub delta_sq: Vec<Vec<f64>>,
}

/// A validated model: species labels, proportions and the variance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    species: Vec<String>,
    lambda: Vec<f64>,
    delta_sq: Vec<f64>,
    psd: bool,
    min_eigenvalue: f64,
}

pub fn validate_model(raw: &RawModel) -> Result<ModelSpec> {
    let k = raw.species.len();
    if k == 0 {
        return Err(Error::model("at least one species is required"));
    }
    for (i, s) in raw.species.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::model(format!("species {i} has an empty label")));
        }
        if raw.species[..i].contains(s) {
            return Err(Error::model(format!("duplicate species label {s:?}")));
        }
    }
    if raw.lambda.len() != k {
        return Err(Error::model(format!(
            "lambda has {} entries for {k} species",
            raw.lambda.len()
        )));
    }
    for (s, &l) in raw.species.iter().zip(&raw.lambda) {
        if !l.is_finite() || l <= 0.0 {
            return Err(Error::model(format!("proportion lambda[{s}] = {l} must be positive")));
        }
    }
    let total: f64 = raw.lambda.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::model(format!("proportions sum to {total}, expected 1")));
    }
    if raw.delta_sq.len() != k || raw.delta_sq.iter().any(|row| row.len() != k) {
        return Err(Error::model(format!("delta_sq must be a {k}x{k} matrix")));
    }
    let mut flat = Vec::with_capacity(k * k);
    for (s, row) in raw.delta_sq.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::model(format!("delta_sq[{s}][{t}] is not finite")));
            }
            if v < 0.0 {
                return Err(Error::model(format!("delta_sq[{s}][{t}] = {v} is negative")));
            }
            if (v - raw.delta_sq[t][s]).abs() > SYM_TOL {
                return Err(Error::model(format!(
                    "delta_sq is not symmetric: entry ({s},{t}) = {v} vs ({t},{s}) = {}",
                    raw.delta_sq[t][s]
                )));
            }
            flat.push(v);
        }
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(k, k, &flat));
    let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ModelSpec {
        species: raw.species.clone(),
        lambda: raw.lambda.clone(),
        delta_sq: flat,
        psd: min_eigenvalue >= PSD_TOL,
        min_eigenvalue,
    })
}

impl ModelSpec {
    pub fn new<S: Into<String>>(species: Vec<S>, lambda: Vec<f64>, delta_sq: Vec<Vec<f64>>) -> Result<Self> {
        validate_model(&RawModel {
            species: species.into_iter().map(Into::into).collect(),
            lambda,
            delta_sq,
        })
    }

    /// One species, `λ = 1`, `Δ² = [[d]]`.
    pub fn single(delta_sq: f64) -> Result<Self> {
        Self::new(vec!["a"], vec![1.0], vec![vec![delta_sq]])
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn species_index(&self, label: &str) -> Option<usize> {
        self.species.iter().position(|s| s == label)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    #[inline]
    pub fn delta_sq(&self, s: usize, t: usize) -> f64 {
        self.delta_sq[s * self.species.len() + t]
    }

    pub fn delta_sq_rows(&self) -> Vec<Vec<f64>> {
        self.delta_sq.chunks(self.species.len()).map(<[f64]>::to_vec).collect()
    }

    pub fn psd(&self) -> bool {
        self.psd
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn is_null(&self) -> bool {
        self.delta_sq.iter().all(|&v| v == 0.0)
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            species: self.species.clone(),
            lambda: self.lambda.clone(),
            delta_sq: self.delta_sq_rows(),
        }
    }

    /// Same model with different proportions (e.g. realized `N_s / N`).
    pub fn with_lambda(&self, lambda: &[f64]) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.lambda = lambda.to_vec();
        validate_model(&raw)
    }

    /// Reorders species: new species `i` is old species `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Error::check_len(self.n_species(), perm.len())?;
        let raw = RawModel {
            species: perm.iter().map(|&p| self.species[p].clone()).collect(),
            lambda: perm.iter().map(|&p| self.lambda[p]).collect(),
            delta_sq: perm
                .iter()
                .map(|&p| perm.iter().map(|&q| self.delta_sq(p, q)).collect())
                .collect(),
        };
        validate_model(&raw)
    }

    /// `Σ_{s,t} Δ²_{st} λ_s λ_t x_s y_t` with the given proportions.
    pub fn quadratic_form(&self, lambda: &[f64], x: &[f64], y: &[f64]) -> f64 {
        let k = self.n_species();
        let mut acc = 0.0;
        for s in 0..k {
            for t in 0..k {
                acc += self.delta_sq(s, t) * lambda[s] * lambda[t] * x[s] * y[t];
            }
        }
        acc
    }

    /// Hamiltonian covariance `(1/N) E H(σ¹)H(σ²) = Σ Δ²_{st} λ_s λ_t R_s R_t`.
    pub fn covariance(&self, r: &[f64]) -> f64 {
        self.quadratic_form(&self.lambda, r, r)
    }

    /// `log 2 + ½ Σ Δ²_{st} λ_s λ_t`, the annealed (Jensen) bound.
    pub fn annealed_value(&self) -> f64 {
        let ones = vec![1.0; self.n_species()];
        std::f64::consts::LN_2 + 0.5 * self.covariance(&ones)
    }
}

/// Partition of `0..N` into contiguous species blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinAssignment {
    n_total: usize,
    counts: Vec<usize>,
    starts: Vec<usize>,
    species_of: Vec<usize>,
}

/// Largest-remainder rounding of `λ_s N`, ties broken by species order.
pub fn assign_species(spec: &ModelSpec, n: usize) -> Result<SpinAssignment> {
    let k = spec.n_species();
    if n < k {
        return Err(Error::config(format!(
            "N = {n} spins cannot populate {k} species"
        )));
    }
    let quotas: Vec<f64> = spec.lambda.iter().map(|l| l * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    // stable sort keeps species order among equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &s in order.iter().take(n.saturating_sub(assigned)) {
        counts[s] += 1;
    }
    if let Some(s) = counts.iter().position(|&c| c == 0) {
        return Err(Error::config(format!(
            "species {:?} receives no spins at N = {n}",
            spec.species[s]
        )));
    }
    SpinAssignment::from_counts(&counts)
}

impl SpinAssignment {
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::config("every species needs at least one spin"));
        }
        let mut starts = Vec::with_capacity(counts.len());
        let mut species_of = Vec::new();
        for (s, &c) in counts.iter().enumerate() {
            starts.push(species_of.len());
            species_of.extend(std::iter::repeat(s).take(c));
        }
        Ok(Self { n_total: species_of.len(), counts: counts.to_vec(), starts, species_of })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_species(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Zero-based index range of species `s`.
    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.starts[s]..self.starts[s] + self.counts[s]
    }

    pub fn species_of(&self, i: usize) -> usize {
        self.species_of[i]
    }

    pub fn realized_lambda(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n_total as f64).collect()
    }
}

/// Coupling matrix `g`, row-major, with the seed and draw that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderMatrix {
    n: usize,
    couplings: Vec<f64>,
    seed: u64,
    draw: u64,
}

impl DisorderMatrix {
    pub fn from_parts(n: usize, couplings: Vec<f64>, seed: u64, draw: u64) -> Result<Self> {
        Error::check_len(n * n, couplings.len())?;
        Ok(Self { n, couplings, seed, draw })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw(&self) -> u64 {
        self.draw
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    /// `H` as a spin polynomial (diagonal terms become a constant).
    pub fn to_polynomial(&self) -> SpinPolynomial {
        let n = self.n;
        let scale = 1.0 / (n as f64).sqrt();
        let mut p = SpinPolynomial::zero(n);
        for i in 0..n {
            p.add_monomial(&[], scale * self.get(i, i));
            for j in (i + 1)..n {
                p.add_monomial(&[i, j], scale * (self.get(i, j) + self.get(j, i)));
            }
        }
        p
    }
}

/// Seed-determined disorder (draw 0 of the seed's stream).
pub fn sample_disorder(spec: &ModelSpec, assign: &SpinAssignment, seed: u64) -> Result<DisorderMatrix> {
    let mut d = disorder_draw(spec, assign, &StreamKey::new(seed).derive("disorder"), 0)?;
    d.seed = seed;
    Ok(d)
}

/// Disorder for draw `draw` of a keyed family. Each species block `(s, t)`
/// has its own stream keyed by the two labels, so reordering species
/// permutes the matrix without changing its entries.
pub(crate) fn disorder_draw(
    spec: &ModelSpec,
    assign: &SpinAssignment,
    key: &StreamKey,
    draw: u64,
) -> Result<DisorderMatrix> {
    Error::check_len(spec.n_species(), assign.n_species())?;
    let n = assign.n_total();
    let mut g = vec![0.0; n * n];
    for s in 0..spec.n_species() {
        for t in 0..spec.n_species() {
            let var = spec.delta_sq(s, t);
            if var == 0.0 {
                continue;
            }
            let sd = var.sqrt();
            let mut rng = key.derive(&spec.species[s]).derive(&spec.species[t]).stream(draw);
            for i in assign.range(s) {
                for j in assign.range(t) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    g[i * n + j] = sd * z;
                }
            }
        }
    }
    Ok(DisorderMatrix { n, couplings: g, seed: 0, draw })
}

fn check_spins(n: usize, sigma: &[f64]) -> Result<()> {
    Error::check_len(n, sigma.len())?;
    if sigma.iter().any(|&x| x != 1.0 && x != -1.0) {
        return Err(Error::config("spin values must be +1 or -1"));
    }
    Ok(())
}

/// `H(σ) = N^{-1/2} Σ_{i,j} g_ij σ_i σ_j`.
pub fn hamiltonian(disorder: &DisorderMatrix, sigma: &[f64]) -> Result<f64> {
    let n = disorder.n;
    check_spins(n, sigma)?;
    let mut e = 0.0;
    for i in 0..n {
        let row = &disorder.couplings[i * n..(i + 1) * n];
        let h: f64 = row.iter().zip(sigma).map(|(g, s)| g * s).sum();
        e += sigma[i] * h;
    }
    Ok(e / (n as f64).sqrt())
}

/// Per-species overlaps `R_s` and the combined overlap `R = Σ (N_s/N) R_s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Overlaps {
    pub species: Vec<f64>,
    pub combined: f64,
}

pub fn species_overlaps(assign: &SpinAssignment, sigma1: &[f64], sigma2: &[f64]) -> Result<Overlaps> {
    check_spins(assign.n_total(), sigma1)?;
    check_spins(assign.n_total(), sigma2)?;
    let species: Vec<f64> = (0..assign.n_species())
        .map(|s| {
            let r = assign.range(s);
            let dot: f64 = r.clone().map(|i| sigma1[i] * sigma2[i]).sum();
            dot / r.len() as f64
        })
        .collect();
    let combined = species
        .iter()
        .zip(assign.realized_lambda())
        .map(|(r, l)| l * r)
        .sum();
    Ok(Overlaps { species, combined })
}
