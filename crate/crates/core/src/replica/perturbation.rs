use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::check_weight_vector;
use crate::enumeration::{SpinPolynomial, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::model::SpinAssignment;
use crate::rng::StreamKey;

/// Largest supported interaction order of the perturbation.
pub const MAX_ORDER: usize = 3;

/// Finite truncation of the perturbation `h_N = Σ_w Σ_p 2^{-j(w)-p} x_{w,p} h_{N,w,p}`.
///
/// `j(w)` is the 1-based position of `w` in `weights`. When `x` is `None`
/// the coefficients are drawn uniformly from `[1,2]`, once per seed, so
/// every draw of a sample shares them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub weights: Vec<Vec<f64>>,
    pub p_max: usize,
    #[serde(default)]
    pub x: Option<Vec<Vec<f64>>>,
    pub gamma: f64,
}

/// All 0/1 vectors followed by the all-1/2 vector.
pub fn default_weight_grid(n_species: usize) -> Vec<Vec<f64>> {
    let mut w: Vec<Vec<f64>> = (0..1u64 << n_species)
        .map(|m| (0..n_species).map(|s| ((m >> s) & 1) as f64).collect())
        .collect();
    w.push(vec![0.5; n_species]);
    w
}

impl PerturbationSpec {
    pub fn new(n_species: usize, p_max: usize, gamma: f64) -> Self {
        Self { weights: default_weight_grid(n_species), p_max, x: None, gamma }
    }

    /// Validates the spec; all-zero coefficients are accepted as a
    /// degenerate case for testing.
    pub fn validate(&self, n_species: usize) -> Result<()> {
        if !(self.gamma > 0.25 && self.gamma < 0.5) {
            return Err(Error::config(format!("gamma = {} is not in (1/4, 1/2)", self.gamma)));
        }
        if self.p_max == 0 || self.p_max > MAX_ORDER {
            return Err(Error::config(format!("p_max = {} must be in 1..={MAX_ORDER}", self.p_max)));
        }
        if self.weights.is_empty() {
            return Err(Error::config("the weight grid is empty"));
        }
        for w in &self.weights {
            Error::check_len(n_species, w.len())?;
            check_weight_vector(w)?;
        }
        if let Some(x) = &self.x {
            Error::check_len(self.weights.len(), x.len())?;
            for row in x {
                Error::check_len(self.p_max, row.len())?;
            }
            let zero = x.iter().flatten().all(|&v| v == 0.0);
            if !zero && x.iter().flatten().any(|v| !(1.0..=2.0).contains(v)) {
                return Err(Error::config("perturbation coefficients must lie in [1,2]"));
            }
        }
        Ok(())
    }

    /// `s_N = N^γ`.
    pub fn strength(&self, n: usize) -> f64 {
        (n as f64).powf(self.gamma)
    }

    /// Coefficients `x_{w,p}`: the configured ones or a uniform draw keyed by seed.
    pub fn coefficients(&self, seed: u64) -> Vec<Vec<f64>> {
        if let Some(x) = &self.x {
            return x.clone();
        }
        let mut rng = StreamKey::new(seed).derive("perturbation").derive("x").stream(0);
        (0..self.weights.len())
            .map(|_| (0..self.p_max).map(|_| rng.random_range(1.0..=2.0)).collect())
            .collect()
    }

    /// Upper bound on the conditional variance of `h_N` at one configuration.
    pub fn variance_bound(&self, coefficients: &[Vec<f64>]) -> f64 {
        let mut v = 0.0;
        for (j, row) in coefficients.iter().enumerate() {
            for (p, &x) in row.iter().enumerate() {
                let c = 2f64.powi(-(j as i32 + 1) - (p as i32 + 1)) * x;
                v += c * c;
            }
        }
        v
    }
}

/// `h_N` (without the factor `s_N`) for draw `draw` of a keyed family.
/// Coupling tensors have `N^p` entries, so `N` is limited by the enumeration cap.
pub fn perturbation_polynomial(
    pspec: &PerturbationSpec,
    coefficients: &[Vec<f64>],
    assign: &SpinAssignment,
    key: &StreamKey,
    draw: u64,
) -> Result<SpinPolynomial> {
    pspec.validate(assign.n_species())?;
    let n = assign.n_total();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::CapExceeded(format!(
            "N = {n} exceeds the perturbation tensor cap of {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    let mut poly = SpinPolynomial::zero(n);
    let nf = n as f64;
    for (j, w) in pspec.weights.iter().enumerate() {
        let amp: Vec<f64> = (0..n).map(|i| w[assign.species_of(i)].sqrt()).collect();
        for p in 1..=pspec.p_max {
            let x = coefficients[j][p - 1];
            let mut rng = key.derive_index(j as u64).derive_index(p as u64).stream(draw);
            // Draw the full tensor even when the term vanishes so streams stay aligned.
            let c = 2f64.powi(-(j as i32 + 1) - p as i32) * x / nf.powf(p as f64 / 2.0);
            let mut idx = vec![0usize; p];
            for flat in 0..n.pow(p as u32) {
                let mut rem = flat;
                for k in (0..p).rev() {
                    idx[k] = rem % n;
                    rem /= n;
                }
                let g: f64 = StandardNormal.sample(&mut rng);
                let a: f64 = idx.iter().map(|&i| amp[i]).product();
                if c != 0.0 && a != 0.0 {
                    poly.add_monomial(&idx, c * g * a);
                }
            }
        }
    }
    Ok(poly)
}

/// `h_N(σ)` for the first perturbation draw of `seed`.
pub fn perturbation_hamiltonian(
    pspec: &PerturbationSpec,
    assign: &SpinAssignment,
    sigma: &[f64],
    seed: u64,
) -> Result<f64> {
    Error::check_len(assign.n_total(), sigma.len())?;
    if sigma.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::config("spin values must be +1 or -1"));
    }
    let coeffs = pspec.coefficients(seed);
    let key = StreamKey::new(seed).derive("perturbation").derive("couplings");
    Ok(perturbation_polynomial(pspec, &coeffs, assign, &key, 0)?.energy(sigma))
}
