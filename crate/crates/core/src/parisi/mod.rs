//! The multi-species Parisi functional for finite replica symmetry breaking.
//!
//! For parameters `0 < ζ_0 < … < ζ_{r-1} < 1` and per-species sequences
//! `0 = q^s_0 ≤ … ≤ q^s_r = 1` the path sequences are
//! `Q_ℓ = Σ Δ²_{st} λ_s λ_t q^s_ℓ q^t_ℓ` and `Q^s_ℓ = 2 Σ_t Δ²_{st} λ_t q^t_ℓ`.
//! The recursion starts from `X^s_r(x) = log ch x` and steps down with
//! `X^s_ℓ(x) = ζ_ℓ^{-1} log E exp ζ_ℓ X^s_{ℓ+1}(x + η (Q^s_{ℓ+1} − Q^s_ℓ)^{1/2})`;
//! the functional is `log 2 + Σ λ_s X^s_0(0) − ½ Σ ζ_ℓ (Q_{ℓ+1} − Q_ℓ)`.

mod params;
mod recursion;

pub use params::{RawParams, RsbParams};
pub use recursion::{soft_mean, species_recursion, ParisiEvaluator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Integration scheme for the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMode {
    /// Tabulate each level on a uniform grid with cubic interpolation.
    Grid,
    /// Tensor-product Gauss-Hermite over all levels (exponential in r).
    NestedExact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub mode: QuadratureMode,
    pub hermite_nodes: usize,
    pub grid_points: usize,
    pub grid_halfwidth_sigmas: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { mode: QuadratureMode::Grid, hermite_nodes: 40, grid_points: 513, grid_halfwidth_sigmas: 8.0 }
    }
}

/// Deepest tree for which the nested tensor-product scheme is allowed.
pub const NESTED_MAX_LEVELS: usize = 3;

impl QuadratureConfig {
    pub fn nested() -> Self {
        Self { mode: QuadratureMode::NestedExact, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hermite_nodes < 8 {
            return Err(Error::config(format!("hermite_nodes = {} is below 8", self.hermite_nodes)));
        }
        if self.grid_points < 9 || self.grid_points % 2 == 0 {
            return Err(Error::config(format!(
                "grid_points = {} must be odd and at least 9",
                self.grid_points
            )));
        }
        if !(self.grid_halfwidth_sigmas.is_finite() && self.grid_halfwidth_sigmas > 0.0) {
            return Err(Error::config("grid_halfwidth_sigmas must be positive"));
        }
        Ok(())
    }

    pub fn validate_for(&self, r: usize) -> Result<()> {
        self.validate()?;
        if self.mode == QuadratureMode::NestedExact && r > NESTED_MAX_LEVELS {
            return Err(Error::config(format!(
                "nested-exact quadrature is limited to r <= {NESTED_MAX_LEVELS}, got r = {r}"
            )));
        }
        Ok(())
    }
}

/// `Q_ℓ` and `Q^s_ℓ` for `ℓ = 0..=r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSequences {
    pub combined: Vec<f64>,
    pub species: Vec<Vec<f64>>,
}

impl PathSequences {
    pub fn r(&self) -> usize {
        self.combined.len() - 1
    }

    /// `½ Σ_ℓ ζ_ℓ (Q_{ℓ+1} − Q_ℓ)`.
    pub fn half_zeta_increment_sum(&self, zeta: &[f64]) -> f64 {
        0.5 * zeta
            .iter()
            .enumerate()
            .map(|(l, z)| z * (self.combined[l + 1] - self.combined[l]))
            .sum::<f64>()
    }
}

pub fn path_sequences(spec: &ModelSpec, params: &RsbParams) -> Result<PathSequences> {
    let k = spec.n_species();
    Error::check_len(k, params.n_species())?;
    let lam = spec.lambda();
    let r = params.r();
    let mut combined = vec![0.0; r + 1];
    let mut species = vec![vec![0.0; r + 1]; k];
    for l in 0..=r {
        let q: Vec<f64> = (0..k).map(|s| params.q(s)[l]).collect();
        combined[l] = spec.quadratic_form(lam, &q, &q);
        for s in 0..k {
            species[s][l] = 2.0 * (0..k).map(|t| spec.delta_sq(s, t) * lam[t] * q[t]).sum::<f64>();
        }
    }
    Ok(PathSequences { combined, species })
}

/// A functional evaluation with its ingredients.
#[derive(Clone, Debug, Serialize)]
pub struct ParisiValue {
    pub value: f64,
    /// `X^s_0` per species.
    pub x0: Vec<f64>,
    pub paths: PathSequences,
}

/// `X^s_0` for every species.
pub fn parisi_recursion(spec: &ModelSpec, params: &RsbParams, quad: &QuadratureConfig) -> Result<Vec<f64>> {
    Ok(ParisiEvaluator::new(*quad)?.evaluate(spec, params)?.x0)
}

/// `P(ζ, q)`.
pub fn parisi_functional(spec: &ModelSpec, params: &RsbParams, quad: &QuadratureConfig) -> Result<ParisiValue> {
    ParisiEvaluator::new(*quad)?.evaluate(spec, params)
}

#[cfg(test)]
mod tests;
