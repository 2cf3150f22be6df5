use rayon::prelude::*;
use serde::Serialize;

use super::{assign_species, disorder_draw, DisorderMatrix, ModelSpec};
use crate::enumeration::{log_partition, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::stats::{mean_se, Estimate};

/// `log Z_N = log Σ_σ exp H(σ)` by exhaustive enumeration (N ≤ 24).
pub fn exact_log_partition(disorder: &DisorderMatrix) -> Result<f64> {
    exact_log_partition_with_cap(disorder, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_log_partition_with_cap(disorder: &DisorderMatrix, cap: usize) -> Result<f64> {
    if disorder.couplings().iter().all(|&g| g == 0.0) && disorder.n() <= cap {
        return Ok(disorder.n() as f64 * std::f64::consts::LN_2);
    }
    log_partition(&disorder.to_polynomial(), cap)
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeEnergyEstimate {
    pub n: usize,
    pub estimate: Estimate,
    /// `(1/N) log Z_N` for each disorder draw, in draw order.
    pub per_draw: Vec<f64>,
    pub realized_lambda: Vec<f64>,
}

/// Monte Carlo estimate of `F_N = (1/N) E log Z_N` over independent disorder
/// draws. Draw `d` uses the disorder stream `d` of the seed, so draw 0 equals
/// [`super::sample_disorder`] with the same seed.
pub fn free_energy_mc(spec: &ModelSpec, n: usize, samples: usize, seed: u64) -> Result<FreeEnergyEstimate> {
    if samples < 2 {
        return Err(Error::config("free energy estimation needs at least 2 samples"));
    }
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::CapExceeded(format!(
            "N = {n} exceeds the enumeration cap of {DEFAULT_ENUMERATION_CAP}"
        )));
    }
    let assign = assign_species(spec, n)?;
    let key = StreamKey::new(seed).derive("disorder");
    let per_draw: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|d| {
            let g = disorder_draw(spec, &assign, &key, d)?;
            if g.couplings().iter().all(|&x| x == 0.0) {
                return Ok(std::f64::consts::LN_2);
            }
            Ok(exact_log_partition(&g)? / n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(FreeEnergyEstimate {
        n,
        estimate: mean_se(&per_draw),
        per_draw,
        realized_lambda: assign.realized_lambda(),
    })
}
