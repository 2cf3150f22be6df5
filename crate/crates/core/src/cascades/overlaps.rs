use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use super::{CascadeConfig, CascadeSampler, CascadeTree};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::parisi::RsbParams;
use crate::replica::{OverlapDraw, OverlapSample};
use crate::rng::StreamRng;

/// Draws `n` slots i.i.d. from the tree weights and records
/// `R_{ll'} = q_{α^l ∧ α^{l'}}`, `R^s_{ll'} = q^s_{α^l ∧ α^{l'}}`.
///
/// `combined` must be strictly increasing; `species[s]` non-decreasing,
/// both of length `r + 1`.
pub fn sample_overlap_array(
    tree: &CascadeTree,
    combined: &[f64],
    species: &[Vec<f64>],
    n: usize,
    rng: &mut StreamRng,
) -> Result<OverlapDraw> {
    let r = tree.r();
    check_sequences(combined, species, r)?;
    if n < 2 {
        return Err(Error::config("an overlap array needs at least 2 replicas"));
    }
    let dist = WeightedIndex::new(tree.weights()).map_err(|e| Error::params(format!("cascade weights: {e}")))?;
    let leaves: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
    let mut wedge = vec![r; n * n];
    for l in 0..n {
        for lp in (l + 1)..n {
            let w = tree.wedge(leaves[l], leaves[lp]);
            wedge[l * n + lp] = w;
            wedge[lp * n + l] = w;
        }
    }
    let combined_arr = wedge.iter().map(|&w| combined[w]).collect();
    let species_arr = species.iter().map(|q| wedge.iter().map(|&w| q[w]).collect()).collect();
    Ok(OverlapDraw::new(n, combined_arr, species_arr, 1.0))
}

fn check_sequences(combined: &[f64], species: &[Vec<f64>], r: usize) -> Result<()> {
    Error::check_len(r + 1, combined.len())?;
    if combined.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::params("the combined overlap sequence must be strictly increasing"));
    }
    for q in species {
        Error::check_len(r + 1, q.len())?;
        if q.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::params("species overlap sequences must be non-decreasing"));
        }
    }
    Ok(())
}

/// `draws` overlap arrays, each from a fresh cascade. The combined sequence
/// defaults to `Σ_s λ_s q^s_l`.
pub fn cascade_overlap_sample(
    spec: &ModelSpec,
    params: &RsbParams,
    combined: Option<&[f64]>,
    config: &CascadeConfig,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<OverlapSample> {
    Error::check_len(spec.n_species(), params.n_species())?;
    let combined = match combined {
        Some(c) => c.to_vec(),
        None => params.combined_q(spec.lambda()),
    };
    check_sequences(&combined, params.q_all(), params.r())?;
    let sampler = CascadeSampler::new(params.zeta(), config, seed)?;
    let key = sampler.key().derive("replicas");
    let out: Vec<OverlapDraw> = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let tree = sampler.tree(k);
            sample_overlap_array(&tree, &combined, params.q_all(), n, &mut key.stream(k))
        })
        .collect::<Result<_>>()?;
    OverlapSample::new(spec.species().to_vec(), spec.lambda().to_vec(), out)
}
