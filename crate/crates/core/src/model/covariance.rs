//! Monte Carlo checks of the Hamiltonian and cavity-field covariances.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{assign_species, disorder_draw, species_overlaps, ModelSpec, SpinAssignment};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::stats::mean_se;

/// How the configuration pairs are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    /// Independent uniform configurations (overlaps near 0).
    Uniform,
    /// `σ²` is `±σ¹` (one global sign) with at most one extra flip per
    /// species, so all `R_s` share a sign, `|R_s|` is close to 1 and the
    /// covariance is far from 0.
    Correlated,
    Identical,
    Antipodal,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceConfig {
    pub config_pairs: usize,
    pub draws: usize,
    pub use_realized_lambda: bool,
    pub pair_kind: PairKind,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            config_pairs: 20,
            draws: 10_000,
            use_realized_lambda: true,
            pair_kind: PairKind::Correlated,
            rel_tol: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceCheck {
    pub overlaps: Vec<f64>,
    /// Theory with the proportions selected by `use_realized_lambda`.
    pub theory: f64,
    pub theory_realized: f64,
    pub theory_limit: f64,
    pub estimate: f64,
    pub se: f64,
    pub relative_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub n: usize,
    pub draws: usize,
    pub checks: Vec<CovarianceCheck>,
    pub max_relative_error: f64,
    pub pass: bool,
}

fn relative_error(estimate: f64, theory: f64) -> f64 {
    if estimate == theory {
        0.0
    } else if theory == 0.0 {
        f64::INFINITY
    } else {
        ((estimate - theory) / theory).abs()
    }
}

fn random_spins(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

pub(crate) fn configuration_pairs(
    assign: &SpinAssignment,
    kind: PairKind,
    count: usize,
    key: &StreamKey,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = assign.n_total();
    (0..count as u64)
        .map(|p| {
            let mut rng = key.stream(p);
            let s1 = random_spins(n, &mut rng);
            let s2 = match kind {
                PairKind::Uniform => random_spins(n, &mut rng),
                PairKind::Identical => s1.clone(),
                PairKind::Antipodal => s1.iter().map(|x| -x).collect(),
                PairKind::Correlated => {
                    let sign = if rng.random::<bool>() { -1.0 } else { 1.0 };
                    let mut s2: Vec<f64> = s1.iter().map(|x| sign * x).collect();
                    for s in 0..assign.n_species() {
                        let range = assign.range(s);
                        if rng.random::<bool>() {
                            let i = rng.random_range(range);
                            s2[i] = -s2[i];
                        }
                    }
                    s2
                }
            };
            (s1, s2)
        })
        .collect()
}

/// Compares the Monte Carlo estimate of `(1/N) E H(σ¹) H(σ²)` over disorder
/// draws with `Σ Δ²_{st} λ_s λ_t R_s R_t` on a set of configuration pairs.
pub fn empirical_hamiltonian_covariance(spec: &ModelSpec, n: usize, config: &CovarianceConfig) -> Result<CovarianceReport> {
    if config.draws < 100 {
        return Err(Error::config("covariance checks need at least 100 draws"));
    }
    let assign = assign_species(spec, n)?;
    let root = StreamKey::new(config.seed);
    let pairs = configuration_pairs(&assign, config.pair_kind, config.config_pairs, &root.derive("pairs"));
    let key = root.derive("disorder");
    let products: Vec<Vec<f64>> = (0..config.draws as u64)
        .into_par_iter()
        .map(|d| {
            let g = disorder_draw(spec, &assign, &key, d)?;
            pairs
                .iter()
                .map(|(a, b)| Ok(super::hamiltonian(&g, a)? * super::hamiltonian(&g, b)? / n as f64))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let realized = assign.realized_lambda();
    let checks: Vec<CovarianceCheck> = pairs
        .iter()
        .enumerate()
        .map(|(p, (a, b))| {
            let r = species_overlaps(&assign, a, b)?.species;
            let theory_realized = spec.quadratic_form(&realized, &r, &r);
            let theory_limit = spec.covariance(&r);
            let theory = if config.use_realized_lambda { theory_realized } else { theory_limit };
            let col: Vec<f64> = products.iter().map(|row| row[p]).collect();
            let est = mean_se(&col);
            let rel = relative_error(est.mean, theory);
            Ok(CovarianceCheck {
                overlaps: r,
                theory,
                theory_realized,
                theory_limit,
                estimate: est.mean,
                se: est.se,
                relative_error: rel,
                pass: rel <= config.rel_tol,
            })
        })
        .collect::<Result<_>>()?;
    let max_relative_error = checks.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    Ok(CovarianceReport {
        n,
        draws: config.draws,
        pass: checks.iter().all(|c| c.pass),
        max_relative_error,
        checks,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CavityCheck {
    pub field: &'static str,
    pub overlaps: Vec<f64>,
    /// Large-N formula used as the reference.
    pub reference: f64,
    /// Exact finite-N covariance (includes the `N/(N+1)` factor and the
    /// realized proportions).
    pub finite_n: f64,
    pub estimate: f64,
    pub se: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CavityReport {
    pub n: usize,
    pub cavity_species: String,
    pub draws: usize,
    pub checks: Vec<CavityCheck>,
    pub pass: bool,
}

/// Cavity fields for one added spin (`k = 1`) of species `cavity_species`:
///
/// * `z(σ) = (N+1)^{-1/2} Σ_j (g_{0j} + g_{j0}) σ_j`, reference
///   `2 Σ_t Δ²_{st} λ_t R_t`;
/// * `y(σ) = (N(N+1))^{-1/2} Σ_{i,j} g'_{ij} σ_i σ_j`, reference
///   `Σ Δ²_{st} λ_s λ_t R_s R_t`.
///
/// A check passes when `|estimate − reference| ≤ rel_tol·|reference| + 2/N`.
pub fn empirical_cavity_covariance(
    spec: &ModelSpec,
    n: usize,
    cavity_species: &str,
    config: &CovarianceConfig,
) -> Result<CavityReport> {
    if config.draws < 100 {
        return Err(Error::config("covariance checks need at least 100 draws"));
    }
    let cs = spec
        .species_index(cavity_species)
        .ok_or_else(|| Error::config(format!("unknown species {cavity_species:?}")))?;
    let assign = assign_species(spec, n)?;
    let root = StreamKey::new(config.seed);
    let pairs = configuration_pairs(&assign, config.pair_kind, config.config_pairs, &root.derive("pairs"));
    let zkey = root.derive("cavity-z");
    let ykey = root.derive("cavity-y");
    let nf = n as f64;
    let sd: Vec<f64> = (0..n).map(|j| spec.delta_sq(cs, assign.species_of(j)).sqrt()).collect();
    let products: Vec<Vec<f64>> = (0..config.draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = zkey.stream(d);
            let coupling: Vec<f64> = sd
                .iter()
                .map(|&s| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    s * (a + b)
                })
                .collect();
            let g = disorder_draw(spec, &assign, &ykey, d)?;
            let z = |x: &[f64]| coupling.iter().zip(x).map(|(c, s)| c * s).sum::<f64>() / (nf + 1.0).sqrt();
            let y = |x: &[f64]| -> Result<f64> { Ok(super::hamiltonian(&g, x)? / (nf + 1.0).sqrt()) };
            let mut out = Vec::with_capacity(2 * pairs.len());
            for (a, b) in &pairs {
                out.push(z(a) * z(b));
                out.push(y(a)? * y(b)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let realized = assign.realized_lambda();
    let lambda = if config.use_realized_lambda { realized.clone() } else { spec.lambda().to_vec() };
    let shrink = nf / (nf + 1.0);
    let mut checks = Vec::new();
    for (p, (a, b)) in pairs.iter().enumerate() {
        let r = species_overlaps(&assign, a, b)?.species;
        let zfield = |lam: &[f64]| 2.0 * (0..spec.n_species()).map(|t| spec.delta_sq(cs, t) * lam[t] * r[t]).sum::<f64>();
        let candidates = [
            ("z", zfield(&lambda), shrink * zfield(&realized)),
            ("y", spec.quadratic_form(&lambda, &r, &r), shrink * spec.quadratic_form(&realized, &r, &r)),
        ];
        for (k, (field, reference, finite_n)) in candidates.into_iter().enumerate() {
            let col: Vec<f64> = products.iter().map(|row| row[2 * p + k]).collect();
            let est = mean_se(&col);
            let tolerance = config.rel_tol * reference.abs() + 2.0 / nf;
            checks.push(CavityCheck {
                field,
                overlaps: r.clone(),
                reference,
                finite_n,
                estimate: est.mean,
                se: est.se,
                tolerance,
                pass: (est.mean - reference).abs() <= tolerance,
            });
        }
    }
    Ok(CavityReport {
        n,
        cavity_species: cavity_species.to_string(),
        draws: config.draws,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}
