//! Minimization of the Parisi functional over RSB parameters.
//!
//! Every candidate is produced by a transform from unconstrained coordinates,
//! so each evaluation is a genuine value of `P` and the running best is a
//! valid upper bound. `ζ` comes from a sorted logistic map; each `q^s` from a
//! softmax over its `r` increments (first logit pinned to 0).

mod nelder_mead;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadOutcome};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::parisi::{ParisiEvaluator, QuadratureConfig, RsbParams};
use crate::rng::StreamKey;

const LOGIT_CLAMP: f64 = 30.0;

/// Note attached to every result: the optimizer keeps `q^s_0 = 0` and
/// `q^s_r = 1` fixed as in the variational formula.
pub const ENDPOINT_NOTE: &str = "q^s_0 = 0 and q^s_r = 1 are held fixed; the infimum is taken with pinned endpoints";

#[derive(Clone, Debug, Serialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_evals: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub initial_step: f64,
    pub r_max: usize,
    pub seed: u64,
    pub quad: QuadratureConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_evals: 3000,
            ftol: 1e-12,
            xtol: 1e-8,
            initial_step: 1.0,
            r_max: 3,
            seed: 0,
            quad: QuadratureConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::config("restarts must be at least 1"));
        }
        if !(self.ftol > 0.0 && self.xtol > 0.0 && self.initial_step > 0.0) {
            return Err(Error::config("tolerances and the initial step must be positive"));
        }
        if self.r_max == 0 {
            return Err(Error::config("r_max must be at least 1"));
        }
        self.quad.validate()
    }

    fn nm_options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_evals: self.max_evals,
            ftol: self.ftol,
            xtol: self.xtol,
            initial_step: self.initial_step,
            ..NelderMeadOptions::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub start: String,
    /// Best value after each simplex iteration.
    pub values: Vec<f64>,
    pub evals: usize,
    pub converged: bool,
    pub best: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizationResult {
    pub r: usize,
    #[serde(skip)]
    pub params: RsbParams,
    pub value: f64,
    pub x0: Vec<f64>,
    pub traces: Vec<RestartTrace>,
    pub evaluations: usize,
    pub converged: bool,
    pub note: &'static str,
}

/// Map between unconstrained coordinates and feasible parameters.
#[derive(Clone, Copy, Debug)]
pub struct Transform {
    r: usize,
    species: usize,
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln().clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

impl Transform {
    pub fn new(r: usize, species: usize) -> Self {
        Self { r, species }
    }

    pub fn dim(&self) -> usize {
        self.r + self.species * (self.r - 1)
    }

    pub fn decode(&self, u: &[f64]) -> RsbParams {
        let r = self.r;
        let mut zeta: Vec<f64> = u[..r].iter().map(|&v| logistic(v)).collect();
        zeta.sort_by(f64::total_cmp);
        for l in 1..r {
            if zeta[l] <= zeta[l - 1] {
                zeta[l] = zeta[l - 1].next_up();
            }
        }
        let q = (0..self.species)
            .map(|s| {
                let logits = &u[r + s * (r - 1)..r + (s + 1) * (r - 1)];
                let m = logits.iter().map(|v| v.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)).fold(0.0, f64::max);
                let e: Vec<f64> = std::iter::once(0.0)
                    .chain(logits.iter().cloned())
                    .map(|v| (v.clamp(-LOGIT_CLAMP, LOGIT_CLAMP) - m).exp())
                    .collect();
                let total: f64 = e.iter().sum();
                let mut seq = Vec::with_capacity(r + 1);
                seq.push(0.0);
                let mut acc = 0.0;
                for inc in &e[..r - 1] {
                    acc += inc / total;
                    seq.push(acc.min(1.0));
                }
                seq.push(1.0);
                seq
            })
            .collect();
        RsbParams::new(zeta, q).expect("transform always yields feasible parameters")
    }

    pub fn encode(&self, p: &RsbParams) -> Vec<f64> {
        let r = self.r;
        let mut u: Vec<f64> = p.zeta().iter().map(|&z| logit(z)).collect();
        for s in 0..self.species {
            let q = p.q(s);
            let floor = 1e-13;
            let first = (q[1] - q[0]).max(floor).ln();
            for l in 2..=r {
                u.push(((q[l] - q[l - 1]).max(floor).ln() - first).clamp(-LOGIT_CLAMP, LOGIT_CLAMP));
            }
        }
        u
    }
}

struct Start {
    label: String,
    u: Vec<f64>,
}

fn central_start(t: &Transform) -> Vec<f64> {
    let mut u: Vec<f64> = (0..t.r).map(|l| logit((l + 1) as f64 / (t.r + 1) as f64)).collect();
    u.extend(std::iter::repeat(0.0).take(t.species * (t.r - 1)));
    u
}

fn random_start(t: &Transform, key: &StreamKey, index: u64) -> Vec<f64> {
    let mut rng = key.stream(index);
    let mut u: Vec<f64> = (0..t.r).map(|_| logit(rng.random_range(0.05..0.95))).collect();
    u.extend((0..t.species * (t.r - 1)).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
    u
}

fn run_starts(
    spec: &ModelSpec,
    r: usize,
    config: &OptimizerConfig,
    starts: Vec<Start>,
    extra: Option<RsbParams>,
) -> Result<OptimizationResult> {
    let eval = ParisiEvaluator::new(config.quad)?;
    let t = Transform::new(r, spec.n_species());
    let opts = config.nm_options();
    let runs: Vec<(RestartTrace, NelderMeadOutcome)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| {
            let out = nelder_mead(
                |u| eval.value(spec, &t.decode(u)).unwrap_or(f64::INFINITY),
                &s.u,
                &opts,
            );
            let trace = RestartTrace {
                restart: i,
                start: s.label,
                values: out.trace.clone(),
                evals: out.evals,
                converged: out.converged,
                best: out.f,
            };
            (trace, out)
        })
        .collect();
    let mut best: Option<(f64, RsbParams)> = None;
    for (_, out) in &runs {
        if best.as_ref().map_or(true, |(v, _)| out.f < *v) {
            best = Some((out.f, t.decode(&out.x)));
        }
    }
    let mut evaluations: usize = runs.iter().map(|(_, o)| o.evals).sum();
    let (mut value, mut params) = best.expect("at least one restart");
    if let Some(p) = extra {
        evaluations += 1;
        let v = eval.value(spec, &p)?;
        if v <= value {
            value = v;
            params = p;
        }
    }
    let x0 = eval.evaluate(spec, &params)?.x0;
    Ok(OptimizationResult {
        r,
        params,
        value,
        x0,
        converged: runs.iter().any(|(t, _)| t.converged),
        traces: runs.into_iter().map(|(t, _)| t).collect(),
        evaluations,
        note: ENDPOINT_NOTE,
    })
}

/// Multi-start Nelder-Mead at a fixed number of levels. Restart 0 starts
/// from evenly spread `ζ` and equal increments, the others from seeded
/// random points.
pub fn minimize_at_level(spec: &ModelSpec, r: usize, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    if r == 0 {
        return Err(Error::config("r must be at least 1"));
    }
    let t = Transform::new(r, spec.n_species());
    let key = StreamKey::new(config.seed).derive("optimizer").derive_index(r as u64);
    let starts = (0..config.restarts)
        .map(|i| {
            if i == 0 {
                Start { label: "central".into(), u: central_start(&t) }
            } else {
                Start { label: "random".into(), u: random_start(&t, &key, i as u64) }
            }
        })
        .collect();
    run_starts(spec, r, config, starts, None)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSweep {
    pub levels: Vec<OptimizationResult>,
    pub best: usize,
}

impl LevelSweep {
    pub fn best(&self) -> &OptimizationResult {
        &self.levels[self.best]
    }

    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.value).collect()
    }
}

/// Runs `r = 1..=r_max`, warm-starting each level from the previous optimum
/// with one level duplicated. The duplicated parameters are evaluated as a
/// candidate too, so the values never increase with `r`.
pub fn infimum_over_levels(spec: &ModelSpec, config: &OptimizerConfig) -> Result<LevelSweep> {
    config.validate()?;
    let mut levels: Vec<OptimizationResult> = vec![minimize_at_level(spec, 1, config)?];
    for r in 2..=config.r_max {
        let prev = &levels[r - 2].params;
        let t = Transform::new(r, spec.n_species());
        let key = StreamKey::new(config.seed).derive("optimizer").derive_index(r as u64);
        // try inner duplications first: they add a genuinely new level
        let order: Vec<usize> = (1..r - 1).rev().chain([0, r - 1]).collect();
        // positions squeezed against a neighbour (ζ within an ulp) are skipped
        let warm: Vec<(usize, RsbParams)> = order
            .iter()
            .filter_map(|&j| prev.with_duplicate_level(j).ok().map(|p| (j, p)))
            .collect();
        let warm_best = warm.first().map(|(_, p)| p.clone());
        let mut starts: Vec<Start> = warm
            .iter()
            .take(config.restarts)
            .map(|(j, p)| Start { label: format!("warm-duplicate-{j}"), u: t.encode(p) })
            .collect();
        for i in starts.len()..config.restarts {
            starts.push(Start { label: "random".into(), u: random_start(&t, &key, i as u64) });
        }
        levels.push(run_starts(spec, r, config, starts, warm_best)?);
    }
    let mut best = 0;
    for (i, l) in levels.iter().enumerate() {
        if l.value < levels[best].value {
            best = i;
        }
    }
    Ok(LevelSweep { levels, best })
}

/// Central finite-difference gradient of `P` in the unconstrained
/// coordinates. Diagnostic only; the optimizer never uses it.
pub fn finite_difference_gradient(
    spec: &ModelSpec,
    params: &RsbParams,
    quad: &QuadratureConfig,
    h: f64,
) -> Result<Vec<f64>> {
    let eval = ParisiEvaluator::new(*quad)?;
    let t = Transform::new(params.r(), spec.n_species());
    let u = t.encode(params);
    (0..u.len())
        .map(|i| {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            Ok((eval.value(spec, &t.decode(&up))? - eval.value(spec, &t.decode(&dn))?) / (2.0 * h))
        })
        .collect()
}
