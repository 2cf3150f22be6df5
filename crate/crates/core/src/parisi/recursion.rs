use super::{path_sequences, ParisiValue, PathSequences, QuadratureConfig, QuadratureMode, RsbParams};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quadrature::GaussHermite;
use crate::stats::log_cosh;

const ZETA_FLOOR: f64 = 1e-10;
const INCREMENT_TOL: f64 = 1e-13;

/// `ζ^{-1} log Σ_k w_k exp(ζ x_k)` with weights summing to one.
///
/// The sum is shifted by the weighted mean so the small-`ζ` regime goes
/// through `expm1`/`ln_1p`; below `1e-10` the limit `Σ w_k x_k` is returned.
pub fn soft_mean(zeta: f64, values: &[f64], weights: &[f64]) -> f64 {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    if zeta < ZETA_FLOOR {
        return mean;
    }
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if zeta * (top - mean) > 600.0 {
        let acc: f64 = values.iter().zip(weights).map(|(v, w)| w * (zeta * (v - top)).exp()).sum();
        return top + acc.ln() / zeta;
    }
    let acc: f64 = values.iter().zip(weights).map(|(v, w)| w * (zeta * (v - mean)).exp_m1()).sum();
    mean + acc.ln_1p() / zeta
}

/// Increments `Q^s_{ℓ+1} − Q^s_ℓ` with tiny negative rounding clipped to 0.
fn increments(seq: &[f64]) -> Result<Vec<f64>> {
    seq.windows(2)
        .enumerate()
        .map(|(l, w)| {
            let d = w[1] - w[0];
            if d < -INCREMENT_TOL * (1.0 + w[1].abs()) {
                Err(Error::params(format!("path sequence decreases between levels {l} and {}", l + 1)))
            } else {
                Ok(d.max(0.0))
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Grid {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

impl Grid {
    #[inline]
    fn x(&self, i: usize) -> f64 {
        self.x0 + self.h * i as f64
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let g = self.values.len();
        let t = (x - self.x0) / self.h;
        if t < 0.0 {
            return self.values[0] + (self.x0 - x);
        }
        let last = (g - 1) as f64;
        if t > last {
            return self.values[g - 1] + (x - self.x(g - 1));
        }
        let i = (t.floor() as usize).clamp(1, g - 3);
        let u = t - i as f64;
        let w = cubic_weights(u);
        let v = &self.values[i - 1..i + 3];
        w[0] * v[0] + w[1] * v[1] + w[2] * v[2] + w[3] * v[3]
    }
}

/// Lagrange weights for nodes at -1, 0, 1, 2.
#[inline]
fn cubic_weights(u: f64) -> [f64; 4] {
    [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ]
}

enum LevelFn {
    LogCosh,
    Grid(Grid),
}

impl LevelFn {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self {
            LevelFn::LogCosh => log_cosh(x),
            LevelFn::Grid(g) => g.eval(x),
        }
    }
}

/// Evaluates `P` with a cached Hermite rule.
#[derive(Clone, Debug)]
pub struct ParisiEvaluator {
    quad: QuadratureConfig,
    rule: GaussHermite,
}

impl ParisiEvaluator {
    pub fn new(quad: QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        Ok(Self { rule: GaussHermite::new(quad.hermite_nodes)?, quad })
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn evaluate(&self, spec: &ModelSpec, params: &RsbParams) -> Result<ParisiValue> {
        self.quad.validate_for(params.r())?;
        let paths = path_sequences(spec, params)?;
        let x0 = self.x0_from_paths(params.zeta(), &paths)?;
        let value = std::f64::consts::LN_2
            + x0.iter().zip(spec.lambda()).map(|(x, l)| l * x).sum::<f64>()
            - paths.half_zeta_increment_sum(params.zeta());
        Ok(ParisiValue { value, x0, paths })
    }

    pub fn value(&self, spec: &ModelSpec, params: &RsbParams) -> Result<f64> {
        Ok(self.evaluate(spec, params)?.value)
    }

    pub fn x0_from_paths(&self, zeta: &[f64], paths: &PathSequences) -> Result<Vec<f64>> {
        paths
            .species
            .iter()
            .map(|seq| species_recursion(zeta, seq, &self.quad, &self.rule))
            .collect()
    }
}

/// `X_0(0)` for one species path sequence `Q^s_0..Q^s_r`.
pub fn species_recursion(zeta: &[f64], qs: &[f64], quad: &QuadratureConfig, rule: &GaussHermite) -> Result<f64> {
    let r = zeta.len();
    Error::check_len(r + 1, qs.len())?;
    quad.validate_for(r)?;
    let inc = increments(qs)?;
    let total: f64 = inc.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    match quad.mode {
        QuadratureMode::NestedExact => Ok(nested(zeta, &inc, rule, r, 0, 0.0)),
        QuadratureMode::Grid => Ok(grid(zeta, &inc, total, quad, rule)),
    }
}

/// `X_level(x)` by recursion over the full tensor product of nodes.
fn nested(zeta: &[f64], inc: &[f64], rule: &GaussHermite, r: usize, level: usize, x: f64) -> f64 {
    if level == r {
        return log_cosh(x);
    }
    let v = inc[level];
    if v == 0.0 {
        return nested(zeta, inc, rule, r, level + 1, x);
    }
    let sd = v.sqrt();
    let vals: Vec<f64> = rule
        .nodes()
        .iter()
        .map(|z| nested(zeta, inc, rule, r, level + 1, x + sd * z))
        .collect();
    soft_mean(zeta[level], &vals, rule.weights())
}

fn grid(zeta: &[f64], inc: &[f64], total: f64, quad: &QuadratureConfig, rule: &GaussHermite) -> f64 {
    let r = zeta.len();
    let g = quad.grid_points;
    let half = quad.grid_halfwidth_sigmas * total.sqrt();
    let x0 = -half;
    let h = 2.0 * half / (g - 1) as f64;
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut f = LevelFn::LogCosh;
    let mut vals = vec![0.0; nodes.len()];
    // tabulate levels r-1 down to 1; level 0 is only needed at x = 0
    for level in (1..r).rev() {
        let v = inc[level];
        if v == 0.0 {
            continue;
        }
        let sd = v.sqrt();
        let mut out = vec![0.0; g];
        match &f {
            LevelFn::LogCosh => {
                for (i, o) in out.iter_mut().enumerate() {
                    let x = x0 + h * i as f64;
                    for (val, z) in vals.iter_mut().zip(nodes) {
                        *val = log_cosh(x + sd * z);
                    }
                    *o = soft_mean(zeta[level], &vals, weights);
                }
            }
            LevelFn::Grid(src) => {
                // each node shifts the grid by a fixed offset, so the
                // interpolation weights are shared by all grid points
                let stencils: Vec<(isize, [f64; 4])> = nodes
                    .iter()
                    .map(|z| {
                        let d = sd * z / h;
                        let s = d.floor();
                        (s as isize, cubic_weights(d - s))
                    })
                    .collect();
                for (i, o) in out.iter_mut().enumerate() {
                    for (k, val) in vals.iter_mut().enumerate() {
                        let (shift, w) = stencils[k];
                        let c = i as isize + shift;
                        *val = if c >= 1 && c + 2 < g as isize {
                            let c = c as usize;
                            let y = &src.values[c - 1..c + 3];
                            w[0] * y[0] + w[1] * y[1] + w[2] * y[2] + w[3] * y[3]
                        } else {
                            src.eval(src.x(i) + sd * nodes[k])
                        };
                    }
                    *o = soft_mean(zeta[level], &vals, weights);
                }
            }
        }
        f = LevelFn::Grid(Grid { x0, h, values: out });
    }
    let v = inc[0];
    if v == 0.0 {
        return f.eval(0.0);
    }
    let sd = v.sqrt();
    for (val, z) in vals.iter_mut().zip(nodes) {
        *val = f.eval(sd * z);
    }
    soft_mean(zeta[0], &vals, weights)
}
