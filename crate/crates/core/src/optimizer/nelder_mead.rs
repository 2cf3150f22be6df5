//! Nelder-Mead simplex minimization with standard coefficients
//! (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Converged when the spread of simplex values is at most `ftol`...
    pub ftol: f64,
    /// ...and every vertex lies within `xtol` (max-norm) of the best one.
    pub xtol: f64,
    pub initial_step: f64,
    /// Fresh simplices built around the best point after convergence.
    pub polish_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 4000, ftol: 1e-12, xtol: 1e-8, initial_step: 1.0, polish_restarts: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        v
    }
}

pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadOutcome {
    let mut obj = Counted { f, evals: 0, best_x: x0.to_vec(), best_f: f64::INFINITY };
    let mut trace = Vec::new();
    let mut start = x0.to_vec();
    let mut converged = false;
    for round in 0..=opts.polish_restarts {
        let before = obj.best_f;
        converged = run_simplex(&mut obj, &start, opts, &mut trace);
        if !converged || obj.evals >= opts.max_evals {
            break;
        }
        if round > 0 && before - obj.best_f <= opts.ftol {
            break;
        }
        start = obj.best_x.clone();
    }
    NelderMeadOutcome { x: obj.best_x, f: obj.best_f, evals: obj.evals, trace, converged }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    opts: &NelderMeadOptions,
    trace: &mut Vec<f64>,
) -> bool {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    for p in &pts {
        if obj.evals >= opts.max_evals {
            return false;
        }
        vals.push(obj.call(p));
    }
    loop {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        trace.push(obj.best_f);
        let fspread = vals[n] - vals[0];
        let xspread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fspread <= opts.ftol && xspread <= opts.xtol {
            return true;
        }
        if obj.evals + n + 2 > opts.max_evals {
            return false;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = obj.call(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = obj.call(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(0.5);
            let fc = obj.call(&xc);
            (xc, if fc <= fr { fc } else { f64::INFINITY })
        } else {
            let xc = along(-0.5);
            let fc = obj.call(&xc);
            (xc, if fc < vals[n] { fc } else { f64::INFINITY })
        };
        if fc.is_finite() {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(a, b)| b + 0.5 * (a - b)).collect();
            vals[i] = obj.call(&p);
            pts[i] = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(rosen, &[-1.2, 1.0], &NelderMeadOptions { max_evals: 5000, ..Default::default() });
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn flat_objective_converges() {
        let out = nelder_mead(|_| 3.0, &[0.0, 0.0, 0.0], &NelderMeadOptions::default());
        assert!(out.converged);
        assert_eq!(out.f, 3.0);
    }

    #[test]
    fn budget_is_respected() {
        let opts = NelderMeadOptions { max_evals: 30, ..Default::default() };
        let out = nelder_mead(|x| x.iter().map(|v| (v - 3.0).powi(2)).sum(), &[0.0; 4], &opts);
        assert!(!out.converged);
        assert!(out.evals <= 30);
    }
}
