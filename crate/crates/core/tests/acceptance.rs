//! Acceptance battery: one PASS/FAIL line per criterion, with details.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported
//! but do not fail `cargo test` unless `MSPK_ACCEPTANCE_STRICT=1`.
//! `MSPK_ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.

use std::f64::consts::LN_2;
use std::time::Instant;

use mspk::model::{free_energy_mc, ModelSpec};
use mspk::optimizer::{infimum_over_levels, OptimizerConfig};
use mspk::parisi::{parisi_functional, QuadratureConfig, RsbParams};
use mspk::verify::{
    cascade_suite, covariance_suite, gg_suite, interpolation_suite, sync_suite, Check, Status, VerifyConfig,
    VerifyReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Budgets and tolerances.
const SIGMAS: f64 = 3.0;
const CASCADE_SAMPLES: usize = 100_000;
const CASCADE_M: usize = 200;
const CASCADE_RERUN: usize = 2_000;
const GUERRA_SIZES: [usize; 3] = [8, 12, 16];
const GUERRA_DRAWS: usize = 500;
const PHI_SAMPLES: usize = 10_000;
const PHI_N: usize = 10;
const PHI_M: usize = 50;
const GG_DRAWS: usize = 100_000;
const GG_N: usize = 3;
const GG_M: usize = 50;
const SYNC_DRAWS: usize = 10_000;
const QUAD_SETS: usize = 50;
const QUAD_TOL: f64 = 1e-6;
const ANNEALED_ZETA: f64 = 1.0 - 1e-8;
const SINGLE_DELTA_SQ: f64 = 0.09;
const SINGLE_SIZES: [usize; 3] = [12, 16, 20];
const SINGLE_DRAWS: usize = 500;
const SINGLE_TOL: f64 = 0.01;
const COVARIANCE_N: usize = 50;
const COVARIANCE_DRAWS: usize = 10_000;
const CAVITY_N: usize = 200;
const SEED: u64 = 20_240_917;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self { pass, summary: summary.into(), details: Vec::new() }
    }

    fn detail(mut self, line: impl Into<String>) -> Self {
        self.details.push(line.into());
        self
    }
}

fn reference() -> (ModelSpec, RsbParams) {
    let spec = ModelSpec::new(vec!["a", "b"], vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let params = RsbParams::new(vec![0.4, 0.8], vec![vec![0.0, 0.3, 1.0], vec![0.0, 0.5, 1.0]]).unwrap();
    (spec, params)
}

fn describe(c: &Check) -> String {
    let status = match c.status {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::NotAsserted => "info",
    };
    let mut s = format!("[{status}] {} = {:.6}", c.name, c.value);
    if let Some(t) = c.target {
        s.push_str(&format!(" target {t:.6}"));
    }
    if let Some(se) = c.se {
        s.push_str(&format!(" se {se:.2e}"));
    }
    if let Some(tol) = c.tolerance {
        s.push_str(&format!(" tol {tol:.2e}"));
    }
    if let Some(n) = &c.note {
        s.push_str(&format!(" ({n})"));
    }
    s
}

fn from_checks<'a>(summary: &str, checks: impl IntoIterator<Item = &'a Check>) -> Outcome {
    let checks: Vec<&Check> = checks.into_iter().collect();
    let pass = !checks.is_empty() && checks.iter().all(|c| c.status != Status::Fail);
    let mut o = Outcome::new(pass, format!("{summary} ({} checks)", checks.len()));
    o.details = checks.iter().map(|c| describe(c)).collect();
    o
}

fn cascade_report() -> VerifyReport {
    let (spec, params) = reference();
    let cfg = VerifyConfig {
        samples: CASCADE_SAMPLES,
        m: CASCADE_M,
        rerun_samples: CASCADE_RERUN,
        sigmas: SIGMAS,
        seed: SEED,
        ..VerifyConfig::default()
    };
    cascade_suite(&spec, &params, &cfg).unwrap()
}

fn criterion_1(report: &VerifyReport) -> Outcome {
    from_checks(
        "cascade identity I: log sum v ch C^s vs X^s_0, M = 200, and truncation residual at M = 400",
        report.checks.iter().filter(|c| c.name.contains("log-ch")),
    )
}

fn criterion_2(report: &VerifyReport) -> Outcome {
    from_checks(
        "cascade identity II: log sum v exp(tD) vs (t^2/2) sum zeta dQ at t = 1, 2",
        report.checks.iter().filter(|c| c.name.contains("log-exp") && !c.name.starts_with("truncation")),
    )
}

fn optimizer_config() -> OptimizerConfig {
    OptimizerConfig { r_max: 3, seed: SEED, ..OptimizerConfig::default() }
}

fn criterion_3() -> Outcome {
    let (spec, _) = reference();
    let sweep = infimum_over_levels(&spec, &optimizer_config()).unwrap();
    let best = sweep.best().value;
    let mut pass = true;
    let mut details = vec![format!("optimizer inf P = {best:.8} at r = {}", sweep.best().r)];
    let mut gaps = Vec::new();
    for n in GUERRA_SIZES {
        let fe = free_energy_mc(&spec, n, GUERRA_DRAWS, SEED).unwrap();
        let e = fe.estimate;
        let ok = e.mean <= best + SIGMAS * e.se;
        pass &= ok;
        details.push(format!("N = {n}: F_N = {:.6} ± {:.2e}, gap {:.6} ({})", e.mean, e.se, best - e.mean, ok));
        gaps.push((best - e.mean, e.se));
    }
    for w in gaps.windows(2) {
        let tol = SIGMAS * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        let ok = w[1].0 <= w[0].0 + tol;
        pass &= ok;
        details.push(format!("gap {:.6} -> {:.6} non-increasing within {tol:.2e}: {ok}", w[0].0, w[1].0));
    }
    let mut o = Outcome::new(pass, "Guerra bound F_N <= inf P at N = 8, 12, 16 with non-increasing gap");
    o.details = details;
    o
}

fn criterion_4() -> Outcome {
    let (spec, params) = reference();
    let cfg = VerifyConfig { samples: PHI_SAMPLES, m: PHI_M, n_spins: PHI_N, sigmas: SIGMAS, seed: SEED, ..VerifyConfig::default() };
    let report = interpolation_suite(&spec, &params, &cfg).unwrap();
    from_checks("interpolation phi(x) non-increasing, endpoint decompositions", &report.checks)
}

fn criterion_5_6(gg: &VerifyReport, sync: &VerifyReport) -> (Outcome, Outcome) {
    let five = from_checks(
        "Ghirlanda-Guerra battery on cascade overlaps, n = 3",
        gg.checks.iter().filter(|c| c.name.starts_with("delta")),
    );
    let six = from_checks(
        "ultrametricity: zero violation on cascades, 0.8 on the adversarial array",
        gg.checks.iter().chain(&sync.checks).filter(|c| c.name.starts_with("ultrametricity")),
    );
    (five, six)
}

fn criterion_7(sync: &VerifyReport) -> Outcome {
    from_checks(
        "synchronization: exact isotonic fit, knot recovery, Lipschitz bounds",
        sync.checks.iter().filter(|c| !c.name.starts_with("ultrametricity")),
    )
}

fn random_params(rng: &mut ChaCha8Rng, r: usize, species: usize) -> RsbParams {
    let mut zeta: Vec<f64> = (0..r).map(|_| rng.random_range(0.02..0.98)).collect();
    zeta.sort_by(f64::total_cmp);
    for i in 1..r {
        if zeta[i] <= zeta[i - 1] {
            zeta[i] = zeta[i - 1] + 1e-3;
        }
    }
    let q = (0..species)
        .map(|_| {
            let mut inner: Vec<f64> = (0..r - 1).map(|_| rng.random_range(0.0..1.0)).collect();
            inner.sort_by(f64::total_cmp);
            let mut q = vec![0.0];
            q.extend(inner);
            q.push(1.0);
            q
        })
        .collect();
    RsbParams::new(zeta, q).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, species: usize) -> ModelSpec {
    let mut lambda: Vec<f64> = (0..species).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= total);
    let mut d = vec![vec![0.0; species]; species];
    for s in 0..species {
        for t in s..species {
            let v = rng.random_range(0.05..1.5);
            d[s][t] = v;
            d[t][s] = v;
        }
    }
    let labels: Vec<String> = (0..species).map(|s| format!("s{s}")).collect();
    ModelSpec::new(labels, lambda, d).unwrap()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let grid = QuadratureConfig::default();
    let nested = QuadratureConfig::nested();
    let mut worst: f64 = 0.0;
    for k in 0..QUAD_SETS {
        let species = 1 + k % 3;
        let r = 1 + (k / 3) % 3;
        let spec = random_model(&mut rng, species);
        let params = random_params(&mut rng, r, species);
        let a = parisi_functional(&spec, &params, &grid).unwrap().value;
        let b = parisi_functional(&spec, &params, &nested).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    let (spec, _) = reference();
    let annealed = RsbParams::new(vec![ANNEALED_ZETA], vec![vec![0.0, 1.0]; 2]).unwrap();
    let target = LN_2 + 0.5 * spec.covariance(&[1.0, 1.0]);
    let mut annealed_err: f64 = 0.0;
    for quad in [grid, nested] {
        let v = parisi_functional(&spec, &annealed, &quad).unwrap().value;
        annealed_err = annealed_err.max((v - target).abs());
    }
    let pass = worst <= QUAD_TOL && annealed_err <= QUAD_TOL;
    Outcome::new(pass, "grid vs nested quadrature on 50 random sets, annealed limit")
        .detail(format!("max |grid - nested| = {worst:.3e} (tol {QUAD_TOL:.0e})"))
        .detail(format!("annealed |P - (log 2 + half sum)| = {annealed_err:.3e} (tol {QUAD_TOL:.0e})"))
}

/// Least-squares fit `F = a + b/N` with the intercept's standard error from
/// the per-point SEs.
fn extrapolate(points: &[(usize, f64, f64)]) -> (f64, f64) {
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0 as f64).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum();
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * x * x).sum();
    let sy: f64 = w.iter().zip(points).map(|(w, p)| w * p.1).sum();
    let sxy: f64 = w.iter().zip(&x).zip(points).map(|((w, x), p)| w * x * p.1).sum();
    let det = sw * sxx - sx * sx;
    let a = (sxx * sy - sx * sxy) / det;
    (a, (sxx / det).sqrt())
}

fn criterion_9() -> Outcome {
    let spec = ModelSpec::single(SINGLE_DELTA_SQ).unwrap();
    let sweep = infimum_over_levels(&spec, &optimizer_config()).unwrap();
    let inf_p = sweep.best().value;
    let mut points = Vec::new();
    for n in SINGLE_SIZES {
        let e = free_energy_mc(&spec, n, SINGLE_DRAWS, SEED).unwrap().estimate;
        points.push((n, e.mean, e.se));
    }
    let f20 = points.last().unwrap();
    let near = (inf_p - f20.1).abs() <= SINGLE_TOL;
    let (limit, limit_se) = extrapolate(&points);
    let quoted = LN_2 + SINGLE_DELTA_SQ / 4.0;
    let consistent = (limit - quoted).abs() <= SIGMAS * limit_se;
    let mut o = Outcome::new(near && consistent, "single-species reduction, delta^2 = 0.09")
        .detail(format!("inf P = {inf_p:.6} (r = {}), annealed log 2 + delta^2/2 = {:.6}", sweep.best().r, spec.annealed_value()))
        .detail(format!("(a) |inf P - F_20| = {:.6} (tol {SINGLE_TOL}): {near}", (inf_p - f20.1).abs()));
    for p in &points {
        o = o.detail(format!("F_{} = {:.6} ± {:.2e}", p.0, p.1, p.2));
    }
    o.detail(format!(
        "(b) trend a + b/N gives a = {limit:.6} ± {limit_se:.2e}; quoted log 2 + delta^2/4 = {quoted:.6}: {consistent}"
    ))
    .detail(format!("    distance to log 2 + delta^2/2: {:.2e}", (limit - spec.annealed_value()).abs()))
}

fn criterion_10() -> Outcome {
    let (spec, _) = reference();
    let mut cfg = VerifyConfig {
        covariance_n: COVARIANCE_N,
        cavity_n: CAVITY_N,
        seed: SEED,
        ..VerifyConfig::default()
    };
    cfg.covariance.draws = COVARIANCE_DRAWS;
    let report = covariance_suite(&spec, &cfg).unwrap();
    from_checks("Hamiltonian covariance N = 50, cavity covariances N = 200", &report.checks)
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let only: Option<Vec<usize>> = std::env::var("MSPK_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let strict = std::env::var("MSPK_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut timed = |k: &[usize], f: &mut dyn FnMut() -> Vec<Outcome>| {
        if !k.iter().any(|&k| wanted(k)) {
            return;
        }
        let t = Instant::now();
        let outs = f();
        let secs = t.elapsed().as_secs_f64();
        for (&k, o) in k.iter().zip(outs) {
            if wanted(k) {
                print_outcome(k, &o, secs);
                results.push((k, o, secs));
            }
        }
    };
    timed(&[1, 2], &mut || {
        let r = cascade_report();
        vec![criterion_1(&r), criterion_2(&r)]
    });
    timed(&[3], &mut || vec![criterion_3()]);
    timed(&[4], &mut || vec![criterion_4()]);
    timed(&[5, 6, 7], &mut || {
        let (spec, params) = reference();
        let gg_cfg =
            VerifyConfig { samples: GG_DRAWS, m: GG_M, gg_n: GG_N, sigmas: SIGMAS, seed: SEED, ..VerifyConfig::default() };
        let gg = gg_suite(&spec, &params, &gg_cfg).unwrap();
        let sync_cfg = VerifyConfig { samples: SYNC_DRAWS, ..gg_cfg };
        let sync = sync_suite(&spec, &params, &sync_cfg).unwrap();
        let (five, six) = criterion_5_6(&gg, &sync);
        vec![five, six, criterion_7(&sync)]
    });
    timed(&[8], &mut || vec![criterion_8()]);
    timed(&[9], &mut || vec![criterion_9()]);
    timed(&[10], &mut || vec![criterion_10()]);

    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!();
    println!("acceptance summary");
    for (k, o, secs) in &results {
        println!("criterion {k:>2}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}

fn print_outcome(k: usize, o: &Outcome, secs: f64) {
    println!("criterion {k:>2} {}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.summary);
    for d in &o.details {
        println!("    {d}");
    }
}
