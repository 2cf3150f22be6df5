use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mspk::cascades::{cascade_overlap_sample, CascadeConfig};
use mspk::io::{read_json, read_model, read_overlap_csv, read_params, write_csv, write_disorder, write_json, format_f64};
use mspk::model::{assign_species, free_energy_mc, sample_disorder, ModelSpec};
use mspk::optimizer::{infimum_over_levels, OptimizerConfig, ENDPOINT_NOTE};
use mspk::parisi::parisi_functional;
use mspk::replica::{
    fit_synchronization, gg_delta, gibbs_replica_samples, median_overlap, GibbsConfig, PerturbationSpec, TestFunction,
};
use mspk::verify::{run_suite, Status, Suite, VerifyConfig};
use mspk::{io, Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::manifest::{digest, sha256_file, RunManifest};

/// Resolved global settings shared by every command.
pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// What a command read, wrote and decided.
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    /// File names inside the output directory.
    pub outputs: Vec<String>,
    pub config: Value,
    pub pass: bool,
}

impl Outcome {
    fn new(inputs: Vec<PathBuf>, config: impl Serialize) -> Self {
        let config = serde_json::to_value(config).unwrap_or(Value::Null);
        Self { inputs, outputs: Vec::new(), config, pass: true }
    }
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn json(&self, out: &mut Outcome, name: &str, value: &impl Serialize) -> Result<()> {
        write_json(&self.path(name), value)?;
        out.outputs.push(name.to_string());
        Ok(())
    }

    fn csv(&self, out: &mut Outcome, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_csv(&self.path(name), header, rows)?;
        out.outputs.push(name.to_string());
        Ok(())
    }
}

pub fn execute(cmd: &Command, ctx: &Context) -> Result<Outcome> {
    match cmd {
        Command::ParisiEval(a) => parisi_eval(a, ctx),
        Command::ParisiOpt(a) => parisi_opt(a, ctx),
        Command::FreeEnergy(a) => free_energy(a, ctx),
        Command::Verify(a) => verify(a, ctx),
        Command::CascadeSample(a) => cascade_sample(a, ctx),
        Command::GibbsSample(a) => gibbs_sample(a, ctx),
        Command::GgDelta(a) => gg(a, ctx),
        Command::SyncFit(a) => sync_fit(a, ctx),
        Command::Rerun(a) => rerun(a, ctx),
    }
}

fn by_species<T: Clone>(spec: &ModelSpec, values: &[T]) -> BTreeMap<String, T> {
    spec.species().iter().cloned().zip(values.iter().cloned()).collect()
}

fn parisi_eval(a: &ParisiEvalArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let params = read_params(&a.params, &spec)?;
    let quad = a.quad.config();
    let v = parisi_functional(&spec, &params, &quad)?;
    let mut out = Outcome::new(vec![a.model.clone(), a.params.clone()], json!({ "quad": quad }));
    let doc = json!({
        "P": v.value,
        "X0": by_species(&spec, &v.x0),
        "Q": { "combined": v.paths.combined, "species": by_species(&spec, &v.paths.species) },
        "params": params.to_raw(&spec),
        "quad": quad,
    });
    ctx.json(&mut out, "parisi_eval.json", &doc)?;
    println!("P = {}", format_f64(v.value));
    Ok(out)
}

fn parisi_opt(a: &ParisiOptArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let cfg = OptimizerConfig {
        restarts: a.restarts,
        max_evals: a.max_evals,
        r_max: a.r_max,
        seed: ctx.seed,
        quad: a.quad.config(),
        ..OptimizerConfig::default()
    };
    let sweep = infimum_over_levels(&spec, &cfg)?;
    let best = sweep.best();
    let mut out = Outcome::new(vec![a.model.clone()], &cfg);
    let levels: Vec<Value> = sweep
        .levels
        .iter()
        .map(|l| json!({ "result": l, "params": l.params.to_raw(&spec) }))
        .collect();
    let doc = json!({
        "best": { "r": best.r, "value": best.value, "params": best.params.to_raw(&spec), "x0": by_species(&spec, &best.x0) },
        "levels": levels,
        "note": ENDPOINT_NOTE,
    });
    ctx.json(&mut out, "parisi_opt.json", &doc)?;
    let mut trace = Vec::new();
    for l in &sweep.levels {
        for t in &l.traces {
            for (i, v) in t.values.iter().enumerate() {
                trace.push(vec![l.r.to_string(), t.restart.to_string(), i.to_string(), format_f64(*v)]);
            }
        }
    }
    ctx.csv(&mut out, "parisi_opt_trace.csv", &["r", "restart", "iteration", "value"], &trace)?;
    let rows: Vec<Vec<String>> = sweep.levels.iter().map(|l| vec![l.r.to_string(), format_f64(l.value)]).collect();
    ctx.csv(&mut out, "parisi_opt_levels.csv", &["r", "value"], &rows)?;
    for l in &sweep.levels {
        println!("r = {}: P = {}", l.r, format_f64(l.value));
    }
    println!("best r = {}: P = {}", best.r, format_f64(best.value));
    Ok(out)
}

fn free_energy(a: &FreeEnergyArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let fe = free_energy_mc(&spec, a.n, a.samples, ctx.seed)?;
    let mut out = Outcome::new(vec![a.model.clone()], json!({ "n": a.n, "samples": a.samples }));
    let doc = json!({
        "n": fe.n,
        "F": fe.estimate.mean,
        "se": fe.estimate.se,
        "samples": fe.estimate.n,
        "realized_lambda": fe.realized_lambda,
        "annealed": spec.annealed_value(),
        "per_draw": fe.per_draw,
    });
    ctx.json(&mut out, "free_energy.json", &doc)?;
    if a.save_disorder {
        let d = sample_disorder(&spec, &assign_species(&spec, a.n)?, ctx.seed)?;
        write_disorder(&ctx.path("disorder.bin"), &d)?;
        out.outputs.push("disorder.bin".into());
    }
    println!("F_{} = {} ± {}", a.n, format_f64(fe.estimate.mean), format_f64(fe.estimate.se));
    Ok(out)
}

fn verify(a: &VerifyArgs, ctx: &Context) -> Result<Outcome> {
    let suite: Suite = a.suite.parse()?;
    let spec = read_model(&a.model)?;
    let params = a.params.as_deref().map(|p| read_params(p, &spec)).transpose()?;
    let mut cfg = VerifyConfig {
        samples: a.samples,
        m: a.m,
        rerun_samples: a.rerun_samples,
        n_spins: a.n_spins,
        quad: a.quad.config(),
        seed: ctx.seed,
        ..VerifyConfig::default()
    };
    cfg.covariance.draws = a.draws;
    let report = run_suite(suite, &spec, params.as_ref(), &cfg)?;
    let mut inputs = vec![a.model.clone()];
    inputs.extend(a.params.clone());
    let mut out = Outcome::new(inputs, &cfg);
    ctx.json(&mut out, &format!("verify_{}.json", a.suite), &report)?;
    if suite == Suite::Interpolation {
        let rows: Vec<Vec<String>> = report
            .checks
            .iter()
            .filter(|c| c.note.as_deref() == Some("estimate"))
            .map(|c| {
                let x = c.name.trim_start_matches("phi(").trim_end_matches(')');
                vec![x.to_string(), format_f64(c.value), format_f64(c.se.unwrap_or(f64::NAN))]
            })
            .collect();
        ctx.csv(&mut out, "phi.csv", &["x", "phi", "se"], &rows)?;
    }
    for c in &report.checks {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotAsserted => "----",
        };
        let note = c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
        println!("{status} {}: {}{note}", c.name, format_f64(c.value));
    }
    out.pass = report.pass;
    Ok(out)
}

fn cascade_sample(a: &CascadeSampleArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let params = read_params(&a.params, &spec)?;
    let cfg = CascadeConfig::uniform(a.m);
    let sample = cascade_overlap_sample(&spec, &params, a.combined.as_deref(), &cfg, a.n, a.samples, ctx.seed)?;
    let mut out = Outcome::new(vec![a.model.clone(), a.params.clone()], json!({ "cascade": cfg, "n": a.n, "samples": a.samples }));
    io::write_overlap_csv(&ctx.path("overlaps.csv"), &sample)?;
    out.outputs.push("overlaps.csv".into());
    println!("wrote {} overlap arrays", sample.len());
    Ok(out)
}

fn gibbs_sample(a: &GibbsSampleArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let cfg = GibbsConfig {
        replicas: a.replicas,
        draws: a.draws,
        seed: ctx.seed,
        perturbation: a.p_max.map(|p| PerturbationSpec::new(spec.n_species(), p, a.gamma)),
    };
    let sample = gibbs_replica_samples(&spec, a.n_spins, &cfg)?;
    let mut out = Outcome::new(vec![a.model.clone()], json!({ "gibbs": cfg, "n_spins": a.n_spins }));
    io::write_overlap_csv(&ctx.path("overlaps.csv"), &sample)?;
    out.outputs.push("overlaps.csv".into());
    println!("wrote {} overlap arrays", sample.len());
    Ok(out)
}

fn gg(a: &GgDeltaArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let sample = read_overlap_csv(&a.overlaps, spec.species(), spec.lambda())?;
    let w = a.w.clone().unwrap_or_else(|| vec![1.0; spec.n_species()]);
    let f = match a.f {
        TestFunctionKind::Const => TestFunction::Constant { value: 1.0 },
        TestFunctionKind::Indicator => TestFunction::indicator(a.threshold.unwrap_or_else(|| median_overlap(&sample))),
        TestFunctionKind::Monomial => TestFunction::degree_two(a.n),
    };
    let d = gg_delta(&sample, &f, a.n, &w, a.p)?;
    let config = json!({ "f": f, "n": a.n, "p": a.p, "w": w });
    let mut out = Outcome::new(vec![a.model.clone(), a.overlaps.clone()], &config);
    let doc = json!({
        "statistic": f.name(),
        "value": d.value,
        "signed": d.signed,
        "se": d.se,
        "terms": d.terms,
        "draws": d.draws,
        "config": config,
    });
    ctx.json(&mut out, "gg_delta.json", &doc)?;
    println!("Delta[{}] = {} ± {}", f.name(), format_f64(d.value), format_f64(d.se));
    Ok(out)
}

fn sync_fit(a: &SyncFitArgs, ctx: &Context) -> Result<Outcome> {
    let spec = read_model(&a.model)?;
    let sample = read_overlap_csv(&a.overlaps, spec.species(), spec.lambda())?;
    let fit = fit_synchronization(&sample)?;
    let mut out = Outcome::new(vec![a.model.clone(), a.overlaps.clone()], json!({}));
    ctx.json(&mut out, "sync_fit.json", &fit)?;
    let mut rows = Vec::new();
    for s in &fit.species {
        for (r, l) in &s.knots {
            rows.push(vec![s.species.clone(), format_f64(*r), format_f64(*l)]);
        }
    }
    ctx.csv(&mut out, "sync_fit.csv", &["species", "R", "L"], &rows)?;
    for s in &fit.species {
        println!(
            "{}: {} knots, max residual {}, Lipschitz {} (bound {})",
            s.species,
            s.knots.len(),
            format_f64(s.max_residual),
            format_f64(s.lipschitz),
            format_f64(s.lipschitz_bound)
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct Comparison {
    path: PathBuf,
    expected: String,
    actual: Option<String>,
    matches: bool,
}

fn rerun(a: &RerunArgs, ctx: &Context) -> Result<Outcome> {
    let manifest: RunManifest = read_json(&a.manifest)?;
    if matches!(manifest.args, Command::Rerun(_)) {
        return Err(Error::InvalidConfig("a rerun manifest cannot be re-run".into()));
    }
    for input in &manifest.inputs {
        let now = digest(&input.path, input.path.clone())?;
        if now.sha256 != input.sha256 {
            return Err(Error::InvalidConfig(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let inner = Context { seed: manifest.seed, out_dir: ctx.out_dir.clone() };
    let result = execute(&manifest.args, &inner)?;
    let comparisons: Vec<Comparison> = manifest
        .outputs
        .iter()
        .map(|o| {
            let actual = sha256_file(&ctx.out_dir.join(&o.path)).ok();
            let matches = actual.as_deref() == Some(o.sha256.as_str());
            Comparison { path: o.path.clone(), expected: o.sha256.clone(), actual, matches }
        })
        .collect();
    let pass = comparisons.iter().all(|c| c.matches) && result.outputs.len() == manifest.outputs.len();
    let mut out = Outcome::new(vec![a.manifest.clone()], json!({ "command": manifest.command, "seed": manifest.seed }));
    out.outputs = result.outputs;
    ctx.json(&mut out, "rerun.json", &json!({ "command": manifest.command, "outputs": comparisons, "pass": pass }))?;
    for c in &comparisons {
        println!("{} {}", if c.matches { "match" } else { "MISMATCH" }, c.path.display());
    }
    out.pass = pass;
    Ok(out)
}

/// Writes `<command>.manifest.json` next to the outputs.
pub fn write_manifest(cmd: &Command, ctx: &Context, outcome: &Outcome, seconds: f64) -> Result<()> {
    let inputs = outcome
        .inputs
        .iter()
        .map(|p| digest(p, p.clone()))
        .collect::<Result<Vec<_>>>()?;
    let outputs = outcome
        .outputs
        .iter()
        .map(|name| digest(&ctx.out_dir.join(name), PathBuf::from(name)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        args: cmd.clone(),
        inputs,
        config: outcome.config.clone(),
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: seconds,
        outputs,
    };
    write_json(&crate::manifest::manifest_path(&ctx.out_dir, cmd.name()), &manifest)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })
}
