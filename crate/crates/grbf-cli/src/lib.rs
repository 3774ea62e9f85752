//! Commands behind the `grbf` executable. Each returns an optional CSV body
//! and a one-line JSON summary.

pub mod config;

use std::error::Error;

use grbf::moments::set_sign_mutation;
use grbf::problems::{exact_pair_basis, init_basis, problem, sample_data, solve_on, GammaRule, ProblemSpec};
use grbf::selftest::run_all;
use grbf::training::{train, Optimizer, TrainConfig, TrainProblem};
use serde_json::{json, Value};

pub use config::{Command, ConfigError, RunConfig};

pub type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub csv: Option<String>,
    pub summary: Value,
    /// False when the command ran but its check failed (selftest).
    pub ok: bool,
}

/// Scientific notation with 13 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

fn spec_for(cfg: &RunConfig) -> CliResult<ProblemSpec> {
    let id = cfg.problem.ok_or(ConfigError("--problem is required".into()))?;
    let mut spec = problem(id, cfg.full_scale.unwrap_or(false))?;
    if let Some(g) = cfg.gamma {
        if !(g >= 0.0) {
            return Err(ConfigError(format!("gamma must be nonnegative, got {g}")).into());
        }
        spec.gamma = if g == 0.0 { GammaRule::Off } else { GammaRule::Fixed(g) };
    }
    Ok(spec)
}

fn single_n(cfg: &RunConfig) -> CliResult<usize> {
    let sizes = cfg.sizes()?;
    match sizes.as_slice() {
        [n] => Ok(*n),
        _ => Err(ConfigError("this command takes a single --n".into()).into()),
    }
}

pub fn run(cfg: &RunConfig, mutate: bool, exact_pair: bool) -> CliResult<Outcome> {
    match cfg.command.ok_or(ConfigError("no command given".into()))? {
        Command::Selftest => selftest(cfg.seed.unwrap_or(0), mutate),
        Command::Convergence => convergence(cfg),
        Command::Solve => solve(cfg),
        Command::Train => train_cmd(cfg),
        Command::Whitney => whitney(cfg, exact_pair),
    }
}

pub fn selftest(seed: u64, mutate: bool) -> CliResult<Outcome> {
    set_sign_mutation(mutate);
    let report = run_all(seed);
    set_sign_mutation(false);
    let mut csv = String::from("suite,passed,failed\n");
    for s in &report.suites {
        csv.push_str(&format!("{},{},{}\n", s.name, s.passed, s.failed));
    }
    let suites: Vec<Value> = report
        .suites
        .iter()
        .map(|s| json!({"suite": s.name, "passed": s.passed, "failed": s.failed}))
        .collect();
    Ok(Outcome {
        csv: Some(csv),
        summary: json!({"command": "selftest", "ok": report.ok(), "mutated": mutate, "suites": suites}),
        ok: report.ok(),
    })
}

pub fn convergence(cfg: &RunConfig) -> CliResult<Outcome> {
    let spec = spec_for(cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let data = sample_data(&spec, spec.sample_count, seed)?;
    let mut csv = String::from("n,rel_mse_solve,kappa\n");
    let mut rows = Vec::new();
    for n in cfg.sizes()? {
        let basis = init_basis(&spec, n, seed)?;
        let r = solve_on(&spec, &basis, &data, seed)?;
        csv.push_str(&format!("{},{},{}\n", n, sci(r.rel_mse), sci(r.kappa)));
        rows.push(json!({"n": n, "rel_mse": r.rel_mse, "kappa": r.kappa}));
    }
    Ok(Outcome {
        csv: Some(csv),
        summary: json!({"command": "convergence", "problem": spec.id, "seed": seed, "rows": rows}),
        ok: true,
    })
}

pub fn solve(cfg: &RunConfig) -> CliResult<Outcome> {
    let spec = spec_for(cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let n = single_n(cfg)?;
    let data = sample_data(&spec, spec.sample_count, seed)?;
    let basis = init_basis(&spec, n, seed)?;
    let r = solve_on(&spec, &basis, &data, seed)?;
    let mut summary = json!({
        "command": "solve", "problem": spec.id, "n": n, "seed": seed,
        "gamma": r.gamma, "kappa": r.kappa, "rel_mse": r.rel_mse,
    });
    if let Some(m) = r.mixed {
        summary["mse_u"] = json!(m.mse_u);
        summary["mse_f"] = json!(m.mse_f);
        summary["total"] = json!(m.total);
    }
    Ok(Outcome { csv: None, summary, ok: true })
}

fn train_config(cfg: &RunConfig, spec: &ProblemSpec, seed: u64) -> CliResult<TrainConfig> {
    let optimizer = match cfg.optimizer.as_deref().unwrap_or("adam") {
        "adam" => Optimizer::Adam,
        "lbfgs" => Optimizer::Lbfgs,
        o => return Err(ConfigError(format!("unknown optimizer `{o}`")).into()),
    };
    let tc = TrainConfig {
        steps: cfg.steps.unwrap_or(spec.steps),
        lr: cfg.lr.unwrap_or(spec.lr),
        optimizer,
        seed,
        ..TrainConfig::default()
    };
    tc.validate()?;
    Ok(tc)
}

pub fn train_cmd(cfg: &RunConfig) -> CliResult<Outcome> {
    let spec = spec_for(cfg)?;
    let seed = cfg.seed.unwrap_or(0);
    let n = single_n(cfg)?;
    let tc = train_config(cfg, &spec, seed)?;
    let data = sample_data(&spec, spec.sample_count, seed)?;
    let basis = init_basis(&spec, n, seed)?;
    let problem = TrainProblem::new(&spec, basis, &data, seed)?;
    let trace = train(&tc, &problem)?;
    let mut csv = String::from("step,loss,kappa\n");
    for r in &trace.records {
        csv.push_str(&format!("{},{},{}\n", r.step, sci(r.loss), sci(r.kappa)));
    }
    Ok(Outcome {
        csv: Some(csv),
        summary: json!({
            "command": "train", "problem": spec.id, "n": n, "seed": seed,
            "steps": tc.steps, "lr": tc.lr, "records": trace.records.len(),
            "initial_loss": trace.initial_loss, "final_loss": trace.best_loss,
            "stop": trace.stop.as_str(), "seconds": trace.seconds,
        }),
        ok: true,
    })
}

pub fn whitney(cfg: &RunConfig, exact_pair: bool) -> CliResult<Outcome> {
    let spec = problem(4, false)?;
    let seed = cfg.seed.unwrap_or(0);
    let data = sample_data(&spec, spec.sample_count, seed)?;
    let (n, basis) = if exact_pair {
        (2, exact_pair_basis()?)
    } else {
        let n = single_n(cfg)?;
        (n, init_basis(&spec, n, seed)?)
    };
    let r = solve_on(&spec, &basis, &data, seed)?;
    let m = r.mixed.ok_or(ConfigError("mixed errors missing".into()))?;
    let mut summary = json!({
        "command": "whitney", "n": n, "seed": seed, "exact_pair": exact_pair, "kappa": r.kappa,
        "total": m.total, "mse_u": m.mse_u, "mse_f": m.mse_f,
    });
    let mut csv = None;
    if let Some(steps) = cfg.steps.filter(|&s| s > 0) {
        let tc = TrainConfig { steps, ..train_config(cfg, &spec, seed)? };
        let problem = TrainProblem::new(&spec, basis, &data, seed)?;
        let trace = train(&tc, &problem)?;
        let t = solve_on(&spec, &trace.solution.basis, &data, seed)?;
        let tm = t.mixed.ok_or(ConfigError("mixed errors missing".into()))?;
        summary["trained"] = json!({
            "total": tm.total, "mse_u": tm.mse_u, "mse_f": tm.mse_f,
            "stop": trace.stop.as_str(), "seconds": trace.seconds,
        });
        let mut body = String::from("step,loss,kappa\n");
        for r in &trace.records {
            body.push_str(&format!("{},{},{}\n", r.step, sci(r.loss), sci(r.kappa)));
        }
        csv = Some(body);
    }
    Ok(Outcome { csv, summary, ok: true })
}
