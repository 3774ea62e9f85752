//! `key=value` run configuration shared by the config file and the flags.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Selftest,
    Convergence,
    Solve,
    Train,
    Whitney,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Selftest => "selftest",
            Command::Convergence => "convergence",
            Command::Solve => "solve",
            Command::Train => "train",
            Command::Whitney => "whitney",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "selftest" => Command::Selftest,
            "convergence" => Command::Convergence,
            "solve" => Command::Solve,
            "train" => Command::Train,
            "whitney" => Command::Whitney,
            _ => return Err(ConfigError(format!("unknown command `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every setting is optional so that a file, the flags and the problem
/// defaults can be layered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub problem: Option<u8>,
    pub n: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub gamma: Option<f64>,
    pub steps: Option<usize>,
    pub lr: Option<f64>,
    pub optimizer: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub full_scale: Option<bool>,
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError(format!("bad value `{v}` for `{key}`")))
}

impl RunConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "command" => c.command = Some(v.parse()?),
                "problem" => c.problem = Some(value(k, v)?),
                "n" => c.n = Some(value(k, v)?),
                "n_min" => c.n_min = Some(value(k, v)?),
                "n_max" => c.n_max = Some(value(k, v)?),
                "gamma" => c.gamma = Some(value(k, v)?),
                "steps" => c.steps = Some(value(k, v)?),
                "lr" => c.lr = Some(value(k, v)?),
                "optimizer" => c.optimizer = Some(v.to_string()),
                "seed" => c.seed = Some(value(k, v)?),
                "out" => c.out = Some(v.to_string()),
                "full_scale" => c.full_scale = Some(value(k, v)?),
                _ => return Err(ConfigError(format!("unknown key `{k}`"))),
            }
        }
        Ok(c)
    }

    /// Inverse of [`RunConfig::parse`]; unset keys are omitted. Floats use
    /// the shortest representation that parses back exactly.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                s.push_str(k);
                s.push('=');
                s.push_str(&v);
                s.push('\n');
            }
        };
        put("command", self.command.map(|c| c.as_str().to_string()));
        put("problem", self.problem.map(|v| v.to_string()));
        put("n", self.n.map(|v| v.to_string()));
        put("n_min", self.n_min.map(|v| v.to_string()));
        put("n_max", self.n_max.map(|v| v.to_string()));
        put("gamma", self.gamma.map(|v| format!("{v:?}")));
        put("steps", self.steps.map(|v| v.to_string()));
        put("lr", self.lr.map(|v| format!("{v:?}")));
        put("optimizer", self.optimizer.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("out", self.out.clone());
        put("full_scale", self.full_scale.map(|v| v.to_string()));
        s
    }

    /// Settings from `over` win wherever they are present.
    pub fn overlay(&self, over: &RunConfig) -> RunConfig {
        RunConfig {
            command: over.command.or(self.command),
            problem: over.problem.or(self.problem),
            n: over.n.or(self.n),
            n_min: over.n_min.or(self.n_min),
            n_max: over.n_max.or(self.n_max),
            gamma: over.gamma.or(self.gamma),
            steps: over.steps.or(self.steps),
            lr: over.lr.or(self.lr),
            optimizer: over.optimizer.clone().or_else(|| self.optimizer.clone()),
            seed: over.seed.or(self.seed),
            out: over.out.clone().or_else(|| self.out.clone()),
            full_scale: over.full_scale.or(self.full_scale),
        }
    }

    /// Basis sizes for a sweep: `n` alone, or the powers of two in
    /// `[n_min, n_max]`.
    pub fn sizes(&self) -> Result<Vec<usize>, ConfigError> {
        match (self.n, self.n_min, self.n_max) {
            (Some(n), None, None) if n > 0 => Ok(vec![n]),
            (None, Some(lo), Some(hi)) => {
                if lo == 0 || !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
                    return Err(ConfigError(format!("n range must be powers of two with n_min ≤ n_max, got {lo}..{hi}")));
                }
                Ok(std::iter::successors(Some(lo), |&n| Some(n * 2)).take_while(|&n| n <= hi).collect())
            }
            (Some(0), None, None) => Err(ConfigError("n must be positive".into())),
            (None, None, None) => Err(ConfigError("give --n or --n-min/--n-max".into())),
            _ => Err(ConfigError("give either --n or both --n-min and --n-max".into())),
        }
    }
}
