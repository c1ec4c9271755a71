use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use rksat::config::{Config, DeltaSetting, DepthSetting, SSetting};
use rksat::estimate::BisectMode;
use rksat::lp::LpMode;
use rksat::rational::parse_rational;

#[derive(Debug, Parser)]
#[command(
    name = "rksat",
    version,
    about = "Approximate and exact model counting for random k-CNF"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random k-CNF formula as DIMACS.
    Gen(GenArgs),
    /// Split a formula into good and bad parts.
    Classify(RunArgs),
    /// Find a marking and the partial assignment Λ*.
    Mark(RunArgs),
    /// Build the coupling tree for one step of Λ*.
    Tree(TreeArgs),
    /// Estimate the ratio for one step of Λ*.
    Estimate(StepArgs),
    /// Count models, exactly or approximately.
    Count(CountArgs),
    /// Measure the structure of a formula.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    /// The headline value only.
    Text,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(short = 'k')]
    pub k: usize,
    #[arg(short = 'n')]
    pub n: usize,
    /// Number of clauses.
    #[arg(short = 'm', conflicts_with = "alpha", required_unless_present = "alpha")]
    pub m: Option<usize>,
    /// Clause density; m = floor(alpha * n).
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long, env = "RKSAT_SEED", default_value_t = 0)]
    pub seed: u64,
}

/// A DIMACS file, or generation parameters.
#[derive(Debug, Args)]
pub struct Input {
    /// DIMACS file (`-` for stdin).
    #[arg(conflicts_with_all = ["gen_k", "gen_n"])]
    pub input: Option<PathBuf>,
    /// Generate instead: clause width.
    #[arg(long = "gen-k", requires = "gen_n")]
    pub gen_k: Option<usize>,
    /// Generate instead: number of variables.
    #[arg(long = "gen-n", requires = "gen_k")]
    pub gen_n: Option<usize>,
    #[arg(long = "gen-m", conflicts_with = "gen_alpha")]
    pub gen_m: Option<usize>,
    #[arg(long = "gen-alpha")]
    pub gen_alpha: Option<String>,
    /// Seed of the generated formula (defaults to --seed).
    #[arg(long = "gen-seed")]
    pub gen_seed: Option<u64>,
}

/// Algorithm constants. Values given here override `--config`.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON configuration file, as printed in any report.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "RKSAT_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps: Option<String>,
    /// High-degree threshold: an integer or "paper".
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub bad_fraction: Option<String>,
    /// Truncation depth: an integer, "paper" or "infinite".
    #[arg(long = "L", alias = "depth")]
    pub depth: Option<String>,
    #[arg(long = "c0")]
    pub c0: Option<usize>,
    /// Damping parameter: a rational, "paper" or "paper-capped".
    #[arg(long)]
    pub s: Option<String>,
    /// "geometric" or "paper".
    #[arg(long)]
    pub bisect: Option<String>,
    /// "exact", "simplex" or "float".
    #[arg(long)]
    pub lp: Option<String>,
    #[arg(long)]
    pub node_cap: Option<usize>,
    #[arg(long)]
    pub component_cap: Option<usize>,
    #[arg(long)]
    pub enumeration_cap: Option<usize>,
    #[arg(long)]
    pub simplex_cap: Option<usize>,
    #[arg(long)]
    pub marking_steps: Option<usize>,
    #[arg(long)]
    pub local_cap: Option<usize>,
    #[arg(long)]
    pub local_steps: Option<usize>,
    #[arg(long)]
    pub retries: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Index into the Λ* order of the pivot variable.
    #[arg(long, default_value_t = 0)]
    pub step: usize,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[command(flatten)]
    pub step: StepArgs,
    /// Include every node in the report.
    #[arg(long)]
    pub nodes: bool,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, conflicts_with = "approx")]
    pub exact: bool,
    #[arg(long)]
    pub approx: bool,
    /// Worker threads for the approximate count. Never changes the output.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Overlap query `v1,v2,...:b`; repeatable.
    #[arg(long = "overlap")]
    pub overlaps: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub expansion_size: usize,
    #[arg(long, default_value_t = 100_000)]
    pub expansion_limit: usize,
    #[arg(long, default_value_t = 4)]
    pub gamma_samples: usize,
    #[arg(long, default_value_t = 6)]
    pub gamma_size: usize,
    /// Also build the coupling tree of every step of Λ* and record its size.
    #[arg(long)]
    pub trees: bool,
}

fn parse<T: std::str::FromStr<Err = rksat::Error>>(x: &Option<String>) -> rksat::Result<Option<T>> {
    x.as_deref().map(str::parse).transpose()
}

impl ConfigArgs {
    pub fn build(&self) -> Result<Config, String> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => Config::default(),
        };
        let err = |e: rksat::Error| e.to_string();
        if let Some(x) = self.seed {
            c.seed = x;
        }
        if let Some(x) = &self.eps {
            c.eps = parse_rational(x).ok_or(format!("eps: not a rational: {x:?}"))?;
        }
        if let Some(x) = parse::<DeltaSetting>(&self.delta).map_err(err)? {
            c.delta = x;
        }
        if let Some(x) = &self.bad_fraction {
            let r = parse_rational(x).ok_or(format!("bad-fraction: not a rational: {x:?}"))?;
            let (num, den) = (r.numer().try_into(), r.denom().try_into());
            match (num, den) {
                (Ok(a), Ok(b)) => c.bad_fraction = Ratio::new(a, b),
                _ => return Err(format!("bad-fraction out of range: {x:?}")),
            }
        }
        if let Some(x) = parse::<DepthSetting>(&self.depth).map_err(err)? {
            c.depth = x;
        }
        if let Some(x) = self.c0 {
            c.c0 = x;
        }
        if let Some(x) = parse::<SSetting>(&self.s).map_err(err)? {
            c.s = x;
        }
        if let Some(x) = parse::<BisectMode>(&self.bisect).map_err(err)? {
            c.bisect = x;
        }
        if let Some(x) = parse::<LpMode>(&self.lp).map_err(err)? {
            c.lp = x;
        }
        let caps = [
            (self.node_cap, &mut c.node_cap),
            (self.component_cap, &mut c.component_cap),
            (self.enumeration_cap, &mut c.enumeration_cap),
            (self.simplex_cap, &mut c.simplex_cap),
            (self.marking_steps, &mut c.marking_steps),
            (self.local_cap, &mut c.local_cap),
            (self.local_steps, &mut c.local_steps),
            (self.retries, &mut c.retries),
        ];
        for (value, slot) in caps {
            if let Some(v) = value {
                *slot = v;
            }
        }
        c.validate().map_err(err)?;
        Ok(c)
    }
}
