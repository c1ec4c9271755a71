mod args;

use std::io::Read as _;
use std::process::ExitCode;

use clap::Parser;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use args::{AuditArgs, Cli, Command, CountArgs, Format, GenArgs, Input, RunArgs, StepArgs, TreeArgs};
use rksat::audit::{audit, AuditOptions};
use rksat::classify::classify;
use rksat::config::Config;
use rksat::counter::{approx_count, exact_count};
use rksat::dimacs::{parse_dimacs, write_dimacs};
use rksat::estimate::estimate_ratio;
use rksat::invariants::check_tree;
use rksat::marking::{verify_lambda_star, verify_marking, verify_prefix_property};
use rksat::pipeline::{prepare, Prepared};
use rksat::rational::{parse_rational, to_f64};
use rksat::tree::{build_tree, Depth, TreeContext};
use rksat::{ErrorClass, Formula, Var};

pub const SCHEMA: &str = "rksat-report/1";

enum Failure {
    Io(String),
    Usage(String),
    Core(rksat::Error),
}

impl From<rksat::Error> for Failure {
    fn from(e: rksat::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Core(e) => match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Regime => 3,
                ErrorClass::Internal => 4,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Io(m) | Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn hash_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn config_hash(config: &Config) -> String {
    hash_hex(serde_json::to_string(config).expect("config serialises").as_bytes())
}

/// `floor(alpha * n)` computed exactly.
fn clause_count(alpha: &str, n: usize) -> Result<usize, Failure> {
    let a = parse_rational(alpha).ok_or_else(|| Failure::Usage(format!("alpha: not a rational: {alpha:?}")))?;
    if a < BigRational::from_integer(BigInt::from(0)) {
        return Err(Failure::Usage("alpha must be nonnegative".into()));
    }
    let m = (a * BigRational::from_integer(BigInt::from(n))).floor().to_integer();
    usize::try_from(m).map_err(|_| Failure::Usage("alpha * n is too large".into()))
}

fn generate(k: usize, n: usize, m: Option<usize>, alpha: Option<&str>, seed: u64) -> Result<Formula, Failure> {
    if k == 0 || k > n {
        return Err(Failure::Usage(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let m = match (m, alpha) {
        (Some(m), _) => m,
        (None, Some(a)) => clause_count(a, n)?,
        (None, None) => return Err(Failure::Usage("give -m or --alpha".into())),
    };
    Ok(Formula::random(k, n, m, seed))
}

fn load(input: &Input, config: &Config) -> Result<Formula, Failure> {
    if let (Some(k), Some(n)) = (input.gen_k, input.gen_n) {
        let seed = input.gen_seed.unwrap_or(config.seed);
        return generate(k, n, input.gen_m, input.gen_alpha.as_deref(), seed);
    }
    let text = match input.input.as_deref() {
        None => return Err(Failure::Usage("give a DIMACS file or --gen-k/--gen-n".into())),
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Io(format!("stdin: {e}")))?;
            s
        }
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
    };
    Ok(parse_dimacs(&text)?)
}

/// Loaded inputs of a subcommand.
struct Run {
    config: Config,
    formula: Formula,
    format: Format,
}

impl Run {
    fn new(args: &RunArgs) -> Result<Run, Failure> {
        let config = args.config.build().map_err(Failure::Usage)?;
        let formula = load(&args.input, &config)?;
        Ok(Run {
            config,
            formula,
            format: args.format,
        })
    }

    /// Prints the report: the full JSON envelope, or `headline` for text.
    fn emit(&self, command: &str, result: impl Serialize, headline: String) -> Outcome {
        match self.format {
            Format::Text => println!("{headline}"),
            Format::Json => {
                let report = json!({
                    "schema": SCHEMA,
                    "command": command,
                    "config_hash": config_hash(&self.config),
                    "config": self.config,
                    "formula": {
                        "k": self.formula.k(),
                        "n": self.formula.n(),
                        "m": self.formula.m(),
                        "sha256": hash_hex(write_dimacs(&self.formula).as_bytes()),
                    },
                    "result": result,
                });
                println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            }
        }
        Ok(())
    }

    fn prepare(&self) -> Result<Prepared, Failure> {
        let prep = prepare(&self.formula, &self.config)?;
        for note in &prep.resolved.notes {
            eprintln!("note: {note}");
        }
        Ok(prep)
    }

    fn context<'a>(&'a self, prep: &'a Prepared, step: usize) -> Result<TreeContext<'a>, Failure> {
        let lambda = &prep.lambda_star;
        if step >= lambda.len() {
            return Err(Failure::Usage(format!(
                "step {step} out of range: Λ* fixes {} variables",
                lambda.len()
            )));
        }
        Ok(TreeContext::new(
            &self.formula,
            &prep.classification,
            &prep.marking,
            &lambda.prefix(step),
            lambda.order[step],
        )?)
    }
}

fn cmd_gen(args: &GenArgs) -> Outcome {
    let f = generate(args.k, args.n, args.m, args.alpha.as_deref(), args.seed)?;
    let params = json!({"k": args.k, "n": args.n, "m": f.m(), "seed": args.seed});
    println!("c schema {SCHEMA}");
    println!("c config-hash {}", hash_hex(params.to_string().as_bytes()));
    print!("{}", write_dimacs(&f));
    Ok(())
}

fn cmd_classify(args: &RunArgs) -> Outcome {
    let run = Run::new(args)?;
    let resolved = run.config.resolve(run.formula.k(), run.formula.n())?;
    let cls = classify(&run.formula, resolved.delta, run.config.bad_fraction);
    let report = audit(&run.formula, &cls, &audit_options(&resolved.depth, &run.config, None));
    let headline = format!("bad_vars={} bad_clauses={}", cls.bad_vars.len(), cls.bad_clauses.len());
    run.emit(
        "classify",
        json!({"resolved": resolved, "classification": cls, "audit": report}),
        headline,
    )
}

fn cmd_mark(args: &RunArgs) -> Outcome {
    let run = Run::new(args)?;
    let prep = run.prepare()?;
    let f = &run.formula;
    let cls = &prep.classification;
    let marking_violations = verify_marking(f, cls, &prep.marking);
    let lambda_report = verify_lambda_star(f, cls, &prep.marking, &prep.lambda_star);
    let prefix_violations: usize = (0..=prep.lambda_star.len())
        .map(|i| {
            verify_prefix_property(f, cls, &prep.marking, &prep.lambda_star.prefix(i))
                .violations
                .len()
        })
        .sum();
    let headline = format!("lambda_star={}", prep.lambda_star.len());
    run.emit(
        "mark",
        json!({
            "prepared": prep,
            "verification": {
                "marking_violations": marking_violations,
                "lambda_star": lambda_report,
                "prefix_violations": prefix_violations,
            },
        }),
        headline,
    )
}

fn cmd_tree(args: &TreeArgs) -> Outcome {
    let run = Run::new(&args.step.run)?;
    let prep = run.prepare()?;
    let ctx = run.context(&prep, args.step.step)?;
    let tree = build_tree(&ctx, &run.config.tree_params(&prep.resolved))?;
    let violations = check_tree(&ctx, &tree);
    let stats = tree.stats();
    let headline = format!(
        "nodes={} leaves={} truncating={} violations={}",
        stats.nodes,
        stats.leaves,
        stats.truncating,
        violations.len()
    );
    let nodes = args.nodes.then_some(&tree.nodes);
    run.emit(
        "tree",
        json!({
            "step": args.step.step,
            "pivot": tree.pivot,
            "lambda": ctx.lambda,
            "stats": stats,
            "violations": violations,
            "nodes": nodes,
        }),
        headline,
    )
}

fn cmd_estimate(args: &StepArgs) -> Outcome {
    let run = Run::new(&args.run)?;
    let prep = run.prepare()?;
    let ctx = run.context(&prep, args.step)?;
    let params = run.config.estimate_params(&prep.resolved);
    let est = estimate_ratio(&ctx, &params)?;
    let headline = est.p.show();
    run.emit("estimate", json!({"step": args.step, "estimate": est}), headline)
}

fn cmd_count(args: &CountArgs) -> Outcome {
    let run = Run::new(&args.run)?;
    if args.exact || !args.approx {
        let count = exact_count(&run.formula, run.config.component_cap)?;
        let headline = count.count.to_string();
        return run.emit("count", json!({"mode": "exact", "count": count}), headline);
    }
    let approx = approx_count(&run.formula, &run.config, args.threads.max(1))?;
    for note in &approx.prepared.resolved.notes {
        eprintln!("note: {note}");
    }
    let headline = format!("{:.6e}", to_f64(&approx.z));
    run.emit("count", json!({"mode": "approx", "count": approx}), headline)
}

fn parse_overlap(text: &str) -> Result<(Vec<Var>, usize), Failure> {
    let bad = || Failure::Usage(format!("overlap query must look like 1,2,3:2, got {text:?}"));
    let (ys, b) = text.split_once(':').ok_or_else(bad)?;
    let y = ys
        .split(',')
        .map(|v| v.trim().parse::<Var>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((y, b.trim().parse().map_err(|_| bad())?))
}

fn audit_options(depth: &Depth, config: &Config, args: Option<&AuditArgs>) -> AuditOptions {
    let mut o = AuditOptions {
        seed: config.seed,
        depth: match depth {
            Depth::Finite(l) => Some(*l),
            Depth::Infinite => None,
        },
        ..AuditOptions::default()
    };
    if let Some(a) = args {
        o.expansion_size = a.expansion_size;
        o.expansion_limit = a.expansion_limit;
        o.gamma_samples = a.gamma_samples;
        o.gamma_size = a.gamma_size;
    }
    o
}

fn cmd_audit(args: &AuditArgs) -> Outcome {
    let run = Run::new(&args.run)?;
    let resolved = run.config.resolve(run.formula.k(), run.formula.n())?;
    let cls = classify(&run.formula, resolved.delta, run.config.bad_fraction);
    let mut options = audit_options(&resolved.depth, &run.config, Some(args));
    options.overlap_queries = args
        .overlaps
        .iter()
        .map(|q| parse_overlap(q))
        .collect::<Result<_, _>>()?;
    let mut report = audit(&run.formula, &cls, &options);
    if args.trees {
        let prep = run.prepare()?;
        let params = run.config.tree_params(&prep.resolved);
        for step in 0..prep.lambda_star.len() {
            let ctx = run.context(&prep, step)?;
            report.record_tree(&build_tree(&ctx, &params)?);
        }
    }
    let headline = format!("v0={} v_bad={} c_bad={}", report.v0, report.v_bad, report.c_bad);
    run.emit("audit", report, headline)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Mark(a) => cmd_mark(a),
        Command::Tree(a) => cmd_tree(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Count(a) => cmd_count(a),
        Command::Audit(a) => cmd_audit(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
