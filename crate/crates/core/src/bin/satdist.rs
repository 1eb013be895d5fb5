use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use satdist::boolfn::{self, BooleanFunction, Format};
use satdist::experiment::{self, ExperimentConfig, ExperimentError};
use satdist::metrics::{self, nats_to_bits};
use satdist::model::{exact_distribution, DistributionTable, SurrogateKind, WeightVector};
use satdist::rng::stream_rng;

#[derive(Parser)]
#[command(name = "satdist", version, about = "Learn distributions over satisfying assignments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learning experiment and write a JSON report.
    Learn(LearnArgs),
    /// List the satisfying assignments of a function.
    Enumerate(EnumerateArgs),
    /// Exact KL / ℓ₁ between the models of two weight files.
    Eval(EvalArgs),
    /// Emit a random CNF or threshold function.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Dimacs,
    TtHex,
    Ltf,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Dimacs => Format::Dimacs,
            FormatArg::TtHex => Format::TruthTableHex,
            FormatArg::Ltf => Format::LtfText,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SurrogateArg {
    Softplus,
    Phuber,
    Logistic,
}

impl From<SurrogateArg> for SurrogateKind {
    fn from(s: SurrogateArg) -> Self {
        match s {
            SurrogateArg::Softplus => SurrogateKind::Softplus,
            SurrogateArg::Phuber => SurrogateKind::PseudoHuber,
            SurrogateArg::Logistic => SurrogateKind::Logistic,
        }
    }
}

#[derive(Args)]
struct FunctionArgs {
    #[arg(long)]
    function: PathBuf,
    #[arg(long, value_enum, default_value = "dimacs")]
    format: FormatArg,
    /// Dimension for tt-hex tables with fewer than four entries.
    #[arg(long)]
    tt_dim: Option<usize>,
}

#[derive(Args)]
struct LearnArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    function: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    tt_dim: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    surrogate: Option<SurrogateArg>,
    /// Ball radius B (default 1).
    #[arg(long)]
    radius: Option<f64>,
    /// Lipschitz bound ρ (default 2√n).
    #[arg(long)]
    rho: Option<f64>,
    /// Membership tolerance ε₁ (default ε).
    #[arg(long)]
    eps1: Option<f64>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    function: FunctionArgs,
    /// Print the uniform distribution over the set as CSV instead.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Weights of P, one value per line.
    #[arg(long)]
    p: PathBuf,
    /// Weights of Q, one value per line.
    #[arg(long)]
    q: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Cnf,
    Ltf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    clauses: usize,
    #[arg(long, default_value_t = 3)]
    width: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Redraw until the instance has a satisfying assignment (n ≤ 24).
    #[arg(long)]
    satisfiable: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), ExperimentError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn learn(args: LearnArgs) -> Result<(), ExperimentError> {
    let mut cfg = match (&args.config, &args.function) {
        (Some(path), _) => ExperimentConfig::from_json(&read(path)?)?,
        (None, Some(function)) => ExperimentConfig::new(function.clone(), Format::Dimacs),
        (None, None) => return Err(ExperimentError::Config("either --config or --function is required".into())),
    };
    if let Some(v) = args.function {
        cfg.function = v;
    }
    if let Some(v) = args.format {
        cfg.format = v.into();
    }
    if let Some(v) = args.tt_dim {
        cfg.tt_dim = Some(v);
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.surrogate {
        cfg.surrogate = v.into();
    }
    if args.radius.is_some() {
        cfg.radius = args.radius;
    }
    if args.rho.is_some() {
        cfg.rho = args.rho;
    }
    if args.eps1.is_some() {
        cfg.eps1 = args.eps1;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out;
    }

    let outcome = experiment::run_experiment(&cfg)?;
    match &cfg.out_dir {
        Some(dir) => {
            experiment::write_outputs(&outcome, dir)?;
            let best = outcome.report.selected_trial();
            match &best.exact {
                Some(m) => println!(
                    "trial {} selected: KL {:.6} nats ({:.6} bits), l1 {:.6} <= {:.6}",
                    best.trial, m.kl, m.kl_bits, m.l1, m.pinsker_bound
                ),
                None => println!("trial {} selected: validation risk {:.6} nats", best.trial, best.validation_risk),
            }
        }
        None => print!("{}", outcome.report.to_json()),
    }
    Ok(())
}

fn load(args: &FunctionArgs) -> Result<BooleanFunction, ExperimentError> {
    experiment::load_function(&args.function, args.format.into(), args.tt_dim)
}

fn enumerate(args: EnumerateArgs) -> Result<(), ExperimentError> {
    let f = load(&args.function)?;
    let set = boolfn::enumerate_satisfying(&f).map_err(|e| ExperimentError::Config(e.to_string()))?;
    if args.csv {
        if set.is_empty() {
            return Err(ExperimentError::Unsatisfiable);
        }
        let table = DistributionTable::uniform_over(&set)?;
        print!("{}", table.to_csv());
    } else {
        for x in set.iter() {
            println!("{} {x}", x.index());
        }
        eprintln!("{} satisfying assignments of 2^{}", set.len(), f.n());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), ExperimentError> {
    let weights = |path: &Path| {
        WeightVector::from_text(&read(path)?, args.radius).map_err(|e| ExperimentError::Config(e.to_string()))
    };
    let p = weights(&args.p)?;
    let q = weights(&args.q)?;
    if p.n() != q.n() {
        return Err(ExperimentError::Config(format!("dimensions differ: {} vs {}", p.n(), q.n())));
    }
    let n = p.n();
    let tp = exact_distribution(&p, n).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let tq = exact_distribution(&q, n)?;
    let kl = metrics::exact_kl(&tp, &tq)?;
    let report = json!({
        "n": n,
        "kl": kl,
        "kl_bits": nats_to_bits(kl),
        "l1": metrics::l1_distance(&tp, &tq)?,
        "pinsker_bound": metrics::pinsker_bound(kl)?,
        "entropy_p": metrics::entropy(&tp),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), ExperimentError> {
    const MAX_DRAWS: usize = 1000;
    if args.satisfiable && args.n > boolfn::ENUMERATION_LIMIT {
        return Err(ExperimentError::Config(format!(
            "--satisfiable needs n <= {}",
            boolfn::ENUMERATION_LIMIT
        )));
    }
    let mut rng = stream_rng(args.seed, 0);
    for _ in 0..MAX_DRAWS {
        let f = match args.kind {
            GenKind::Cnf => boolfn::random_cnf(args.n, args.clauses, args.width, &mut rng),
            GenKind::Ltf => boolfn::random_ltf(args.n, &mut rng),
        };
        if args.satisfiable
            && boolfn::enumerate_satisfying(&f).map_err(|e| ExperimentError::Config(e.to_string()))?.is_empty()
        {
            continue;
        }
        let format = match args.kind {
            GenKind::Cnf => Format::Dimacs,
            GenKind::Ltf => Format::LtfText,
        };
        let text = boolfn::serialize_function(&f, format).map_err(|e| ExperimentError::Config(e.to_string()))?;
        return write_or_print(args.out.as_deref(), &text);
    }
    Err(ExperimentError::Unsatisfiable)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => learn(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Eval(a) => eval(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("satdist: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
