use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use polyclinch::auction::{run_pca, trace_jsonl, Allocation};
use polyclinch::generate::{generate_instance, GenParams};
use polyclinch::market::{
    parse_instance, preprocess, serialize_instance, validate, MarketInstance, SellerValues,
};
use polyclinch::opt::{liquid_welfare, optimal_lw_allocation, social_welfare};
use polyclinch::rational::{parse_rat, to_f64, Rat};
use polyclinch::single_sample::{
    estimate_expectations, pairwise_eval, run_mechanism, DistributionSpec,
};
use polyclinch::verify::{check_dsic, epsilon_gate, reproduce_examples, verify_auction, Mechanism};
use polyclinch::Error;

const EXIT_USAGE: i32 = 64;
const EXIT_DATA: i32 = 65;
const EXIT_SOFTWARE: i32 = 70;
const EXIT_IO: i32 = 74;

#[derive(Parser)]
#[command(
    name = "polyclinch",
    version,
    about = "Exact polyhedral clinching auctions for two-sided markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the clinching auction on an instance.
    Run(RunArgs),
    /// Compute the optimal liquid-welfare allocation.
    Opt(InstanceArgs),
    /// Run the single-sample mechanism, a paired evaluation, or a Monte Carlo estimate.
    SingleSample(SingleSampleArgs),
    /// Check the auction's guarantees on an instance.
    Verify(VerifyArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Reproduce the pinned worked examples.
    Reproduce(OutputArgs),
    /// Run and check a batch of generated instances.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, short)]
    instance: PathBuf,
    /// Clock increment; must divide every bid and sample.
    #[arg(long)]
    epsilon: Option<String>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Write the event trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SingleSampleArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Seller values for a paired evaluation, comma separated.
    #[arg(long, requires = "rho_b")]
    rho_a: Option<String>,
    #[arg(long, requires = "rho_a")]
    rho_b: Option<String>,
    /// Distribution file for a Monte Carlo estimate.
    #[arg(long, conflicts_with = "rho_a")]
    dist: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include every trial in the Monte Carlo report.
    #[arg(long)]
    per_trial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Pca,
    SingleSample,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: InstanceArgs,
    /// Also check truthfulness against bid deviations on this grid step.
    #[arg(long)]
    dsic_step: Option<String>,
    #[arg(long, value_enum, default_value = "pca")]
    mechanism: MechanismArg,
}

#[derive(Args, Clone)]
struct GenShape {
    #[arg(long, default_value_t = 3)]
    buyers: usize,
    #[arg(long, default_value_t = 2)]
    sellers: usize,
    #[arg(long, default_value_t = 3)]
    max_capacity: i64,
    #[arg(long, default_value_t = 5)]
    max_bid_steps: i64,
    /// Allow sellers without supply.
    #[arg(long)]
    zero_capacity: bool,
    /// Draw a sample value for every seller.
    #[arg(long)]
    samples: bool,
    /// Do not require the efficiency gate on epsilon.
    #[arg(long)]
    ungated: bool,
}

impl GenShape {
    fn params(&self) -> GenParams {
        GenParams {
            buyers: self.buyers,
            sellers: self.sellers,
            max_capacity: self.max_capacity,
            max_bid_steps: self.max_bid_steps,
            allow_zero_capacity: self.zero_capacity,
            with_samples: self.samples,
            gated: !self.ungated,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    shape: GenShape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    shape: GenShape,
    #[arg(long, default_value_t = 20)]
    count: u64,
    /// Instance `k` uses seed `seed + k`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } | Error::Validation { .. } | Error::EnumerationRefused { .. } => {
                EXIT_DATA
            }
            Error::Config(_) | Error::ContractViolation(_) => EXIT_USAGE,
            Error::Io(_) => EXIT_IO,
            Error::Internal(_) | Error::Integrity(_) => EXIT_SOFTWARE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<i32, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &Value) -> std::result::Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    emit(out, &text)
}

fn tsv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

fn rats(values: &str) -> std::result::Result<Vec<Rat>, Failure> {
    values
        .split(',')
        .map(|v| parse_rat(v.trim()).map_err(|m| usage(format!("bad value {v:?}: {m}"))))
        .collect()
}

/// Reads, optionally re-grids and validates an instance.
fn load(args: &InstanceArgs) -> std::result::Result<MarketInstance, Failure> {
    let text = fs::read_to_string(&args.instance).map_err(|e| io_failure(&args.instance, e))?;
    let mut instance = parse_instance(&text)?;
    if let Some(eps) = &args.epsilon {
        let eps = parse_rat(eps).map_err(|m| usage(format!("bad --epsilon: {m}")))?;
        instance = instance.with_epsilon(eps);
    }
    let report = validate(&instance);
    for w in &report.warnings {
        eprintln!("warning: {}: {}", w.entity, w.message);
    }
    if !report.is_ok() {
        for e in &report.errors {
            eprintln!("error: {}: {}", e.entity, e.message);
        }
        return Err(Failure {
            code: EXIT_DATA,
            message: format!("{} validation error(s)", report.errors.len()),
        });
    }
    Ok(instance)
}

fn allocation_tsv(instance: &MarketInstance, alloc: &Allocation) -> String {
    let mut rows: Vec<Vec<String>> = instance
        .buyers
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                "buyer".into(),
                b.id.clone(),
                alloc.goods[i].to_string(),
                alloc.payments[i].to_string(),
            ]
        })
        .collect();
    rows.extend(instance.sellers.iter().enumerate().map(|(j, s)| {
        vec![
            "seller".into(),
            s.id.clone(),
            alloc.sold[j].to_string(),
            alloc.revenues[j].to_string(),
        ]
    }));
    tsv(&["role", "id", "quantity", "money"], &rows)
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let instance = load(&args.common)?;
    let pm = preprocess(&instance, SellerValues::Bids)?;
    let run = run_pca(&pm)?;
    if let Some(path) = &args.trace {
        let trace = run.trace.as_ref().expect("traced run");
        fs::write(path, trace_jsonl(&pm, trace)?).map_err(|e| io_failure(path, e))?;
    }
    let out = args.common.out.output.as_deref();
    match args.common.out.format {
        Format::Json => {
            let mut report = run.allocation.to_json(&instance);
            report["epsilon"] = json!(pm.epsilon.to_string());
            report["iterations"] = json!(run.iterations);
            emit_json(out, &report)?;
        }
        Format::Tsv => emit(out, &allocation_tsv(&instance, &run.allocation))?,
    }
    Ok(0)
}

fn cmd_opt(args: &InstanceArgs) -> CliResult {
    let instance = load(args)?;
    let pm = preprocess(&instance, SellerValues::Bids)?;
    let opt = optimal_lw_allocation(&pm)?;
    let out = args.out.output.as_deref();
    match args.out.format {
        Format::Json => {
            let buyers: Vec<Value> = pm
                .buyers
                .iter()
                .zip(&opt.x_star)
                .map(|(b, x)| json!({ "id": b.label, "goods": x.to_string() }))
                .collect();
            let order: Vec<&str> = opt
                .order
                .iter()
                .map(|&i| pm.buyers[i].label.as_str())
                .collect();
            emit_json(
                out,
                &json!({ "buyers": buyers, "order": order, "lw_opt": opt.lw_opt.to_string() }),
            )?;
        }
        Format::Tsv => {
            let rows: Vec<Vec<String>> = pm
                .buyers
                .iter()
                .zip(&opt.x_star)
                .map(|(b, x)| vec![b.label.clone(), x.to_string()])
                .collect();
            emit(out, &tsv(&["id", "goods"], &rows))?;
        }
    }
    Ok(0)
}

fn cmd_single_sample(args: &SingleSampleArgs) -> CliResult {
    let instance = load(&args.common)?;
    let out = args.common.out.output.as_deref();
    if let (Some(a), Some(b)) = (&args.rho_a, &args.rho_b) {
        let report = pairwise_eval(&instance, &rats(a)?, &rats(b)?)?;
        emit_json(out, &report.to_json())?;
        let ok = report.lw_quarter_holds()
            && report.sw_half_holds()
            && report.auction_split_holds()
            && report.optimum_split_holds();
        return Ok(if ok { 0 } else { 1 });
    }
    if let Some(path) = &args.dist {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        let dist = DistributionSpec::parse(&text, &instance)?;
        let report = estimate_expectations(&instance, &dist, args.trials, args.seed)?;
        match args.common.out.format {
            Format::Json => emit_json(out, &report.to_json(args.per_trial))?,
            Format::Tsv => {
                let rows: Vec<Vec<String>> = report
                    .per_trial
                    .iter()
                    .enumerate()
                    .map(|(t, r)| {
                        vec![
                            t.to_string(),
                            r.lw_mech.to_string(),
                            r.sw_mech.to_string(),
                            r.lw_opt.to_string(),
                        ]
                    })
                    .collect();
                emit(out, &tsv(&["trial", "lw_mech", "sw_mech", "lw_opt"], &rows))?;
            }
        }
        return Ok(0);
    }
    let run = run_mechanism(&instance)?;
    match args.common.out.format {
        Format::Json => {
            let mut report = run.allocation.to_json(&instance);
            let kept: Vec<&str> = instance
                .sellers
                .iter()
                .zip(&run.kept)
                .filter(|(_, &k)| k)
                .map(|(s, _)| s.id.as_str())
                .collect();
            report["kept_sellers"] = json!(kept);
            emit_json(out, &report)?;
        }
        Format::Tsv => emit(out, &allocation_tsv(&instance, &run.allocation))?,
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> CliResult {
    let instance = load(&args.common)?;
    let mut report = verify_auction(&instance)?;
    if let Some(step) = &args.dsic_step {
        let step = parse_rat(step).map_err(|m| usage(format!("bad --dsic-step: {m}")))?;
        let mechanism = match args.mechanism {
            MechanismArg::Pca => Mechanism::Pca,
            MechanismArg::SingleSample => Mechanism::SingleSample,
        };
        report.absorb("", check_dsic(&instance, &step, mechanism)?);
    }
    emit_json(args.common.out.output.as_deref(), &report.to_json())?;
    Ok(report.exit_code())
}

fn cmd_gen(args: &GenArgs) -> CliResult {
    let instance = generate_instance(&args.shape.params(), args.seed);
    emit(args.output.as_deref(), &serialize_instance(&instance))?;
    Ok(0)
}

fn cmd_reproduce(args: &OutputArgs) -> CliResult {
    let report = reproduce_examples()?;
    emit_json(args.output.as_deref(), &report.to_json())?;
    Ok(report.exit_code())
}

fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let header = [
        "seed", "epsilon", "lw_pca", "lw_opt", "sw_pca", "lw_ratio", "sw_ratio", "gate", "checks",
    ];
    let mut rows = Vec::new();
    let mut worst = 0;
    for k in 0..args.count {
        let seed = args.seed + k;
        let instance = generate_instance(&args.shape.params(), seed);
        let pm = preprocess(&instance, SellerValues::Bids)?;
        let run = run_pca(&pm)?;
        let opt = optimal_lw_allocation(&pm)?;
        let x = run.final_state.goods(&pm);
        let lw = liquid_welfare(&pm, &x);
        let sw = social_welfare(&pm, &x);
        let report = verify_auction(&instance)?;
        let code = report.exit_code();
        worst = match (worst, code) {
            (1, _) | (_, 1) => 1,
            (2, _) | (_, 2) => 2,
            _ => 0,
        };
        let ratio = |v: &Rat| {
            if opt.lw_opt == Rat::from_integer(0.into()) {
                "nan".to_string()
            } else {
                format!("{:.6}", to_f64(&(v / &opt.lw_opt)))
            }
        };
        rows.push(vec![
            seed.to_string(),
            pm.epsilon.to_string(),
            lw.to_string(),
            opt.lw_opt.to_string(),
            sw.to_string(),
            ratio(&lw),
            ratio(&sw),
            if epsilon_gate(&pm) { "holds" } else { "fails" }.to_string(),
            match code {
                0 => "pass",
                1 => "fail",
                _ => "pass-gated",
            }
            .to_string(),
        ]);
    }
    let out = args.out.output.as_deref();
    match args.out.format {
        Format::Tsv => emit(out, &tsv(&header, &rows))?,
        Format::Json => {
            let objs: Vec<Value> = rows
                .iter()
                .map(|row| {
                    Value::Object(
                        header
                            .iter()
                            .zip(row)
                            .map(|(h, v)| (h.to_string(), Value::String(v.clone())))
                            .collect(),
                    )
                })
                .collect();
            emit_json(out, &Value::Array(objs))?;
        }
    }
    Ok(worst)
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Opt(a) => cmd_opt(a),
        Command::SingleSample(a) => cmd_single_sample(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
