//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 I/O or malformed
//! input, 4 no truthful payment scheme exists.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sanction_feedback::beliefs::belief_set;
use sanction_feedback::model::{validate, Buyer, GameConfig, RawConfig, Signal, ValidationError};
use sanction_feedback::payments::{
    check_feasibility, constructive_scheme, solve_both, FeasibilityReport, PaymentError,
    PaymentScheme, SolvedScheme,
};
use sanction_feedback::sim::{run_sequence, summarize, PaymentMode, SimConfig, SimError, TypeMode};
use sanction_feedback::sweep::{run_sweep, SweepError, SweepParameter, SweepSpec};
use sanction_feedback::verify::{equilibrium_condition_report, EquilibriumReport};

#[derive(Parser, Debug)]
#[command(
    name = "sanction-feedback",
    version,
    about = "Truthful peer-prediction payments for sanctioning reputation mechanisms"
)]
struct Cli {
    /// Game configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,

    /// Suppress diagnostics on stderr and per-game trace lines on stdout.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the belief cascade for one buyer.
    Beliefs {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        buyer: u8,
    },
    /// Solve both buyers' minimal-budget payment schemes.
    Solve,
    /// Certify truthful reporting as a best response for both buyers.
    Verify {
        #[arg(long, value_enum, default_value_t = SchemeSource::Lp)]
        scheme: SchemeSource,
        /// Payments to check instead: {"buyer1": [[ll, lh], [hl, hh]], "buyer2": ...}
        #[arg(long, conflicts_with = "scheme")]
        tau: Option<PathBuf>,
    },
    /// Sweep one parameter and tabulate feasibility and budgets as CSV.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        steps: u64,
    },
    /// Simulate a sequence of Feedback Games.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        games: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "type", value_enum, default_value_t = TypeArg::Draw)]
        seller_type: TypeArg,
        #[arg(long, value_enum, default_value_t = PaymentsArg::SolveEach)]
        payments: PaymentsArg,
        /// Write the per-game JSON-lines trace here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeSource {
    Lp,
    Constructive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    #[value(name = "commitment_prior")]
    CommitmentPrior,
    #[value(name = "epsilon")]
    Epsilon,
    #[value(name = "delta_l")]
    DeltaL,
    #[value(name = "delta_h")]
    DeltaH,
    #[value(name = "cost_bound")]
    CostBound,
    #[value(name = "strategic_qM_prob")]
    StrategicQmProb,
}

impl From<SweepParam> for SweepParameter {
    fn from(p: SweepParam) -> Self {
        match p {
            SweepParam::CommitmentPrior => SweepParameter::CommitmentPrior,
            SweepParam::Epsilon => SweepParameter::Epsilon,
            SweepParam::DeltaL => SweepParameter::DeltaL,
            SweepParam::DeltaH => SweepParameter::DeltaH,
            SweepParam::CostBound => SweepParameter::CostBound,
            SweepParam::StrategicQmProb => SweepParameter::StrategicTopEffortProb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TypeArg {
    Draw,
    FixedCommitment,
    FixedStrategic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PaymentsArg {
    SolveEach,
    Freeze,
}

enum Failure {
    Usage(String),
    Validation(ValidationError),
    Io(String),
    Infeasible {
        message: String,
        reports: Vec<FeasibilityReport>,
    },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
            Failure::Infeasible { .. } => 4,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<PaymentError> for Failure {
    fn from(e: PaymentError) -> Self {
        match e {
            PaymentError::Infeasible { report } => Failure::Infeasible {
                message: e.to_string(),
                reports: report.into_iter().collect(),
            },
            other => Failure::Io(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<GameConfig, Failure> {
    let path = path.ok_or_else(|| Failure::Usage("--config <path> is required".into()))?;
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    // Wrong field names or types carry no reason code, so they count as usage errors.
    let raw = RawConfig::from_json(&text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => {
            Failure::Usage(format!("{}: config schema: {e}", path.display()))
        }
        _ => Failure::Io(format!("{}: malformed JSON: {e}", path.display())),
    })?;
    validate(&raw).map_err(Failure::Validation)
}

fn write_json<T: Serialize>(out: &mut impl Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

fn fmt_tau(tau: &[[f64; 2]; 2]) -> String {
    format!(
        "τ(l,l)={:.9}  τ(l,h)={:.9}  τ(h,l)={:.9}  τ(h,h)={:.9}",
        tau[0][0], tau[0][1], tau[1][0], tau[1][1]
    )
}

fn cmd_beliefs(
    cfg: &GameConfig,
    buyer: Buyer,
    format: OutputFormat,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let b = belief_set(cfg, buyer).map_err(|e| Failure::Io(e.to_string()))?;
    match format {
        OutputFormat::Json => write_json(out, &b)?,
        OutputFormat::Text => {
            writeln!(out, "buyer                    {}", b.buyer)?;
            let efforts: Vec<String> = b.effort_prior.iter().map(|p| format!("{p:.9}")).collect();
            writeln!(out, "effort prior             [{}]", efforts.join(", "))?;
            writeln!(out, "Pr(s=h)                  {:.9}", b.signal_prior_high)?;
            writeln!(
                out,
                "Pr(s=h | commitment)     {:.9}",
                b.signal_given_commitment_high
            )?;
            writeln!(
                out,
                "Pr(s=h | strategic)      {:.9}",
                b.signal_given_strategic_high
            )?;
            writeln!(out, "Pr(commitment | s=h)     {:.9}", b.type_posterior_high)?;
            writeln!(out, "Pr(commitment | s=l)     {:.9}", b.type_posterior_low)?;
            for own in Signal::ALL {
                for peer in Signal::ALL {
                    writeln!(
                        out,
                        "g({peer}|{own})                   {:.9}",
                        b.g(peer, own)
                    )?;
                }
            }
        }
    }
    Ok(())
}

fn infeasible(cfg: &GameConfig, e: PaymentError) -> Failure {
    Failure::Infeasible {
        message: e.to_string(),
        reports: Buyer::ALL
            .iter()
            .map(|&b| check_feasibility(cfg, b))
            .collect(),
    }
}

fn cmd_solve(cfg: &GameConfig, format: OutputFormat, out: &mut impl Write) -> Result<(), Failure> {
    let solved = solve_both(cfg).map_err(|e| infeasible(cfg, e))?;
    let total: f64 = solved.iter().map(|s| s.scheme.budget).sum();
    match format {
        OutputFormat::Json => write_json(out, &json!({ "buyers": solved, "total_budget": total }))?,
        OutputFormat::Text => {
            for SolvedScheme {
                scheme,
                feasibility,
                binding,
            } in &solved
            {
                writeln!(out, "buyer {}", scheme.buyer)?;
                writeln!(out, "  {}", fmt_tau(&scheme.tau))?;
                writeln!(out, "  budget   {:.9}", scheme.budget)?;
                writeln!(
                    out,
                    "  g gap    {:.9e}  ({:?})",
                    feasibility.g_gap, feasibility.reason
                )?;
                writeln!(out, "  binding  {binding:?}")?;
            }
            writeln!(out, "total budget {total:.9}")?;
        }
    }
    Ok(())
}

fn read_tau(path: &Path, cfg: &GameConfig) -> Result<[PaymentScheme; 2], Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct TauFile {
        buyer1: [[f64; 2]; 2],
        buyer2: [[f64; 2]; 2],
    }
    let file: TauFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Io(format!("{}: malformed payment file: {e}", path.display())))?;
    Buyer::ALL
        .iter()
        .map(|&b| {
            let beliefs = belief_set(cfg, b).map_err(|e| Failure::Io(e.to_string()))?;
            let tau = if b == Buyer::One {
                file.buyer1
            } else {
                file.buyer2
            };
            Ok(PaymentScheme::from_tau(tau, &beliefs))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|v| [v[0].clone(), v[1].clone()])
}

fn cmd_verify(
    cfg: &GameConfig,
    source: SchemeSource,
    tau: Option<&Path>,
    format: OutputFormat,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let schemes: [PaymentScheme; 2] = match (tau, source) {
        (Some(path), _) => read_tau(path, cfg)?,
        (None, SchemeSource::Lp) => solve_both(cfg)
            .map_err(|e| infeasible(cfg, e))?
            .map(|s| s.scheme),
        (None, SchemeSource::Constructive) => [
            constructive_scheme(cfg, Buyer::One).map_err(|e| infeasible(cfg, e))?,
            constructive_scheme(cfg, Buyer::Two).map_err(|e| infeasible(cfg, e))?,
        ],
    };
    let report: EquilibriumReport = equilibrium_condition_report(cfg, [&schemes[0], &schemes[1]]);
    match format {
        OutputFormat::Json => write_json(out, &json!({ "schemes": schemes, "report": report }))?,
        OutputFormat::Text => {
            for (scheme, cert) in schemes.iter().zip(&report.certificates) {
                writeln!(out, "buyer {}", cert.buyer)?;
                writeln!(out, "  {}", fmt_tau(&scheme.tau))?;
                writeln!(
                    out,
                    "  honesty margins  l: {:.9}  h: {:.9}  strict best: {}",
                    cert.honesty_margins[0], cert.honesty_margins[1], cert.honest_is_strict_best
                )?;
                writeln!(
                    out,
                    "  IR slacks        l: {:.9}  h: {:.9}  satisfied: {}",
                    cert.ir_slacks[0], cert.ir_slacks[1], cert.ir_satisfied
                )?;
            }
            writeln!(out, "seller condition  {:?}", report.seller_condition)?;
            if let Some(f) = report.failure {
                writeln!(out, "failure           {f:?}")?;
            }
            writeln!(
                out,
                "truthful equilibrium: {}",
                if report.overall_pass { "PASS" } else { "FAIL" }
            )?;
        }
    }
    Ok(())
}

fn cmd_sweep(
    cfg: &GameConfig,
    spec: &SweepSpec,
    format: OutputFormat,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let rows = run_sweep(cfg, spec).map_err(|e| match e {
        SweepError::Invalid { source, .. } => Failure::Validation(source),
        other => Failure::Usage(other.to_string()),
    })?;
    let opt = |v: Option<f64>| v.map(|b| b.to_string()).unwrap_or_default();
    match format {
        OutputFormat::Json => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([
                "value",
                "feasible",
                "budget_buyer1",
                "budget_buyer2",
                "g_gap",
            ])
            .map_err(|e| Failure::Io(e.to_string()))?;
            for r in &rows {
                w.write_record([
                    r.value.to_string(),
                    r.feasible.to_string(),
                    opt(r.budget_buyer1),
                    opt(r.budget_buyer2),
                    r.g_gap.to_string(),
                ])
                .map_err(|e| Failure::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        OutputFormat::Text => {
            writeln!(
                out,
                "{:>18} {:>9} {:>16} {:>16} {:>16}",
                spec.parameter.name(),
                "feasible",
                "budget_buyer1",
                "budget_buyer2",
                "g_gap"
            )?;
            let cell = |v: Option<f64>| v.map(|b| format!("{b:.9}")).unwrap_or_else(|| "-".into());
            for r in &rows {
                writeln!(
                    out,
                    "{:>18.9} {:>9} {:>16} {:>16} {:>16.9e}",
                    r.value,
                    r.feasible,
                    cell(r.budget_buyer1),
                    cell(r.budget_buyer2),
                    r.g_gap
                )?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cfg: &GameConfig,
    games: u64,
    seed: u64,
    seller_type: TypeArg,
    payments: PaymentsArg,
    trace_path: Option<&Path>,
    format: OutputFormat,
    quiet: bool,
    out: &mut impl Write,
) -> Result<(), Failure> {
    let sim = SimConfig::new(cfg.clone(), games as usize, seed)
        .with_type_mode(match seller_type {
            TypeArg::Draw => TypeMode::Draw,
            TypeArg::FixedCommitment => TypeMode::FixedCommitment,
            TypeArg::FixedStrategic => TypeMode::FixedStrategic,
        })
        .with_payment_mode(match payments {
            PaymentsArg::SolveEach => PaymentMode::SolveEachGame,
            PaymentsArg::Freeze => PaymentMode::FreezeFirstGame,
        });
    let trace = run_sequence(&sim).map_err(|e| match e {
        SimError::Payment {
            source: PaymentError::Infeasible { report },
            ..
        } => Failure::Infeasible {
            message: e.to_string(),
            reports: report.into_iter().collect(),
        },
        SimError::Policy { source, .. } => Failure::Validation(source),
        SimError::NoGames => Failure::Usage(e.to_string()),
        other => Failure::Io(other.to_string()),
    })?;

    let write_lines = |w: &mut dyn Write| -> io::Result<()> {
        for r in &trace.records {
            serde_json::to_writer(&mut *w, r)?;
            writeln!(w)?;
        }
        Ok(())
    };
    if let Some(path) = trace_path {
        let file =
            fs::File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_lines(&mut w)?;
        w.flush()?;
    } else if format == OutputFormat::Json && !quiet {
        write_lines(out)?;
    }

    let summary = summarize(&trace);
    match format {
        OutputFormat::Json => {
            serde_json::to_writer(&mut *out, &json!({ "summary": summary }))?;
            writeln!(out)?;
        }
        OutputFormat::Text => {
            writeln!(out, "games                  {}", summary.games)?;
            writeln!(out, "seller type            {:?}", summary.seller_type)?;
            writeln!(out, "total payments         {:.9}", summary.total_payments)?;
            writeln!(
                out,
                "mean payments / game   {:.9}",
                summary.mean_payments_per_game
            )?;
            writeln!(
                out,
                "mean budget / game     {:.9}",
                summary.mean_budget_per_game
            )?;
            writeln!(out, "final Pr(commitment)   {:.9}", summary.final_posterior)?;
            for q in &summary.posterior_quantiles {
                writeln!(out, "  posterior q{:<4}      {:.9}", q.q, q.value)?;
            }
            writeln!(
                out,
                "high signal rate       {:.9} (buyer 1 {:.9}, buyer 2 {:.9})",
                summary.high_signal_rate_overall,
                summary.high_signal_rate[0],
                summary.high_signal_rate[1]
            )?;
            writeln!(
                out,
                "min honesty margin     {:.9}",
                summary.min_honesty_margin
            )?;
            writeln!(out, "degenerate games       {}", summary.degenerate_games)?;
        }
    }
    Ok(())
}

fn run(cli: &Cli, out: &mut impl Write) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Beliefs { buyer } => {
            let buyer = Buyer::try_from(*buyer).map_err(Failure::Usage)?;
            cmd_beliefs(&cfg, buyer, cli.output, out)
        }
        Command::Solve => cmd_solve(&cfg, cli.output, out),
        Command::Verify { scheme, tau } => {
            cmd_verify(&cfg, *scheme, tau.as_deref(), cli.output, out)
        }
        Command::Sweep {
            param,
            from,
            to,
            steps,
        } => {
            let spec = SweepSpec {
                parameter: (*param).into(),
                from: *from,
                to: *to,
                steps: *steps as usize,
            };
            cmd_sweep(&cfg, &spec, cli.output, out)
        }
        Command::Simulate {
            games,
            seed,
            seller_type,
            payments,
            trace,
        } => cmd_simulate(
            &cfg,
            *games,
            *seed,
            *seller_type,
            *payments,
            trace.as_deref(),
            cli.output,
            cli.quiet,
            out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(&cli, &mut out);
    let flushed = out.flush();
    match result.and(flushed.map_err(Failure::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.exit_code();
            match failure {
                Failure::Usage(msg) | Failure::Io(msg) => {
                    if !cli.quiet {
                        eprintln!("error: {msg}");
                    }
                }
                Failure::Validation(err) => {
                    for v in &err.violations {
                        eprintln!("{}: {}", v.code, v.detail);
                    }
                }
                Failure::Infeasible { message, reports } => {
                    // The report goes to stdout so scripts can inspect it.
                    let _ = serde_json::to_writer_pretty(
                        io::stdout(),
                        &json!({ "feasibility": reports }),
                    );
                    println!();
                    if !cli.quiet {
                        eprintln!("error: {message}");
                    }
                }
            }
            ExitCode::from(code)
        }
    }
}
