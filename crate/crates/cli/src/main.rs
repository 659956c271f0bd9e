use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eh_access::config::{Scenario, SweepParam};
use eh_access::flat::{export_flat_pomdp, save_policy};
use eh_access::policies::{Planner, PolicyKind};
use eh_access::sim::{run_sweep, run_trials, sweep_csv_header, trace_csv, SimConfig};
use eh_access::solver::value_iterate;
use eh_access::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_REFUSED: u8 = 4;
const EXIT_INTERRUPTED: u8 = 130;

#[derive(Parser)]
#[command(name = "eh-access", version, about = "Access planning for energy-harvesting base stations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the POMDP; write the policy and the convergence log.
    Solve(Common),
    /// Simulate every configured policy and write per-trial results.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Also write one per-slot trace CSV per policy and trial.
        #[arg(long)]
        trace: bool,
    },
    /// Sweep one parameter across policies and write the aggregate CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// `start:end:step` (inclusive) or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Write the model as a flat POMDP file.
    Export(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "EH_ACCESS_OUT", default_value = "out")]
    out: PathBuf,
    /// Override a scenario key, e.g. `--set bs.0.lambda=0.3` or `--set bs.*.n_b=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of pomdp, eb, csma_cd, csma_ca, random.
    #[arg(long)]
    policies: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Lambda,
    MuS,
}

impl From<ParamArg> for SweepParam {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Lambda => SweepParam::Lambda,
            ParamArg::MuS => SweepParam::MuS,
        }
    }
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Parse { .. } | Error::HashMismatch { .. } | Error::Domain(_) => {
                EXIT_CONFIG
            }
            Error::Io(_) => EXIT_IO,
            Error::Refused(_) => EXIT_REFUSED,
            Error::Internal(_) | Error::Inconsistent(_) => 1,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        msg: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Simulate { common, run, trace } => cmd_simulate(&common, &run, trace),
        Command::Sweep {
            common,
            run,
            param,
            values,
        } => cmd_sweep(&common, &run, param.into(), &values),
        Command::Export(c) => cmd_export(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load(common: &Common, run: Option<&RunArgs>) -> CliResult<Scenario> {
    let text = fs::read_to_string(&common.config).map_err(|e| Failure {
        code: EXIT_CONFIG,
        msg: format!("{}: {e}", common.config.display()),
    })?;
    let mut scenario =
        Scenario::from_toml_with_overrides(&text, &common.overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", common.config.display())),
            other => other,
        })?;
    if let Some(run) = run {
        if let Some(seed) = run.seed {
            scenario.sim.seed = seed;
        }
        if let Some(trials) = run.trials {
            scenario.sim.trials = trials;
        }
        if let Some(list) = &run.policies {
            scenario.sim.policies = list.split(',').map(|s| s.trim().to_string()).collect();
        }
        scenario.validate()?;
    }
    Ok(scenario)
}

fn out_dir(common: &Common) -> CliResult<&Path> {
    fs::create_dir_all(&common.out).map_err(|e| io_failure(&common.out, e))?;
    Ok(&common.out)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn header(scenario: &Scenario) -> String {
    format!("# config_hash={} seed={}\n", scenario.hash(), scenario.sim.seed)
}

fn cmd_solve(common: &Common) -> CliResult<()> {
    let scenario = load(common, None)?;
    let model = scenario.build_model()?;
    let solver = scenario.solver_config();
    let vi = value_iterate(model.tables(), &solver)?;
    let dir = out_dir(common)?;
    let model_hash = model.tables().fingerprint(solver.gamma);
    write_file(&dir.join("convergence.csv"), &(header(&scenario) + &vi.log_csv()))?;
    write_file(
        &dir.join("policy.txt"),
        &(header(&scenario) + &save_policy(&vi.policy, &model_hash)),
    )?;
    let last = vi.log.last().map_or(f64::NAN, |r| r.residual);
    println!(
        "{} after {} iterations: residual {last:.3e}, {} alpha vectors",
        if vi.converged { "converged" } else { "stopped" },
        vi.log.len(),
        vi.policy.len()
    );
    Ok(())
}

fn cmd_simulate(common: &Common, run: &RunArgs, trace: bool) -> CliResult<()> {
    let scenario = load(common, Some(run))?;
    let model = scenario.build_model()?;
    let solver = scenario.solver_config();
    let sim = SimConfig {
        trace,
        ..scenario.sim_config()
    };
    let dir = out_dir(common)?;
    let mut csv = header(&scenario);
    csv.push_str("policy,trial,n_slots,n_success,eta_a,feasible_slots,filter_resets\n");
    for policy in scenario.policies()? {
        let prepared = Planner::prepare(policy, &model, &solver)?;
        let results = run_trials(&model, &prepared.planner, &sim)?;
        for (trial, r) in results.iter().enumerate() {
            csv.push_str(&format!(
                "{policy},{trial},{},{},{:.6},{},{}\n",
                r.n_slots, r.n_success, r.eta_a, r.feasible_slots, r.filter_resets
            ));
            if let Some(records) = &r.trace {
                let path = dir.join(format!("trace_{policy}_{trial}.csv"));
                write_file(&path, &(header(&scenario) + &trace_csv(&model, records)))?;
            }
        }
        let mean = results.iter().map(|r| r.eta_a).sum::<f64>() / results.len() as f64;
        println!("{policy:>8}: mean eta_a {mean:.4} over {} trials", results.len());
    }
    write_file(&dir.join("simulate.csv"), &csv)
}

/// Parses `start:end:step` (end inclusive) or `a,b,c`.
fn parse_values(spec: &str) -> CliResult<Vec<f64>> {
    let usage = |msg: String| Failure { code: EXIT_CONFIG, msg };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("--values: '{s}' is not a number")))
    };
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err(usage(format!("--values: '{spec}' is not start:end:step")));
        };
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if step <= 0.0 {
            return Err(usage("--values: step must be > 0".into()));
        }
        let count = ((end - start) / step + 1e-9).floor();
        if count < 0.0 {
            return Err(usage(format!("--values: end {end} is below start {start}")));
        }
        // round away the drift of repeated float steps, e.g. 0.30000000000000004
        (0..=count as usize)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<CliResult<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(usage("--values: no values given".into()));
    }
    Ok(values)
}

fn cmd_sweep(common: &Common, run: &RunArgs, param: SweepParam, values: &str) -> CliResult<()> {
    let values = parse_values(values)?;
    let scenario = load(common, Some(run))?;
    let policies: Vec<PolicyKind> = scenario.policies()?;
    let dir = out_dir(common)?;
    let path = dir.join(format!("sweep_{}.csv", param.name()));
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |line: &str| -> std::io::Result<()> {
        out.write_all(line.as_bytes())?;
        out.flush()
    };
    write(&sweep_csv_header(&scenario.hash(), scenario.sim.seed)).map_err(|e| io_failure(&path, e))?;

    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        eprintln!("warning: cannot install Ctrl-C handler: {e}");
    }
    let mut write_err = None;
    let outcome = run_sweep(&scenario, param, &values, &policies, &cancel, |row| {
        eprintln!(
            "{}={} {:>8}: eta_a {:.4} ± {:.4}",
            param.name(),
            row.value,
            row.policy,
            row.mean_eta_a,
            row.std_error()
        );
        if write_err.is_none() {
            write_err = write(&format!("{}\n", row.csv_line())).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_failure(&path, e));
    }
    for notice in &outcome.notices {
        eprintln!("notice: {notice}");
        write(&format!("# skipped: {notice}\n")).map_err(|e| io_failure(&path, e))?;
    }
    if outcome.truncated {
        write(&format!("# truncated: interrupted after {} rows\n", outcome.rows.len()))
            .map_err(|e| io_failure(&path, e))?;
        eprintln!("interrupted; partial results in {}", path.display());
        return Err(Failure {
            code: EXIT_INTERRUPTED,
            msg: "sweep interrupted".into(),
        });
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_export(common: &Common) -> CliResult<()> {
    let scenario = load(common, None)?;
    let model = scenario.build_model()?;
    let dir = out_dir(common)?;
    let text = header(&scenario) + &export_flat_pomdp(model.tables(), scenario.solver.gamma);
    write_file(&dir.join("model.pomdp"), &text)?;
    println!(
        "{} states, {} actions, {} observations",
        model.tables().n_states(),
        model.tables().n_actions(),
        model.tables().n_observations()
    );
    Ok(())
}
