use std::time::Instant;

use clipaudit::beta::{
    beta_formula, beta_formula_upper, beta_lookup, simulate_beta, BetaRow, BetaTable, CalibrationJob,
    ProgressObserver,
};
use clipaudit::engine::BetaChoice;
use clipaudit::estimator::{
    bravo_crossover_beta, expected_sample_size_bravo, expected_sample_size_clip, measure_asn, AsnReport,
    SampleSizeEstimate, ScenarioSpec,
};
use clipaudit::rng::GENERATOR_ID;
use clipaudit::types::{AuditParams, BetaSource};
use clipaudit::Error;
use serde::Serialize;

use crate::args::{
    BetaArgs, BetaChoiceArgs, Cli, Command, EstimateArgs, Format, ServeArgs, SimArgs, SimulateArgs, Source,
    TableArgs,
};
use crate::{audit, CliError, CliResult, Io};

pub fn dispatch(cli: Cli, io: &mut Io<'_>) -> CliResult {
    match cli.command {
        Command::Beta(a) => beta(&a, cli.format, io),
        Command::Table(a) => table(&a, cli.format, io),
        Command::Audit(a) => audit::run(&a, cli.format, io),
        Command::Simulate(a) => simulate(&a, cli.format, io),
        Command::Estimate(a) => estimate(&a, cli.format, io),
        Command::Serve(a) => serve(a),
    }
}

pub fn jobs(requested: Option<usize>) -> CliResult<usize> {
    match requested {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => Ok(j),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn json_line<T: Serialize>(io: &mut Io<'_>, value: &T) -> CliResult {
    serde_json::to_writer_pretty(&mut *io.stdout, value)?;
    writeln!(io.stdout)?;
    Ok(())
}

/// Progress on stderr roughly every tenth of the trials.
fn with_progress<T>(io: &mut Io<'_>, label: &str, trials: u64, f: impl FnOnce(&ProgressObserver<'_>) -> T) -> T {
    let stderr = std::sync::Mutex::new(&mut *io.stderr);
    let cb = |done: u64, total: u64| {
        if let Ok(mut e) = stderr.lock() {
            let _ = writeln!(e, "{label}: {done}/{total} trials");
        }
    };
    let observer = ProgressObserver {
        stride: (trials / 10).max(1),
        callback: &cb,
    };
    f(&observer)
}

fn check_alpha(alpha: f64) -> CliResult {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Data(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Serialize)]
struct BetaReport {
    n: u64,
    alpha: f64,
    beta: f64,
    source: BetaSource,
    resolved_n: Option<u64>,
    resolved_alpha: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    generator: Option<String>,
}

fn simulate_row(io: &mut Io<'_>, n: u64, alpha: f64, sim: &SimArgs) -> CliResult<BetaRow> {
    let job = CalibrationJob {
        n,
        alphas: vec![alpha],
        trials: sim.trials,
        seed: sim.seed,
        parallelism: jobs(sim.jobs)?,
    };
    let start = Instant::now();
    let rows = with_progress(io, &format!("n={n}"), sim.trials, |obs| simulate_beta(&job, Some(obs)))?;
    report_rate(io, n, sim.trials, start)?;
    Ok(rows.into_iter().next().expect("one alpha"))
}

fn report_rate(io: &mut Io<'_>, n: u64, trials: u64, start: Instant) -> CliResult {
    let secs = start.elapsed().as_secs_f64();
    writeln!(
        io.stderr,
        "n={n}: {trials} trials in {secs:.2} s ({:.0} trials/s, {:.2e} steps/s)",
        trials as f64 / secs,
        trials as f64 * n as f64 / secs
    )?;
    Ok(())
}

fn beta(args: &BetaArgs, format: Format, io: &mut Io<'_>) -> CliResult {
    check_alpha(args.alpha)?;
    let (n, alpha) = (args.n, args.alpha);
    let base = BetaReport {
        n,
        alpha,
        beta: 0.0,
        source: BetaSource::Table,
        resolved_n: None,
        resolved_alpha: None,
        trials: None,
        seed: None,
        generator: None,
    };
    let report = match args.source {
        Source::Table => {
            let r = beta_lookup(n, alpha)?;
            BetaReport {
                beta: r.beta,
                resolved_n: Some(r.resolved_n),
                resolved_alpha: Some(r.resolved_alpha),
                ..base
            }
        }
        Source::Formula => BetaReport {
            beta: beta_formula(n, alpha)?,
            source: BetaSource::Formula,
            ..base
        },
        Source::Upper => BetaReport {
            beta: beta_formula_upper(n, alpha)?,
            source: BetaSource::FormulaUpperBound,
            ..base
        },
        Source::Simulate => {
            let row = simulate_row(io, n, alpha, &args.sim)?;
            BetaReport {
                beta: row.beta,
                source: BetaSource::Simulation,
                trials: Some(row.trials),
                seed: row.seed,
                generator: Some(row.generator),
                ..base
            }
        }
    };
    match format {
        Format::Json => json_line(io, &report),
        Format::Csv => {
            let opt = |x: Option<String>| x.unwrap_or_default();
            writeln!(io.stdout, "n,alpha,beta,source,resolved_n,resolved_alpha,trials,seed")?;
            writeln!(
                io.stdout,
                "{},{},{:.4},{},{},{},{},{}",
                report.n,
                report.alpha,
                report.beta,
                report.source,
                opt(report.resolved_n.map(|v| v.to_string())),
                opt(report.resolved_alpha.map(|v| v.to_string())),
                opt(report.trials.map(|v| v.to_string())),
                opt(report.seed.map(|v| v.to_string())),
            )?;
            Ok(())
        }
        Format::Human => {
            write!(io.stdout, "n={} alpha={} source={}", report.n, report.alpha, report.source)?;
            if let (Some(rn), Some(ra)) = (report.resolved_n, report.resolved_alpha) {
                write!(io.stdout, " resolved_n={rn} resolved_alpha={ra}")?;
            }
            if let (Some(t), Some(s)) = (report.trials, report.seed) {
                write!(io.stdout, " trials={t} seed={s}")?;
            }
            writeln!(io.stdout)?;
            writeln!(io.stdout, "beta={:.4}", report.beta)?;
            Ok(())
        }
    }
}

fn table(args: &TableArgs, format: Format, io: &mut Io<'_>) -> CliResult {
    if args.n_list.is_empty() || args.alpha_list.is_empty() {
        return Err(CliError::Usage("--n-list and --alpha-list must be nonempty".into()));
    }
    for &a in &args.alpha_list {
        check_alpha(a).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let parallelism = jobs(args.sim.jobs)?;
    writeln!(
        io.stderr,
        "table: {} n values x {} alphas, {} trials, seed {}, {} jobs",
        args.n_list.len(),
        args.alpha_list.len(),
        args.sim.trials,
        args.sim.seed,
        parallelism
    )?;
    let total = Instant::now();
    let mut rows = Vec::new();
    for &n in &args.n_list {
        let job = CalibrationJob {
            n,
            alphas: args.alpha_list.clone(),
            trials: args.sim.trials,
            seed: args.sim.seed,
            parallelism,
        };
        let start = Instant::now();
        let r = with_progress(io, &format!("n={n}"), args.sim.trials, |obs| simulate_beta(&job, Some(obs)))?;
        report_rate(io, n, args.sim.trials, start)?;
        rows.extend(r);
    }
    let secs = total.elapsed().as_secs_f64();
    let trials = args.sim.trials * args.n_list.len() as u64;
    writeln!(io.stderr, "table: {trials} trials in {secs:.2} s ({:.0} trials/s)", trials as f64 / secs)?;

    let table = BetaTable::new(rows, GENERATOR_ID);
    if let Some(path) = &args.out {
        table.write_csv(std::fs::File::create(path)?)?;
    }
    match format {
        Format::Json => json_line(io, &table),
        Format::Csv => {
            table.write_csv(&mut *io.stdout)?;
            Ok(())
        }
        Format::Human => {
            writeln!(
                io.stdout,
                "trials={} seed={} generator={}",
                args.sim.trials, args.sim.seed, GENERATOR_ID
            )?;
            write!(io.stdout, "{:>10}", "n")?;
            for a in &args.alpha_list {
                write!(io.stdout, " {:>8}", format!("{a}"))?;
            }
            writeln!(io.stdout)?;
            for chunk in table.rows.chunks(args.alpha_list.len()) {
                write!(io.stdout, "{:>10}", chunk[0].n)?;
                for r in chunk {
                    write!(io.stdout, " {:>8.4}", r.beta)?;
                }
                writeln!(io.stdout)?;
            }
            Ok(())
        }
    }
}

pub fn beta_choice(args: &BetaChoiceArgs, jobs_requested: Option<usize>) -> CliResult<BetaChoice> {
    choice_from(args.beta, args.beta_source, args.beta_trials, args.beta_seed, jobs_requested)
}

fn choice_from(
    manual: Option<f64>,
    source: Source,
    trials: u64,
    seed: u64,
    jobs_requested: Option<usize>,
) -> CliResult<BetaChoice> {
    Ok(match (manual, source) {
        (Some(beta), _) => BetaChoice::Manual { beta },
        (None, Source::Table) => BetaChoice::Table,
        (None, Source::Formula) => BetaChoice::Formula,
        (None, Source::Upper) => BetaChoice::FormulaUpperBound,
        (None, Source::Simulate) => BetaChoice::Simulation {
            trials,
            seed,
            parallelism: jobs(jobs_requested)?,
        },
    })
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    beta_source: BetaSource,
    report: &'a AsnReport,
}

fn simulate(args: &SimulateArgs, format: Format, io: &mut Io<'_>) -> CliResult {
    check_alpha(args.alpha)?;
    let params: AuditParams = beta_choice(&args.beta, args.jobs)?.resolve(args.n, args.alpha)?;
    let scenario = ScenarioSpec {
        n: args.n,
        margin: args.margin,
        alpha: args.alpha,
        beta: params.beta,
        trials: args.trials,
        seed: args.seed,
    };
    let start = Instant::now();
    let report = measure_asn(&scenario, jobs(args.jobs)?)?;
    writeln!(io.stderr, "simulate: {} trials in {:.2} s", args.trials, start.elapsed().as_secs_f64())?;
    if let Some(path) = &args.trials_out {
        std::fs::write(path, report.trials_csv())?;
    }
    match format {
        Format::Json => json_line(
            io,
            &SimulateOutput {
                beta_source: params.beta_source,
                report: &report,
            },
        ),
        Format::Csv => {
            io.stdout.write_all(report.trials_csv().as_bytes())?;
            Ok(())
        }
        Format::Human => {
            writeln!(
                io.stdout,
                "n={} margin={} alpha={} beta={:.4} source={} trials={} seed={}",
                args.n, args.margin, args.alpha, params.beta, params.beta_source, args.trials, args.seed
            )?;
            writeln!(io.stdout, "mean final sample size: {:.2}", report.mean)?;
            writeln!(io.stdout, "standard deviation: {:.2}", report.stddev)?;
            for q in &report.quantiles {
                writeln!(io.stdout, "  {:>3.0}% quantile: {}", q.p * 100.0, q.sample_size)?;
            }
            writeln!(io.stdout, "accepted fraction: {:.4}", report.accepted_fraction)?;
            writeln!(io.stdout, "full-count fraction: {:.4}", report.full_count_fraction)?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    n: u64,
    alpha: f64,
    margin: f64,
    beta: f64,
    beta_source: BetaSource,
    /// `None` when the expectation is infinite.
    clip: Option<SampleSizeEstimate>,
    bravo: Option<SampleSizeEstimate>,
    bravo_truncated: Option<u64>,
    crossover_beta: f64,
}

fn finite(r: clipaudit::Result<SampleSizeEstimate>) -> CliResult<Option<SampleSizeEstimate>> {
    match r {
        Ok(e) => Ok(Some(e)),
        Err(Error::InfiniteExpectation { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn estimate(args: &EstimateArgs, format: Format, io: &mut Io<'_>) -> CliResult {
    check_alpha(args.alpha)?;
    let choice = choice_from(args.beta, args.beta_source, args.beta_trials, args.beta_seed, None)?;
    let params = choice.resolve(args.n, args.alpha)?;
    let clip = finite(expected_sample_size_clip(params.beta, args.margin))?;
    let bravo = finite(expected_sample_size_bravo(args.alpha, args.margin))?;
    let out = EstimateOutput {
        n: args.n,
        alpha: args.alpha,
        margin: args.margin,
        beta: params.beta,
        beta_source: params.beta_source,
        clip,
        bravo,
        bravo_truncated: bravo.map(|b| b.expected.trunc() as u64),
        crossover_beta: bravo_crossover_beta(args.alpha)?,
    };
    let show = |e: Option<SampleSizeEstimate>| match e {
        Some(e) => (format!("{:.2}", e.expected), e.ceiled.to_string()),
        None => ("inf".to_string(), String::new()),
    };
    match format {
        Format::Json => json_line(io, &out),
        Format::Csv => {
            writeln!(io.stdout, "method,n,alpha,margin,beta,beta_source,expected,ceiled")?;
            let (ce, cc) = show(out.clip);
            let (be, bc) = show(out.bravo);
            writeln!(
                io.stdout,
                "clipaudit,{},{},{},{:.4},{},{ce},{cc}",
                out.n, out.alpha, out.margin, out.beta, out.beta_source
            )?;
            writeln!(io.stdout, "bravo,{},{},{},,,{be},{bc}", out.n, out.alpha, out.margin)?;
            Ok(())
        }
        Format::Human => {
            writeln!(
                io.stdout,
                "n={} alpha={} margin={} beta={:.4} source={}",
                out.n, out.alpha, out.margin, out.beta, out.beta_source
            )?;
            match (out.clip, out.bravo) {
                (Some(c), Some(b)) => {
                    writeln!(io.stdout, "ClipAudit: {:.2} -> {}", c.expected, c.ceiled)?;
                    writeln!(
                        io.stdout,
                        "Bravo:     {:.2} -> {} (truncated {})",
                        b.expected,
                        b.ceiled,
                        b.expected.trunc()
                    )?;
                }
                _ => writeln!(
                    io.stdout,
                    "expected sample size is infinite for margin {}: a tied contest never stops on average",
                    out.margin
                )?,
            }
            writeln!(
                io.stdout,
                "ClipAudit needs fewer ballots than Bravo when beta < {:.4}",
                out.crossover_beta
            )?;
            Ok(())
        }
    }
}

fn serve(args: ServeArgs) -> CliResult {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(clipaudit_service::serve(clipaudit_service::Config {
            listen: args.listen,
            data_dir: args.data_dir,
        }))
        .map_err(CliError::from)
}
