use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use dynawalk::harness::{self, ExperimentConfig, ExperimentReport, ParamKind, COMMANDS, VERSION};
use dynawalk::Error;

fn kind_hint(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::Int => "INT",
        ParamKind::Real => "REAL",
        ParamKind::IntList => "INT,INT,...",
        ParamKind::RealList => "REAL,REAL,...",
        ParamKind::Text => "SPEC",
        ParamKind::TextList => "'SPEC SPEC ...'",
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("dynawalk")
        .version(VERSION)
        .about("Monte Carlo and quadrature experiments on dynamical random walks")
        .subcommand_required(true)
        .arg(
            Arg::new("seed")
                .long("seed")
                .global(true)
                .value_name("U64")
                .value_parser(value_parser!(u64))
                .help("master seed [default: 42]"),
        )
        .arg(
            Arg::new("reps")
                .long("reps")
                .global(true)
                .value_name("N")
                .value_parser(value_parser!(u64))
                .help("replications [default: per subcommand]"),
        )
        .arg(
            Arg::new("workers")
                .long("workers")
                .global(true)
                .value_name("N")
                .value_parser(value_parser!(usize))
                .help("worker threads; results do not depend on it"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("PATH")
                .value_parser(value_parser!(PathBuf))
                .help("write PATH.json and PATH.csv (and PATH.dat with --plotdata) instead of printing JSON"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .value_parser(value_parser!(PathBuf))
                .help("JSON config; command-line flags override it"),
        )
        .arg(
            Arg::new("plotdata")
                .long("plotdata")
                .global(true)
                .action(ArgAction::SetTrue)
                .help("also emit two-column plot data"),
        );
    for spec in COMMANDS {
        let mut sub = Command::new(spec.name).about(spec.about);
        for p in spec.params {
            sub = sub.arg(
                Arg::new(p.name)
                    .long(p.name)
                    .value_name(kind_hint(p.kind))
                    .allow_hyphen_values(true)
                    .help(format!("{} [default: {}]", p.help, p.default)),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd.subcommand(
        Command::new("summarize")
            .about("one CSV row per saved JSON report, with a fitted slope where declared")
            .arg(Arg::new("reports").required(true).num_args(1..).value_parser(value_parser!(PathBuf))),
    )
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Resource(format!("cannot write {}: {e}", path.display())))
}

/// A closed pipe (`dynawalk ... | head`) is not an error.
fn stdout(text: &str) -> Result<(), Error> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(Error::Resource(format!("cannot write stdout: {e}")))
        }
        _ => Ok(()),
    }
}

/// `--out results/run` and `--out results/run.json` both name the stem `results/run`.
fn stem(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some("json" | "csv" | "dat") => out.with_extension(""),
        _ => out.to_path_buf(),
    }
}

fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn config_from(name: &str, m: &ArgMatches) -> Result<ExperimentConfig, Error> {
    let base = match m.get_one::<PathBuf>("config") {
        Some(path) => ExperimentConfig::from_json(&read(path)?)?,
        None => ExperimentConfig::default(),
    };
    let mut cli = ExperimentConfig::new(name);
    cli.seed = m.get_one::<u64>("seed").copied();
    cli.reps = m.get_one::<u64>("reps").copied();
    cli.workers = m.get_one::<usize>("workers").copied();
    for p in harness::command(name)?.params {
        if let Some(v) = m.get_one::<String>(p.name) {
            cli = cli.param(p.name, v.as_str());
        }
    }
    Ok(base.overridden_by(cli))
}

fn emit(report: &ExperimentReport, m: &ArgMatches) -> Result<(), Error> {
    let plot = m.get_flag("plotdata");
    match m.get_one::<PathBuf>("out") {
        Some(out) => {
            let stem = stem(out);
            write(&with_suffix(&stem, "json"), &report.to_json())?;
            write(&with_suffix(&stem, "csv"), &report.to_csv()?)?;
            if plot {
                write(&with_suffix(&stem, "dat"), &report.plot_data())?;
            }
        }
        None if plot => stdout(&report.plot_data())?,
        None => stdout(&(report.to_json() + "\n"))?,
    }
    for flag in &report.flags {
        eprintln!("flag: {flag}");
    }
    for a in report.assertions.iter().filter(|a| !a.passed) {
        eprintln!("assertion failed: {}", a.name);
    }
    Ok(())
}

fn summarize(m: &ArgMatches) -> Result<(), Error> {
    let reports = m
        .get_many::<PathBuf>("reports")
        .expect("required")
        .map(|p| {
            serde_json::from_str::<ExperimentReport>(&read(p)?)
                .map_err(|e| Error::InvalidArgument(format!("{} is not a report: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = harness::summarize(&reports)?;
    let csv = summary.to_csv()?;
    match m.get_one::<PathBuf>("out") {
        Some(out) => write(&with_suffix(&stem(out), "csv"), &csv)?,
        None => stdout(&csv)?,
    }
    for flag in &summary.flags {
        eprintln!("flag: {flag}");
    }
    Ok(())
}

fn run(m: &ArgMatches) -> Result<i32, Error> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    if name == "summarize" {
        summarize(sub)?;
        return Ok(0);
    }
    let report = harness::run(&config_from(name, sub)?)?;
    emit(&report, sub)?;
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match run(&matches) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
