use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spark_core::report::{self, MetricsReport};
use spark_core::{engine, Error, Result, SimConfig};

#[derive(Parser)]
#[command(name = "spark", version, about = "Simulate filtered, legitimacy-gated autoscaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the traffic seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write reports (and traces) into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config file.
    Run { config: PathBuf },
    /// Run a built-in scenario.
    Scenario {
        /// flash-crowd or mixed-attack
        name: String,
        #[arg(long)]
        variant: String,
    },
    /// Run two scenarios on the same seed and print relative deltas of B against A.
    ///
    /// Each side is either `name/variant` of a built-in scenario or a config path.
    Compare { a: String, b: String },
    /// List built-in scenarios.
    List,
    /// Print the config of a built-in scenario (`name/variant`) as TOML.
    Config { scenario: String },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn resolve(spec: &str) -> Result<SimConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return SimConfig::from_path(path);
    }
    match spec.split_once('/') {
        Some((name, variant)) => engine::scenario(name, variant),
        None => Err(Error::InvalidArgument(format!(
            "`{spec}` is neither a config file nor a `name/variant` scenario"
        ))),
    }
}

fn file_stem(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

fn render(reports: &[MetricsReport], format: Format) -> Result<String> {
    match format {
        Format::Csv => report::to_csv(reports),
        Format::Json if reports.len() == 1 => reports[0].to_json(),
        Format::Json => Ok(serde_json::to_string_pretty(reports)?),
    }
}

fn emit(text: &str) {
    if text.ends_with('\n') {
        print!("{text}");
    } else {
        println!("{text}");
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

fn simulate(mut cfg: SimConfig, cli: &Cli) -> Result<()> {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let trace = engine::run(&cfg)?;
    let rep = report::compute(&trace)?;
    let text = render(std::slice::from_ref(&rep), cli.format)?;
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let stem = file_stem(&cfg.name);
            std::fs::write(dir.join(format!("{stem}.report.{}", ext(cli.format))), text)?;
            std::fs::write(dir.join(format!("{stem}.trace.json")), trace.to_json()?)?;
        }
        None => emit(&text),
    }
    Ok(())
}

fn compare(a: &str, b: &str, cli: &Cli) -> Result<()> {
    let mut configs = [resolve(a)?, resolve(b)?];
    for (cfg, spec) in configs.iter_mut().zip([a, b]) {
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if cfg.name.is_empty() {
            cfg.name = spec.to_owned();
        }
    }
    let mut reports = Vec::with_capacity(2);
    for trace in engine::run_all(&configs) {
        reports.push(report::compute(&trace?)?);
    }
    let cmp = report::compare(&reports[0], &reports[1])?;
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("comparison.json"), cmp.to_json()?)?;
            std::fs::write(
                dir.join(format!("reports.{}", ext(cli.format))),
                render(&reports, cli.format)?,
            )?;
            print!("{}", cmp.to_table());
        }
        None => match cli.format {
            Format::Json => println!("{}", cmp.to_json()?),
            Format::Csv => print!("{}", cmp.to_table()),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => SimConfig::from_path(config).and_then(|cfg| {
            let cfg = if cfg.name.is_empty() {
                SimConfig {
                    name: config
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    ..cfg
                }
            } else {
                cfg
            };
            simulate(cfg, &cli)
        }),
        Command::Scenario { name, variant } => engine::scenario(name, variant).and_then(|cfg| simulate(cfg, &cli)),
        Command::Compare { a, b } => compare(a, b, &cli),
        Command::Config { scenario } => resolve(scenario).and_then(|mut cfg| {
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            print!("{}", cfg.to_toml_string()?);
            Ok(())
        }),
        Command::List => {
            for (name, variants) in engine::SCENARIOS {
                for v in *variants {
                    println!("{name}/{v}");
                }
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig { .. } | Error::Parse(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
