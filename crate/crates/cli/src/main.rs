//! Reproducible experiment runner for the disjoint-dynamics library.
//!
//! Exit codes: 0 pass/consistent, 1 fail/violation, 2 inconclusive,
//! 3 parse or validation error. Reports are byte-stable for a fixed
//! config; wall time goes to stderr so it never perturbs the bytes.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use std::{env, fs};

use clap::{Parser, Subcommand};

use config::{write_atomic, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(
    name = "free-dyn",
    version,
    about = "Exact experiments with disjoint dynamics on the Cantor set and the interval, \
             their return sets, and their free-space lifts"
)]
struct Cli {
    /// Load the whole experiment from a JSON config file (instead of a subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the report to this path (atomic rename) instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Report format: "json" (full report) or "csv" (main table only).
    #[arg(long, global = true, value_name = "FMT")]
    format: Option<String>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate the deleted middle-third gaps of the Cantor set in heap order.
    Gaps {
        /// Largest gap index to list.
        #[arg(long, default_value_t = 8)]
        upto: u64,
    },
    /// Emit the dense upper-left block of the shift operator matrix on the gap basis.
    Matrix {
        #[arg(long, default_value_t = 16)]
        rows: u64,
        #[arg(long, default_value_t = 16)]
        cols: u64,
    },
    /// Compute a truncated disjoint return set exactly and classify it.
    ReturnSets {
        /// Map literals, comma separated (e.g. "sigma^1,sigma^2").
        #[arg(long, value_delimiter = ',', required = true)]
        maps: Vec<String>,
        /// Source open set (e.g. "cyl:0" or "ivl:1/4,1/2").
        #[arg(long)]
        u0: String,
        /// Target sets, one per map, separated by ';'.
        #[arg(long, value_delimiter = ';', required = true)]
        u: Vec<String>,
        #[arg(long, default_value_t = 40)]
        horizon: u64,
        /// Members needed before a non-empty truncation counts as consistent.
        #[arg(long = "min-count", default_value_t = 3)]
        min_count: usize,
    },
    /// Check order-r weak mixing over a family of open sets.
    WeakMixing {
        #[arg(long, value_delimiter = ',', required = true)]
        maps: Vec<String>,
        /// Open-set family, separated by ';'.
        #[arg(long, value_delimiter = ';', required = true)]
        family: Vec<String>,
        #[arg(long, default_value_t = 2)]
        r: u32,
        #[arg(long, default_value_t = 40)]
        horizon: u64,
    },
    /// Find a commuting-map witness system and verify the filter inclusion.
    FilterWitness {
        #[arg(long, value_delimiter = ',', required = true)]
        maps: Vec<String>,
        /// The commuting map (e.g. "sigma^1").
        #[arg(long)]
        g: String,
        /// N+1 source sets, separated by ';'.
        #[arg(long, value_delimiter = ';', required = true)]
        u: Vec<String>,
        /// N+1 destination sets, separated by ';'.
        #[arg(long, value_delimiter = ';', required = true)]
        v: Vec<String>,
        #[arg(long = "search-horizon", default_value_t = 40)]
        search_horizon: u64,
        #[arg(long, default_value_t = 40)]
        horizon: u64,
    },
    /// Exact free norm of a finitely supported vector, with a dual witness.
    FreeNorm {
        /// "cantor", "interval" or "finite" (finite needs a config file).
        #[arg(long)]
        space: String,
        /// Point:coefficient pairs, comma separated (e.g. "02~2:1,2:-1/2").
        #[arg(long)]
        terms: String,
    },
    /// Compare the sparse shift model against its free-space image.
    Conjugacy {
        /// Gap-basis vector literal (e.g. "e1:1,e5:-1/2").
        #[arg(long, default_value = "e1:1")]
        vector: String,
        /// Truncation level for the comparison.
        #[arg(long, default_value_t = 4)]
        level: u32,
    },
    /// Sweep ball-system return witnesses for shift-power operators.
    Witness {
        /// Strictly increasing shift powers, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        powers: Vec<u64>,
        /// Inclusive sweep range "lo..hi".
        #[arg(long = "m-range", default_value = "10..30")]
        m_range: String,
        /// Ball center literal shared by the source and every target.
        #[arg(long, default_value = "e2:1/2")]
        center: String,
        /// Ball radius shared by the source and every target.
        #[arg(long, default_value = "1/4")]
        radius: String,
    },
    /// Verify the pointwise premises of the disjoint hypercyclicity criterion.
    Criterion {
        #[command(subcommand)]
        mode: CriterionMode,
    },
    /// List the registered experiments.
    List,
}

#[derive(Subcommand, Debug)]
enum CriterionMode {
    /// Backward-shift powers with digit-prepending inverses.
    Shift {
        #[arg(long, value_delimiter = ',', required = true)]
        powers: Vec<u64>,
        #[arg(long = "K", default_value_t = 20)]
        k: u64,
        /// Tolerance as an exact fraction (default 1/1000000000).
        #[arg(long)]
        eps: Option<String>,
    },
    /// Tent-map powers with the halving map as inverse.
    Tent {
        #[arg(long, value_delimiter = ',', required = true)]
        powers: Vec<u64>,
        #[arg(long = "K", default_value_t = 20)]
        k: u64,
        #[arg(long)]
        eps: Option<String>,
    },
}

fn command_to_config(cmd: Command) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { seed: Some(0), ..ExperimentConfig::default() };
    match cmd {
        Command::Gaps { upto } => {
            cfg.experiment = "gaps".into();
            cfg.upto = Some(upto);
        }
        Command::Matrix { rows, cols } => {
            cfg.experiment = "matrix".into();
            cfg.rows = Some(rows);
            cfg.cols = Some(cols);
        }
        Command::ReturnSets { maps, u0, u, horizon, min_count } => {
            cfg.experiment = "return-sets".into();
            cfg.maps = Some(maps);
            cfg.u0 = Some(u0);
            cfg.u = Some(u);
            cfg.horizon = Some(horizon);
            cfg.min_count = Some(min_count);
        }
        Command::WeakMixing { maps, family, r, horizon } => {
            cfg.experiment = "weak-mixing".into();
            cfg.maps = Some(maps);
            cfg.family = Some(family);
            cfg.r = Some(r);
            cfg.horizon = Some(horizon);
        }
        Command::FilterWitness { maps, g, u, v, search_horizon, horizon } => {
            cfg.experiment = "filter-witness".into();
            cfg.maps = Some(maps);
            cfg.g = Some(g);
            cfg.u = Some(u);
            cfg.v = Some(v);
            cfg.search_horizon = Some(search_horizon);
            cfg.horizon = Some(horizon);
        }
        Command::FreeNorm { space, terms } => {
            cfg.experiment = "free-norm".into();
            cfg.space = Some(space);
            cfg.terms = Some(terms);
        }
        Command::Conjugacy { vector, level } => {
            cfg.experiment = "conjugacy".into();
            cfg.vector = Some(vector);
            cfg.level = Some(level);
        }
        Command::Witness { powers, m_range, center, radius } => {
            cfg.experiment = "witness".into();
            cfg.powers = Some(powers);
            cfg.m_range = Some(m_range);
            cfg.center = Some(center);
            cfg.radius = Some(radius);
        }
        Command::Criterion { mode } => {
            cfg.experiment = "criterion".into();
            let (mode_name, powers, k, eps) = match mode {
                CriterionMode::Shift { powers, k, eps } => ("shift", powers, k, eps),
                CriterionMode::Tent { powers, k, eps } => ("tent", powers, k, eps),
            };
            cfg.mode = Some(mode_name.into());
            cfg.powers = Some(powers);
            cfg.big_k = Some(k);
            cfg.eps = eps;
        }
        Command::List => unreachable!("list is handled before dispatch"),
    }
    cfg
}

const CATALOG: &[(&str, &str, &str)] = &[
    ("gaps", "enumerate the deleted middle-third gaps in heap order", "cantor geometry"),
    ("matrix", "dense block of the shift operator on the gap basis", "shift operator"),
    ("return-sets", "exact truncated disjoint return set with verdicts", "return times"),
    ("weak-mixing", "order-r weak mixing via intersected return sets", "product reduction"),
    ("filter-witness", "commuting-map witness sets and the filter inclusion", "return-set filter"),
    ("free-norm", "exact free norm with an optimal 1-Lipschitz witness", "dual transport"),
    ("conjugacy", "residual between the sparse shift model and its free-space image", "model transfer"),
    ("witness", "ball-system return witnesses for shift-power operators", "operator mixing"),
    ("criterion", "pointwise premises of the disjoint hypercyclicity criterion", "criterion experiments"),
];

fn print_catalog() {
    for (name, desc, topic) in CATALOG {
        println!("{name:<15} {desc}  [{topic}]");
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let code = real_main();
    eprintln!("wall_ms={}", start.elapsed().as_millis());
    code
}

fn real_main() -> ExitCode {
    if let Ok(raw) = env::var("FREE_DYN_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore the error from setting the pool twice (tests).
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: FREE_DYN_THREADS must be a positive integer, got `{raw}`");
                return ExitCode::from(3);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn execute(cli: Cli) -> Result<u8, String> {
    if matches!(cli.command, Some(Command::List)) {
        print_catalog();
        return Ok(0);
    }
    let cfg = match (&cli.config, cli.command) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| format!("bad config {}: {e}", path.display()))?
        }
        (None, Some(cmd)) => command_to_config(cmd),
        (Some(_), Some(_)) => {
            return Err("give either a subcommand or --config, not both".into())
        }
        (None, None) => return Err("a subcommand or --config is required (see --help)".into()),
    };
    let report = run::dispatch(&cfg).map_err(|e| e.to_string())?;
    let format = cli
        .format
        .clone()
        .or_else(|| cfg.format.clone())
        .unwrap_or_else(|| "json".to_string());
    let bytes = match format.as_str() {
        "json" => report.to_json(),
        "csv" => report.to_csv(),
        other => return Err(format!("unknown format `{other}` (use json or csv)")),
    };
    let out_path = cli.output.clone().or_else(|| cfg.output.clone().map(PathBuf::from));
    match out_path {
        Some(path) => write_atomic(&path, bytes.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{bytes}"),
    }
    Ok(report.exit_code())
}
