//! `circuitdoe` — circuit bases, fraction diagnostics and D-optimal search
//! for full factorial designs, from the command line.

use anyhow::{bail, Context, Result};
use circuitdoe::campaign::{run_campaign, validate_report, CampaignConfig};
use circuitdoe::fraction::{intersection_counts, is_saturated, Fraction};
use circuitdoe::scenarios::reproduce;
use circuitdoe::search::{exchange_search, exhaustive_best};
use circuitdoe::{
    d_efficiency, enumerate_circuits, BasicMoveSet, Circuit, CircuitBasis, Coding, FactorSpec,
    FactorialDesign, ModelMatrix,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "circuitdoe",
    version,
    about = "Circuit bases and D-optimal fractions of full factorial designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DesignArgs {
    /// Factor levels, comma separated, e.g. 2,2,2,2 or 3,3,3
    #[arg(long, value_parser = parse_levels)]
    levels: FactorSpec,
    /// Contrast coding for the model matrix
    #[arg(long, value_parser = parse_coding, default_value = "effects")]
    coding: Coding,
}

fn parse_levels(s: &str) -> std::result::Result<FactorSpec, String> {
    s.parse::<FactorSpec>().map_err(|e| e.to_string())
}

fn parse_coding(s: &str) -> std::result::Result<Coding, String> {
    s.parse::<Coding>().map_err(|e| e.to_string())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the complete circuit basis as JSON Lines
    Circuits {
        #[command(flatten)]
        design: DesignArgs,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cache directory: reuse a stored basis or store the fresh one
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Enumerate only the basic moves (circuits with support on 4 points)
    Moves {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a fraction: count table, mean, variance, D-efficiency
    Eval {
        #[command(flatten)]
        design: DesignArgs,
        /// File with one design point per line: an index or a level tuple
        #[arg(long)]
        fraction: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Saturation test for a fraction of exactly p points
    Saturated {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        fraction: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Search a D-optimal k-point fraction (multi-start exchange)
    Search {
        #[command(flatten)]
        design: DesignArgs,
        /// Fraction size
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scan all k-subsets instead (refuses very large instances)
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grouped simulation campaign (many independent searches per k)
    Campaign {
        #[command(flatten)]
        design: DesignArgs,
        /// Fraction sizes, comma separated; default p+1,p+2,p+3
        #[arg(long)]
        ks: Option<String>,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the full JSON structure (including member fractions)
        #[arg(long)]
        json: bool,
    },
    /// Re-run a built-in benchmark table and compare row by row
    Reproduce {
        /// Benchmark table number
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        table: u8,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the grouped report CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Circuits { design, out, cache_dir } => {
            let model = build_model(&design)?;
            let basis = CircuitBasis::load_or_enumerate(&model, cache_dir.as_deref())?;
            with_output(out.as_deref(), |w| Ok(basis.write_jsonl(w)?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Moves { design, out } => {
            let model = build_model(&design)?;
            let moves = BasicMoveSet::enumerate(&model);
            with_output(out.as_deref(), |w| Ok(moves.write_jsonl(w)?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { design, fraction, out, format } => {
            let model = build_model(&design)?;
            let points = read_fraction_file(&fraction, model.design())?;
            let frac = Fraction::new(&model, &points)?;
            let moves = BasicMoveSet::enumerate(&model);
            let profile = intersection_counts(&frac, &moves)?;
            let value = d_efficiency(&frac, &model)?;
            // the saturation question only arises for p-point fractions
            let verdict = if frac.len() == model.num_params() {
                let basis = enumerate_circuits(&model);
                Some(is_saturated(&frac, &basis, &model)?)
            } else {
                None
            };
            let text = match format {
                Format::Csv => {
                    if let Some(v) = &verdict {
                        // stderr keeps the CSV row machine-clean
                        eprintln!("saturated: {}", v.is_saturated);
                    }
                    format!("{}\n", profile.csv_row(&frac, value.efficiency()))
                }
                Format::Json => {
                    let mut obj = serde_json::json!({
                        "k": frac.len(),
                        "table": profile.count_table(),
                        "mean": circuitdoe::rounding::format_ratio_2dp(profile.mean()),
                        "variance": circuitdoe::rounding::format_ratio_2dp(profile.variance()),
                        "efficiency": eff_display(value.efficiency()),
                        "indices": frac.indices(),
                    });
                    if let Some(v) = &verdict {
                        obj["saturated"] = serde_json::json!(v.is_saturated);
                        obj["witness"] = witness_json(v.witness.as_ref());
                    }
                    format!("{obj}\n")
                }
            };
            with_output(out.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Saturated { design, fraction, out, format } => {
            let model = build_model(&design)?;
            let points = read_fraction_file(&fraction, model.design())?;
            let frac = Fraction::new(&model, &points)?;
            let basis = enumerate_circuits(&model);
            let verdict = is_saturated(&frac, &basis, &model)?;
            let text = match format {
                Format::Csv => {
                    let witness = verdict
                        .witness
                        .as_ref()
                        .map(|c| {
                            c.support()
                                .iter()
                                .map(|i| i.to_string())
                                .collect::<Vec<_>>()
                                .join(";")
                        })
                        .unwrap_or_default();
                    format!(
                        "saturated,rank_check,witness\n{},{},{}\n",
                        verdict.is_saturated, verdict.rank_check, witness
                    )
                }
                Format::Json => format!(
                    "{}\n",
                    serde_json::json!({
                        "saturated": verdict.is_saturated,
                        "rank_check": verdict.rank_check,
                        "witness": witness_json(verdict.witness.as_ref()),
                    })
                ),
            };
            with_output(out.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Search { design, k, restarts, seed, exhaustive, out } => {
            let model = build_model(&design)?;
            let json = if exhaustive {
                let result = exhaustive_best(&model, k)?;
                serde_json::json!({
                    "best_efficiency": result.best_value.efficiency(),
                    "fraction": result.best.indices(),
                    "restarts": [],
                    "scanned": result.scanned.to_string(),
                    "optimal_count": result.optimal_sets.len(),
                    "optimal_truncated": result.truncated,
                })
            } else {
                exchange_search(&model, k, restarts, seed)?.to_json()
            };
            let text = format!("{json}\n");
            with_output(out.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Campaign { design, ks, runs, seed, out, json } => {
            let mut config = CampaignConfig::new(design.levels.levels())?;
            config.coding = design.coding;
            config.runs = runs;
            config.seed = seed;
            if let Some(list) = ks {
                config.ks = parse_ks(&list)?;
            }
            let report = run_campaign(&config)?;
            validate_report(&report)?;
            if json {
                let text = format!("{}\n", report.to_json());
                with_output(out.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))?;
            } else {
                with_output(out.as_deref(), |w| report.write_csv(w).map_err(Into::into))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce { table, runs, seed, out } => {
            let (report, comparison) = reproduce(table, runs, seed)?;
            if let Some(path) = out.as_deref() {
                let file = fs::File::create(path)
                    .with_context(|| format!("cannot create {}", path.display()))?;
                report.write_csv(file)?;
            }
            print!("{}", comparison.render());
            let verdict = if comparison.all_rows_matched {
                "all expected rows realized"
            } else {
                "some expected rows missing"
            };
            println!("table {table}: {verdict}");
            Ok(if comparison.all_rows_matched {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn build_model(args: &DesignArgs) -> Result<ModelMatrix> {
    let design = FactorialDesign::new(args.levels.clone());
    Ok(circuitdoe::model_matrix(&design, args.coding))
}

fn parse_ks(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad fraction size '{t}'"))
        })
        .collect()
}

/// Fraction files contain one design point per line: either a point index or
/// a comma-separated level tuple. Blank lines and '#' comments are skipped.
fn read_fraction_file(path: &Path, design: &FactorialDesign) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read fraction file {}", path.display()))?;
    let mut points = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let index = if line.contains(',') {
            let tuple: Vec<u32> = line
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("line {}: bad level tuple '{line}'", n + 1))?;
            design
                .point_index(&tuple)
                .with_context(|| format!("line {}: tuple outside the design", n + 1))?
        } else {
            line.parse::<usize>()
                .with_context(|| format!("line {}: bad point index '{line}'", n + 1))?
        };
        points.push(index);
    }
    if points.is_empty() {
        bail!("fraction file {} lists no points", path.display());
    }
    Ok(points)
}

fn witness_json(witness: Option<&Circuit>) -> serde_json::Value {
    match witness {
        Some(c) => serde_json::json!({"support": c.support(), "coef": c.coefficients()}),
        None => serde_json::Value::Null,
    }
}

fn eff_display(eff: f64) -> String {
    circuitdoe::rounding::format_cents(circuitdoe::rounding::cents_round_f64(eff) as i128)
}

fn with_output<F>(out: Option<&Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut file = fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            write(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}
