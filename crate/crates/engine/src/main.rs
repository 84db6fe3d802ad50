use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use heurevo::config::{OperatorKind, RunConfig};
use heurevo::engine::write_outputs;
use heurevo::plot::{line_chart, SERIES};
use heurevo::snapshot::{state_digest, Snapshot};
use heurevo::sweep::{sweep, sweep_csv};
use heurevo::Engine;

#[derive(Parser)]
#[command(name = "heurevo", version, about = "Evolutionary search for heuristic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one evolution from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        operator: Option<OperatorKind>,
        /// Continue from a snapshot instead of seeding (the snapshot's config wins).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG charts from a metrics CSV.
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        plots: PathBuf,
    },
    /// Summarize a snapshot.
    Inspect {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Repeat a run over values of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Where to write the sweep CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}


fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            operator,
            resume,
            out,
        } => {
            let mut engine = match resume {
                Some(path) => Engine::from_snapshot(Snapshot::read(&path)?)?,
                None => {
                    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
                    let mut table: toml::Table = text.parse().context("parsing config")?;
                    if let Some(s) = seed {
                        table.insert("seed".into(), toml::Value::Integer(s as i64));
                    }
                    if let Some(op) = operator {
                        let name = if op == OperatorKind::Llm { "llm" } else { "stub" };
                        table.insert("operator".into(), toml::Value::String(name.into()));
                    }
                    if let Some(dir) = &out {
                        table.insert("output_dir".into(), toml::Value::String(dir.display().to_string()));
                    }
                    Engine::new(RunConfig::from_table(table)?)?
                }
            };
            let report = engine.run()?;
            print!("{}", report.to_json());
            if let Some(dir) = out.or_else(|| engine.config().output_dir.clone()) {
                write_outputs(&engine, &report, &dir)?;
                log::info!("outputs written to {}", dir.display());
            }
        }
        Command::Report { csv, plots } => {
            let text = std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let rows = heurevo_core::metrics::parse_csv(&text).map_err(anyhow::Error::msg)?;
            std::fs::create_dir_all(&plots)?;
            for s in SERIES {
                std::fs::write(plots.join(format!("{s}.svg")), line_chart(&rows, s))?;
            }
            println!("{} rows, {} charts in {}", rows.len(), SERIES.len(), plots.display());
        }
        Command::Inspect { snapshot } => {
            let snap = Snapshot::read(&snapshot)?;
            let db = &snap.state.db;
            let c = &snap.state.counters;
            println!("task           {}", snap.config.task.name());
            println!("criterion      {}", snap.config.criterion.name());
            println!("t              {}", db.t());
            println!("registrations  {} / {}", c.registrations, snap.config.total_samples);
            println!("evaluations    {}", c.evaluations);
            println!("resets         {} ({} islands)", c.resets, c.islands_reset);
            println!("pending        {}", snap.state.pending.len());
            println!("digest         {:016x}", state_digest(&snap.state));
            for island in db.islands() {
                println!(
                    "island {:>3}    {} clusters, {} candidates, best {}",
                    island.id,
                    island.clusters.len(),
                    island.candidate_count(),
                    island.best_score()
                );
            }
            if let Some(best) = db.best_candidate() {
                println!("best #{} score {}\n{}", best.id, best.score, best.source);
            }
        }
        Command::Sweep {
            config,
            param,
            values,
            runs,
            out,
        } => {
            if values.is_empty() || runs == 0 {
                bail!("sweep needs at least one value and one run");
            }
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let table: toml::Table = text.parse().context("parsing config")?;
            let rows = sweep(&table, &param, &values, runs, |r| {
                log::info!("{param} = {} seed {}: best {}", r.value, r.seed, r.report.best_score)
            })?;
            let csv = sweep_csv(&param, &rows);
            match out {
                Some(p) => std::fs::write(&p, csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
