//! Subcommands. Each reads and writes artifacts under the data directory.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use memrex::agents::{keyed_triples, train_transe, EmbeddingTable, OracleAgent, OracleConfig};
use memrex::catalog::{generate_split, synthesize_catalog, Catalog, Scenario, ScenarioSet, Split, SplitCounts};
use memrex::dialog::{read_corpus, write_corpus};
use memrex::eval::{offline_predictions, offline_rows, online_eval, salience_matrix, write_csv, MetricsReport};
use memrex::ids::mix_seed;
use memrex::memgraph::MemoryGraph;
use memrex::service::{make_agent, AgentResources, CreateSession, ScenarioSource, SessionHub};
use memrex::simulator::run_episode;
use memrex::umgr::{build_examples, train_umgr_with, Profile, UmgrConfig};
use memrex::{jsonl, Umgr64};

use crate::config::{Config, Layout};

#[derive(Debug, Parser)]
#[command(name = "memrex", version, about = "Memory-graph conversational recommendation")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact root.
    #[arg(long, global = true, env = "MEMREX_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Umgr,
    Transe,
}

/// Paths to trained models; defaults are used when present on disk.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct ModelPaths {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub transe: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the item catalog.
    GenCatalog {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_items: Option<usize>,
    },
    /// Sample train/dev/test scenarios over disjoint users.
    GenScenarios {
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 300)]
        test: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Oracle self-play dialogs for one split.
    GenCorpus {
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the graph reasoner on a corpus, or the TransE table on the
    /// training graphs.
    Train {
        #[arg(long, value_enum, default_value = "umgr")]
        model: ModelArg,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Ignore in-dialog graph updates (ablation).
        #[arg(long)]
        static_graph: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Teacher-forced metrics of a checkpoint on a corpus.
    EvalOffline {
        #[command(flatten)]
        models: ModelPaths,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Also write the per-turn item scores of this scenario.
        #[arg(long)]
        salience: Option<String>,
    },
    /// Simulated-user success rate of an agent.
    EvalOnline {
        #[arg(long)]
        agent: String,
        #[command(flatten)]
        models: ModelPaths,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[command(flatten)]
        models: ModelPaths,
    },
    /// Play the user in the terminal.
    Chat {
        #[arg(long, default_value = "rec")]
        agent: String,
        #[command(flatten)]
        models: ModelPaths,
        /// Replay a stored scenario instead of sampling one.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        with_history: bool,
    },
}

struct Ctx {
    config: Config,
    layout: Layout,
}

impl Ctx {
    fn catalog(&self) -> anyhow::Result<Catalog> {
        let p = self.layout.catalog();
        if p.exists() {
            Ok(Catalog::load(&p)?)
        } else {
            Ok(synthesize_catalog(&self.config.catalog)?)
        }
    }

    fn scenarios(&self, split: Split) -> anyhow::Result<Vec<Scenario>> {
        let p = self.layout.scenarios(split);
        let set =
            ScenarioSet::load(split, &p).with_context(|| format!("loading {} (run gen-scenarios)", p.display()))?;
        Ok(set.scenarios)
    }

    fn all_scenarios(&self) -> anyhow::Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for split in Split::ALL {
            if self.layout.scenarios(split).exists() {
                out.extend(self.scenarios(split)?);
            }
        }
        Ok(out)
    }

    fn resources(&self, paths: &ModelPaths) -> anyhow::Result<AgentResources> {
        let pick = |given: &Option<PathBuf>, default: PathBuf| -> anyhow::Result<Option<PathBuf>> {
            match given {
                Some(p) if !p.exists() => bail!("{} does not exist", p.display()),
                Some(p) => Ok(Some(p.clone())),
                None => Ok(default.exists().then_some(default)),
            }
        };
        let umgr = match pick(&paths.checkpoint, self.layout.umgr())? {
            Some(p) => Some(Arc::new(
                Umgr64::load(&p).with_context(|| format!("loading {}", p.display()))?,
            )),
            None => None,
        };
        let transe = match pick(&paths.transe, self.layout.transe())? {
            Some(p) => Some(Arc::new(EmbeddingTable::load(&p)?)),
            None => None,
        };
        Ok(AgentResources { umgr, transe })
    }

    fn report_path(&self, name: &str) -> anyhow::Result<PathBuf> {
        let dir = self.layout.reports();
        fs::create_dir_all(&dir)?;
        Ok(dir.join(name))
    }
}

/// Runs a parsed command line. Summaries go to `out`; progress to stderr.
pub fn execute(cli: Cli, input: impl BufRead, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let layout = config.layout(cli.data_dir.as_deref());
    fs::create_dir_all(&layout.root).with_context(|| format!("creating {}", layout.root.display()))?;
    let ctx = Ctx { config, layout };
    match cli.command {
        Command::GenCatalog { seed, n_items } => {
            let mut cfg = ctx.config.catalog.clone();
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.n_items = n_items.unwrap_or(cfg.n_items);
            let cat = synthesize_catalog(&cfg)?;
            cat.save(&ctx.layout.catalog())?;
            writeln!(
                out,
                "{} items, {} values, {} slots",
                cat.items.len(),
                cat.values.len(),
                cat.slots.len()
            )?;
        }
        Command::GenScenarios { train, dev, test, seed } => {
            let cat = ctx.catalog()?;
            for set in generate_split(&cat, SplitCounts { train, dev, test }, seed)? {
                set.save(&ctx.layout.scenarios(set.split))?;
                writeln!(out, "{}: {} scenarios", set.split.as_str(), set.scenarios.len())?;
            }
        }
        Command::GenCorpus { split, seed } => {
            let split = Split::from(split);
            let scenarios = ctx.scenarios(split)?;
            let mut oracle = OracleAgent::new(OracleConfig::default());
            let mut dialogs = Vec::with_capacity(scenarios.len());
            let mut wins = 0;
            for (i, s) in scenarios.iter().enumerate() {
                let e = run_episode(&mut oracle, s, &ctx.config.simulator, mix_seed(seed, i as u64))?;
                wins += usize::from(e.success);
                dialogs.push(e.dialog);
            }
            write_corpus(&dialogs, &ctx.layout.corpus(split))?;
            writeln!(
                out,
                "{} dialogs, oracle success {:.3}",
                dialogs.len(),
                wins as f64 / dialogs.len().max(1) as f64
            )?;
        }
        Command::Train {
            model: ModelArg::Transe,
            seed,
            epochs,
            out: dest,
            ..
        } => {
            let mut cfg = ctx.config.transe.clone();
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            let mut triples = Vec::new();
            for s in ctx.scenarios(Split::Train)? {
                triples.extend(keyed_triples(&MemoryGraph::build_initial(&s)?));
            }
            let table = train_transe(&triples, &cfg)?;
            let dest = dest.unwrap_or_else(|| ctx.layout.transe());
            table.save(&dest)?;
            writeln!(out, "{} triples, table written to {}", triples.len(), dest.display())?;
        }
        Command::Train {
            model: ModelArg::Umgr,
            corpus,
            profile,
            seed,
            epochs,
            static_graph,
            out: dest,
        } => {
            let mut cfg = ctx.config.umgr.clone().unwrap_or_else(|| {
                UmgrConfig::profile(match profile {
                    ProfileArg::Desk => Profile::Desk,
                    ProfileArg::Paper => Profile::Paper,
                })
            });
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.static_graph |= static_graph;
            let corpus = corpus.unwrap_or_else(|| ctx.layout.corpus(Split::Train));
            let dialogs =
                read_corpus(&corpus).with_context(|| format!("loading {} (run gen-corpus)", corpus.display()))?;
            let scenarios = ctx.all_scenarios()?;
            let examples = build_examples(&dialogs, scenarios.iter(), &cfg)?;
            let mut model = Umgr64::new(cfg)?;
            let rep = train_umgr_with(&mut model, &examples, |e, l| {
                eprintln!(
                    "epoch {e}: act {:.4} item {:.4} slot {:.4} value {:.4} total {:.4}",
                    l[0], l[1], l[2], l[3], l[4]
                )
            })?;
            let dest = dest.unwrap_or_else(|| ctx.layout.umgr());
            model.save(&dest)?;
            writeln!(
                out,
                "{} turns, {} steps, loss {:.4} -> {:.4}, checkpoint {}",
                rep.n_examples,
                rep.steps,
                rep.initial[4],
                rep.final_loss(),
                dest.display()
            )?;
        }
        Command::EvalOffline {
            models,
            split,
            corpus,
            salience,
        } => {
            let split = Split::from(split);
            let model = ctx
                .resources(&models)?
                .umgr
                .ok_or_else(|| anyhow::anyhow!("eval-offline needs a checkpoint (run train)"))?;
            let corpus = corpus.unwrap_or_else(|| ctx.layout.corpus(split));
            let dialogs = read_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
            let scenarios = ctx.scenarios(split)?;
            let preds = offline_predictions(&model, &dialogs, scenarios.iter())?;
            let report = MetricsReport::from_predictions(&preds)?;
            let json = serde_json::to_string_pretty(&report)?;
            fs::write(ctx.report_path(&format!("offline.{}.json", split.as_str()))?, &json)?;
            write_csv(
                &offline_rows(&preds),
                fs::File::create(ctx.report_path(&format!("offline.{}.csv", split.as_str()))?)?,
            )?;
            if let Some(id) = salience {
                let s = scenarios
                    .iter()
                    .find(|s| s.id == id)
                    .with_context(|| format!("no scenario {id}"))?;
                let d = dialogs
                    .iter()
                    .find(|d| d.scenario_id == id)
                    .with_context(|| format!("no dialog for {id}"))?;
                fs::write(
                    ctx.report_path(&format!("salience.{id}.csv"))?,
                    salience_matrix(&model, d, s)?.to_csv()?,
                )?;
            }
            writeln!(out, "{json}")?;
        }
        Command::EvalOnline {
            agent,
            models,
            split,
            runs,
            seed,
        } => {
            let split = Split::from(split);
            let scenarios = ctx.scenarios(split)?;
            let mut a = make_agent(&agent, &ctx.resources(&models)?)?;
            let report = online_eval(a.as_mut(), &scenarios, runs, &ctx.config.simulator, seed)?;
            let stem = format!("online.{agent}.{}", split.as_str());
            jsonl::write(&ctx.report_path(&format!("{stem}.episodes.jsonl"))?, &report.episodes)?;
            write_csv(
                &report.episodes,
                fs::File::create(ctx.report_path(&format!("{stem}.episodes.csv"))?)?,
            )?;
            let summary = serde_json::json!({
                "agent": report.agent,
                "n_scenarios": report.n_scenarios,
                "runs": report.runs,
                "per_run": report.per_run,
                "success_mean": report.success_mean,
                "success_stderr": report.success_stderr,
                "imr": report.imr,
            });
            let json = serde_json::to_string_pretty(&summary)?;
            fs::write(ctx.report_path(&format!("{stem}.json"))?, &json)?;
            writeln!(out, "{json}")?;
        }
        Command::Serve { port, models } => {
            let hub = Arc::new(SessionHub::new(
                Arc::new(ctx.catalog()?),
                ctx.all_scenarios()?,
                ctx.resources(&models)?,
            ));
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(crate::http::serve(hub, port))?;
        }
        Command::Chat {
            agent,
            models,
            scenario,
            seed,
            with_history,
        } => {
            let hub = SessionHub::new(Arc::new(ctx.catalog()?), ctx.all_scenarios()?, ctx.resources(&models)?);
            let source = match scenario {
                Some(id) => ScenarioSource::ScenarioId { id },
                None => ScenarioSource::Generate { seed, with_history },
            };
            crate::chat::run(
                &hub,
                &CreateSession {
                    agent,
                    scenario: source,
                },
                input,
                out,
            )?;
        }
    }
    Ok(())
}

/// Convenience for tests and scripts: parse `args` and run.
pub fn run_args<I, S>(args: I, input: impl BufRead, out: &mut dyn Write) -> anyhow::Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    execute(Cli::try_parse_from(args)?, input, out)
}

pub fn data_dir_arg(p: &Path) -> String {
    format!("--data-dir={}", p.display())
}
