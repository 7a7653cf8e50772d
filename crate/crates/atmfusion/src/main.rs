use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use atmfusion::checks::run_checks;
use atmfusion::config::ExperimentConfig;
use atmfusion::experiment::{calendar, run_with_threads, simulate_world, Scored};
use atmfusion::io::{self, ModelFile, PredictionRow};
use atmfusion::report::{self, kpi_table};
use atmfusion_core::balance::{smote, SmoteConfig};
use atmfusion_core::calendar::Calendar;
use atmfusion_core::eval::{confusion, fleet_kpis, kpis};
use atmfusion_core::features::{
    build_dataset, correlation_matrix, split_train_test, DatasetInputs, InstanceKey,
    LabeledInstance,
};
use atmfusion_core::fusion::{
    build_dsel, dcs_la_predict, fit_stacking, knora_e_predict, stacking_predict, Decision,
    PoolSpec, StackingParams,
};
use atmfusion_core::journal::{extract_all, JournalEvent, StatusTimeline};
use atmfusion_core::learners::{train_model, ModelKind, ModelParams, Samples};
use atmfusion_core::simnet::{StatusSnapshot, TransactionRecord};
use atmfusion_core::txstat::{describe_ranking, fit_per_atm_at, rank_families, GapDetectorState};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "atmfusion", version, about = "ATM out-of-service detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the report bundle.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate the outcome checks; exit 3 if any fails.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Simulate a world: transactions, status snapshots, outages, journal.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract ground-truth timelines from a journal.
    Label {
        #[arg(long)]
        journal: PathBuf,
        /// `start,end` in epoch seconds.
        #[arg(long, value_parser = parse_range)]
        horizon: (i64, i64),
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Txstat(TxstatCommand),
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Oversample the minority class with SMOTE.
    Balance {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
    },
    /// Train one base model.
    Train {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Experiment config whose `[models]` section supplies hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Predict with a fusion method.
    Fuse(FuseArgs),
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Subcommand)]
enum TxstatCommand {
    /// Fit a gap detector per ATM.
    Fit {
        #[arg(long)]
        transactions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fitting window `start,end`; defaults to the truth horizon.
        #[arg(long, value_parser = parse_range)]
        window: Option<(i64, i64)>,
        #[arg(long, default_value_t = atmfusion_core::txstat::DEFAULT_CONFIDENCE)]
        confidence: f64,
    },
    /// Rank distribution families by KS distance on a column of gap samples.
    Ks {
        #[arg(long)]
        samples: PathBuf,
    },
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Build dataset.csv from simulated or recorded inputs.
    Build {
        #[arg(long)]
        status: PathBuf,
        #[arg(long)]
        transactions: PathBuf,
        #[arg(long)]
        gapstate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Supplies calendar overrides and the unfittable-ATM policy.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Pearson correlation matrix of features and label.
    Corr {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-ATM chronological train/test split.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        ratio: f64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Dcs,
    Knorae,
    Stacking,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Pool members (dcs, knorae) or one stacking model file.
    #[arg(long, num_args = 1..)]
    pool: Vec<PathBuf>,
    #[arg(long)]
    dsel: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = atmfusion_core::fusion::DEFAULT_K)]
    k: usize,
    /// Fit a stacking model on this (balanced) training set instead of `--pool`.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Where to save a stacking model fitted with `--train`.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Metrics of a predictions.csv against its truth column.
    Metrics {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Availability, MTTF and MTTR per ATM and pooled.
    Kpis {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or("expected start,end")?;
    let a: i64 = a.trim().parse().map_err(|_| format!("bad start {a:?}"))?;
    let b: i64 = b.trim().parse().map_err(|_| format!("bad end {b:?}"))?;
    if a >= b {
        return Err("start must precede end".into());
    }
    Ok((a, b))
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown model {s:?}; one of {}", names.join("|"))
    })
}

enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
    Check,
}

fn stage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Stage(e.into())
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Stage(e)
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::Config(e.into()))
}

fn core<T>(r: atmfusion_core::Result<T>, what: &str) -> anyhow::Result<T> {
    r.map_err(|e| anyhow!("{what}: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Check) => ExitCode::from(3),
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Pipeline {
            config,
            out,
            check,
            threads,
        } => pipeline(&config, &out, check, threads),
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let (world, journal) = simulate_world(&cfg).map_err(stage)?;
            io::write_jsonl(&out.join("profiles.jsonl"), &world.profiles).map_err(stage)?;
            io::write_jsonl(&out.join("transactions.jsonl"), &world.transactions)
                .map_err(stage)?;
            io::write_jsonl(&out.join("status.jsonl"), &world.snapshots).map_err(stage)?;
            io::write_jsonl(&out.join("outages.jsonl"), &world.outages).map_err(stage)?;
            io::write_jsonl(&out.join("journal.jsonl"), &journal).map_err(stage)?;
            println!("horizon {},{}", cfg.sim.start_s, cfg.sim.end_s());
            Ok(())
        }
        Command::Label {
            journal,
            horizon,
            out,
        } => {
            let events: Vec<JournalEvent> = io::read_jsonl(&journal).map_err(stage)?;
            let mut ids: Vec<String> = events.iter().map(|e| e.atm_id.clone()).collect();
            ids.sort();
            ids.dedup();
            let truth = core(extract_all(&events, &ids, horizon), "label")?;
            io::write_jsonl(&out, &truth).map_err(stage)?;
            Ok(())
        }
        Command::Txstat(cmd) => txstat(cmd),
        Command::Features(cmd) => features(cmd),
        Command::Balance {
            input,
            out,
            k,
            seed,
            ratio,
        } => {
            let rows = io::read_dataset(&input).map_err(stage)?;
            let cfg = SmoteConfig {
                k_neighbors: k,
                target_ratio: ratio,
                seed,
            };
            let res = core(smote(&rows, &cfg), "balance")?;
            io::write_dataset(&out, &res.instances, true).map_err(stage)?;
            Ok(())
        }
        Command::Train {
            model,
            train,
            out,
            seed,
            config,
        } => {
            let mut params = match config {
                Some(p) => load_config(&p)?.models,
                None => ModelParams::default(),
            };
            if let Some(s) = seed {
                params.bagging.seed = s;
                params.forest.seed = s;
            }
            let rows = io::read_dataset(&train).map_err(stage)?;
            let samples = core(Samples::from_instances(&rows), "train")?;
            let m = core(train_model(model, &samples, &params), "train")?;
            io::write_model(&out, &ModelFile::base(m)).map_err(stage)?;
            Ok(())
        }
        Command::Fuse(args) => fuse(args),
        Command::Eval(cmd) => eval(cmd),
    }
}

fn pipeline(config: &Path, out: &Path, check: bool, threads: Option<usize>) -> Outcome {
    let cfg = load_config(config)?;
    if threads == Some(0) {
        return Err(Failure::Config(anyhow!("--threads must be positive")));
    }
    let outcome = run_with_threads(&cfg, threads).map_err(stage)?;
    let files = report::render(&outcome);
    report::write_bundle(out, &files).map_err(stage)?;
    for s in &outcome.models {
        println!("{:<12} macro_f1 {}", s.name, report::fmt_opt(s.metrics.macro_f1));
    }
    if check {
        let checks = run_checks(&outcome);
        for c in &checks {
            println!("{}", c.line());
        }
        if checks.iter().any(|c| !c.pass) {
            return Err(Failure::Check);
        }
    }
    Ok(())
}

fn txstat(cmd: TxstatCommand) -> Outcome {
    match cmd {
        TxstatCommand::Fit {
            transactions,
            truth,
            out,
            window,
            confidence,
        } => {
            let txs: Vec<TransactionRecord> =
                io::read_jsonl(&transactions).map_err(stage)?;
            let truth: Vec<StatusTimeline> = io::read_jsonl(&truth).map_err(stage)?;
            let window = match window {
                Some(w) => w,
                None => {
                    let start = truth.iter().map(|t| t.start_s()).min();
                    let end = truth.iter().map(|t| t.end_s()).max();
                    start.zip(end).ok_or_else(|| anyhow!("truth file is empty"))?
                }
            };
            let states = core(fit_per_atm_at(&txs, &truth, window, confidence), "txstat fit")?;
            io::write_json(&out, &states).map_err(stage)?;
            Ok(())
        }
        TxstatCommand::Ks { samples } => {
            let text = std::fs::read_to_string(&samples)
                .with_context(|| format!("reading {}", samples.display()))?;
            let mut values = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let field = line.split(',').next().unwrap_or("").trim();
                if field.is_empty() {
                    continue;
                }
                match field.parse::<f64>() {
                    Ok(v) => values.push(v),
                    Err(_) if i == 0 => {}
                    Err(_) => return Err(anyhow!("{}:{}: not a number: {field:?}", samples.display(), i + 1).into()),
                }
            }
            let ranking = core(rank_families(&values), "txstat ks")?;
            print!("{}", describe_ranking(&ranking));
            Ok(())
        }
    }
}

fn features(cmd: FeaturesCommand) -> Outcome {
    match cmd {
        FeaturesCommand::Build {
            status,
            transactions,
            gapstate,
            truth,
            out,
            config,
        } => {
            let cfg = match config {
                Some(p) => Some(load_config(&p)?),
                None => None,
            };
            let snaps: Vec<StatusSnapshot> = io::read_jsonl(&status).map_err(stage)?;
            let txs: Vec<TransactionRecord> =
                io::read_jsonl(&transactions).map_err(stage)?;
            let states: Vec<GapDetectorState> = io::read_json(&gapstate).map_err(stage)?;
            let truth: Vec<StatusTimeline> = io::read_jsonl(&truth).map_err(stage)?;
            let cal = match &cfg {
                Some(c) => calendar(c),
                None => {
                    let lo = snaps.iter().map(|s| s.ts).min().unwrap_or(0);
                    let hi = snaps.iter().map(|s| s.ts).max().unwrap_or(0);
                    Calendar::covering(lo, hi + 1, &[])
                }
            };
            let rows = core(
                build_dataset(&DatasetInputs {
                    snapshots: &snaps,
                    transactions: &txs,
                    gap_states: &states,
                    truth: &truth,
                    calendar: &cal,
                    policy: cfg.map(|c| c.txstat.unfittable).unwrap_or_default(),
                }),
                "features build",
            )?;
            io::write_dataset(&out, &rows, false).map_err(stage)?;
            Ok(())
        }
        FeaturesCommand::Corr { dataset, out } => {
            let rows = io::read_dataset(&dataset).map_err(stage)?;
            let m = core(correlation_matrix(&rows), "features corr")?;
            for name in &m.undefined {
                eprintln!("warning: correlation undefined for constant column {name}");
            }
            io::write_bytes(&out, report::correlation(&m).as_bytes()).map_err(stage)?;
            Ok(())
        }
        FeaturesCommand::Split {
            dataset,
            ratio,
            train,
            test,
        } => {
            let rows = io::read_dataset(&dataset).map_err(stage)?;
            let (tr, te) = core(split_train_test(&rows, ratio), "features split")?;
            io::write_dataset(&train, &tr, false).map_err(stage)?;
            io::write_dataset(&test, &te, false).map_err(stage)?;
            Ok(())
        }
    }
}

fn real_rows(path: &Path) -> anyhow::Result<Vec<LabeledInstance>> {
    let rows = io::read_dataset(path)?;
    if rows.iter().any(LabeledInstance::is_synthetic) {
        bail!("{}: synthetic rows are not allowed here", path.display());
    }
    Ok(rows)
}

fn prediction_rows(test: &[LabeledInstance], decisions: Vec<Decision>) -> Vec<PredictionRow> {
    test.iter()
        .zip(decisions)
        .map(|(r, d)| {
            let key = r.key.as_ref().expect("real rows carry keys");
            PredictionRow {
                atm_id: key.atm_id.clone(),
                ts: key.ts,
                proba: d.proba,
                label: d.label,
                truth: r.y,
            }
        })
        .collect()
}

fn fuse(args: FuseArgs) -> Outcome {
    let test = real_rows(&args.test)?;
    let decisions: Vec<Decision> = match args.method {
        Method::Stacking => {
            let model = match (&args.train, args.pool.as_slice()) {
                (Some(train), []) => {
                    let rows = io::read_dataset(train).map_err(stage)?;
                    let m = core(fit_stacking(&rows, &StackingParams::default()), "fuse")?;
                    if let Some(p) = &args.save_model {
                        io::write_model(p, &ModelFile::stacked(m.clone()))
                            .map_err(stage)?;
                    }
                    m
                }
                (None, [one]) => io::read_model(one)
                    .map_err(stage)?
                    .stacking
                    .ok_or_else(|| anyhow!("{} is not a stacking model", one.display()))?,
                _ => {
                    return Err(Failure::Config(anyhow!(
                        "stacking needs either --train or exactly one --pool file"
                    )))
                }
            };
            test.iter()
                .map(|r| {
                    core(stacking_predict(&model, &r.x), "fuse")
                        .map(|(label, proba)| Decision { label, proba })
                })
                .collect::<anyhow::Result<_>>()?
        }
        Method::Dcs | Method::Knorae => {
            if args.pool.is_empty() {
                return Err(Failure::Config(anyhow!("--pool needs at least one model")));
            }
            let dsel_path = args
                .dsel
                .as_ref()
                .ok_or_else(|| Failure::Config(anyhow!("--dsel is required for {}", "dcs/knorae")))?;
            let mut members = Vec::new();
            for p in &args.pool {
                let file = io::read_model(p).map_err(stage)?;
                members.push(
                    file.model
                        .ok_or_else(|| anyhow!("{} is not a base model", p.display()))?,
                );
            }
            let mut pool = core(PoolSpec::new(members), "fuse")?;
            pool.k_neighbors = args.k;
            let dsel = core(build_dsel(&pool, real_rows(dsel_path)?), "fuse")?;
            let rule = match args.method {
                Method::Dcs => dcs_la_predict,
                _ => knora_e_predict,
            };
            test.iter()
                .map(|r| core(rule(&pool, &dsel, &r.x), "fuse"))
                .collect::<anyhow::Result<_>>()?
        }
    };
    io::write_predictions(&args.out, &prediction_rows(&test, decisions))
        .map_err(stage)?;
    Ok(())
}

fn eval(cmd: EvalCommand) -> Outcome {
    match cmd {
        EvalCommand::Metrics { predictions, out } => {
            let rows = io::read_predictions(&predictions).map_err(stage)?;
            let key = |r: &PredictionRow| InstanceKey {
                atm_id: r.atm_id.clone(),
                ts: r.ts,
            };
            let pred: Vec<(InstanceKey, u8)> = rows.iter().map(|r| (key(r), r.label)).collect();
            let truth: Vec<(InstanceKey, u8)> = rows.iter().map(|r| (key(r), r.truth)).collect();
            let cm = core(confusion(&pred, &truth), "eval")?;
            let scored = Scored::new("predictions", "file", cm);
            for w in &scored.metrics.warnings {
                eprintln!("warning: {w}");
            }
            let text = serde_json::to_string_pretty(&scored).context("serializing metrics")?;
            match out {
                Some(p) => io::write_bytes(&p, format!("{text}\n").as_bytes())
                    .map_err(stage)?,
                None => println!("{text}"),
            }
            Ok(())
        }
        EvalCommand::Kpis { truth, out } => {
            let truth: Vec<StatusTimeline> = io::read_jsonl(&truth).map_err(stage)?;
            let mut rows = Vec::with_capacity(truth.len() + 1);
            for t in &truth {
                rows.push((t.atm_id.clone(), core(kpis(t), "eval kpis")?));
            }
            rows.push(("fleet".to_string(), core(fleet_kpis(&truth), "eval kpis")?));
            let text = kpi_table(&rows);
            match out {
                Some(p) => io::write_bytes(&p, text.as_bytes()).map_err(stage)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
