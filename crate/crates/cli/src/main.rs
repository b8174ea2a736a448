use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use blocknet::block::{decode_block, encode_block, BaseModel, CompositionDescriptor};
use blocknet::harness::config::{base_path, default_train_config, Architecture, DEFAULT_REPETITIONS, FULL_REPETITIONS};
use blocknet::harness::experiment::run_experiment_with;
use blocknet::harness::report::write_report;
use blocknet::harness::sweep::{run_sweep, SweepConfig};
use blocknet::harness::tables::{run_table, TableId, BLOCK_COLUMNS};
use blocknet::harness::verify::{freeze_suite, gradient_suite, parameter_counts};
use blocknet::harness::{ExperimentConfig, Lab, LabSettings, Scale, TrainedModel};
use blocknet::model_io::{decode_network, load_model, save_model, MODEL_MAGIC};
use blocknet::train::error_on_all;
use blocknet::{build_dataset, read_dataset, write_dataset, Task};

#[derive(Parser)]
#[command(name = "blocknet", version, about = "Block networks over frozen base models")]
struct Cli {
    /// Master seed; overrides the seed of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for models, logs and reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Progress on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file.
    GenData {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train scratch networks from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train a block over saved base models from a config file.
    TrainBlock {
        #[arg(long)]
        config: PathBuf,
    },
    /// Test error of a saved model on a dataset file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Base model files of a block model, in wiring order.
        #[arg(long, value_delimiter = ',')]
        bases: Vec<PathBuf>,
    },
    /// Reproduce one of the result tables.
    Table {
        #[arg(long)]
        id: TableId,
        #[command(flatten)]
        scale: ScaleArgs,
    },
    /// Outperformance share as a function of the number of bases.
    Fig3 {
        #[command(flatten)]
        scale: ScaleArgs,
        /// Base-model subsets drawn per base count.
        #[arg(long, default_value_t = 6)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        base_counts: Vec<usize>,
    },
    /// Parameter-count, freeze and gradient invariants.
    Verify {
        #[arg(long, default_value_t = 50)]
        networks: usize,
        #[arg(long, default_value_t = 20)]
        blocks: usize,
        #[arg(long, default_value_t = 5)]
        freeze_runs: usize,
    },
}

#[derive(Args)]
struct ScaleArgs {
    /// Fraction of the full dataset sizes.
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    /// Full dataset sizes and five repetitions.
    #[arg(long, conflicts_with = "scale")]
    full_scale: bool,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    test_size: usize,
    /// Cap on training epochs per run.
    #[arg(long)]
    max_epochs: Option<usize>,
}

impl ScaleArgs {
    fn lab(&self, seed: u64, verbose: bool) -> Result<Lab> {
        let (scale, reps) = if self.full_scale {
            (Scale::FULL, FULL_REPETITIONS)
        } else {
            (Scale::new(self.scale)?, DEFAULT_REPETITIONS)
        };
        let mut train = default_train_config();
        if let Some(e) = self.max_epochs {
            train.max_epochs = e;
        }
        let settings = LabSettings {
            master_seed: seed,
            repetitions: self.repetitions.unwrap_or(reps),
            test_size: self.test_size,
            train,
            verbose,
        };
        if settings.repetitions == 0 || settings.test_size == 0 {
            bail!("repetitions and test size must be positive");
        }
        Ok(Lab::new(settings, scale))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::GenData { task, n, out: path } => {
            let d = build_dataset(*task, *n, seed)?;
            write_dataset(&d, path)?;
            println!("wrote {n} {task} examples to {}", path.display());
        }
        Command::Train { config } | Command::TrainBlock { config } => {
            let block = matches!(cli.command, Command::TrainBlock { .. });
            train_command(config, block, cli.seed, out, cli.verbose)?;
        }
        Command::Eval { model, data, bases } => {
            let dataset = read_dataset(data)?;
            let bytes = fs::read(model).with_context(|| format!("reading {}", model.display()))?;
            let error = if bytes.starts_with(MODEL_MAGIC) {
                blocknet::net::evaluate(&decode_network(&bytes)?, &dataset)?
            } else {
                let loaded = load_bases_from_header(&bytes, bases)?;
                let bn = decode_block(&bytes, &loaded)?;
                error_on_all(&bn, &dataset)?
            };
            println!("test_error_pct={error:.2}");
        }
        Command::Table { id, scale } => {
            let mut lab = scale.lab(seed, cli.verbose)?;
            let table = run_table(&mut lab, *id)?;
            let csv = table.to_csv()?;
            let path = out.join(format!("table{id}.csv"));
            write_report(&path, &csv)?;
            print!("{csv}");
            eprintln!("wrote {}", path.display());
        }
        Command::Fig3 {
            scale,
            samples,
            base_counts,
        } => {
            let mut lab = scale.lab(seed, cli.verbose)?;
            let result = run_sweep(&mut lab, &SweepConfig::new(base_counts.clone(), *samples))?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            write_report(out.join("fig3.csv"), &result.summary_csv())?;
            write_report(out.join("fig3_runs.csv"), &result.comparisons_csv())?;
            write_report(out.join("fig3_pooled.dat"), &result.plot_data(None)?)?;
            for kind in BLOCK_COLUMNS {
                write_report(out.join(format!("fig3_{kind}.dat")), &result.plot_data(Some(kind))?)?;
            }
            print!("{}", result.summary_csv());
        }
        Command::Verify {
            networks,
            blocks,
            freeze_runs,
        } => return verify(*networks, *blocks, *freeze_runs, seed),
    }
    Ok(ExitCode::SUCCESS)
}

/// Block files record base tasks and digests; `bases` supplies the files.
fn load_bases_from_header(bytes: &[u8], paths: &[PathBuf]) -> Result<Vec<BaseModel>> {
    const TASKS_AT: usize = 19;
    let count = usize::from(*bytes.get(18).context("block file truncated")?);
    if paths.len() != count {
        bail!("block model needs {count} base files via --bases, got {}", paths.len());
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let id = *bytes.get(TASKS_AT + 33 * i).context("block file truncated")?;
            let task = Task::from_id(id).context("unknown base task in block file")?;
            Ok(BaseModel::new(
                task,
                load_model(p).with_context(|| format!("loading {}", p.display()))?,
            ))
        })
        .collect()
}

fn train_command(path: &Path, block: bool, seed: Option<u64>, out: &Path, verbose: bool) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        config.master_seed = s;
    }
    match (&config.arch, block) {
        (Architecture::Block { .. }, false) => bail!("config describes a block; use train-block"),
        (Architecture::Scratch { .. }, true) => bail!("config describes a scratch network; use train"),
        _ => {}
    }
    let run = run_experiment_with(&config, verbose)?;
    let name = format!("{}-{}", config.task, config.arch.name());
    let dir = out.join(&name);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), config.to_text())?;

    let mut results = String::from("rep,test_error_pct\n");
    for (rep, ((model, log), err)) in run.models.iter().zip(&run.logs).zip(&run.result.errors).enumerate() {
        results.push_str(&format!("{rep},{err:.2}\n"));
        fs::write(dir.join(format!("rep{rep}_log.csv")), log.to_csv())?;
        match model {
            TrainedModel::Scratch(net) => save_model(net, dir.join(format!("rep{rep}.bnmd")))?,
            TrainedModel::Block(bn) => fs::write(dir.join(format!("rep{rep}.bnbc")), encode_block(bn)?)?,
        }
    }
    fs::write(dir.join("result.csv"), results)?;

    match (&config.arch, &run.models[0]) {
        (Architecture::Scratch { .. }, TrainedModel::Scratch(net)) => {
            // Repetition 0 doubles as the base model for its task.
            save_model(net, base_path(out, config.task))?;
        }
        (Architecture::Block { spec, base_tasks }, _) => {
            let descriptor = CompositionDescriptor {
                spec: *spec,
                base_tasks: base_tasks.clone(),
                base_paths: config.base_models.clone(),
                seed: config.master_seed,
            };
            fs::write(dir.join("compose.txt"), descriptor.to_text())?;
        }
        _ => unreachable!("model kind follows the architecture"),
    }
    let r = &run.result;
    println!(
        "{name}: {:.1}({:.1}-{:.1}) params={} reps={} -> {}",
        r.mean,
        r.best,
        r.worst,
        r.trainable_params,
        r.errors.len(),
        dir.display()
    );
    Ok(())
}

fn verify(networks: usize, blocks: usize, freeze_runs: usize, seed: u64) -> Result<ExitCode> {
    let mut ok = true;
    let mut line = |pass: bool, what: String| {
        ok &= pass;
        println!("{} {what}", if pass { "PASS" } else { "FAIL" });
    };
    for (name, closed, counted) in parameter_counts()? {
        line(
            closed == counted,
            format!("params {name}: closed form {closed}, counted {counted}"),
        );
    }
    let runs = freeze_suite(freeze_runs, seed)?;
    let frozen = runs.iter().all(|r| r.digests_unchanged && r.bytes_unchanged);
    line(
        frozen && runs.len() == freeze_runs,
        format!("freeze: {} block trainings left every base unchanged", runs.len()),
    );
    let g = gradient_suite(networks, blocks, seed);
    line(
        g.max_relative_error < 1e-6,
        format!(
            "gradients: {} networks + {} blocks, {} parameters, max relative error {:.2e} ({})",
            g.networks, g.blocks, g.parameters_checked, g.max_relative_error, g.worst
        ),
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
