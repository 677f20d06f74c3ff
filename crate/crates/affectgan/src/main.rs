use std::path::{Path, PathBuf};
use std::process::ExitCode;

use affectgan::config::RunConfig;
use affectgan::pipeline::{self, EvalOptions, Split};
use affectgan::synth::generate_synthetic_corpus;
use affectgan_core::eval::Aggregator;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Number of worker threads for per-file and per-tile parallel work.
const THREADS_ENV: &str = "AFFECTGAN_THREADS";

#[derive(Parser)]
#[command(
    name = "affectgan",
    version,
    about = "Arousal/valence regression from speech with a BEGAN-pretrained encoder"
)]
struct Cli {
    /// Directory that every relative path is resolved against.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// TOML run configuration; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled corpus of amplitude-modulated tones.
    SynthCorpus {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode, chunk and normalise the manifest into a chunk store.
    Preprocess {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Train the BEGAN on every tile of a store.
    TrainBegan {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        began: BeganFlags,
    },
    /// Fit the regression head on the frozen encoder.
    TrainHead {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        began: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        head: HeadFlags,
    },
    /// Predict arousal and valence for one WAV file as JSON.
    Predict {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        began: Option<PathBuf>,
        #[arg(long)]
        head: Option<PathBuf>,
        /// Write the JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain the head over several seeds and report held-out CCC.
    Evaluate {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        began: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Trailing share of labeled manifest rows held out for scoring.
        #[arg(long, default_value_t = 0.2, conflicts_with = "test_manifest")]
        test_fraction: f64,
        /// Held-out manifest; the main manifest then serves only for training.
        #[arg(long)]
        test_manifest: Option<PathBuf>,
        #[arg(long)]
        no_svg: bool,
        /// Chunk-to-utterance reduction; alternatives to the median are for ablations.
        #[arg(long, value_enum, default_value_t = AggregateArg::Median)]
        aggregate: AggregateArg,
        #[command(flatten)]
        head: HeadFlags,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Median,
    Mean,
    Max,
}

impl From<AggregateArg> for Aggregator {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Median => Aggregator::Median,
            AggregateArg::Mean => Aggregator::Mean,
            AggregateArg::Max => Aggregator::Max,
        }
    }
}

#[derive(Args)]
struct BeganFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda_k: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct HeadFlags {
    #[arg(long = "head-epochs", alias = "epochs")]
    head_epochs: Option<usize>,
    #[arg(long = "head-batch-size")]
    head_batch_size: Option<usize>,
    #[arg(long = "head-lr")]
    head_lr: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl BeganFlags {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.began.epochs, self.epochs);
        set(&mut c.began.batch_size, self.batch_size);
        set(&mut c.began.gamma, self.gamma);
        set(&mut c.began.lambda_k, self.lambda_k);
        set(&mut c.began.lr, self.lr);
    }
}

impl HeadFlags {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.head.epochs, self.head_epochs);
        set(&mut c.head.batch_size, self.head_batch_size);
        set(&mut c.head.lr, self.head_lr);
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let workdir = cli.workdir.context("--workdir is required")?;
    std::fs::create_dir_all(&workdir).with_context(|| format!("creating {}", workdir.display()))?;
    let at = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            workdir.join(p)
        }
    };
    let mut config = RunConfig::load(cli.config.as_deref().map(at).as_deref())?;
    set(&mut config.seed, cli.seed);

    match cli.command {
        Command::SynthCorpus { n, out } => {
            set(&mut config.paths.corpus, out);
            config.validate()?;
            let manifest = generate_synthetic_corpus(n, config.seed, &at(&config.paths.corpus))?;
            println!("{}", manifest.display());
        }
        Command::Preprocess { manifest, store } => {
            set(&mut config.paths.manifest, manifest);
            set(&mut config.paths.store, store);
            let summary = pipeline::preprocess(&at(&config.paths.manifest), &at(&config.paths.store), &config)?;
            for (id, n) in &summary.files {
                println!("{id}\t{n}");
            }
            println!(
                "{} tiles from {} files",
                summary.index.records.len(),
                summary.files.len()
            );
            if !summary.skipped.is_empty() {
                for (id, why) in &summary.skipped {
                    eprintln!("skipped {id}: {why}");
                }
                eprintln!("{} file(s) could not be read", summary.skipped.len());
                return Ok(false);
            }
        }
        Command::TrainBegan { store, out, began } => {
            set(&mut config.paths.store, store);
            set(&mut config.paths.began, out);
            began.apply(&mut config);
            let ckpt = pipeline::train_began(&at(&config.paths.store), &at(&config.paths.began), &config)?;
            println!("encoder {}", ckpt.encoder_hash());
        }
        Command::TrainHead {
            store,
            manifest,
            began,
            out,
            head,
        } => {
            set(&mut config.paths.store, store);
            set(&mut config.paths.manifest, manifest);
            set(&mut config.paths.began, began);
            set(&mut config.paths.head, out);
            head.apply(&mut config);
            let p = &config.paths;
            let ckpt = pipeline::train_head(&at(&p.store), &at(&p.manifest), &at(&p.began), &at(&p.head), &config)?;
            println!("final mse {}", ckpt.meta.final_mse);
        }
        Command::Predict { wav, began, head, out } => {
            set(&mut config.paths.began, began);
            set(&mut config.paths.head, head);
            config.validate()?;
            let pred = pipeline::predict(&at(&wav), &at(&config.paths.began), &at(&config.paths.head))?;
            let json = serde_json::to_string_pretty(&pred)?;
            match out {
                Some(p) => std::fs::write(at(&p), json + "\n").with_context(|| format!("writing {}", p.display()))?,
                None => println!("{json}"),
            }
        }
        Command::Evaluate {
            store,
            manifest,
            began,
            out,
            runs,
            test_fraction,
            test_manifest,
            no_svg,
            aggregate,
            head,
        } => {
            set(&mut config.paths.store, store);
            set(&mut config.paths.manifest, manifest);
            set(&mut config.paths.began, began);
            set(&mut config.paths.report, out);
            head.apply(&mut config);
            let split = match test_manifest {
                Some(p) => Split::Manifest(at(&p)),
                None => Split::Fraction(test_fraction),
            };
            let options = EvalOptions {
                split,
                runs,
                svg: !no_svg,
                aggregator: aggregate.into(),
            };
            let p = &config.paths;
            let report = pipeline::evaluate(
                &at(&p.store),
                &at(&p.manifest),
                &at(&p.began),
                &at(&p.report),
                &options,
                &config,
            )?;
            println!("run,ccc_arousal,ccc_valence");
            for r in &report.per_run {
                println!("{},{:.4},{:.4}", r.run, r.ccc_arousal, r.ccc_valence);
            }
            println!(
                "median arousal {:.4} valence {:.4}",
                report.arousal.median, report.valence.median
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
