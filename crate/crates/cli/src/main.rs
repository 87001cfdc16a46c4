use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cyclespec::ablation::{lattice, run_ablation, write_ablation_csv};
use cyclespec::config::{Preset, RunConfig};
use cyclespec::data::{synth_corpus, Manifest, Role, Split};
use cyclespec::dsp::{read_wav, write_wav};
use cyclespec::eval::{evaluate_set, Enhancer, MetricReport, ModelEnhancer, Passthrough};
use cyclespec::model::enhance;
use cyclespec::selfcheck::gradient_suite;
use cyclespec::tensor::{gradcheck::FD_TOLERANCE, load_checkpoint};
use cyclespec::train::{load_training_sets, train_dae, train_fae};
use cyclespec::Error;

#[derive(Parser, Debug)]
#[command(name = "cyclespec", version, about = "Self-supervised phase-aware speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Settings file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Start from the full-size preset instead of the desk preset.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the clean/noise/mixture corpus and its manifest.
    PrepareData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the clean-speech autoencoder.
    TrainFae {
        #[command(flatten)]
        common: Common,
        /// Corpus manifest.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Train the mixture autoencoder against a trained FAE.
    TrainDae {
        #[command(flatten)]
        common: Common,
        /// Corpus manifest.
        #[arg(long = "in")]
        input: PathBuf,
        /// Trained FAE checkpoint.
        #[arg(long)]
        fae: PathBuf,
    },
    /// Enhance one WAV file.
    Enhance {
        /// Settings file layered over the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from the full-size preset instead of the desk preset.
        #[arg(long)]
        paper_scale: bool,
        /// Noisy input WAV.
        #[arg(long = "in")]
        input: PathBuf,
        /// Enhanced output WAV.
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        fae: PathBuf,
        #[arg(long)]
        dae: PathBuf,
    },
    /// Score the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Corpus manifest.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, required_unless_present = "passthrough")]
        fae: Option<PathBuf>,
        #[arg(long, required_unless_present = "passthrough")]
        dae: Option<PathBuf>,
        /// Score the unprocessed mixtures instead of a model.
        #[arg(long)]
        passthrough: bool,
        /// Only mixtures at this SNR.
        #[arg(long, allow_negative_numbers = true)]
        snr: Option<f64>,
        /// Only mixtures with this noise kind.
        #[arg(long)]
        noise: Option<String>,
    },
    /// Train and score every valid toggle combination.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Corpus manifest; a fresh corpus is synthesized when absent.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Number of seeds per row, starting at the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Finite-difference check of every differentiable operation.
    Gradcheck {
        /// Random cases per operation.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// First case seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn preset(paper_scale: bool) -> Preset {
    if paper_scale {
        Preset::Paper
    } else {
        Preset::Desk
    }
}

fn resolve(common: &Common) -> cyclespec::Result<RunConfig> {
    let mut cfg = RunConfig::load(preset(common.paper_scale), common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

/// Creates `<out>/<timestamp>-seed<N>` and records the resolved settings.
fn run_dir(common: &Common, cfg: &RunConfig, command: &str) -> cyclespec::Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    let base = common.out.join(format!("{stamp}-seed{}", cfg.train.seed));
    let mut dir = base.clone();
    let mut n = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{n}", base.display()));
        n += 1;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    cfg.write_snapshot(&dir.join("config.txt"))?;
    let argv: Vec<String> = std::env::args().collect();
    let log = format!(
        "command: {command}\nargv: {}\nversion: {}\nthreads: {}\npreset: {}\nseed: {}\n",
        argv.join(" "),
        env!("CARGO_PKG_VERSION"),
        rayon_threads(),
        cfg.preset.name(),
        cfg.train.seed
    );
    std::fs::write(dir.join("repro.txt"), log).map_err(|e| Error::Io {
        path: dir.join("repro.txt"),
        source: e,
    })?;
    println!("{}", dir.display());
    Ok(dir)
}

fn rayon_threads() -> usize {
    cyclespec::parallelism()
}

fn copy_manifest(manifest: &Manifest, dir: &Path) -> cyclespec::Result<()> {
    manifest.save(&dir.join("manifest.tsv"))
}

fn require_file(path: &Path, what: &str) -> cyclespec::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::State(format!("{what} {} does not exist", path.display())))
    }
}

fn run(cli: Cli) -> cyclespec::Result<()> {
    match cli.command {
        Command::PrepareData { common } => {
            let cfg = resolve(&common)?;
            let dir = run_dir(&common, &cfg, "prepare-data")?;
            let manifest = synth_corpus(&cfg.corpus, cfg.train.seed, &dir.join("corpus"))?;
            println!("{} entries in {}", manifest.entries.len(), dir.join("corpus/manifest.tsv").display());
        }
        Command::TrainFae { common, input } => {
            let cfg = resolve(&common)?;
            let manifest = Manifest::load(&input)?;
            let (fae_items, _) = load_training_sets(&manifest, cfg.arch.sample_rate)?;
            let dir = run_dir(&common, &cfg, "train-fae")?;
            copy_manifest(&manifest, &dir)?;
            let out = train_fae(&fae_items, &cfg.arch, &cfg.train, Some(&dir))?;
            println!("final J_FAE {:.6e}", out.reports.last().map(|r| r.total()).unwrap_or(f64::NAN));
        }
        Command::TrainDae { common, input, fae } => {
            let cfg = resolve(&common)?;
            require_file(&fae, "FAE checkpoint")?;
            let fae_params = load_checkpoint(&fae)?;
            let manifest = Manifest::load(&input)?;
            let (_, dae_items) = load_training_sets(&manifest, cfg.arch.sample_rate)?;
            let dir = run_dir(&common, &cfg, "train-dae")?;
            copy_manifest(&manifest, &dir)?;
            let out = train_dae(&dae_items, &fae_params, &cfg.arch, &cfg.train, Some(&dir))?;
            println!("final J_DAE {:.6e}", out.reports.last().map(|r| r.total()).unwrap_or(f64::NAN));
        }
        Command::Enhance {
            config,
            paper_scale,
            input,
            output,
            fae,
            dae,
        } => {
            let cfg = RunConfig::load(preset(paper_scale), config.as_deref())?;
            require_file(&fae, "FAE checkpoint")?;
            require_file(&dae, "DAE checkpoint")?;
            let (fae, dae) = (load_checkpoint(&fae)?, load_checkpoint(&dae)?);
            let audio = read_wav(&input)?;
            let mut arch = cfg.arch.clone();
            arch.sample_rate = audio.sample_rate;
            let est = enhance(&audio.samples, &arch, &fae, &dae)?;
            write_wav(&output, &est, audio.sample_rate)?;
        }
        Command::Evaluate {
            common,
            input,
            fae,
            dae,
            passthrough,
            snr,
            noise,
        } => {
            let cfg = resolve(&common)?;
            let mut manifest = Manifest::load(&input)?;
            manifest.entries.retain(|e| {
                !(e.role == Role::Mixture && e.split == Split::Test)
                    || (snr.is_none_or(|s| e.snr_db == Some(s))
                        && noise.as_ref().is_none_or(|k| e.noise_kind.as_deref() == Some(k.as_str())))
            });
            let enhancer: Box<dyn Enhancer> = if passthrough {
                Box::new(Passthrough)
            } else {
                let (fae, dae) = (fae.expect("clap requires fae"), dae.expect("clap requires dae"));
                require_file(&fae, "FAE checkpoint")?;
                require_file(&dae, "DAE checkpoint")?;
                Box::new(ModelEnhancer {
                    arch: cfg.arch.clone(),
                    fae: load_checkpoint(&fae)?,
                    dae: load_checkpoint(&dae)?,
                })
            };
            let report = evaluate_set(&manifest, enhancer.as_ref(), cfg.arch.sample_rate)?;
            let dir = run_dir(&common, &cfg, "evaluate")?;
            report.write(&dir)?;
            print_cells(&report);
        }
        Command::Ablate { common, input, seeds } => {
            let cfg = resolve(&common)?;
            if seeds == 0 {
                return Err(Error::Config("--seeds must be positive".into()));
            }
            let dir = run_dir(&common, &cfg, "ablate")?;
            let manifest = match input {
                Some(p) => Manifest::load(&p)?,
                None => synth_corpus(&cfg.corpus, cfg.train.seed, &dir.join("corpus"))?,
            };
            let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.train.seed + k).collect();
            let rows = run_ablation(&manifest, &cfg, &lattice(), &seed_list)?;
            write_ablation_csv(&dir.join("ablation.csv"), &rows)?;
            for r in &rows {
                println!("{:<28} mean SDR {:8.3} dB", r.toggles.label(), r.mean_sdr());
            }
        }
        Command::Gradcheck { seeds, seed } => {
            let results = gradient_suite(seeds, seed.unwrap_or(0))?;
            let mut failed = 0;
            for r in &results {
                let mark = if r.passed() { "ok" } else { "FAIL" };
                println!("{:<24} {} seeds  worst rel err {:.3e}  {mark}", r.name, r.seeds, r.worst);
                failed += usize::from(!r.passed());
            }
            if failed > 0 {
                return Err(Error::Numerics(format!(
                    "{failed} operations exceed the {FD_TOLERANCE:e} bound"
                )));
            }
        }
    }
    Ok(())
}

fn print_cells(report: &MetricReport) {
    println!("{:>12} {:>6} {:>5} {:>9} {:>9} {:>9} {:>9}", "noise", "snr", "n", "sdr", "si_sdr", "lsd", "input");
    for c in &report.cells {
        println!(
            "{:>12} {:>6} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            c.noise_kind, c.snr_db, c.count, c.sdr_db, c.si_sdr_db, c.lsd_db, c.input_sdr_db
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = cyclespec::configure_threads_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
