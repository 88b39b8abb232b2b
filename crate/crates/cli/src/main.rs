//! `pdn`: generate a labelled corpus, train the mixture density network,
//! query it for designs and verify them with the forward model.

mod config;
mod selftest;
mod spectra;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pdn_core::dataset::{self, generate_grid_corpus, generate_random_corpus};
use pdn_core::pca::fit_pca_weighted;
use pdn_core::{
    density_map, design, load_checkpoint, save_checkpoint, train, DesignReport, PdnError, PdnModel,
    Spectrum,
};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "pdn",
    version,
    about = "Mixture-density inverse design of stepped acoustic ducts"
)]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set training.epochs=40`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a corpus of structures with the forward model.
    Generate {
        /// Radius levels per layer (grid corpus).
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
        /// Draw this many uniformly random structures instead of the grid.
        #[arg(long, value_name = "N")]
        random: Option<usize>,
        /// Seed for `--random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the corpus as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train on a corpus and write the checkpoint and per-epoch log.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Find candidate structures for a target spectrum.
    Design {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the PCA density map as CSV and SVG with this path stem.
        #[arg(long, value_name = "STEM")]
        viz: Option<PathBuf>,
        #[arg(long, default_value_t = 120)]
        resolution: usize,
    },
    /// Run the forward model on a structure and optionally score it.
    Evaluate {
        /// Comma-separated radii in mm.
        #[arg(long, allow_hyphen_values = true)]
        structure: String,
        #[command(flatten)]
        target: OptionalTarget,
        /// Spectrum CSV destination.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the fast invariant checks.
    Selftest,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// Target spectrum CSV.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Synthesize the target from these radii (mm, comma-separated).
    #[arg(long, allow_hyphen_values = true)]
    from_structure: Option<String>,
    /// Built-in target; `wide-bandgap` is the only one.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct OptionalTarget {
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    builtin: Option<String>,
}

/// Usage or configuration problem.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A check on numerical results did not hold.
#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    if err.downcast_ref::<NumericalFailure>().is_some() {
        return 3;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PdnError>() {
            return match e {
                PdnError::InvalidConfig(_) | PdnError::InvalidArgument(_) => 1,
                PdnError::NumericalConsistency { .. } | PdnError::TrainingDiverged { .. } => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.overrides)
        .map_err(|e| UsageError(format!("{e:#}")))?;
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot start worker threads")?;
    pool.install(|| dispatch(cli.command, config))
}

fn dispatch(command: Command, mut config: RunConfig) -> Result<()> {
    match command {
        Command::Generate {
            levels,
            layers,
            random,
            seed,
            csv,
            output,
        } => {
            config.dataset.levels = levels.unwrap_or(config.dataset.levels);
            config.dataset.layers = layers.unwrap_or(config.dataset.layers);
            config
                .validate()
                .map_err(|e| UsageError(format!("{e:#}")))?;
            generate(&config, random.map(|n| (n, seed)), csv, output)
        }
        Command::Train {
            dataset,
            epochs,
            checkpoint,
        } => {
            config.training.epochs = epochs.unwrap_or(config.training.epochs);
            config
                .validate()
                .map_err(|e| UsageError(format!("{e:#}")))?;
            train_cmd(&config, dataset, checkpoint)
        }
        Command::Design {
            target,
            checkpoint,
            report,
            viz,
            resolution,
        } => design_cmd(&config, &target, checkpoint, report, viz, resolution),
        Command::Evaluate {
            structure,
            target,
            output,
        } => evaluate(&config, &structure, &target, output),
        Command::Selftest => {
            let mut failed = 0;
            for (name, check) in selftest::CHECKS {
                match check(&config) {
                    Ok(detail) => println!("PASS  {name}: {detail}"),
                    Err(detail) => {
                        failed += 1;
                        println!("FAIL  {name}: {detail}");
                    }
                }
            }
            if failed > 0 {
                bail!(NumericalFailure(format!(
                    "{failed} self-test check(s) failed"
                )));
            }
            Ok(())
        }
        Command::ShowConfig => {
            print!("{}", config.to_toml());
            println!("# config_hash = {}", config.hash());
            Ok(())
        }
    }
}

/// Writes `contents` and a `.meta` sidecar recording the run config hash.
fn write_output(path: &Path, contents: &str, config: &RunConfig) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    let meta = format!("config_hash={}\n", config.hash());
    let sidecar = dataset::sidecar_path(path);
    std::fs::write(&sidecar, meta)
        .with_context(|| format!("cannot write {}", sidecar.display()))?;
    Ok(())
}

fn generate(
    config: &RunConfig,
    random: Option<(usize, u64)>,
    csv: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<()> {
    let setup = config.setup()?;
    let bounds = config.bounds();
    let levels = bounds.levels(config.dataset.levels);
    let corpus = match random {
        Some((n, seed)) => {
            generate_random_corpus(n, seed, config.dataset.layers, &setup, &bounds, &levels)?
        }
        None => generate_grid_corpus(&levels, config.dataset.layers, &setup, &bounds)?,
    };
    let path = config.resolve(output.as_deref().unwrap_or(&config.paths.dataset));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    dataset::save(&corpus, &path).with_context(|| format!("cannot write {}", path.display()))?;
    if let Some(csv) = csv {
        dataset::export_csv(&corpus, &config.resolve(&csv))?;
    }
    let bytes = std::fs::read(&path)?;
    println!("wrote {}", path.display());
    println!("samples        {}", corpus.len());
    println!("layers         {}", corpus.layers());
    println!(
        "grid           {} Hz to {} Hz, {} points",
        setup.grid.start_hz,
        setup.grid.frequency(setup.grid.count - 1),
        setup.grid.count
    );
    println!("radius bounds  [{}, {}] mm", bounds.min, bounds.max);
    println!("dataset hash   {}", corpus.provenance.config_hash);
    println!("content sha256 {}", dataset::content_hash(&bytes));
    println!("config hash    {}", config.hash());
    Ok(())
}

fn train_cmd(
    config: &RunConfig,
    dataset_path: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
) -> Result<()> {
    let path = config.resolve(dataset_path.as_deref().unwrap_or(&config.paths.dataset));
    let corpus =
        dataset::load(&path).with_context(|| format!("cannot load dataset {}", path.display()))?;
    if corpus.setup != config.setup()? {
        bail!(UsageError(format!(
            "dataset {} was generated with a different forward setup than the run config",
            path.display()
        )));
    }
    let train_config = config.train_config();
    let outcome = train(&corpus, &config.network_config(), &train_config)?;
    let model = PdnModel {
        weights: outcome.weights,
        stats: outcome.stats,
        setup: corpus.setup,
        train_config,
        config_hash: config.hash(),
    };
    let checkpoint = config.resolve(checkpoint.as_deref().unwrap_or(&config.paths.checkpoint));
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(&model, &checkpoint)
        .with_context(|| format!("cannot write {}", checkpoint.display()))?;
    let log_path = config.resolve(&config.paths.training_log);
    write_output(&log_path, &outcome.log.to_csv(true), config)?;
    let log = &outcome.log;
    let first = log.initial_validation_nll().unwrap_or(f64::NAN);
    let best = log.best_validation_nll().unwrap_or(f64::NAN);
    println!("wrote {} and {}", checkpoint.display(), log_path.display());
    println!("samples            {}", corpus.len());
    println!("epochs             {}", log.records.len().saturating_sub(1));
    println!("validation nll     {first:.16e} (untrained)");
    println!("best validation    {best:.16e} at epoch {}", log.best_epoch);
    println!("config hash        {}", config.hash());
    Ok(())
}

fn load_model(config: &RunConfig, checkpoint: Option<PathBuf>) -> Result<PdnModel> {
    let path = config.resolve(checkpoint.as_deref().unwrap_or(&config.paths.checkpoint));
    load_checkpoint(&path, None)
        .with_context(|| format!("cannot load checkpoint {}", path.display()))
}

fn resolve_target(model: &PdnModel, args: &TargetArgs) -> Result<(Spectrum, String)> {
    let grid = &model.setup.grid;
    if let Some(path) = &args.target {
        return Ok((
            spectra::read(path, grid)?,
            format!("file {}", path.display()),
        ));
    }
    if let Some(radii) = &args.from_structure {
        let radii = spectra::parse_radii(radii).map_err(|e| UsageError(format!("{e:#}")))?;
        let spectrum = model.setup.spectrum(&radii)?;
        let label = radii
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(",");
        return Ok((spectrum, format!("structure {label}")));
    }
    let name = args.builtin.as_deref().unwrap_or_default();
    Ok((spectra::builtin(name, grid)?, format!("builtin {name}")))
}

fn design_cmd(
    config: &RunConfig,
    target: &TargetArgs,
    checkpoint: Option<PathBuf>,
    report_path: Option<PathBuf>,
    viz: Option<PathBuf>,
    resolution: usize,
) -> Result<()> {
    let model = load_model(config, checkpoint)?;
    let (spectrum, label) = resolve_target(&model, target)?;
    let candidates = design(&model, &spectrum, &config.mode_config())?;
    let report = DesignReport::new(&config.hash(), &label, candidates);
    let report_path = config.resolve(report_path.as_deref().unwrap_or(&config.paths.report));
    write_output(&report_path, &report.to_json()?, config)?;
    println!("target {label}");
    println!("rank  radii (mm)                                         quality    density");
    for (i, c) in report.candidates.iter().enumerate() {
        let radii = c
            .radii
            .iter()
            .map(|r| format!("{r:.4}"))
            .collect::<Vec<_>>()
            .join(", ");
        let quality = c
            .quality_factor
            .map_or_else(|| "out of bounds".to_string(), |q| format!("{q:.6}"));
        println!(
            "{:>4}  [{radii:<48}] {quality:<10} {:.4e}",
            i + 1,
            c.density_at_mode
        );
    }
    println!("wrote {}", report_path.display());
    if let Some(stem) = viz {
        let x = model.stats.normalize_input(spectrum.values());
        let mixture = model.weights.forward(&x)?;
        let pca = fit_pca_weighted(&mixture.mu, &mixture.pi)?;
        let markers: Vec<(String, Vec<f64>)> = report
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("{}", i + 1), c.normalized.clone()))
            .collect();
        let map = density_map(&mixture, &pca, resolution, &markers)?;
        let stem = config.resolve(&stem);
        let csv = stem.with_extension("csv");
        let svg = stem.with_extension("svg");
        write_output(&csv, &map.to_csv(), config)?;
        write_output(&svg, &map.to_svg(), config)?;
        println!("wrote {} and {}", csv.display(), svg.display());
    }
    println!("config hash {}", config.hash());
    Ok(())
}

fn evaluate(
    config: &RunConfig,
    structure: &str,
    target: &OptionalTarget,
    output: Option<PathBuf>,
) -> Result<()> {
    let setup = config.setup()?;
    let radii = spectra::parse_radii(structure).map_err(|e| UsageError(format!("{e:#}")))?;
    let spectrum = setup.spectrum(&radii)?;
    let csv = spectra::to_csv(&spectrum, &setup.grid);
    match &output {
        Some(path) => {
            write_output(path, &csv, config)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    let reference = match (&target.target, &target.builtin) {
        (Some(path), _) => Some(spectra::read(path, &setup.grid)?),
        (None, Some(name)) => Some(spectra::builtin(name, &setup.grid)?),
        (None, None) => None,
    };
    // summary goes to stderr when the spectrum itself is on stdout
    let say = |line: String| {
        if output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    };
    if let Some(reference) = reference {
        let mse = spectrum.mse(&reference)?;
        say(format!("mse {mse:.16e}"));
        say(format!("quality_factor {:.16e}", 1.0 / (1.0 + mse)));
    }
    say(format!("config hash {}", config.hash()));
    Ok(())
}
